use std::f64::consts::PI;

use proptest::prelude::*;
use tinker_soccer::gait::{GaitProfile, JointLimits, PhaseClock, Signal, JOINT_COUNT};

fn direct_a(tp: u32, t1: u32) -> f64 {
    if tp <= t1 {
        (1.0 - (2.0 * PI * tp as f64 / t1 as f64).cos()) / 2.0
    } else {
        0.0
    }
}

fn clock_strategy() -> impl Strategy<Value = PhaseClock> {
    (1u32..200).prop_flat_map(|t1| (1..=2 * t1).prop_map(move |tp| PhaseClock::at(tp, t1).unwrap()))
}

fn profile_strategy() -> impl Strategy<Value = GaitProfile> {
    (
        prop::array::uniform10(-1.0..1.0f64),
        prop::array::uniform10(-1.0..1.0f64),
        prop::array::uniform10(0.0..2.0f64),
        1u32..100,
    )
        .prop_map(|(offset, swing, gain, t1)| GaitProfile {
            half_period: t1,
            offset,
            swing,
            gain,
            limits: JointLimits {
                lower: [-100.0; JOINT_COUNT],
                upper: [100.0; JOINT_COUNT],
            },
            ..GaitProfile::default()
        })
}

proptest! {
    #[test]
    fn signals_stay_in_unit_interval(c in clock_strategy()) {
        for s in [Signal::A, Signal::B] {
            let v = c.signal(s);
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn signal_a_matches_its_definition(c in clock_strategy()) {
        prop_assert!((c.signal(Signal::A) - direct_a(c.step(), c.half_period())).abs() < 1e-12);
    }

    #[test]
    fn at_most_one_signal_is_active(c in clock_strategy()) {
        let (a, b) = (c.signal(Signal::A), c.signal(Signal::B));
        let t1 = c.half_period();
        if c.step() == t1 || c.step() == 2 * t1 {
            prop_assert!(a.abs() < 1e-9 && b.abs() < 1e-9);
        } else {
            prop_assert!((a > 0.0) != (b > 0.0), "a={a} b={b}");
        }
    }

    #[test]
    fn signals_repeat_every_cycle(c in clock_strategy()) {
        let mut later = c;
        for _ in 0..2 * c.half_period() {
            later = later.advance();
        }
        prop_assert_eq!(later, c);
        prop_assert_eq!(later.signal(Signal::A), c.signal(Signal::A));
    }

    #[test]
    fn encoding_is_a_unit_vector(c in clock_strategy()) {
        let [s, co] = c.encoding();
        prop_assert!(((s * s + co * co).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encoding_is_continuous_across_the_wrap(t1 in 1u32..200) {
        let last = PhaseClock::at(2 * t1, t1).unwrap();
        let step = PI / t1 as f64;
        let [s0, c0] = last.encoding();
        let [s1, c1] = last.advance().encoding();
        // one step of arc, like any other pair of neighbours
        let chord = ((s1 - s0).powi(2) + (c1 - c0).powi(2)).sqrt();
        prop_assert!((chord - 2.0 * (step / 2.0).sin()).abs() < 1e-9);
    }

    #[test]
    fn superpose_is_affine_in_the_residual(
        p in profile_strategy(),
        a in prop::array::uniform10(-1.0..1.0f64),
        b in prop::array::uniform10(-1.0..1.0f64),
        tp in 1u32..400,
    ) {
        let c = PhaseClock::at((tp - 1) % (2 * p.half_period) + 1, p.half_period).unwrap();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let base = p.superpose(&c, &a).unwrap();
        let moved = p.superpose(&c, &ab).unwrap();
        for j in 0..JOINT_COUNT {
            prop_assert!((moved.0[j] - base.0[j] - p.gain[j] * b[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn targets_respect_limits(c in clock_strategy(), r in prop::array::uniform10(-50.0..50.0f64)) {
        let p = GaitProfile::default();
        let c = PhaseClock::at((c.step() - 1) % (2 * p.half_period) + 1, p.half_period).unwrap();
        let t = p.superpose(&c, &r).unwrap();
        for j in 0..JOINT_COUNT {
            prop_assert!(t.0[j] >= p.limits.lower[j] && t.0[j] <= p.limits.upper[j]);
        }
    }
}

#[test]
fn zero_residual_is_the_feedforward_trajectory() {
    let p = GaitProfile::default();
    let mut c = PhaseClock::new(p.half_period).unwrap();
    for _ in 0..2 * p.half_period {
        let t = p.superpose(&c, &[0.0; JOINT_COUNT]).unwrap();
        for j in 0..JOINT_COUNT {
            let u = c.signal(p.phase[j]);
            assert_eq!(t.0[j], p.swing[j] * u + p.offset[j]);
        }
        c = c.advance();
    }
}

#[test]
fn default_profile_alternates_legs() {
    let p = GaitProfile::default();
    p.validate().unwrap();
    for i in 0..5 {
        assert_ne!(p.phase[i], p.phase[i + 5]);
    }
}
