//! Open-loop gait oscillator and residual superposition.
//!
//! A gait cycle spans `2 * half_period` integer simulation steps. Signal A is a
//! raised-cosine bump over the first half of the cycle and zero over the
//! second; signal B is the same bump shifted by half a cycle. Each joint is
//! assigned one of the two signals, and its target angle is
//! `swing * signal + offset + gain * residual`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of actuated joints: five per leg.
pub const JOINT_COUNT: usize = 10;

/// Joint index layout, left leg first.
pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "l_hip_yaw",
    "l_hip_roll",
    "l_hip_pitch",
    "l_knee",
    "l_ankle",
    "r_hip_yaw",
    "r_hip_roll",
    "r_hip_pitch",
    "r_knee",
    "r_ankle",
];

pub type JointVector = [f64; JOINT_COUNT];

/// Which of the two alternating oscillator outputs a joint follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    A,
    B,
}

/// Position within the gait cycle, `1..=2 * half_period`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseClock {
    step: u32,
    half_period: u32,
}

impl PhaseClock {
    /// Clock at the first step of a cycle.
    pub fn new(half_period: u32) -> Result<Self> {
        Self::at(1, half_period)
    }

    pub fn at(step: u32, half_period: u32) -> Result<Self> {
        if half_period == 0 {
            return Err(Error::Config("gait half period must be positive".into()));
        }
        if step == 0 || step > 2 * half_period {
            return Err(Error::Config(format!(
                "phase step {step} outside (0, {}]",
                2 * half_period
            )));
        }
        Ok(Self { step, half_period })
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn half_period(&self) -> u32 {
        self.half_period
    }

    pub fn cycle_len(&self) -> u32 {
        2 * self.half_period
    }

    /// One simulation step later; wraps from the cycle end back to 1.
    #[must_use]
    pub fn advance(self) -> Self {
        let step = if self.step >= self.cycle_len() {
            1
        } else {
            self.step + 1
        };
        Self { step, ..self }
    }

    /// Oscillator output in `[0, 1]`.
    pub fn signal(&self, which: Signal) -> f64 {
        let t1 = self.half_period;
        let local = match which {
            Signal::A => self.step,
            // shift by half a cycle, staying inside (0, 2*t1]
            Signal::B => {
                if self.step > t1 {
                    self.step - t1
                } else {
                    self.step + t1
                }
            }
        };
        if local <= t1 {
            (1.0 - (2.0 * PI * f64::from(local) / f64::from(t1)).cos()) / 2.0
        } else {
            0.0
        }
    }

    /// `[sin(pi t / T1), cos(pi t / T1)]`, the phase fed to the policy.
    pub fn encoding(&self) -> [f64; 2] {
        let angle = PI * f64::from(self.step) / f64::from(self.half_period);
        [angle.sin(), angle.cos()]
    }
}

/// Symmetric-or-not joint position limits in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointLimits {
    pub lower: JointVector,
    pub upper: JointVector,
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            lower: [-1.57; JOINT_COUNT],
            upper: [1.57; JOINT_COUNT],
        }
    }
}

impl JointLimits {
    pub fn clamp(&self, joint: usize, angle: f64) -> f64 {
        angle.clamp(self.lower[joint], self.upper[joint])
    }
}

/// Per-joint feedforward parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitProfile {
    pub half_period: u32,
    /// Static base offset (rad).
    pub offset: JointVector,
    /// Swing amplitude (rad); zero for joints that do not oscillate.
    pub swing: JointVector,
    /// Residual scaling gain.
    pub gain: JointVector,
    pub phase: [Signal; JOINT_COUNT],
    pub limits: JointLimits,
}

impl Default for GaitProfile {
    fn default() -> Self {
        // yaw, roll, pitch, knee, ankle; flat foot needs ankle = knee - hip_pitch
        let leg_offset = [0.0, 0.0, 0.3, 0.6, 0.3];
        let leg_swing = [0.0, 0.0, 0.25, 0.5, 0.0];
        let leg_gain = [0.3, 0.3, 1.0, 1.0, 0.8];
        let mut offset = [0.0; JOINT_COUNT];
        let mut swing = [0.0; JOINT_COUNT];
        let mut gain = [0.0; JOINT_COUNT];
        let mut phase = [Signal::A; JOINT_COUNT];
        for i in 0..5 {
            for (leg, signal) in [(0, Signal::A), (5, Signal::B)] {
                offset[leg + i] = leg_offset[i];
                swing[leg + i] = leg_swing[i];
                gain[leg + i] = leg_gain[i];
                phase[leg + i] = signal;
            }
        }
        Self {
            half_period: 30,
            offset,
            swing,
            gain,
            phase,
            limits: JointLimits::default(),
        }
    }
}

impl GaitProfile {
    pub fn validate(&self) -> Result<()> {
        if self.half_period == 0 {
            return Err(Error::Config("gait.half_period must be positive".into()));
        }
        let all = self
            .offset
            .iter()
            .chain(&self.swing)
            .chain(&self.gain)
            .chain(&self.limits.lower)
            .chain(&self.limits.upper);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gait profile"));
        }
        if self.gain.iter().any(|&k| k < 0.0) {
            return Err(Error::Config("gait.gain must be non-negative".into()));
        }
        for j in 0..JOINT_COUNT {
            if self.limits.lower[j] > self.limits.upper[j] {
                return Err(Error::Config(format!(
                    "joint {} has lower limit above upper limit",
                    JOINT_NAMES[j]
                )));
            }
        }
        // same joint kind on both legs must alternate
        for i in 0..5 {
            if self.phase[i] == self.phase[i + 5] {
                return Err(Error::Config(format!(
                    "joints {} and {} share a phase signal",
                    JOINT_NAMES[i],
                    JOINT_NAMES[i + 5]
                )));
            }
        }
        Ok(())
    }

    /// Feedforward-only target for one joint, before clamping.
    pub fn feedforward(&self, clock: &PhaseClock, joint: usize) -> f64 {
        self.swing[joint] * clock.signal(self.phase[joint]) + self.offset[joint]
    }

    /// Joint targets with the residual superposed on the feedforward trajectory.
    pub fn superpose(&self, clock: &PhaseClock, residual: &[f64]) -> Result<JointTargets> {
        if residual.len() != JOINT_COUNT {
            return Err(Error::Length {
                what: "residual",
                expected: JOINT_COUNT,
                got: residual.len(),
            });
        }
        if residual.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("residual action"));
        }
        let mut out = [0.0; JOINT_COUNT];
        for (j, target) in out.iter_mut().enumerate() {
            let raw = self.feedforward(clock, j) + self.gain[j] * residual[j];
            *target = self.limits.clamp(j, raw);
        }
        Ok(JointTargets(out))
    }
}

/// Target angles handed to the joint servos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTargets(pub JointVector);

#[cfg(test)]
mod tests {
    use super::*;

    fn clock(step: u32, t1: u32) -> PhaseClock {
        PhaseClock::at(step, t1).unwrap()
    }

    #[test]
    fn advance_increments_and_wraps() {
        assert_eq!(clock(1, 30).advance().step(), 2);
        assert_eq!(clock(60, 30).advance().step(), 1);
    }

    #[test]
    fn two_full_cycles_return_to_start() {
        let mut c = clock(1, 30);
        for _ in 0..120 {
            c = c.advance();
        }
        // (1 - 1 + 120) mod 60 + 1
        assert_eq!(c.step(), ((1 - 1 + 120) % 60) + 1);
        assert_eq!(c.step(), 1);
    }

    #[test]
    fn rejects_out_of_range_clock() {
        assert!(PhaseClock::at(0, 30).is_err());
        assert!(PhaseClock::at(61, 30).is_err());
        assert!(PhaseClock::new(0).is_err());
    }

    #[test]
    fn signal_a_examples() {
        assert_eq!(clock(15, 30).signal(Signal::A), 1.0);
        assert_eq!(clock(45, 30).signal(Signal::A), 0.0);
        assert!((clock(10, 40).signal(Signal::A) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn signal_b_is_shifted_a() {
        for t in 1..=60 {
            let shifted = if t > 30 { t - 30 } else { t + 30 };
            assert_eq!(
                clock(t, 30).signal(Signal::B),
                clock(shifted, 30).signal(Signal::A)
            );
        }
    }

    #[test]
    fn encoding_examples() {
        let [s, c] = clock(30, 30).encoding();
        assert!(s.abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
        let [s, c] = clock(60, 30).encoding();
        assert!(s.abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn superpose_examples() {
        let mut profile = GaitProfile::default();
        let c = clock(5, 20); // signal A = (1 - cos(pi/2))/2 = 0.5
        profile.swing[2] = 0.4;
        profile.offset[2] = -0.2;
        profile.gain[2] = 0.3;
        let mut residual = [0.0; JOINT_COUNT];
        residual[2] = 1.0;
        let t = profile.superpose(&c, &residual).unwrap();
        assert!((t.0[2] - 0.3).abs() < 1e-15);

        let zero = profile.superpose(&c, &[0.0; JOINT_COUNT]).unwrap();
        for j in 0..JOINT_COUNT {
            assert_eq!(zero.0[j], profile.feedforward(&c, j));
        }
    }

    #[test]
    fn stance_half_drops_swing_term() {
        let profile = GaitProfile::default();
        let c = clock(45, 30); // left leg (signal A) in stance
        let residual = [0.5; JOINT_COUNT];
        let t = profile.superpose(&c, &residual).unwrap();
        for j in 0..5 {
            assert_eq!(t.0[j], profile.offset[j] + profile.gain[j] * 0.5);
        }
    }

    #[test]
    fn superpose_rejects_bad_residual() {
        let profile = GaitProfile::default();
        let c = clock(1, 30);
        let mut r = [0.0; JOINT_COUNT];
        r[3] = f64::NAN;
        assert!(matches!(
            profile.superpose(&c, &r),
            Err(Error::NonFinite(_))
        ));
        assert!(profile.superpose(&c, &[0.0; 3]).is_err());
    }

    #[test]
    fn superpose_clamps_to_limits() {
        let profile = GaitProfile::default();
        let c = clock(1, 30);
        let t = profile.superpose(&c, &[1e6; JOINT_COUNT]).unwrap();
        assert!(t.0.iter().all(|&a| a == 1.57));
    }

    #[test]
    fn default_profile_is_valid() {
        GaitProfile::default().validate().unwrap();
        let mut p = GaitProfile::default();
        p.phase[5] = Signal::A;
        assert!(p.validate().is_err());
    }
}
