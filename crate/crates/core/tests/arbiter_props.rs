use proptest::prelude::*;
use tinker_soccer::arbiter::{
    blend_actions, classify, mask_observation, ArbiterConfig, ArbiterState, Network, Posture, PostureFeatures,
};
use tinker_soccer::sim::Observation58;

fn network(p: Posture) -> Network {
    match p {
        Posture::Standing => Network::Bskn,
        Posture::Fallen => Network::Frn,
    }
}

/// Window-based reference: a switch happens at frame `t` exactly when the
/// `d` most recent raw values all ask for the other network and none of
/// them precedes or coincides with the previous switch.
fn reference_schedule(start: Network, raws: &[Posture], d: usize) -> Vec<(usize, Network)> {
    let mut active = start;
    let mut last_switch: Option<usize> = None;
    let mut out = vec![];
    for t in 0..raws.len() {
        if t + 1 < d {
            continue;
        }
        let lo = t + 1 - d;
        let after_switch = last_switch.is_none_or(|s| lo > s);
        if after_switch && raws[lo..=t].iter().all(|&r| network(r) != active) {
            active = active.other();
            last_switch = Some(t);
            out.push((t, active));
        }
    }
    out
}

fn run(start: Network, raws: &[Posture], cfg: &ArbiterConfig) -> Vec<(usize, Network)> {
    let mut s = ArbiterState::new(start, cfg);
    raws.iter()
        .enumerate()
        .filter_map(|(t, &r)| s.update(r, cfg).map(|sw| (t, sw.to)))
        .collect()
}

fn raw_strategy(len: usize) -> impl Strategy<Value = Vec<Posture>> {
    // runs of varying length make long disagreements likely
    prop::collection::vec((prop::bool::ANY, 1usize..6), 1..len).prop_map(|runs| {
        runs.into_iter()
            .flat_map(|(f, n)| std::iter::repeat_n(if f { Posture::Fallen } else { Posture::Standing }, n))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_the_reference_automaton(
        raws in raw_strategy(60),
        debounce in 1u32..6,
        start_fallen in prop::bool::ANY,
    ) {
        let cfg = ArbiterConfig { debounce_frames: debounce, ..ArbiterConfig::default() };
        let start = if start_fallen { Network::Frn } else { Network::Bskn };
        prop_assert_eq!(run(start, &raws, &cfg), reference_schedule(start, &raws, debounce as usize));
    }

    #[test]
    fn blended_commands_stay_in_the_hull(
        raws in raw_strategy(40),
        b in prop::collection::vec(prop::array::uniform10(-1.0..1.0f64), 200),
        f in prop::collection::vec(prop::array::uniform10(-1.0..1.0f64), 200),
    ) {
        let cfg = ArbiterConfig::default();
        let mut s = ArbiterState::new(Network::Bskn, &cfg);
        let mut last_progress = s.blend_progress();
        for (t, &r) in raws.iter().enumerate().take(200) {
            let switched = s.update(r, &cfg).is_some();
            let p = s.blend_progress();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(switched || p >= last_progress);
            last_progress = p;
            let c = s.command(&b[t], &f[t]);
            for j in 0..10 {
                prop_assert!(b[t][j].min(f[t][j]) <= c[j] && c[j] <= b[t][j].max(f[t][j]));
            }
            prop_assert!(s.consecutive_count() <= cfg.debounce_frames);
        }
    }

    #[test]
    fn classification_is_monotone(
        tilt in 0.0..180.0f64,
        h in -0.2..0.6f64,
        dt in 0.0..90.0f64,
        dh in 0.0..0.3f64,
    ) {
        let cfg = ArbiterConfig::default();
        let a = classify(&PostureFeatures { theta_tilt: tilt, h_torso: h }, &cfg).unwrap();
        let worse = PostureFeatures { theta_tilt: (tilt + dt).min(180.0), h_torso: h - dh };
        if a == Posture::Fallen {
            prop_assert_eq!(classify(&worse, &cfg).unwrap(), Posture::Fallen);
        }
    }

    #[test]
    fn blend_is_the_convex_combination(
        o in prop::array::uniform10(-1.0..1.0f64),
        i in prop::array::uniform10(-1.0..1.0f64),
        p in 0.0..=1.0f64,
    ) {
        let c = blend_actions(&o, &i, p);
        for j in 0..10 {
            prop_assert!((c[j] - ((1.0 - p) * o[j] + p * i[j])).abs() < 1e-15);
        }
    }

    #[test]
    fn masking_zeroes_the_exteroceptive_block_once(values in prop::collection::vec(-5.0..5.0f64, 58)) {
        let mut obs = Observation58::zeros();
        obs.as_mut_slice().copy_from_slice(&values);
        let once = mask_observation(&obs, Network::Frn);
        prop_assert!(once.as_slice()[42..58].iter().all(|&v| v == 0.0));
        prop_assert_eq!(&once.as_slice()[..42], &values[..42]);
        prop_assert_eq!(mask_observation(&once, Network::Frn), once);
        prop_assert_eq!(mask_observation(&obs, Network::Bskn), obs);
    }
}

#[test]
fn identical_inputs_give_identical_schedules() {
    let cfg = ArbiterConfig::default();
    let raws: Vec<Posture> = (0..500)
        .map(|i| if (i * 7919) % 13 < 6 { Posture::Fallen } else { Posture::Standing })
        .collect();
    assert_eq!(run(Network::Bskn, &raws, &cfg), run(Network::Bskn, &raws, &cfg));
}

#[test]
fn non_finite_features_are_rejected() {
    let cfg = ArbiterConfig::default();
    assert!(classify(&PostureFeatures { theta_tilt: f64::NAN, h_torso: 0.3 }, &cfg).is_err());
    assert!(classify(&PostureFeatures { theta_tilt: 3.0, h_torso: f64::INFINITY }, &cfg).is_err());
}
