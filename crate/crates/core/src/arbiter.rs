//! Posture classification and the debounced two-network switch.
//!
//! The arbiter owns which policy drives the robot. A raw standing/fallen
//! classification is computed every control frame; the active network only
//! flips after `debounce_frames` consecutive frames that disagree with it.
//! After a flip the two policies' commands are cross-faded over
//! `blend_frames` frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{JointVector, JOINT_COUNT};
use crate::sim::observation::{Observation58, EXTEROCEPTIVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Network {
    /// Ball seeking and kicking.
    Bskn,
    /// Fall recovery.
    Frn,
}

impl Network {
    pub fn other(self) -> Self {
        match self {
            Network::Bskn => Network::Frn,
            Network::Frn => Network::Bskn,
        }
    }

    /// The network responsible for a given posture.
    pub fn for_posture(posture: Posture) -> Self {
        match posture {
            Posture::Standing => Network::Bskn,
            Posture::Fallen => Network::Frn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Network::Bskn => "bskn",
            Network::Frn => "frn",
        }
    }
}

impl std::fmt::Display for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Network {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bskn" => Ok(Network::Bskn),
            "frn" => Ok(Network::Frn),
            other => Err(Error::Config(format!("unknown network `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Posture {
    Standing,
    Fallen,
}

/// Torso tilt from vertical (degrees) and torso height (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureFeatures {
    pub theta_tilt: f64,
    pub h_torso: f64,
}

impl PostureFeatures {
    /// Features from the torso up-axis expressed in world coordinates.
    pub fn from_up_axis(up: [f64; 3], h_torso: f64) -> Self {
        let norm = (up[0] * up[0] + up[1] * up[1] + up[2] * up[2]).sqrt();
        let cos = if norm > 0.0 { up[1] / norm } else { 1.0 };
        Self {
            theta_tilt: cos.clamp(-1.0, 1.0).acos().to_degrees(),
            h_torso,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArbiterConfig {
    pub tilt_threshold_deg: f64,
    /// Fallen below this torso height. 0.22 m is 0.55 of the 0.4 m standing
    /// height in this simulator's frame (ground at zero).
    pub height_threshold_m: f64,
    pub debounce_frames: u32,
    pub blend_frames: u32,
}

impl Default for ArbiterConfig {
    fn default() -> Self {
        Self {
            tilt_threshold_deg: 25.0,
            height_threshold_m: 0.22,
            debounce_frames: 3,
            blend_frames: 10,
        }
    }
}

impl ArbiterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.debounce_frames < 1 {
            return Err(Error::Config("arbiter.debounce_frames must be >= 1".into()));
        }
        if self.blend_frames < 1 {
            return Err(Error::Config("arbiter.blend_frames must be >= 1".into()));
        }
        if !(self.tilt_threshold_deg > 0.0 && self.tilt_threshold_deg < 90.0) {
            return Err(Error::Config(
                "arbiter.tilt_threshold_deg must lie in (0, 90)".into(),
            ));
        }
        if !self.height_threshold_m.is_finite() {
            return Err(Error::NonFinite("arbiter.height_threshold_m"));
        }
        Ok(())
    }
}

/// Fallen iff the tilt exceeds or the height drops below its threshold.
pub fn classify(features: &PostureFeatures, config: &ArbiterConfig) -> Result<Posture> {
    if !features.theta_tilt.is_finite() || !features.h_torso.is_finite() {
        return Err(Error::NonFinite("posture features"));
    }
    let fallen = features.theta_tilt > config.tilt_threshold_deg
        || features.h_torso < config.height_threshold_m;
    Ok(if fallen {
        Posture::Fallen
    } else {
        Posture::Standing
    })
}

/// `(1 - p) * outgoing + p * incoming`, element-wise.
pub fn blend_actions(outgoing: &JointVector, incoming: &JointVector, progress: f64) -> JointVector {
    let p = progress.clamp(0.0, 1.0);
    let mut out = [0.0; JOINT_COUNT];
    for (o, (a, b)) in out.iter_mut().zip(outgoing.iter().zip(incoming)) {
        *o = (1.0 - p) * a + p * b;
    }
    out
}

/// Zero the exteroceptive block for the fall recovery network.
pub fn mask_observation(obs: &Observation58, network: Network) -> Observation58 {
    let mut out = *obs;
    if network == Network::Frn {
        out.as_mut_slice()[EXTEROCEPTIVE].fill(0.0);
    }
    out
}

/// Slice-level variant of [`mask_observation`] that validates the length.
pub fn mask_slice(obs: &[f64], network: Network) -> Result<Observation58> {
    let obs = Observation58::try_from(obs)?;
    Ok(mask_observation(&obs, network))
}

/// A change of active network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switch {
    pub from: Network,
    pub to: Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbiterState {
    active: Network,
    candidate: Option<Network>,
    consecutive: u32,
    blend_step: u32,
    blend_frames: u32,
    last_command: JointVector,
}

impl ArbiterState {
    /// Start with `active` in charge and no blend pending.
    pub fn new(active: Network, config: &ArbiterConfig) -> Self {
        Self {
            active,
            candidate: None,
            consecutive: 0,
            blend_step: config.blend_frames,
            blend_frames: config.blend_frames,
            last_command: [0.0; JOINT_COUNT],
        }
    }

    /// Start with the network matching the posture the robot is in.
    pub fn for_posture(posture: Posture, config: &ArbiterConfig) -> Self {
        Self::new(Network::for_posture(posture), config)
    }

    pub fn active(&self) -> Network {
        self.active
    }

    pub fn candidate(&self) -> Option<Network> {
        self.candidate
    }

    pub fn consecutive_count(&self) -> u32 {
        self.consecutive
    }

    pub fn blend_progress(&self) -> f64 {
        (f64::from(self.blend_step) / f64::from(self.blend_frames)).min(1.0)
    }

    pub fn is_blending(&self) -> bool {
        self.blend_step < self.blend_frames
    }

    pub fn last_command(&self) -> &JointVector {
        &self.last_command
    }

    /// Feed one frame's raw classification. Returns the switch, if one happened.
    pub fn update(&mut self, raw: Posture, config: &ArbiterConfig) -> Option<Switch> {
        self.blend_frames = config.blend_frames;
        let wanted = Network::for_posture(raw);
        if wanted == self.active {
            self.candidate = None;
            self.consecutive = 0;
            self.advance_blend();
            return None;
        }
        self.candidate = Some(wanted);
        self.consecutive += 1;
        if self.consecutive >= config.debounce_frames {
            let switch = Switch {
                from: self.active,
                to: wanted,
            };
            self.active = wanted;
            self.candidate = None;
            self.consecutive = 0;
            self.blend_step = 0;
            return Some(switch);
        }
        self.advance_blend();
        None
    }

    fn advance_blend(&mut self) {
        if self.blend_step < self.blend_frames {
            self.blend_step += 1;
        }
    }

    /// Combine the two networks' commands according to the blend state.
    pub fn command(&mut self, bskn: &JointVector, frn: &JointVector) -> JointVector {
        let (incoming, outgoing) = match self.active {
            Network::Bskn => (bskn, frn),
            Network::Frn => (frn, bskn),
        };
        let out = if self.is_blending() {
            blend_actions(outgoing, incoming, self.blend_progress())
        } else {
            *incoming
        };
        self.last_command = out;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ArbiterConfig {
        ArbiterConfig::default()
    }

    fn feat(tilt: f64, h: f64) -> PostureFeatures {
        PostureFeatures {
            theta_tilt: tilt,
            h_torso: h,
        }
    }

    #[test]
    fn classify_examples() {
        let sunken_origin = ArbiterConfig {
            height_threshold_m: -0.505,
            ..cfg()
        };
        assert_eq!(classify(&feat(30.0, -0.40), &sunken_origin).unwrap(), Posture::Fallen);
        assert_eq!(classify(&feat(10.0, -0.30), &sunken_origin).unwrap(), Posture::Standing);
        assert_eq!(classify(&feat(25.0, -0.505), &sunken_origin).unwrap(), Posture::Standing);
        assert_eq!(classify(&feat(10.0, 0.1), &cfg()).unwrap(), Posture::Fallen);
        assert!(classify(&feat(f64::NAN, 0.3), &cfg()).is_err());
    }

    #[test]
    fn tilt_from_up_axis() {
        let f = PostureFeatures::from_up_axis([0.0, 1.0, 0.0], 0.4);
        assert_eq!(f.theta_tilt, 0.0);
        let f = PostureFeatures::from_up_axis([1.0, 0.0, 0.0], 0.4);
        assert!((f.theta_tilt - 90.0).abs() < 1e-12);
        let f = PostureFeatures::from_up_axis([0.0, -1.0, 0.0], 0.4);
        assert!((f.theta_tilt - 180.0).abs() < 1e-12);
    }

    #[test]
    fn interrupted_run_does_not_switch() {
        let c = cfg();
        let mut s = ArbiterState::new(Network::Bskn, &c);
        assert_eq!(s.update(Posture::Fallen, &c), None);
        assert_eq!(s.update(Posture::Fallen, &c), None);
        assert_eq!(s.consecutive_count(), 2);
        assert_eq!(s.update(Posture::Standing, &c), None);
        assert_eq!(s.active(), Network::Bskn);
        assert_eq!(s.consecutive_count(), 0);
    }

    #[test]
    fn three_frames_switch() {
        let c = cfg();
        let mut s = ArbiterState::new(Network::Bskn, &c);
        s.update(Posture::Fallen, &c);
        s.update(Posture::Fallen, &c);
        let sw = s.update(Posture::Fallen, &c);
        assert_eq!(
            sw,
            Some(Switch {
                from: Network::Bskn,
                to: Network::Frn
            })
        );
        assert_eq!(s.active(), Network::Frn);
        assert_eq!(s.blend_progress(), 0.0);
        assert_eq!(s.consecutive_count(), 0);
    }

    #[test]
    fn agreement_pins_count() {
        let c = cfg();
        let mut s = ArbiterState::new(Network::Frn, &c);
        for _ in 0..100 {
            assert_eq!(s.update(Posture::Fallen, &c), None);
            assert_eq!(s.consecutive_count(), 0);
        }
        assert_eq!(s.active(), Network::Frn);
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let a = [0.2; JOINT_COUNT];
        let b = [-0.2; JOINT_COUNT];
        assert_eq!(blend_actions(&a, &b, 0.0), a);
        assert_eq!(blend_actions(&a, &b, 1.0), b);
        assert!(blend_actions(&a, &b, 0.5).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn blend_progress_ramps_after_switch() {
        let c = cfg();
        let mut s = ArbiterState::new(Network::Bskn, &c);
        for _ in 0..3 {
            s.update(Posture::Fallen, &c);
        }
        let bskn = [1.0; JOINT_COUNT];
        let frn = [0.0; JOINT_COUNT];
        assert_eq!(s.command(&bskn, &frn), bskn);
        let mut last = 0.0;
        for k in 1..=10 {
            s.update(Posture::Fallen, &c);
            let p = s.blend_progress();
            assert!(p >= last);
            assert!((p - k as f64 / 10.0).abs() < 1e-15);
            last = p;
        }
        assert!(!s.is_blending());
        assert_eq!(s.command(&bskn, &frn), frn);
    }

    #[test]
    fn masking() {
        let mut obs = Observation58::zeros();
        for (i, v) in obs.as_mut_slice().iter_mut().enumerate() {
            *v = i as f64 + 1.0;
        }
        let frn = mask_observation(&obs, Network::Frn);
        assert!(frn.as_slice()[42..].iter().all(|v| *v == 0.0));
        assert_eq!(&frn.as_slice()[..42], &obs.as_slice()[..42]);
        assert_eq!(mask_observation(&frn, Network::Frn), frn);
        assert_eq!(mask_observation(&obs, Network::Bskn), obs);
        assert!(mask_slice(&[0.0; 57], Network::Frn).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(ArbiterConfig { debounce_frames: 0, ..cfg() }.validate().is_err());
        assert!(ArbiterConfig { blend_frames: 0, ..cfg() }.validate().is_err());
        assert!(ArbiterConfig { tilt_threshold_deg: 90.0, ..cfg() }.validate().is_err());
    }
}
