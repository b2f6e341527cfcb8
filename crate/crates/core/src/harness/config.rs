//! Declarative run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arbiter::{ArbiterConfig, Network};
use crate::curriculum::CurriculumSchedule;
use crate::error::{Error, Result};
use crate::gait::GaitProfile;
use crate::reward::RewardCoefficients;
use crate::sim::world::GRAVITY;
use crate::sim::{EnvConfig, Scenario};
use crate::task::{TaskConfig, TaskSpec};
use crate::trainer::ppo::PpoConfig;

/// Environment variable that replaces `output_dir`.
pub const OUT_DIR_VAR: &str = "TINKER_SOCCER_OUT_DIR";

/// Initial assist as a multiple of the robot's weight.
pub const DEFAULT_ASSIST_WEIGHTS: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub episode_frames: u64,
    pub scenario: Scenario,
    /// Knockdowns applied in every episode, in frame order.
    pub knockdowns: Vec<Knockdown>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 24,
            episode_frames: 1000,
            scenario: Scenario::StandingCenter,
            knockdowns: vec![Knockdown {
                frame: 100,
                impulse: [0.0, 0.0, 2.0],
            }],
        }
    }
}

/// An impulse (N s, world frame) applied at the start of `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knockdown {
    pub frame: u64,
    pub impulse: [f64; 3],
}

impl std::str::FromStr for Knockdown {
    type Err = Error;

    /// `FRAME:X,Y,Z`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("knockdown `{s}` is not FRAME:X,Y,Z"));
        let (frame, rest) = s.split_once(':').ok_or_else(bad)?;
        let frame = frame.trim().parse().map_err(|_| bad())?;
        let parts: Vec<f64> = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let impulse: [f64; 3] = parts.try_into().map_err(|_| bad())?;
        if impulse.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        Ok(Self { frame, impulse })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    /// Match length in frames.
    pub frames: u64,
    /// Give the away team the home team's seed, so identical teams play a
    /// mirror-image match.
    pub mirrored: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            frames: 3000,
            mirrored: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub env: EnvConfig,
    pub gait: GaitProfile,
    pub arbiter: ArbiterConfig,
    pub rewards: RewardCoefficients,
    pub task: TaskConfig,
    /// Assist schedule for recovery training; four step-triggered stages
    /// starting at 1.2 body weights when absent.
    pub curriculum: Option<CurriculumSchedule>,
    pub frn: PpoConfig,
    pub bskn: PpoConfig,
    pub eval: EvalConfig,
    #[serde(rename = "match")]
    pub match_play: MatchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs"),
            env: EnvConfig::default(),
            gait: GaitProfile::default(),
            arbiter: ArbiterConfig::default(),
            rewards: RewardCoefficients::default(),
            task: TaskConfig::default(),
            curriculum: None,
            frn: PpoConfig::default(),
            bskn: PpoConfig::default(),
            eval: EvalConfig::default(),
            match_play: MatchConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn from_str_any(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file and apply the output directory override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_str_any(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.apply_env_override();
        Ok(cfg)
    }

    pub fn apply_env_override(&mut self) {
        if let Some(dir) = std::env::var_os(OUT_DIR_VAR).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.gait.validate()?;
        self.arbiter.validate()?;
        self.rewards.validate()?;
        self.task.validate()?;
        self.frn.validate()?;
        self.bskn.validate()?;
        if let Some(c) = &self.curriculum {
            c.validate()?;
        }
        if self.eval.episode_frames == 0 {
            return Err(Error::Config("eval.episode_frames must be >= 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> [u8; 32] {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        Sha256::digest(&json).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    pub fn ppo(&self, network: Network) -> &PpoConfig {
        match network {
            Network::Frn => &self.frn,
            Network::Bskn => &self.bskn,
        }
    }

    pub fn task_spec(&self, network: Network) -> TaskSpec {
        TaskSpec {
            network,
            env: self.env.clone(),
            gait: self.gait.clone(),
            arbiter: self.arbiter.clone(),
            rewards: self.rewards,
            task: self.task.clone(),
        }
    }

    /// The configured assist schedule, or the default one for the FRN budget.
    pub fn curriculum_schedule(&self) -> CurriculumSchedule {
        self.curriculum.clone().unwrap_or_else(|| {
            let weight = self.env.body.total_mass() * GRAVITY;
            CurriculumSchedule::scaled(self.frn.total_steps, DEFAULT_ASSIST_WEIGHTS * weight)
        })
    }
}
