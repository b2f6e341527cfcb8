//! Per-step rewards for the two task networks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this torso up-alignment the recovery reward applies its flat penalty.
pub const UPRIGHT_DOT: f64 = 0.7;
pub const FALLEN_PENALTY: f64 = -2.0;
pub const UPRIGHT_ACTION_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct FrnRewardInputs<'a> {
    /// Dot product of the torso up axis with the world vertical.
    pub up_dot: f64,
    /// Squashed residual actions.
    pub actions: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsknRewardInputs<'a> {
    /// Torso velocity along its horizontal heading (m/s).
    pub forward_speed: f64,
    pub d_goal: f64,
    pub d_max: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub actions: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardCoefficients {
    pub alpha: f64,
    pub alpha_goal: f64,
    /// Per degree of pitch plus roll.
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            alpha_goal: 2.0,
            beta: 0.01,
            gamma: 0.05,
        }
    }
}

impl RewardCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("alpha_goal", self.alpha_goal),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "reward.{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewardBreakdown {
    Frn {
        upright: f64,
        actuation: f64,
        total: f64,
    },
    Bskn {
        progress: f64,
        approach: f64,
        stability: f64,
        efficiency: f64,
        total: f64,
    },
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        match *self {
            RewardBreakdown::Frn { total, .. } | RewardBreakdown::Bskn { total, .. } => total,
        }
    }

    pub fn components(&self) -> Vec<(&'static str, f64)> {
        match *self {
            RewardBreakdown::Frn {
                upright, actuation, ..
            } => vec![("upright", upright), ("actuation", actuation)],
            RewardBreakdown::Bskn {
                progress,
                approach,
                stability,
                efficiency,
                ..
            } => vec![
                ("progress", progress),
                ("approach", approach),
                ("stability", stability),
                ("efficiency", efficiency),
            ],
        }
    }
}

fn abs_sum(actions: &[f64]) -> f64 {
    actions.iter().map(|u| u.abs()).sum()
}

/// Upright alignment plus an actuation term that is a flat penalty while fallen.
pub fn frn_reward(inputs: &FrnRewardInputs<'_>) -> RewardBreakdown {
    let upright = inputs.up_dot;
    let actuation = if inputs.up_dot < UPRIGHT_DOT {
        FALLEN_PENALTY
    } else {
        -UPRIGHT_ACTION_WEIGHT * abs_sum(inputs.actions)
    };
    RewardBreakdown::Frn {
        upright,
        actuation,
        total: upright + actuation,
    }
}

/// Forward progress, goal proximity, posture and effort terms.
pub fn bskn_reward(
    inputs: &BsknRewardInputs<'_>,
    coeffs: &RewardCoefficients,
) -> Result<RewardBreakdown> {
    if !(inputs.d_max > 0.0) {
        return Err(Error::Config("d_max must be positive".into()));
    }
    let progress = inputs.forward_speed * coeffs.alpha;
    let approach = coeffs.alpha_goal * (1.0 - inputs.d_goal / inputs.d_max);
    let stability = -coeffs.beta * (inputs.pitch_deg.abs() + inputs.roll_deg.abs());
    let efficiency = -coeffs.gamma * abs_sum(inputs.actions);
    Ok(RewardBreakdown::Bskn {
        progress,
        approach,
        stability,
        efficiency,
        total: progress + approach + stability + efficiency,
    })
}
