//! Staged attenuation of the external assist used while training recovery.
//!
//! A schedule is an ordered list of stages. Each stage holds an assist
//! magnitude and the trigger that ends it; when the trigger fires the state
//! moves on to the next stage. The last stage carries zero assist and never
//! ends, so its trigger only documents where the schedule was meant to close.

use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::body::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Cumulative environment steps.
    Steps(u64),
    /// Windowed mean episode return at or above this value.
    MeanReward(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub trigger: Trigger,
    /// Newtons.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSchedule {
    pub stages: Vec<Stage>,
    /// Episodes averaged for reward triggers.
    #[serde(default = "default_reward_window")]
    pub reward_window: usize,
}

fn default_reward_window() -> usize {
    20
}

/// Step fractions of the training budget at which each stage ends.
pub const DEFAULT_STAGE_ENDS: [f64; 4] = [0.25, 0.375, 0.625, 1.0];
/// Stage magnitudes as fractions of the initial assist.
pub const DEFAULT_STAGE_SCALES: [f64; 4] = [1.0, 0.6, 0.3, 0.0];

impl CurriculumSchedule {
    /// Four step-triggered stages spread over `budget` steps.
    pub fn scaled(budget: u64, initial_force: f64) -> Self {
        let mut last = 0;
        let stages = DEFAULT_STAGE_ENDS
            .iter()
            .zip(DEFAULT_STAGE_SCALES)
            .map(|(&end, scale)| {
                // keep triggers strictly increasing even for tiny budgets
                let at = ((budget as f64 * end).round() as u64).max(last + 1);
                last = at;
                Stage {
                    trigger: Trigger::Steps(at),
                    magnitude: initial_force * scale,
                }
            })
            .collect();
        Self {
            stages,
            reward_window: default_reward_window(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let last = self
            .stages
            .last()
            .ok_or_else(|| Error::Config("curriculum needs at least one stage".into()))?;
        if last.magnitude != 0.0 {
            return Err(Error::Config(
                "final curriculum stage must have zero magnitude".into(),
            ));
        }
        if self.reward_window == 0 {
            return Err(Error::Config("curriculum.reward_window must be >= 1".into()));
        }
        let mut prev_mag = f64::INFINITY;
        let mut prev_steps = None;
        for (i, stage) in self.stages.iter().enumerate() {
            if !stage.magnitude.is_finite() || stage.magnitude < 0.0 {
                return Err(Error::Config(format!(
                    "curriculum stage {i}: magnitude must be finite and >= 0"
                )));
            }
            if stage.magnitude > prev_mag {
                return Err(Error::Config(format!(
                    "curriculum stage {i}: magnitude increases"
                )));
            }
            prev_mag = stage.magnitude;
            match stage.trigger {
                Trigger::Steps(s) => {
                    if prev_steps.is_some_and(|p| s <= p) {
                        return Err(Error::Config(format!(
                            "curriculum stage {i}: step triggers must strictly increase"
                        )));
                    }
                    prev_steps = Some(s);
                }
                Trigger::MeanReward(r) if !r.is_finite() => {
                    return Err(Error::NonFinite("curriculum reward trigger"));
                }
                Trigger::MeanReward(_) => {}
            }
        }
        Ok(())
    }
}

/// A move from one stage to the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTransition {
    pub from: usize,
    pub to: usize,
    pub at_step: u64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistState {
    stage: usize,
    steps: u64,
    recent: VecDeque<f64>,
}

impl Default for AssistState {
    fn default() -> Self {
        Self::new()
    }
}

impl AssistState {
    pub fn new() -> Self {
        Self {
            stage: 0,
            steps: 0,
            recent: VecDeque::new(),
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn steps_elapsed(&self) -> u64 {
        self.steps
    }

    pub fn mean_reward(&self) -> Option<f64> {
        if self.recent.is_empty() {
            None
        } else {
            Some(self.recent.iter().sum::<f64>() / self.recent.len() as f64)
        }
    }

    pub fn magnitude(&self, schedule: &CurriculumSchedule) -> f64 {
        schedule
            .stages
            .get(self.stage)
            .map_or(0.0, |s| s.magnitude)
    }

    /// Account for `steps` more environment steps and any finished episodes,
    /// then fire every trigger that is now satisfied.
    pub fn record(
        &mut self,
        schedule: &CurriculumSchedule,
        steps: u64,
        episode_returns: &[f64],
    ) -> Vec<StageTransition> {
        self.steps += steps;
        for &r in episode_returns {
            self.recent.push_back(r);
            while self.recent.len() > schedule.reward_window {
                self.recent.pop_front();
            }
        }
        let mut fired = Vec::new();
        while self.stage + 1 < schedule.stages.len() {
            let done = match schedule.stages[self.stage].trigger {
                Trigger::Steps(s) => self.steps >= s,
                Trigger::MeanReward(r) => self.mean_reward().is_some_and(|m| m >= r),
            };
            if !done {
                break;
            }
            self.stage += 1;
            fired.push(StageTransition {
                from: self.stage - 1,
                to: self.stage,
                at_step: self.steps,
                magnitude: schedule.stages[self.stage].magnitude,
            });
        }
        fired
    }
}

/// External force and torque on the torso, world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssistParams {
    /// Righting torque per radian of tilt per newton of assist (N·m).
    pub righting_gain: f64,
    /// Angular-rate damping, seconds of tilt-equivalent per rad/s.
    pub damping_time: f64,
    /// Full lift up to this torso height (m), fading to zero 0.1 m above it.
    pub lift_ceiling: f64,
}

impl Default for AssistParams {
    fn default() -> Self {
        Self {
            righting_gain: 0.5,
            damping_time: 0.1,
            lift_ceiling: 0.45,
        }
    }
}

const LIFT_FADE: f64 = 0.1;

/// Upward lift at the torso centre plus a torque rotating the torso back upright.
pub fn apply_assist(torso: &RobotState, magnitude: f64, params: &AssistParams) -> Wrench {
    if magnitude <= 0.0 {
        return Wrench::zero();
    }
    let height = torso.position.y;
    let lift = ((params.lift_ceiling + LIFT_FADE - height) / LIFT_FADE).clamp(0.0, 1.0);
    let force = Vector3::new(0.0, magnitude * lift, 0.0);

    let up = torso.up_axis();
    let world_up = Vector3::y();
    let tilt = up.dot(&world_up).clamp(-1.0, 1.0).acos();
    let axis = up.cross(&world_up);
    let axis = if axis.norm() > 1e-9 {
        axis.normalize()
    } else if tilt > 1.0 {
        // upside down: any horizontal axis restores, use the torso's forward axis
        torso.forward_axis()
    } else {
        Vector3::zeros()
    };
    let gain = magnitude * params.righting_gain;
    let torque = gain * (tilt * axis - params.damping_time * torso.angular_velocity);
    Wrench { force, torque }
}
