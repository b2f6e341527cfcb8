//! Training environments for the two task networks on top of the simulator.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::{classify, mask_observation, ArbiterConfig, Network, Posture, PostureFeatures};
use crate::curriculum::{apply_assist, AssistParams, Wrench};
use crate::error::{Error, Result};
use crate::gait::{GaitProfile, JointTargets, JointVector, PhaseClock, JOINT_COUNT};
use crate::reward::{bskn_reward, frn_reward, BsknRewardInputs, FrnRewardInputs, RewardBreakdown, RewardCoefficients};
use crate::sim::events::scored_by;
use crate::sim::observation::{goal_distance, HeadingFrame};
use crate::sim::scenario::default_pose;
use crate::sim::{observe, reset, EnvConfig, Observation58, RobotState, Scenario, World, OBS_DIM};
use crate::trainer::rollout::{Env, StepOutcome};

/// Episode settings for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSettings {
    /// Frames before an episode is truncated.
    pub episode_frames: u64,
    /// Start states, drawn uniformly at every reset.
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub frn: TaskSettings,
    pub bskn: TaskSettings,
    pub assist: AssistParams,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            frn: TaskSettings {
                episode_frames: 500,
                scenarios: vec![Scenario::FallenSupine, Scenario::FallenProne],
            },
            bskn: TaskSettings {
                episode_frames: 1000,
                scenarios: vec![Scenario::StandingCenter, Scenario::CornerBall, Scenario::Random],
            },
            assist: AssistParams::default(),
        }
    }
}

impl TaskConfig {
    pub fn settings(&self, network: Network) -> &TaskSettings {
        match network {
            Network::Frn => &self.frn,
            Network::Bskn => &self.bskn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for n in [Network::Frn, Network::Bskn] {
            let s = self.settings(n);
            if s.episode_frames == 0 {
                return Err(Error::Config(format!("task.{n}.episode_frames must be >= 1")));
            }
            if s.scenarios.is_empty() {
                return Err(Error::Config(format!("task.{n}.scenarios must not be empty")));
            }
        }
        Ok(())
    }
}

/// Squash raw policy outputs into residuals in [-1, 1].
pub fn squash(raw: &[f64]) -> Result<JointVector> {
    if raw.len() != JOINT_COUNT {
        return Err(Error::Length {
            what: "policy action",
            expected: JOINT_COUNT,
            got: raw.len(),
        });
    }
    let mut u = [0.0; JOINT_COUNT];
    for (o, r) in u.iter_mut().zip(raw) {
        *o = r.tanh();
    }
    Ok(u)
}

pub fn posture_features(s: &RobotState) -> PostureFeatures {
    let up = s.up_axis();
    PostureFeatures::from_up_axis([up.x, up.y, up.z], s.position.y)
}

pub fn posture(s: &RobotState, cfg: &ArbiterConfig) -> Result<Posture> {
    classify(&posture_features(s), cfg)
}

/// Reward of one network for the robot state reached under residual `u`.
pub fn task_reward(
    network: Network,
    env: &EnvConfig,
    s: &RobotState,
    u: &JointVector,
    coeffs: &RewardCoefficients,
) -> Result<RewardBreakdown> {
    match network {
        Network::Frn => Ok(frn_reward(&FrnRewardInputs {
            up_dot: s.up_axis().y.clamp(-1.0, 1.0),
            actions: u,
        })),
        Network::Bskn => {
            let (pitch_deg, roll_deg) = s.pitch_roll_deg();
            bskn_reward(
                &BsknRewardInputs {
                    forward_speed: s.linear_velocity.dot(&HeadingFrame::of(s).forward()),
                    d_goal: goal_distance(env, s),
                    d_max: env.d_max(),
                    pitch_deg,
                    roll_deg,
                    actions: u,
                },
                coeffs,
            )
        }
    }
}

/// Everything a task environment needs besides its own episode state.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub network: Network,
    pub env: EnvConfig,
    pub gait: GaitProfile,
    pub arbiter: ArbiterConfig,
    pub rewards: RewardCoefficients,
    pub task: TaskConfig,
}

/// One robot alone on the field, driven by a single network's residuals.
pub struct SoccerTask {
    spec: TaskSpec,
    pose: JointVector,
    world: World,
    clock: PhaseClock,
    prev_residual: JointVector,
    assist: f64,
    scenario: Scenario,
    last_reward: Option<RewardBreakdown>,
}

impl SoccerTask {
    pub fn new(spec: TaskSpec) -> Result<Self> {
        spec.env.validate()?;
        spec.gait.validate()?;
        spec.arbiter.validate()?;
        spec.rewards.validate()?;
        spec.task.validate()?;
        let clock = PhaseClock::new(spec.gait.half_period)?;
        let scenario = spec.task.settings(spec.network).scenarios[0];
        let pose = default_pose();
        Ok(Self {
            world: reset(&spec.env, &pose, scenario, &mut ChaCha8Rng::seed_from_u64(0)),
            pose,
            clock,
            prev_residual: [0.0; JOINT_COUNT],
            assist: 0.0,
            scenario,
            last_reward: None,
            spec,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn last_reward(&self) -> Option<&RewardBreakdown> {
        self.last_reward.as_ref()
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn observation(&self) -> Observation58 {
        let o = observe(&self.spec.env, &self.world, 0, &self.clock, &self.prev_residual);
        mask_observation(&o, self.spec.network)
    }

    /// Start an episode from a specific scenario.
    pub fn reset_to(&mut self, scenario: Scenario, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.scenario = scenario;
        self.world = reset(&self.spec.env, &self.pose, scenario, rng);
        self.clock = PhaseClock::new(self.spec.gait.half_period).expect("validated half period");
        self.prev_residual = [0.0; JOINT_COUNT];
        self.last_reward = None;
        self.observation().as_slice().to_vec()
    }

    fn assist_wrench(&self) -> Wrench {
        if self.spec.network == Network::Frn {
            apply_assist(&self.world.robots[0].state, self.assist, &self.spec.task.assist)
        } else {
            Wrench::zero()
        }
    }
}

impl Env for SoccerTask {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn act_dim(&self) -> usize {
        JOINT_COUNT
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let scenario = *self
            .spec
            .task
            .settings(self.spec.network)
            .scenarios
            .choose(rng)
            .expect("validated non-empty");
        Ok(self.reset_to(scenario, rng))
    }

    fn step(&mut self, action: &[f64], _rng: &mut ChaCha8Rng) -> Result<StepOutcome> {
        let u = squash(action)?;
        let targets: JointTargets = self.spec.gait.superpose(&self.clock, &u)?;
        let wrench = self.assist_wrench();
        let report = self.world.step(&self.spec.env, &[targets], &[wrench])?;
        self.clock = self.clock.advance();
        self.prev_residual = u;

        let state = &self.world.robots[0].state;
        let reward = task_reward(self.spec.network, &self.spec.env, state, &u, &self.spec.rewards)?;
        let goal = report.goal.is_some_and(|g| scored_by(g, self.world.robots[0].flipped));
        let terminated = match self.spec.network {
            Network::Frn => false,
            Network::Bskn => goal || posture(state, &self.spec.arbiter)? == Posture::Fallen,
        };
        let truncated = self.world.frame >= self.spec.task.settings(self.spec.network).episode_frames;
        let total = reward.total();
        self.last_reward = Some(reward);
        Ok(StepOutcome {
            obs: self.observation().as_slice().to_vec(),
            reward: total,
            terminated,
            truncated,
        })
    }

    fn set_assist(&mut self, magnitude: f64) {
        self.assist = magnitude;
    }
}
