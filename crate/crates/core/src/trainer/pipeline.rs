//! The outer training loop: rollout, normaliser refresh, update, curriculum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::Network;
use crate::curriculum::{AssistState, CurriculumSchedule, StageTransition};
use crate::error::{Error, Result};
use crate::trainer::checkpoint::Checkpoint;
use crate::trainer::policy::{ActorCritic, Adam, Normalizer};
use crate::trainer::ppo::{ppo_update, Batch, PpoConfig, UpdateStats};
use crate::trainer::rollout::{rollout, Env, EnvSlot};

/// Seed offset for the optimiser's minibatch shuffling, kept apart from the
/// per-instance seeds `seed + i`.
const OPTIMISER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Summary of one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    /// Cumulative environment steps after this iteration.
    pub step: u64,
    /// Mean return of episodes that ended during the iteration.
    pub mean_episode_reward: Option<f64>,
    pub mean_step_reward: f64,
    pub episodes: usize,
    /// Assist magnitude in force while the experience was collected.
    pub assist_magnitude: f64,
    pub stage: usize,
    pub transitions: Vec<StageTransition>,
    pub stats: UpdateStats,
    pub aborts: usize,
}

struct Curriculum {
    schedule: CurriculumSchedule,
    state: AssistState,
}

pub struct Trainer {
    pub config: PpoConfig,
    pub policy: ActorCritic,
    pub normalizer: Normalizer,
    pub adam: Adam,
    pub steps: u64,
    pub iterations: u64,
    slots: Vec<EnvSlot>,
    rng: ChaCha8Rng,
    curriculum: Option<Curriculum>,
}

impl Trainer {
    /// Instance `i` is seeded with `seed + i`.
    pub fn new(config: PpoConfig, envs: Vec<Box<dyn Env>>, seed: u64, curriculum: Option<CurriculumSchedule>) -> Result<Self> {
        config.validate()?;
        if config.horizon == 0 {
            return Err(Error::Config("ppo.horizon must be >= 1 for training".into()));
        }
        if envs.len() != config.n_envs {
            return Err(Error::Length {
                what: "environment instances",
                expected: config.n_envs,
                got: envs.len(),
            });
        }
        if let Some(s) = &curriculum {
            s.validate()?;
        }
        let (obs_dim, act_dim) = (envs[0].obs_dim(), envs[0].act_dim());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ OPTIMISER_STREAM);
        let policy = ActorCritic::new(obs_dim, act_dim, &config.hidden, config.init_log_std, &mut rng);
        let slots = envs
            .into_iter()
            .enumerate()
            .map(|(i, env)| EnvSlot::new(env, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            adam: Adam::new(policy.params.len()),
            normalizer: Normalizer::new(obs_dim),
            policy,
            steps: 0,
            iterations: 0,
            slots,
            rng,
            curriculum: curriculum.map(|schedule| Curriculum {
                schedule,
                state: AssistState::new(),
            }),
            config,
        })
    }

    pub fn assist_magnitude(&self) -> f64 {
        self.curriculum
            .as_ref()
            .map_or(0.0, |c| c.state.magnitude(&c.schedule))
    }

    pub fn stage(&self) -> usize {
        self.curriculum.as_ref().map_or(0, |c| c.state.stage())
    }

    pub fn budget_left(&self) -> u64 {
        self.config.total_steps.saturating_sub(self.steps)
    }

    /// One rollout and update. The horizon is shortened near the end so the
    /// step budget is never exceeded; returns `None` once it is spent.
    pub fn iterate(&mut self) -> Result<Option<IterationLog>> {
        let n = self.slots.len() as u64;
        let horizon = (self.config.horizon as u64).min(self.budget_left() / n) as usize;
        if horizon == 0 {
            return Ok(None);
        }
        let magnitude = self.assist_magnitude();
        let stage = self.stage();
        for s in &mut self.slots {
            s.env.set_assist(magnitude);
        }
        let trs = rollout(&self.policy, &self.normalizer, &mut self.slots, horizon, self.config.parallel)?;
        let steps = horizon as u64 * n;
        self.steps += steps;

        let returns: Vec<f64> = trs.iter().flat_map(|t| t.finished.iter().map(|f| f.0)).collect();
        let total_reward: f64 = trs.iter().flat_map(|t| &t.rewards).sum();
        let aborts = trs.iter().map(|t| t.aborts).sum();

        let batch = Batch::from_trajectories(&trs, self.config.gamma, self.config.lambda);
        let stats = ppo_update(&mut self.policy, &mut self.adam, &batch, &self.config, &mut self.rng);
        for t in &trs {
            self.normalizer.update(&t.raw_obs);
        }
        let transitions = match &mut self.curriculum {
            Some(c) => c.state.record(&c.schedule, steps, &returns),
            None => vec![],
        };
        self.iterations += 1;
        Ok(Some(IterationLog {
            iteration: self.iterations,
            step: self.steps,
            mean_episode_reward: (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64),
            mean_step_reward: total_reward / steps as f64,
            episodes: returns.len(),
            assist_magnitude: magnitude,
            stage,
            transitions,
            stats,
            aborts,
        }))
    }

    /// Iterate until the budget is spent, handing each log to `on_iteration`.
    pub fn run(&mut self, mut on_iteration: impl FnMut(&IterationLog) -> Result<()>) -> Result<()> {
        while let Some(log) = self.iterate()? {
            on_iteration(&log)?;
        }
        Ok(())
    }

    pub fn checkpoint(&self, network: Network, config_hash: [u8; 32], seed: u64) -> Checkpoint {
        Checkpoint {
            network,
            config_hash,
            elapsed_steps: self.steps,
            iterations: self.iterations,
            seed,
            curriculum_stage: self.stage(),
            assist_magnitude: self.assist_magnitude(),
            policy: self.policy.clone(),
            normalizer: self.normalizer.clone(),
            adam: self.adam.clone(),
        }
    }
}
