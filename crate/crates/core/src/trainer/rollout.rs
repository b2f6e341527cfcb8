//! Environment contract and synchronous multi-instance rollouts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::trainer::policy::{ActorCritic, Normalizer};

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// A resettable episodic environment. Randomness comes only from the rng
/// passed in, so an instance is reproducible from its seed.
pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64], rng: &mut ChaCha8Rng) -> Result<StepOutcome>;
    /// Curriculum hook; environments without assistance ignore it.
    fn set_assist(&mut self, _magnitude: f64) {}
}

/// One environment instance with its own rng and in-progress episode.
pub struct EnvSlot {
    pub env: Box<dyn Env>,
    pub rng: ChaCha8Rng,
    obs: Vec<f64>,
    episode_return: f64,
    episode_len: u64,
}

impl EnvSlot {
    pub fn new(mut env: Box<dyn Env>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = env.reset(&mut rng)?;
        Ok(Self {
            env,
            rng,
            obs,
            episode_return: 0.0,
            episode_len: 0,
        })
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }
}

/// Fixed-horizon experience from one instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Normalised observations the policy acted on, row-major.
    pub obs: Vec<f64>,
    /// The same observations before normalisation.
    pub raw_obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Value of the state after each step; zero after termination.
    pub next_values: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    /// (return, length) of every episode that ended inside this rollout.
    pub finished: Vec<(f64, u64)>,
    /// Steps that failed and forced a reset.
    pub aborts: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.terminated
            .iter()
            .zip(&self.truncated)
            .map(|(a, b)| *a || *b)
            .collect()
    }
}

fn run_slot(policy: &ActorCritic, norm: &Normalizer, slot: &mut EnvSlot, horizon: usize) -> Result<Trajectory> {
    let d = policy.obs_dim();
    let a_dim = policy.act_dim();
    let mut tr = Trajectory {
        obs_dim: d,
        act_dim: a_dim,
        ..Default::default()
    };
    let mut nobs = vec![0.0; d];
    let mut action = vec![0.0; a_dim];
    for _ in 0..horizon {
        norm.normalize(&slot.obs, &mut nobs);
        let value = policy.value(&nobs);
        let logp = policy.sample(&nobs, &mut action, &mut slot.rng);
        tr.obs.extend_from_slice(&nobs);
        tr.raw_obs.extend_from_slice(&slot.obs);
        tr.actions.extend_from_slice(&action);
        tr.log_probs.push(logp);
        tr.values.push(value);

        let (reward, terminated, truncated, next) = match slot.env.step(&action, &mut slot.rng) {
            Ok(out) => (out.reward, out.terminated, out.truncated, out.obs),
            Err(e) => {
                log::warn!("environment step failed, resetting instance: {e}");
                tr.aborts += 1;
                (0.0, false, true, slot.obs.clone())
            }
        };
        tr.rewards.push(reward);
        tr.terminated.push(terminated);
        tr.truncated.push(truncated && !terminated);
        slot.episode_return += reward;
        slot.episode_len += 1;

        if terminated || truncated {
            let bootstrap = if terminated {
                0.0
            } else {
                norm.normalize(&next, &mut nobs);
                policy.value(&nobs)
            };
            tr.next_values.push(bootstrap);
            tr.finished.push((slot.episode_return, slot.episode_len));
            slot.episode_return = 0.0;
            slot.episode_len = 0;
            slot.obs = slot.env.reset(&mut slot.rng)?;
        } else {
            // filled from the next step's value below
            tr.next_values.push(f64::NAN);
            slot.obs = next;
        }
    }
    let n = tr.len();
    for t in 0..n {
        if tr.next_values[t].is_nan() {
            tr.next_values[t] = if t + 1 < n {
                tr.values[t + 1]
            } else {
                norm.normalize(&slot.obs, &mut nobs);
                policy.value(&nobs)
            };
        }
    }
    Ok(tr)
}

/// Step every slot `horizon` times with the current policy; per-instance
/// results do not depend on whether slots run in parallel.
pub fn rollout(
    policy: &ActorCritic,
    norm: &Normalizer,
    slots: &mut [EnvSlot],
    horizon: usize,
    parallel: bool,
) -> Result<Vec<Trajectory>> {
    if parallel {
        slots
            .par_iter_mut()
            .map(|s| run_slot(policy, norm, s, horizon))
            .collect()
    } else {
        slots
            .iter_mut()
            .map(|s| run_slot(policy, norm, s, horizon))
            .collect()
    }
}
