//! Point-to-target sanity environment.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trainer::policy::{ActorCritic, Normalizer};
use crate::trainer::rollout::{Env, StepOutcome};

/// A point in the plane moved by bounded velocity commands towards a random
/// target. Observation: position and offset to the target. Reward: negative
/// distance after the move.
#[derive(Debug, Clone)]
pub struct PointTarget {
    pub episode_len: u32,
    pub speed: f64,
    pos: [f64; 2],
    target: [f64; 2],
    t: u32,
}

impl Default for PointTarget {
    fn default() -> Self {
        Self {
            episode_len: 20,
            speed: 0.1,
            pos: [0.0; 2],
            target: [0.0; 2],
            t: 0,
        }
    }
}

impl PointTarget {
    fn obs(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.target[0] - self.pos[0],
            self.target[1] - self.pos[1],
        ]
    }
}

impl Env for PointTarget {
    fn obs_dim(&self) -> usize {
        4
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.target = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.t = 0;
        Ok(self.obs())
    }

    fn step(&mut self, action: &[f64], _rng: &mut ChaCha8Rng) -> Result<StepOutcome> {
        if action.len() != 2 {
            return Err(Error::Length {
                what: "point action",
                expected: 2,
                got: action.len(),
            });
        }
        for k in 0..2 {
            self.pos[k] += self.speed * action[k].clamp(-1.0, 1.0);
        }
        self.t += 1;
        let d = ((self.target[0] - self.pos[0]).powi(2) + (self.target[1] - self.pos[1]).powi(2)).sqrt();
        Ok(StepOutcome {
            obs: self.obs(),
            reward: -d,
            terminated: false,
            truncated: self.t >= self.episode_len,
        })
    }
}

/// Mean undiscounted return over `episodes` episodes with sampled actions;
/// episode `k` is seeded with `seed + k`.
pub fn mean_return(policy: &ActorCritic, norm: &Normalizer, env: &mut dyn Env, episodes: u64, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    let mut nobs = vec![0.0; policy.obs_dim()];
    let mut action = vec![0.0; policy.act_dim()];
    for k in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k));
        let mut obs = env.reset(&mut rng)?;
        loop {
            norm.normalize(&obs, &mut nobs);
            policy.sample(&nobs, &mut action, &mut rng);
            let out = env.step(&action, &mut rng)?;
            total += out.reward;
            if out.terminated || out.truncated {
                break;
            }
            obs = out.obs;
        }
    }
    Ok(total / episodes.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_towards_target_is_rewarded() {
        let mut env = PointTarget::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let o = env.reset(&mut rng).unwrap();
        let d0 = (o[2] * o[2] + o[3] * o[3]).sqrt();
        let out = env.step(&[o[2].signum(), o[3].signum()], &mut rng).unwrap();
        assert!(-out.reward < d0);
    }

    #[test]
    fn episodes_truncate_at_length() {
        let mut env = PointTarget::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng).unwrap();
        let flags: Vec<bool> = (0..20).map(|_| env.step(&[0.0, 0.0], &mut rng).unwrap().truncated).collect();
        assert!(flags[..19].iter().all(|f| !f) && flags[19]);
    }
}
