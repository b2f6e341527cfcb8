//! Clipped-surrogate policy optimisation.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::gae;
use crate::trainer::policy::{ActorCritic, Adam};
use crate::trainer::rollout::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub horizon: usize,
    pub n_envs: usize,
    /// Environment steps per network, summed over instances.
    pub total_steps: u64,
    pub hidden: Vec<usize>,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    /// Step instances on the rayon pool.
    pub parallel: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch: 256,
            horizon: 512,
            n_envs: 24,
            total_steps: 200_000,
            hidden: vec![128, 128],
            value_coef: 0.5,
            entropy_coef: 1e-3,
            max_grad_norm: 0.5,
            init_log_std: -0.5,
            parallel: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo.{m}")));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1]");
        }
        if self.n_envs == 0 {
            return bad("n_envs must be >= 1");
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return bad("epochs and minibatch must be >= 1");
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate and max_grad_norm must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return bad("loss coefficients must be >= 0");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be >= 1");
        }
        Ok(())
    }

    /// Environment steps gathered per iteration.
    pub fn steps_per_iteration(&self) -> u64 {
        (self.horizon * self.n_envs) as u64
    }
}

/// Pooled experience of one iteration, advantages already normalised.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn from_trajectories(trs: &[Trajectory], gamma: f64, lambda: f64) -> Self {
        let d = trs.first().map_or(0, |t| t.obs_dim);
        let a = trs.first().map_or(0, |t| t.act_dim);
        let n: usize = trs.iter().map(Trajectory::len).sum();
        let mut obs = Vec::with_capacity(n * d);
        let mut actions = Vec::with_capacity(n * a);
        let mut log_probs = Vec::with_capacity(n);
        let mut advantages = Vec::with_capacity(n);
        let mut returns = Vec::with_capacity(n);
        for tr in trs {
            let (adv, ret) = gae::gae(&tr.rewards, &tr.values, &tr.next_values, &tr.dones(), gamma, lambda);
            obs.extend_from_slice(&tr.obs);
            actions.extend_from_slice(&tr.actions);
            log_probs.extend_from_slice(&tr.log_probs);
            advantages.extend(adv);
            returns.extend(ret);
        }
        gae::normalize(&mut advantages);
        Self {
            obs: Array2::from_shape_vec((n, d), obs).expect("consistent trajectory shapes"),
            actions: Array2::from_shape_vec((n, a), actions).expect("consistent trajectory shapes"),
            log_probs,
            advantages,
            returns,
        }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    fn rows(&self, idx: &[usize]) -> Self {
        let pick = |m: &Array2<f64>| m.select(ndarray::Axis(0), idx);
        Self {
            obs: pick(&self.obs),
            actions: pick(&self.actions),
            log_probs: idx.iter().map(|&i| self.log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss of a (mini)batch and its gradient with respect to every parameter.
pub fn loss_and_grad(ac: &ActorCritic, b: &Batch, cfg: &PpoConfig) -> (LossParts, Vec<f64>) {
    let n = b.len() as f64;
    let a_dim = ac.act_dim();
    let (std_lo, critic_lo) = ac.offsets();
    let mut grad = vec![0.0; ac.params.len()];

    let actor_acts = ac.actor.forward(ac.actor_params(), b.obs.view());
    let critic_acts = ac.critic.forward(ac.critic_params(), b.obs.view());
    let means = actor_acts.output();
    let values = critic_acts.output();
    let log_std = ac.log_std();
    let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();

    let mut parts = LossParts::default();
    let mut d_mean = Array2::zeros((b.len(), a_dim));
    let mut d_value = Array2::zeros((b.len(), 1));
    let lo = 1.0 - cfg.clip;
    let hi = 1.0 + cfg.clip;
    for i in 0..b.len() {
        let mut logp = 0.0;
        for k in 0..a_dim {
            let diff = b.actions[(i, k)] - means[(i, k)];
            logp += -0.5 * diff * diff * inv_var[k] - log_std[k] - 0.918_938_533_204_672_7;
        }
        let ratio = (logp - b.log_probs[i]).exp();
        let adv = b.advantages[i];
        let surrogate = (ratio * adv).min(ratio.clamp(lo, hi) * adv);
        parts.policy -= surrogate / n;
        parts.approx_kl += ((ratio - 1.0) - (logp - b.log_probs[i])) / n;
        let clipped = (adv >= 0.0 && ratio > hi) || (adv < 0.0 && ratio < lo);
        if clipped {
            parts.clip_fraction += 1.0 / n;
        } else {
            let g = -adv * ratio / n;
            for k in 0..a_dim {
                let diff = b.actions[(i, k)] - means[(i, k)];
                d_mean[(i, k)] = g * diff * inv_var[k];
                grad[std_lo + k] += g * (diff * diff * inv_var[k] - 1.0);
            }
        }
        let err = values[(i, 0)] - b.returns[i];
        parts.value += 0.5 * err * err / n;
        d_value[(i, 0)] = cfg.value_coef * err / n;
    }
    parts.entropy = ac.entropy();
    for g in &mut grad[std_lo..critic_lo] {
        *g -= cfg.entropy_coef;
    }
    parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;

    ac.actor.backward(ac.actor_params(), &actor_acts, d_mean, &mut grad[..std_lo]);
    ac.critic.backward(ac.critic_params(), &critic_acts, d_value, &mut grad[critic_lo..]);
    (parts, grad)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    /// Minibatches dropped for a non-finite loss or gradient.
    pub skipped: usize,
    pub minibatches: usize,
}

/// Several epochs of shuffled minibatch Adam steps on one batch.
pub fn ppo_update(ac: &mut ActorCritic, adam: &mut Adam, batch: &Batch, cfg: &PpoConfig, rng: &mut impl Rng) -> UpdateStats {
    let mut stats = UpdateStats::default();
    if batch.is_empty() {
        return stats;
    }
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    let mut used = 0usize;
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(cfg.minibatch) {
            stats.minibatches += 1;
            let mb = batch.rows(chunk);
            let (parts, mut grad) = loss_and_grad(ac, &mb, cfg);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !parts.total.is_finite() || !norm.is_finite() {
                stats.skipped += 1;
                continue;
            }
            if norm > cfg.max_grad_norm {
                let s = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(&mut ac.params, &grad, cfg.learning_rate);
            ac.clamp_log_std();
            used += 1;
            stats.policy_loss += parts.policy;
            stats.value_loss += parts.value;
            stats.entropy += parts.entropy;
            stats.approx_kl += parts.approx_kl;
            stats.clip_fraction += parts.clip_fraction;
            stats.grad_norm += norm;
        }
    }
    if used > 0 {
        let k = used as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.approx_kl /= k;
        stats.clip_fraction /= k;
        stats.grad_norm /= k;
    }
    stats
}

/// Batch of observations as a view, for callers holding flat rows.
pub fn rows_view(data: &[f64], dim: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((data.len() / dim, dim), data).expect("row-major data")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_batch(ac: &ActorCritic, rng: &mut ChaCha8Rng, n: usize) -> Batch {
        let d = ac.obs_dim();
        let a = ac.act_dim();
        let obs = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let mut actions = Array2::zeros((n, a));
        let mut log_probs = vec![];
        for i in 0..n {
            let row: Vec<f64> = obs.row(i).to_vec();
            let mut act = vec![0.0; a];
            log_probs.push(ac.sample(&row, &mut act, rng));
            for k in 0..a {
                actions[(i, k)] = act[k];
            }
        }
        Batch {
            obs,
            actions,
            log_probs,
            advantages: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            returns: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_advantage_gives_no_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ac = ActorCritic::new(3, 2, &[5], -0.5, &mut rng);
        let mut b = toy_batch(&ac, &mut rng, 16);
        b.advantages.fill(0.0);
        let cfg = PpoConfig {
            entropy_coef: 0.0,
            ..PpoConfig::default()
        };
        let (parts, grad) = loss_and_grad(&ac, &b, &cfg);
        assert_eq!(parts.policy, 0.0);
        let (_, critic_lo) = ac.offsets();
        assert!(grad[..critic_lo].iter().all(|g| *g == 0.0));
    }

    #[test]
    fn clipped_ratio_uses_bound() {
        // one sample, ratio 1.5 with positive advantage: surrogate = 1.2 * A
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ac = ActorCritic::new(1, 1, &[], 0.0, &mut rng);
        let mut mean = [0.0];
        ac.mean(&[0.3], &mut mean);
        let logp_new = crate::trainer::policy::gaussian_log_prob(&mean, ac.log_std(), &[0.1]);
        let b = Batch {
            obs: Array2::from_elem((1, 1), 0.3),
            actions: Array2::from_elem((1, 1), 0.1),
            log_probs: vec![logp_new - 1.5f64.ln()],
            advantages: vec![2.0],
            returns: vec![0.0],
        };
        let (parts, _) = loss_and_grad(&ac, &b, &PpoConfig::default());
        assert!((parts.policy + 1.2 * 2.0).abs() < 1e-12);
        assert_eq!(parts.clip_fraction, 1.0);
    }

    fn max_rel_error(ac: &ActorCritic, b: &Batch, cfg: &PpoConfig) -> f64 {
        let (_, grad) = loss_and_grad(ac, b, cfg);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..ac.params.len() {
            let mut p = ac.clone();
            p.params[k] += h;
            let up = loss_and_grad(&p, b, cfg).0.total;
            p.params[k] -= 2.0 * h;
            let down = loss_and_grad(&p, b, cfg).0.total;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
        }
        worst
    }

    #[test]
    fn five_parameter_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ac = ActorCritic::new(1, 1, &[], -0.2, &mut rng);
        assert_eq!(ac.params.len(), 5);
        for p in ac.params.iter_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
        let b = toy_batch(&ac, &mut rng, 12);
        let cfg = PpoConfig {
            entropy_coef: 0.01,
            ..PpoConfig::default()
        };
        assert!(max_rel_error(&ac, &b, &cfg) < 1e-4);
    }

    #[test]
    fn hidden_layer_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut ac = ActorCritic::new(3, 2, &[4], -0.4, &mut rng);
        for p in ac.params.iter_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let b = toy_batch(&ac, &mut rng, 10);
        assert!(max_rel_error(&ac, &b, &PpoConfig::default()) < 1e-4);
    }

    #[test]
    fn update_reduces_value_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ac = ActorCritic::new(3, 2, &[16], -0.5, &mut rng);
        let b = toy_batch(&ac, &mut rng, 64);
        let cfg = PpoConfig {
            learning_rate: 1e-2,
            epochs: 20,
            minibatch: 32,
            ..PpoConfig::default()
        };
        let before = loss_and_grad(&ac, &b, &cfg).0.value;
        let mut adam = Adam::new(ac.params.len());
        let stats = ppo_update(&mut ac, &mut adam, &b, &cfg, &mut rng);
        assert_eq!(stats.skipped, 0);
        assert!(loss_and_grad(&ac, &b, &cfg).0.value < before);
    }
}
