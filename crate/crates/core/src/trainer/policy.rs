//! Gaussian actor, value critic, observation normaliser and Adam.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::trainer::nn::MlpLayout;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// Actor mean network, state-independent log standard deviations and a
/// separate value network, all living in one flat parameter vector laid out
/// as `[actor | log_std | critic]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub actor: MlpLayout,
    pub critic: MlpLayout,
    pub params: Vec<f64>,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], init_log_std: f64, rng: &mut impl Rng) -> Self {
        let actor = MlpLayout::new(obs_dim, hidden, act_dim);
        let critic = MlpLayout::new(obs_dim, hidden, 1);
        let mut params = vec![0.0; actor.param_count() + act_dim + critic.param_count()];
        let (a, rest) = params.split_at_mut(actor.param_count());
        let (log_std, c) = rest.split_at_mut(act_dim);
        actor.init(a, 0.01, rng);
        log_std.fill(init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX));
        critic.init(c, 1.0, rng);
        Self { actor, critic, params }
    }

    /// Rebuild from a saved layout and parameter vector.
    pub fn from_parts(actor: MlpLayout, critic: MlpLayout, params: Vec<f64>) -> Option<Self> {
        let expected = actor.param_count() + actor.output() + critic.param_count();
        (params.len() == expected && actor.input() == critic.input() && critic.output() == 1)
            .then_some(Self { actor, critic, params })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output()
    }

    fn split(&self) -> (&[f64], &[f64], &[f64]) {
        let (a, rest) = self.params.split_at(self.actor.param_count());
        let (s, c) = rest.split_at(self.act_dim());
        (a, s, c)
    }

    pub fn actor_params(&self) -> &[f64] {
        self.split().0
    }

    pub fn log_std(&self) -> &[f64] {
        self.split().1
    }

    pub fn critic_params(&self) -> &[f64] {
        self.split().2
    }

    /// Offsets of the three parameter blocks.
    pub fn offsets(&self) -> (usize, usize) {
        let a = self.actor.param_count();
        (a, a + self.act_dim())
    }

    pub fn clamp_log_std(&mut self) {
        let (lo, hi) = self.offsets();
        for v in &mut self.params[lo..hi] {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean(&self, obs: &[f64], out: &mut [f64]) {
        self.actor.forward_one(self.actor_params(), obs, out);
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        let mut v = [0.0];
        self.critic.forward_one(self.critic_params(), obs, &mut v);
        v[0]
    }

    /// Draw an action; returns its log-probability.
    pub fn sample(&self, obs: &[f64], action: &mut [f64], rng: &mut impl Rng) -> f64 {
        self.mean(obs, action);
        let mut logp = 0.0;
        for (a, &ls) in action.iter_mut().zip(self.log_std()) {
            let z: f64 = StandardNormal.sample(rng);
            *a += ls.exp() * z;
            logp += -0.5 * z * z - ls - HALF_LOG_2PI;
        }
        logp
    }

    pub fn entropy(&self) -> f64 {
        self.log_std().iter().map(|ls| ls + 0.5 + HALF_LOG_2PI).sum()
    }

    pub fn batch_means(&self, obs: ArrayView2<f64>) -> Array2<f64> {
        self.actor.forward(self.actor_params(), obs).output().clone()
    }
}

/// Log density of `action` under a diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LOG_2PI
        })
        .sum()
}

/// Running mean and variance of observations (parallel-combine form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub clip: f64,
}

const NORM_EPS: f64 = 1e-8;

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            clip: 10.0,
        }
    }

    pub fn normalize(&self, obs: &[f64], out: &mut [f64]) {
        for (((o, x), m), v) in out.iter_mut().zip(obs).zip(&self.mean).zip(&self.var) {
            *o = ((x - m) / (v + NORM_EPS).sqrt()).clamp(-self.clip, self.clip);
        }
    }

    /// Fold a batch of rows (each `dim` long) into the statistics.
    pub fn update(&mut self, rows: &[f64]) {
        let dim = self.mean.len();
        let n = (rows.len() / dim) as f64;
        if n == 0.0 {
            return;
        }
        let mut bmean = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for (m, x) in bmean.iter_mut().zip(row) {
                *m += x;
            }
        }
        bmean.iter_mut().for_each(|m| *m /= n);
        let mut bvar = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for ((v, x), m) in bvar.iter_mut().zip(row).zip(&bmean) {
                *v += (x - m) * (x - m);
            }
        }
        bvar.iter_mut().for_each(|v| *v /= n);

        if self.count == 0.0 {
            self.mean = bmean;
            self.var = bvar;
            self.count = n;
            return;
        }
        let total = self.count + n;
        for k in 0..dim {
            let delta = bmean[k] - self.mean[k];
            let m2 = self.var[k] * self.count + bvar[k] * n + delta * delta * self.count * n / total;
            self.mean[k] += delta * n / total;
            self.var[k] = m2 / total;
        }
        self.count = total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
