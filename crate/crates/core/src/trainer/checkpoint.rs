//! Versioned binary container for a trained network.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u8` network id,
//! 32-byte config hash, `u32`-prefixed JSON metadata, then five `u64`-prefixed
//! `f64` arrays: parameters, normaliser mean, normaliser variance, Adam first
//! and second moments.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::arbiter::Network;
use crate::error::{Error, Result};
use crate::trainer::nn::MlpLayout;
use crate::trainer::policy::{ActorCritic, Adam, Normalizer};

pub const MAGIC: &[u8; 8] = b"TKSCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub elapsed_steps: u64,
    pub iterations: u64,
    pub seed: u64,
    pub curriculum_stage: usize,
    pub assist_magnitude: f64,
    pub actor: MlpLayout,
    pub critic: MlpLayout,
    pub norm_count: f64,
    pub norm_clip: f64,
    pub adam_t: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub config_hash: [u8; 32],
    pub elapsed_steps: u64,
    pub iterations: u64,
    pub seed: u64,
    pub curriculum_stage: usize,
    pub assist_magnitude: f64,
    pub policy: ActorCritic,
    pub normalizer: Normalizer,
    pub adam: Adam,
}

fn network_id(n: Network) -> u8 {
    match n {
        Network::Frn => 0,
        Network::Bskn => 1,
    }
}

fn write_array(out: &mut Vec<u8>, xs: &[f64]) {
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn array(&mut self, what: &'static str, expected: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != expected {
            return Err(Error::Length { what, expected, got: n });
        }
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("array too large".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = CheckpointMeta {
            elapsed_steps: self.elapsed_steps,
            iterations: self.iterations,
            seed: self.seed,
            curriculum_stage: self.curriculum_stage,
            assist_magnitude: self.assist_magnitude,
            actor: self.policy.actor.clone(),
            critic: self.policy.critic.clone(),
            norm_count: self.normalizer.count,
            norm_clip: self.normalizer.clip,
            adam_t: self.adam.t,
            adam_beta1: self.adam.beta1,
            adam_beta2: self.adam.beta2,
            adam_eps: self.adam.eps,
        };
        let json = serde_json::to_vec(&meta)?;
        let mut out = Vec::with_capacity(64 + json.len() + 8 * 3 * self.policy.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(network_id(self.network));
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        write_array(&mut out, &self.policy.params);
        write_array(&mut out, &self.normalizer.mean);
        write_array(&mut out, &self.normalizer.var);
        write_array(&mut out, &self.adam.m);
        write_array(&mut out, &self.adam.v);
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut c = Cursor { data, pos: 0 };
        if c.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let version = c.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let network = match c.take(1)?[0] {
            0 => Network::Frn,
            1 => Network::Bskn,
            id => return Err(Error::Checkpoint(format!("unknown network id {id}"))),
        };
        let config_hash: [u8; 32] = c.take(32)?.try_into().unwrap();
        let json_len = c.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(c.take(json_len)?)?;
        let n_params = meta.actor.param_count() + meta.actor.output() + meta.critic.param_count();
        let dim = meta.actor.input();
        let params = c.array("parameters", n_params)?;
        let mean = c.array("normaliser mean", dim)?;
        let var = c.array("normaliser variance", dim)?;
        let m = c.array("optimiser first moment", n_params)?;
        let v = c.array("optimiser second moment", n_params)?;
        if c.pos != data.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let policy = ActorCritic::from_parts(meta.actor, meta.critic, params)
            .ok_or_else(|| Error::Checkpoint("inconsistent network layout".into()))?;
        Ok(Self {
            network,
            config_hash,
            elapsed_steps: meta.elapsed_steps,
            iterations: meta.iterations,
            seed: meta.seed,
            curriculum_stage: meta.curriculum_stage,
            assist_magnitude: meta.assist_magnitude,
            policy,
            normalizer: Normalizer {
                count: meta.norm_count,
                mean,
                var,
                clip: meta.norm_clip,
            },
            adam: Adam {
                m,
                v,
                t: meta.adam_t,
                beta1: meta.adam_beta1,
                beta2: meta.adam_beta2,
                eps: meta.adam_eps,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = vec![];
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn config_hash_hex(&self) -> String {
        hex::encode(self.config_hash)
    }

    /// Deterministic (mean) actions for raw observations.
    pub fn act(&self, raw_obs: &[f64], out: &mut [f64]) {
        let mut n = vec![0.0; raw_obs.len()];
        self.normalizer.normalize(raw_obs, &mut n);
        self.policy.mean(&n, out);
    }

    /// Deterministic actions for a batch of raw observations.
    pub fn act_batch(&self, raw_obs: ArrayView2<f64>) -> Array2<f64> {
        let mut n = Array2::zeros(raw_obs.raw_dim());
        for (src, mut dst) in raw_obs.rows().into_iter().zip(n.rows_mut()) {
            let src = src.to_vec();
            self.normalizer
                .normalize(&src, dst.as_slice_mut().expect("contiguous row"));
        }
        self.policy.batch_means(n.view())
    }
}
