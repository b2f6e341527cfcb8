//! Training runs with their checkpoint, curve and log files.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::arbiter::Network;
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::metrics::provenance_line;
use crate::task::SoccerTask;
use crate::trainer::pipeline::{IterationLog, Trainer};
use crate::trainer::rollout::Env;

pub const CURVE_SUFFIX: &str = "_curve.csv";

pub const CURVE_COLUMNS: [&str; 14] = [
    "iteration",
    "step",
    "mean_episode_reward",
    "mean_step_reward",
    "episodes",
    "assist_magnitude",
    "stage",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "grad_norm",
    "skipped",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    pub log: PathBuf,
}

impl TrainOutputs {
    pub fn in_dir(dir: &Path, network: Network) -> Self {
        Self {
            checkpoint: dir.join(format!("{network}.ckpt")),
            curve: dir.join(format!("{network}{CURVE_SUFFIX}")),
            log: dir.join(format!("{network}_train.jsonl")),
        }
    }
}

#[derive(Serialize)]
struct LogHeader<'a> {
    config_hash: String,
    seed: u64,
    network: Network,
    ppo: &'a crate::trainer::ppo::PpoConfig,
}

fn curve_row(l: &IterationLog) -> [String; 14] {
    [
        l.iteration.to_string(),
        l.step.to_string(),
        l.mean_episode_reward.map(|r| r.to_string()).unwrap_or_default(),
        l.mean_step_reward.to_string(),
        l.episodes.to_string(),
        l.assist_magnitude.to_string(),
        l.stage.to_string(),
        l.stats.policy_loss.to_string(),
        l.stats.value_loss.to_string(),
        l.stats.entropy.to_string(),
        l.stats.approx_kl.to_string(),
        l.stats.clip_fraction.to_string(),
        l.stats.grad_norm.to_string(),
        l.stats.skipped.to_string(),
    ]
}

/// Build the trainer for one network: `n_envs` task instances and, for the
/// recovery network, the assist curriculum.
pub fn trainer(cfg: &RunConfig, network: Network) -> Result<Trainer> {
    let ppo = cfg.ppo(network).clone();
    let envs = (0..ppo.n_envs)
        .map(|_| Ok(Box::new(SoccerTask::new(cfg.task_spec(network))?) as Box<dyn Env>))
        .collect::<Result<Vec<_>>>()?;
    let curriculum = (network == Network::Frn).then(|| cfg.curriculum_schedule());
    Trainer::new(ppo, envs, cfg.seed, curriculum)
}

/// Train one network and write its checkpoint, curve CSV and JSONL log into
/// `out_dir`.
pub fn run_training(cfg: &RunConfig, network: Network, out_dir: &Path) -> Result<TrainOutputs> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let out = TrainOutputs::in_dir(out_dir, network);
    let hash = cfg.hash_hex();

    let curve_file = std::fs::File::create(&out.curve).map_err(|e| Error::io(&out.curve, e))?;
    let mut curve_raw = BufWriter::new(curve_file);
    curve_raw
        .write_all(provenance_line(&hash, cfg.seed, &[("network", network.to_string())]).as_bytes())
        .map_err(|e| Error::io(&out.curve, e))?;
    let mut curve = csv::Writer::from_writer(curve_raw);
    curve.write_record(CURVE_COLUMNS)?;

    let log_file = std::fs::File::create(&out.log).map_err(|e| Error::io(&out.log, e))?;
    let mut log = BufWriter::new(log_file);
    let header = LogHeader {
        config_hash: hash.clone(),
        seed: cfg.seed,
        network,
        ppo: cfg.ppo(network),
    };
    serde_json::to_writer(&mut log, &header)?;
    log.write_all(b"\n").map_err(|e| Error::io(&out.log, e))?;

    let mut t = trainer(cfg, network)?;
    t.run(|l| {
        curve.write_record(curve_row(l))?;
        serde_json::to_writer(&mut log, l)?;
        log.write_all(b"\n").map_err(|e| Error::io(&out.log, e))?;
        for tr in &l.transitions {
            log::info!("{network}: assist stage {} -> {} at step {}", tr.from, tr.to, tr.at_step);
        }
        log::debug!(
            "{network} iteration {} step {} reward {:?}",
            l.iteration,
            l.step,
            l.mean_episode_reward
        );
        Ok(())
    })?;
    curve.flush().map_err(|e| Error::io(&out.curve, e))?;
    log.flush().map_err(|e| Error::io(&out.log, e))?;

    t.checkpoint(network, cfg.hash(), cfg.seed).save(&out.checkpoint)?;
    log::info!("{network}: {} steps in {} iterations", t.steps, t.iterations);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::checkpoint::Checkpoint;

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::default();
        for p in [&mut cfg.frn, &mut cfg.bskn] {
            p.n_envs = 2;
            p.horizon = 50;
            p.total_steps = 200;
            p.hidden = vec![8];
            p.minibatch = 50;
            p.parallel = false;
        }
        cfg
    }

    #[test]
    fn writes_all_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let out = run_training(&cfg, Network::Bskn, dir.path()).unwrap();
        let ck = Checkpoint::load(&out.checkpoint).unwrap();
        assert_eq!(ck.network, Network::Bskn);
        assert_eq!(ck.config_hash, cfg.hash());
        assert_eq!(ck.elapsed_steps, 200);
        let curve = std::fs::read_to_string(&out.curve).unwrap();
        let mut lines = curve.lines();
        assert!(lines.next().unwrap().contains(&cfg.hash_hex()));
        assert_eq!(lines.next().unwrap(), CURVE_COLUMNS.join(","));
        assert_eq!(lines.count(), 2);
        let log = std::fs::read_to_string(&out.log).unwrap();
        assert_eq!(log.lines().count(), 3);
    }
}
