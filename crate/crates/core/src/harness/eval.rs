//! Evaluation runs, replay logs and the recovery-rate measurement.

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::{Network, Posture};
use crate::curriculum::Wrench;
use crate::error::{Error, Result};
use crate::gait::{PhaseClock, JOINT_COUNT};
use crate::harness::arena::{run_episode, Brain, EpisodeResult, EpisodeSpec, FrameRecord, LoggedEvent, PolicyController};
use crate::harness::config::{Knockdown, RunConfig};
use crate::harness::metrics::{provenance_line, MetricsReport};
use crate::sim::scenario::default_pose;
use crate::sim::{reset, Scenario};
use crate::task::{posture, task_reward, SoccerTask};
use crate::trainer::checkpoint::Checkpoint;
use crate::trainer::rollout::Env;

pub const REPORT_FILE: &str = "eval_report.json";
pub const HISTOGRAM_FILE: &str = "recovery_histogram.csv";
pub const EVENTS_FILE: &str = "eval_events.jsonl";

/// Frames a recovery may take to count as a success (5 s).
pub const RECOVERY_WINDOW_FRAMES: u64 = 500;

/// Load a checkpoint as a controller for `network`. A config hash that
/// differs from `cfg` only earns a warning.
pub fn load_controller(path: &Path, network: Network, cfg: &RunConfig) -> Result<PolicyController> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.config_hash != cfg.hash() {
        log::warn!(
            "{} was trained with config {}, evaluating with {}",
            path.display(),
            ckpt.config_hash_hex(),
            cfg.hash_hex()
        );
    }
    PolicyController::new(ckpt, network)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub frames: u64,
    pub scenario: Scenario,
    pub knockdowns: Vec<Knockdown>,
    pub scripted_recovery: Option<u64>,
    /// Write a full replay of every episode here.
    pub replay_dir: Option<PathBuf>,
}

impl EvalOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            episodes: cfg.eval.episodes,
            frames: cfg.eval.episode_frames,
            scenario: cfg.eval.scenario,
            knockdowns: cfg.eval.knockdowns.clone(),
            scripted_recovery: None,
            replay_dir: None,
        }
    }

    /// Episode `i` resets from `seed + i`.
    pub fn episode(&self, cfg: &RunConfig, i: usize) -> EpisodeSpec {
        EpisodeSpec {
            episode: i,
            seed: cfg.seed.wrapping_add(i as u64),
            scenario: self.scenario,
            frames: self.frames,
            knockdowns: self.knockdowns.clone(),
            scripted_recovery: self.scripted_recovery,
        }
    }
}

/// Lines of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventLine {
    Header {
        config_hash: String,
        seed: u64,
        episodes: usize,
    },
    Episode {
        spec: EpisodeSpec,
        /// Robot and ball positions after reset.
        robot_start: [f64; 3],
        ball_start: [f64; 3],
    },
    Event {
        episode: usize,
        #[serde(flatten)]
        event: LoggedEvent,
    },
}

/// Lines of a replay file: a header, then one record per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReplayLine {
    Header {
        config_hash: String,
        seed: u64,
        episode: EpisodeSpec,
    },
    Frame(FrameRecord),
}

pub struct EvalRun {
    pub report: MetricsReport,
    pub episodes: Vec<EpisodeResult>,
}

fn jsonl_writer(path: &Path) -> Result<BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

fn write_line<T: Serialize>(w: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn replay_path(dir: &Path, episode: usize) -> PathBuf {
    dir.join(format!("eval_episode_{episode:03}.jsonl"))
}

/// Run the episodes in memory and summarise them.
pub fn evaluate(cfg: &RunConfig, brain: &mut Brain, opts: &EvalOptions) -> Result<EvalRun> {
    let mut report = MetricsReport::new(cfg.hash_hex(), cfg.seed);
    let mut episodes = Vec::with_capacity(opts.episodes);
    let mut with_goal = 0;
    let dt = cfg.env.dt;
    for i in 0..opts.episodes {
        let r = run_episode(cfg, brain, &opts.episode(cfg, i))?;
        report.episodes += 1;
        report.knockdowns += r.spec.knockdowns.iter().filter(|k| k.frame < r.frames.len() as u64).count();
        report.recovery_times_s.extend(r.recoveries.iter().map(|&f| f as f64 * dt));
        report.unrecovered += r.unrecovered;
        report.goals += r.goals;
        with_goal += usize::from(r.goals > 0);
        report.episode_rewards.push(r.reward);
        report.switches.to_frn += r.switches.to_frn;
        report.switches.to_bskn += r.switches.to_bskn;
        episodes.push(r);
    }
    report.finish(with_goal);
    Ok(EvalRun { report, episodes })
}

/// Evaluate and write the report, histogram, event log and optional replays.
pub fn run_eval(cfg: &RunConfig, brain: &mut Brain, opts: &EvalOptions, out_dir: &Path) -> Result<MetricsReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let run = evaluate(cfg, brain, opts)?;
    run.report.write_json(&out_dir.join(REPORT_FILE))?;
    run.report.write_histogram_csv(&out_dir.join(HISTOGRAM_FILE))?;

    let events_path = out_dir.join(EVENTS_FILE);
    let mut w = jsonl_writer(&events_path)?;
    let header = EventLine::Header {
        config_hash: cfg.hash_hex(),
        seed: cfg.seed,
        episodes: opts.episodes,
    };
    write_line(&mut w, &events_path, &header)?;
    for r in &run.episodes {
        let start = episode_start(cfg, &r.spec);
        write_line(&mut w, &events_path, &start)?;
        for e in &r.events {
            let line = EventLine::Event {
                episode: r.spec.episode,
                event: e.clone(),
            };
            write_line(&mut w, &events_path, &line)?;
        }
    }
    w.flush().map_err(|e| Error::io(&events_path, e))?;

    if let Some(dir) = &opts.replay_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for r in &run.episodes {
            write_replay(cfg, r, &replay_path(dir, r.spec.episode))?;
        }
    }
    Ok(run.report)
}

fn episode_start(cfg: &RunConfig, spec: &EpisodeSpec) -> EventLine {
    let world = reset(&cfg.env, &default_pose(), spec.scenario, &mut ChaCha8Rng::seed_from_u64(spec.seed));
    let p = world.robots[0].world_position();
    let b = world.ball.position;
    EventLine::Episode {
        spec: spec.clone(),
        robot_start: [p.x, p.y, p.z],
        ball_start: [b.x, b.y, b.z],
    }
}

pub fn write_replay(cfg: &RunConfig, episode: &EpisodeResult, path: &Path) -> Result<()> {
    let mut w = jsonl_writer(path)?;
    let header = ReplayLine::Header {
        config_hash: cfg.hash_hex(),
        seed: cfg.seed,
        episode: episode.spec.clone(),
    };
    write_line(&mut w, path, &header)?;
    for f in &episode.frames {
        write_line(&mut w, path, &ReplayLine::Frame(f.clone()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_replay(path: &Path) -> Result<(String, EpisodeSpec, Vec<FrameRecord>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut frames = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line)? {
            ReplayLine::Header {
                config_hash, episode, ..
            } => header = Some((config_hash, episode)),
            ReplayLine::Frame(f) => frames.push(f),
        }
    }
    let (hash, spec) = header.ok_or_else(|| Error::Config(format!("{}: replay has no header", path.display())))?;
    Ok((hash, spec, frames))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayCheck {
    pub frames: usize,
    /// First frame whose recomputed reward differs from the log.
    pub first_mismatch: Option<u64>,
}

impl ReplayCheck {
    pub fn reproduced(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Re-simulate a single-robot replay from its logged commands and compare
/// the reward of every frame with the logged one.
pub fn verify_replay(cfg: &RunConfig, path: &Path) -> Result<ReplayCheck> {
    let (hash, spec, frames) = read_replay(path)?;
    if hash != cfg.hash_hex() {
        log::warn!("{} was recorded with config {hash}, replaying with {}", path.display(), cfg.hash_hex());
    }
    let mut world = reset(&cfg.env, &default_pose(), spec.scenario, &mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut clock = PhaseClock::new(cfg.gait.half_period)?;
    let mut first_mismatch = None;
    for rec in &frames {
        let [robot] = rec.robots.as_slice() else {
            return Err(Error::Config(format!("{}: expected one robot per frame", path.display())));
        };
        if spec.scripted_recovery.is_none() {
            let frame = world.frame;
            for k in spec.knockdowns.iter().filter(|k| k.frame == frame) {
                world.knockdown(&cfg.env, 0, &Vector3::from(k.impulse))?;
            }
        }
        let targets = cfg.gait.superpose(&clock, &robot.command)?;
        world.step(&cfg.env, &[targets], &[Wrench::zero()])?;
        clock = clock.advance();
        let reward = task_reward(robot.active, &cfg.env, &world.robots[0].state, &robot.command, &cfg.rewards)?;
        if reward != robot.reward && first_mismatch.is_none() {
            first_mismatch = Some(rec.frame);
        }
    }
    Ok(ReplayCheck {
        frames: frames.len(),
        first_mismatch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRate {
    pub episodes: usize,
    pub recovered: usize,
    /// Frames to recovery, per successful episode.
    pub frames_to_recover: Vec<u64>,
}

impl RecoveryRate {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.recovered as f64 / self.episodes as f64
        }
    }
}

/// Run the recovery network alone, without assist, from alternating fallen
/// start states. An episode succeeds once the robot classifies as standing
/// for the debounce length within `RECOVERY_WINDOW_FRAMES`. Episode `k`
/// resets from `seed + k`.
pub fn frn_recovery_rate(cfg: &RunConfig, frn: &Checkpoint, episodes: usize, seed: u64) -> Result<RecoveryRate> {
    let mut task = SoccerTask::new(cfg.task_spec(Network::Frn))?;
    task.set_assist(0.0);
    let fallen = [Scenario::FallenSupine, Scenario::FallenProne];
    let mut out = RecoveryRate {
        episodes,
        recovered: 0,
        frames_to_recover: vec![],
    };
    let mut action = [0.0; JOINT_COUNT];
    for k in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut obs = task.reset_to(fallen[k % 2], &mut rng);
        let mut standing = 0;
        for frame in 1..=RECOVERY_WINDOW_FRAMES {
            frn.act(&obs, &mut action);
            obs = task.step(&action, &mut rng)?.obs;
            if posture(&task.world().robots[0].state, &cfg.arbiter)? == Posture::Standing {
                standing += 1;
            } else {
                standing = 0;
            }
            if standing >= cfg.arbiter.debounce_frames {
                out.recovered += 1;
                out.frames_to_recover.push(frame);
                break;
            }
        }
    }
    Ok(out)
}

/// Provenance comment for files that are not JSON.
pub fn provenance(cfg: &RunConfig) -> String {
    provenance_line(&cfg.hash_hex(), cfg.seed, &[])
}
