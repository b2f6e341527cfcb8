//! Timed 1v1 matches between two fully autonomous robots.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::arena::{run_frame, Brain, FrameRecord, Pilot};
use crate::harness::config::RunConfig;
use crate::sim::scenario::{default_pose, kickoff};
use crate::sim::World;
use crate::task::posture;

pub const REPLAY_FILE: &str = "match_replay.jsonl";
pub const RESULT_FILE: &str = "match_result.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSeeds {
    pub home: u64,
    pub away: u64,
}

impl MatchSeeds {
    pub fn for_config(cfg: &RunConfig) -> Self {
        Self {
            home: cfg.seed,
            away: if cfg.match_play.mirrored {
                cfg.seed
            } else {
                cfg.seed.wrapping_add(1)
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub config_hash: String,
    pub seed: u64,
    pub seeds: MatchSeeds,
    pub frames: u64,
    /// Goals for home (robot 0) and away (robot 1).
    pub score: [u32; 2],
    pub kickoffs: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MatchLine {
    Header {
        config_hash: String,
        seed: u64,
        seeds: MatchSeeds,
        frames: u64,
    },
    Frame(FrameRecord),
    Result(MatchResult),
}

struct Kickoff {
    home: ChaCha8Rng,
    away: ChaCha8Rng,
}

impl Kickoff {
    fn place(&mut self, cfg: &RunConfig, frame: u64) -> Result<(World, Vec<Pilot>)> {
        let mut world = kickoff(&cfg.env, &default_pose(), &mut self.home, &mut self.away);
        world.frame = frame;
        let pilots = world
            .robots
            .iter()
            .map(|r| Pilot::new(cfg, posture(&r.state, &cfg.arbiter)?))
            .collect::<Result<_>>()?;
        Ok((world, pilots))
    }
}

/// Play `cfg.match_play.frames` frames, re-kicking off after every goal.
pub fn play(cfg: &RunConfig, teams: &mut [Brain; 2]) -> Result<(MatchResult, Vec<FrameRecord>)> {
    let seeds = MatchSeeds::for_config(cfg);
    let mut k = Kickoff {
        home: ChaCha8Rng::seed_from_u64(seeds.home),
        away: ChaCha8Rng::seed_from_u64(seeds.away),
    };
    let (mut world, mut pilots) = k.place(cfg, 0)?;
    let mut result = MatchResult {
        config_hash: cfg.hash_hex(),
        seed: cfg.seed,
        seeds,
        frames: cfg.match_play.frames,
        score: [0, 0],
        kickoffs: 1,
    };
    let mut frames = Vec::new();
    while world.frame < cfg.match_play.frames {
        let out = run_frame(cfg, &mut world, &mut pilots, teams, &[None, None], vec![])?;
        frames.push(out.record);
        if out.scored.iter().any(|&s| s) {
            for (i, s) in out.scored.iter().enumerate() {
                result.score[i] += u32::from(*s);
            }
            (world, pilots) = k.place(cfg, world.frame)?;
            result.kickoffs += 1;
        }
    }
    Ok((result, frames))
}

/// Play a match and write the replay and result files.
pub fn run_match(cfg: &RunConfig, teams: &mut [Brain; 2], out_dir: &Path) -> Result<MatchResult> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (result, frames) = play(cfg, teams)?;
    let path = out_dir.join(REPLAY_FILE);
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(f);
    let mut line = |value: &MatchLine| -> Result<()> {
        serde_json::to_writer(&mut w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))
    };
    line(&MatchLine::Header {
        config_hash: result.config_hash.clone(),
        seed: result.seed,
        seeds: result.seeds,
        frames: result.frames,
    })?;
    for f in frames {
        line(&MatchLine::Frame(f))?;
    }
    line(&MatchLine::Result(result.clone()))?;
    w.flush().map_err(|e| Error::io(&path, e))?;

    let res_path = out_dir.join(RESULT_FILE);
    let text = serde_json::to_string_pretty(&result)?;
    std::fs::write(&res_path, text + "\n").map_err(|e| Error::io(&res_path, e))?;
    Ok(result)
}

pub fn read_match_replay(path: &Path) -> Result<Vec<MatchLine>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            lines.push(serde_json::from_str(&line)?);
        }
    }
    Ok(lines)
}
