use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tinker_soccer::arbiter::Network;
use tinker_soccer::harness::config::Knockdown;
use tinker_soccer::harness::curves::{export_curves, MERGED_FILE, SMOOTHING_WINDOW};
use tinker_soccer::harness::eval::{load_controller, run_eval, verify_replay, EvalOptions, REPORT_FILE};
use tinker_soccer::harness::matchplay::{run_match, REPLAY_FILE};
use tinker_soccer::harness::train::run_training;
use tinker_soccer::harness::{Brain, Controller, NullController, RunConfig};
use tinker_soccer::sim::Scenario;
use tinker_soccer::Error;

/// Train, evaluate and play the biped soccer controllers.
#[derive(Debug, Parser)]
#[command(name = "tinker-soccer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one network and write its checkpoint, curve and log.
    Train {
        /// `frn` (fall recovery) or `bskn` (ball seeking and kicking).
        network: Network,
        #[arg(long)]
        config: PathBuf,
        /// Override the configured step budget.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Knockdown evaluation with recovery-time statistics.
    Eval(EvalArgs),
    /// Timed 1v1 match between two teams.
    Match(MatchArgs),
    /// Merge training curves into one smoothed CSV.
    ExportCurves {
        /// Directory holding `*_curve.csv` files.
        dir: PathBuf,
        /// Output file; defaults to `curves.csv` inside DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = SMOOTHING_WINDOW)]
        window: usize,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recovery network checkpoint; zero residuals when absent.
    #[arg(long)]
    frn: Option<PathBuf>,
    /// Ball network checkpoint; zero residuals when absent.
    #[arg(long)]
    bskn: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Frames per episode.
    #[arg(long)]
    frames: Option<u64>,
    /// `FRAME:X,Y,Z`, an impulse in N s; repeatable, replaces the configured ones.
    #[arg(long = "knockdown")]
    knockdowns: Vec<Knockdown>,
    /// Start state of every episode.
    #[arg(long, conflicts_with = "corner")]
    scenario: Option<Scenario>,
    /// Start every episode from the corner-ball scenario.
    #[arg(long)]
    corner: bool,
    /// Replace the robot's measured posture with a scripted fall lasting
    /// this many frames after each knockdown.
    #[arg(long, value_name = "FRAMES")]
    stub_recovery: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a full replay of every episode into this directory.
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    /// Re-simulate a replay file and check its reward stream instead of evaluating.
    #[arg(long, conflicts_with_all = ["replay_dir", "stub_recovery"])]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    home_frn: Option<PathBuf>,
    #[arg(long)]
    home_bskn: Option<PathBuf>,
    #[arg(long)]
    away_frn: Option<PathBuf>,
    #[arg(long)]
    away_bskn: Option<PathBuf>,
    /// Match length in frames.
    #[arg(long)]
    frames: Option<u64>,
    /// Give both teams the same kickoff seed.
    #[arg(long)]
    mirrored: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => {
            let mut cfg = RunConfig::default();
            cfg.apply_env_override();
            Ok(cfg)
        }
    }
}

fn controller(path: Option<&Path>, network: Network, cfg: &RunConfig) -> Result<Box<dyn Controller>, Error> {
    Ok(match path {
        Some(p) => Box::new(load_controller(p, network, cfg)?),
        None => Box::new(NullController),
    })
}

fn brain(frn: Option<&Path>, bskn: Option<&Path>, cfg: &RunConfig) -> Result<Brain, Error> {
    Ok(Brain {
        frn: controller(frn, Network::Frn, cfg)?,
        bskn: controller(bskn, Network::Bskn, cfg)?,
    })
}

fn set_seed(cfg: &mut RunConfig, seed: Option<u64>) -> Result<(), Error> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()
}

fn train(network: Network, config: &Path, steps: Option<u64>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(n) = steps {
        match network {
            Network::Frn => cfg.frn.total_steps = n,
            Network::Bskn => cfg.bskn.total_steps = n,
        }
    }
    set_seed(&mut cfg, seed)?;
    let out = run_training(&cfg, network, &cfg.output_dir)?;
    println!("checkpoint {}", out.checkpoint.display());
    println!("curve {}", out.curve.display());
    println!("log {}", out.log.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Error> {
    let mut cfg = load_config(a.config.as_deref())?;
    set_seed(&mut cfg, a.seed)?;
    if let Some(replay) = &a.replay {
        let check = verify_replay(&cfg, replay)?;
        return match check.first_mismatch {
            None => {
                println!("replay reproduced: {} frames", check.frames);
                Ok(())
            }
            Some(f) => Err(Error::ReplayMismatch(f)),
        };
    }
    let mut opts = EvalOptions::from_config(&cfg);
    if let Some(n) = a.episodes {
        opts.episodes = n;
    }
    if let Some(f) = a.frames {
        opts.frames = f;
    }
    if !a.knockdowns.is_empty() {
        opts.knockdowns = a.knockdowns;
    }
    if a.corner {
        opts.scenario = Scenario::CornerBall;
    } else if let Some(s) = a.scenario {
        opts.scenario = s;
    }
    opts.scripted_recovery = a.stub_recovery;
    opts.replay_dir = a.replay_dir;
    let mut b = brain(a.frn.as_deref(), a.bskn.as_deref(), &cfg)?;
    let report = run_eval(&cfg, &mut b, &opts, &cfg.output_dir)?;
    match report.mean_recovery_s {
        Some(m) => println!("{} recoveries, mean {m:.3} s", report.recovery_times_s.len()),
        None => println!("no recoveries"),
    }
    println!("goal rate {:.3}", report.goal_rate);
    println!("report {}", cfg.output_dir.join(REPORT_FILE).display());
    Ok(())
}

fn play(a: MatchArgs) -> Result<(), Error> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(f) = a.frames {
        cfg.match_play.frames = f;
    }
    cfg.match_play.mirrored |= a.mirrored;
    set_seed(&mut cfg, a.seed)?;
    let mut teams = [
        brain(a.home_frn.as_deref(), a.home_bskn.as_deref(), &cfg)?,
        brain(a.away_frn.as_deref(), a.away_bskn.as_deref(), &cfg)?,
    ];
    let r = run_match(&cfg, &mut teams, &cfg.output_dir)?;
    println!("score {}-{}", r.score[0], r.score[1]);
    println!("replay {}", cfg.output_dir.join(REPLAY_FILE).display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            network,
            config,
            steps,
            seed,
        } => train(network, &config, steps, seed),
        Command::Eval(a) => eval(a),
        Command::Match(a) => play(a),
        Command::ExportCurves { dir, out, window } => {
            let out = out.unwrap_or_else(|| dir.join(MERGED_FILE));
            let curves = export_curves(&dir, &out, window)?;
            println!("{} curves -> {}", curves.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
