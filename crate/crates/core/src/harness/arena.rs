//! Arbiter-switched episodes: each robot runs both networks every frame and
//! its posture arbiter decides which command reaches the joints.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::{classify, mask_observation, ArbiterState, Network, Posture, PostureFeatures, Switch};
use crate::curriculum::Wrench;
use crate::error::{Error, Result};
use crate::gait::{JointTargets, JointVector, PhaseClock, JOINT_COUNT};
use crate::harness::config::{Knockdown, RunConfig};
use crate::harness::metrics::SwitchCounts;
use crate::reward::RewardBreakdown;
use crate::sim::events::scored_by;
use crate::sim::scenario::default_pose;
use crate::sim::{detect_events, observe, reset, Event, RobotState, Scenario, World};
use crate::task::{posture_features, squash, task_reward};
use crate::trainer::checkpoint::Checkpoint;

/// Produces raw (pre-squash) residuals from an observation that has already
/// been masked for the network it serves.
pub trait Controller: Send {
    fn act(&mut self, obs: &[f64]) -> Result<JointVector>;
}

/// Zero residuals: the bare oscillator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullController;

impl Controller for NullController {
    fn act(&mut self, _obs: &[f64]) -> Result<JointVector> {
        Ok([0.0; JOINT_COUNT])
    }
}

/// Deterministic mean action of a trained network.
pub struct PolicyController {
    checkpoint: Checkpoint,
}

impl PolicyController {
    /// Fails unless the checkpoint holds `network`.
    pub fn new(checkpoint: Checkpoint, network: Network) -> Result<Self> {
        if checkpoint.network != network {
            return Err(Error::Checkpoint(format!(
                "expected a {network} checkpoint, found {}",
                checkpoint.network
            )));
        }
        let p = &checkpoint.policy;
        if p.act_dim() != JOINT_COUNT {
            return Err(Error::Length {
                what: "policy action",
                expected: JOINT_COUNT,
                got: p.act_dim(),
            });
        }
        Ok(Self { checkpoint })
    }
}

impl Controller for PolicyController {
    fn act(&mut self, obs: &[f64]) -> Result<JointVector> {
        let p = &self.checkpoint.policy;
        if obs.len() != p.obs_dim() {
            return Err(Error::Length {
                what: "policy observation",
                expected: p.obs_dim(),
                got: obs.len(),
            });
        }
        let mut out = [0.0; JOINT_COUNT];
        self.checkpoint.act(obs, &mut out);
        Ok(out)
    }
}

/// The two networks driving one robot.
pub struct Brain {
    pub bskn: Box<dyn Controller>,
    pub frn: Box<dyn Controller>,
}

impl Brain {
    pub fn null() -> Self {
        Self {
            bskn: Box::new(NullController),
            frn: Box::new(NullController),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Knockdown,
    /// Raw classification turned Fallen.
    Fell,
    /// The arbiter handed control to the recovery network.
    FrnActive,
    /// Raw classification turned Standing.
    Recovered,
    /// The arbiter handed control back to the ball network.
    BsknActive,
    BallKicked,
    GoalScored,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub frame: u64,
    pub robot: usize,
    pub kind: LogKind,
    pub theta_tilt: f64,
    pub h_torso: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Network>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Network>,
}

/// One robot in one frame of a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    /// Torso state in the robot's own frame.
    pub position: [f64; 3],
    /// `[w, i, j, k]`
    pub orientation: [f64; 4],
    pub linear_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub joint_angles: JointVector,
    pub joint_velocities: JointVector,
    pub active: Network,
    pub bskn_residual: JointVector,
    pub frn_residual: JointVector,
    /// Residual actually sent to the joints.
    pub command: JointVector,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub robots: Vec<RobotRecord>,
    pub ball_position: [f64; 3],
    pub ball_velocity: [f64; 3],
    pub events: Vec<LoggedEvent>,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn robot_record(s: &RobotState, active: Network, b: JointVector, f: JointVector, cmd: JointVector, reward: RewardBreakdown) -> RobotRecord {
    let q = s.orientation.quaternion();
    RobotRecord {
        position: arr(&s.position),
        orientation: [q.w, q.i, q.j, q.k],
        linear_velocity: arr(&s.linear_velocity),
        angular_velocity: arr(&s.angular_velocity),
        joint_angles: s.joint_angles,
        joint_velocities: s.joint_velocities,
        active,
        bskn_residual: b,
        frn_residual: f,
        command: cmd,
        reward,
    }
}

/// Fall and recovery bookkeeping from raw classifications and switches.
#[derive(Debug, Clone, Default)]
struct RecoveryTracker {
    fall_onset: Option<u64>,
    confirmed_fall: Option<u64>,
    stand_onset: Option<u64>,
    recoveries: Vec<u64>,
}

impl RecoveryTracker {
    fn observe(&mut self, frame: u64, raw: Posture, previous: Option<Posture>, switch: Option<Switch>) {
        if previous != Some(raw) {
            match raw {
                Posture::Fallen => self.fall_onset = Some(frame),
                Posture::Standing => self.stand_onset = Some(frame),
            }
        }
        match switch.map(|s| s.to) {
            Some(Network::Frn) => self.confirmed_fall = self.fall_onset,
            Some(Network::Bskn) => {
                if let (Some(f), Some(s)) = (self.confirmed_fall.take(), self.stand_onset) {
                    self.recoveries.push(s - f);
                }
            }
            None => {}
        }
    }
}

/// Per-robot control state.
pub struct Pilot {
    pub arbiter: ArbiterState,
    pub clock: PhaseClock,
    pub prev_command: JointVector,
    last_raw: Option<Posture>,
    tracker: RecoveryTracker,
    pub switches: SwitchCounts,
    pub reward: f64,
}

impl Pilot {
    pub fn new(cfg: &RunConfig, initial: Posture) -> Result<Self> {
        let arbiter = ArbiterState::for_posture(initial, &cfg.arbiter);
        let mut tracker = RecoveryTracker::default();
        if initial == Posture::Fallen {
            tracker.fall_onset = Some(0);
            tracker.confirmed_fall = Some(0);
        }
        Ok(Self {
            arbiter,
            clock: PhaseClock::new(cfg.gait.half_period)?,
            prev_command: [0.0; JOINT_COUNT],
            last_raw: None,
            tracker,
            switches: SwitchCounts::default(),
            reward: 0.0,
        })
    }

    pub fn recoveries(&self) -> &[u64] {
        &self.tracker.recoveries
    }

    /// A fall confirmed by the arbiter that has not been recovered from.
    pub fn is_down(&self) -> bool {
        self.tracker.confirmed_fall.is_some()
    }
}

/// Scripted stand-in for the physical posture of robot 0: standing, except
/// for `frames` frames after each knockdown, when it reads as fallen.
/// Knockdown impulses are not applied to the physics while it is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedRecovery {
    pub frames: u64,
    pub standing_height: f64,
}

impl ScriptedRecovery {
    pub fn new(cfg: &RunConfig, frames: u64) -> Self {
        Self {
            frames,
            standing_height: cfg.env.body.standing_height(&default_pose()),
        }
    }
}

/// Decisions for one robot before the physics step.
struct Decision {
    bskn: JointVector,
    frn: JointVector,
    command: JointVector,
    features: PostureFeatures,
    switch: Option<Switch>,
}

fn decide(cfg: &RunConfig, world: &World, index: usize, pilot: &mut Pilot, brain: &mut Brain, features: PostureFeatures, events: &mut Vec<LoggedEvent>) -> Result<Decision> {
    let frame = world.frame;
    let obs = observe(&cfg.env, world, index, &pilot.clock, &pilot.prev_command);
    let bskn = squash(&brain.bskn.act(obs.as_slice())?)?;
    let frn = squash(&brain.frn.act(mask_observation(&obs, Network::Frn).as_slice())?)?;

    let raw = classify(&features, &cfg.arbiter)?;
    let switch = pilot.arbiter.update(raw, &cfg.arbiter);
    let log = |kind, from, to| LoggedEvent {
        frame,
        robot: index,
        kind,
        theta_tilt: features.theta_tilt,
        h_torso: features.h_torso,
        from,
        to,
    };
    if pilot.last_raw != Some(raw) && pilot.last_raw.is_some() {
        events.push(log(
            match raw {
                Posture::Fallen => LogKind::Fell,
                Posture::Standing => LogKind::Recovered,
            },
            None,
            None,
        ));
    }
    if let Some(s) = switch {
        match s.to {
            Network::Frn => pilot.switches.to_frn += 1,
            Network::Bskn => pilot.switches.to_bskn += 1,
        }
        let kind = match s.to {
            Network::Frn => LogKind::FrnActive,
            Network::Bskn => LogKind::BsknActive,
        };
        events.push(log(kind, Some(s.from), Some(s.to)));
    }
    pilot.tracker.observe(frame, raw, pilot.last_raw, switch);
    pilot.last_raw = Some(raw);
    let command = pilot.arbiter.command(&bskn, &frn);
    Ok(Decision {
        bskn,
        frn,
        command,
        features,
        switch,
    })
}

/// Everything one frame produced.
pub struct FrameOutcome {
    pub record: FrameRecord,
    /// Per robot: a goal for that robot this frame.
    pub scored: Vec<bool>,
}

/// Advance every robot by one frame. `features` overrides the measured
/// posture per robot when set.
pub fn run_frame(cfg: &RunConfig, world: &mut World, pilots: &mut [Pilot], brains: &mut [Brain], features: &[Option<PostureFeatures>], mut events: Vec<LoggedEvent>) -> Result<FrameOutcome> {
    let n = world.robots.len();
    let frame = world.frame;
    let mut decisions = Vec::with_capacity(n);
    for i in 0..n {
        let f = features
            .get(i)
            .copied()
            .flatten()
            .unwrap_or_else(|| posture_features(&world.robots[i].state));
        decisions.push(decide(cfg, world, i, &mut pilots[i], &mut brains[i], f, &mut events)?);
    }
    let targets = decisions
        .iter()
        .zip(pilots.iter())
        .map(|(d, p)| cfg.gait.superpose(&p.clock, &d.command))
        .collect::<Result<Vec<JointTargets>>>()?;
    let before = world.clone();
    let report = world.step(&cfg.env, &targets, &vec![Wrench::zero(); n])?;

    let mut robots = Vec::with_capacity(n);
    let mut scored = Vec::with_capacity(n);
    for (i, (d, p)) in decisions.iter().zip(pilots.iter_mut()).enumerate() {
        p.clock = p.clock.advance();
        p.prev_command = d.command;
        let state = &world.robots[i].state;
        let active = p.arbiter.active();
        let reward = task_reward(active, &cfg.env, state, &d.command, &cfg.rewards)?;
        p.reward += reward.total();
        for e in detect_events(&cfg.env, &before, world, i, &report, d.switch) {
            let kind = match e {
                // switches were logged with their posture above
                Event::Fell | Event::Recovered => continue,
                Event::BallKicked => LogKind::BallKicked,
                Event::GoalScored => LogKind::GoalScored,
                Event::OutOfBounds => LogKind::OutOfBounds,
            };
            events.push(LoggedEvent {
                frame,
                robot: i,
                kind,
                theta_tilt: d.features.theta_tilt,
                h_torso: d.features.h_torso,
                from: None,
                to: None,
            });
        }
        scored.push(report.goal.is_some_and(|g| scored_by(g, world.robots[i].flipped)));
        robots.push(robot_record(state, active, d.bskn, d.frn, d.command, reward));
    }
    Ok(FrameOutcome {
        record: FrameRecord {
            frame,
            robots,
            ball_position: arr(&world.ball.position),
            ball_velocity: arr(&world.ball.velocity),
            events,
        },
        scored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode: usize,
    /// Seed of the reset RNG.
    pub seed: u64,
    pub scenario: Scenario,
    pub frames: u64,
    pub knockdowns: Vec<Knockdown>,
    /// Frames the scripted recovery keeps the robot down, when scripted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scripted_recovery: Option<u64>,
}

pub struct EpisodeResult {
    pub spec: EpisodeSpec,
    pub frames: Vec<FrameRecord>,
    pub events: Vec<LoggedEvent>,
    pub reward: f64,
    /// Recovery durations in frames.
    pub recoveries: Vec<u64>,
    pub unrecovered: usize,
    pub goals: usize,
    pub switches: SwitchCounts,
}

fn fallen_features() -> PostureFeatures {
    PostureFeatures {
        theta_tilt: 90.0,
        h_torso: 0.0,
    }
}

/// Run one single-robot episode. The episode ends at `spec.frames` or when
/// the robot scores.
pub fn run_episode(cfg: &RunConfig, brain: &mut Brain, spec: &EpisodeSpec) -> Result<EpisodeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut world = reset(&cfg.env, &default_pose(), spec.scenario, &mut rng);
    let stub = spec.scripted_recovery.map(|f| ScriptedRecovery::new(cfg, f));
    let standing = |s: &ScriptedRecovery| PostureFeatures {
        theta_tilt: 0.0,
        h_torso: s.standing_height,
    };
    let initial = match &stub {
        Some(s) => classify(&standing(s), &cfg.arbiter)?,
        None => classify(&posture_features(&world.robots[0].state), &cfg.arbiter)?,
    };
    let mut pilots = vec![Pilot::new(cfg, initial)?];
    let mut knocks = spec.knockdowns.clone();
    knocks.sort_by_key(|k| k.frame);
    let mut next = 0;
    let mut down_until: Option<u64> = None;
    let mut frames = Vec::new();
    let mut events = Vec::new();
    let mut goals = 0;
    let mut brains = std::slice::from_mut(brain);

    while world.frame < spec.frames {
        let frame = world.frame;
        let mut pre_events = Vec::new();
        while next < knocks.len() && knocks[next].frame == frame {
            let k = knocks[next];
            next += 1;
            let f = posture_features(&world.robots[0].state);
            pre_events.push(LoggedEvent {
                frame,
                robot: 0,
                kind: LogKind::Knockdown,
                theta_tilt: f.theta_tilt,
                h_torso: f.h_torso,
                from: None,
                to: None,
            });
            match &stub {
                Some(s) => down_until = Some(frame + s.frames),
                None => world.knockdown(&cfg.env, 0, &Vector3::from(k.impulse))?,
            }
        }
        if next < knocks.len() && knocks[next].frame < frame {
            next += 1;
        }
        let features = stub.as_ref().map(|s| {
            if down_until.is_some_and(|end| frame < end) {
                fallen_features()
            } else {
                standing(s)
            }
        });
        let out = run_frame(cfg, &mut world, &mut pilots, &mut brains, &[features], pre_events)?;
        events.extend(out.record.events.iter().cloned());
        frames.push(out.record);
        if out.scored[0] {
            goals += 1;
            break;
        }
    }
    let p = &pilots[0];
    Ok(EpisodeResult {
        spec: spec.clone(),
        frames,
        events,
        reward: p.reward,
        recoveries: p.recoveries().to_vec(),
        unrecovered: usize::from(p.is_down()),
        goals,
        switches: p.switches.clone(),
    })
}

/// Whether every command lies inside the per-joint interval spanned by the
/// two networks' residuals of the same frame.
pub fn commands_within_hull(frames: &[FrameRecord]) -> bool {
    frames.iter().flat_map(|f| &f.robots).all(|r| {
        (0..JOINT_COUNT).all(|j| {
            let (a, b) = (r.bskn_residual[j], r.frn_residual[j]);
            let c = r.command[j];
            a.min(b) <= c && c <= a.max(b)
        })
    })
}
