//! Episode start states.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::JointVector;
use crate::sim::body::{Leg, RobotState};
use crate::sim::world::{Ball, EnvConfig, Robot, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StandingCenter,
    FallenSupine,
    FallenProne,
    CornerBall,
    Random,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::StandingCenter,
        Scenario::FallenSupine,
        Scenario::FallenProne,
        Scenario::CornerBall,
        Scenario::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::StandingCenter => "standing_center",
            Scenario::FallenSupine => "fallen_supine",
            Scenario::FallenProne => "fallen_prone",
            Scenario::CornerBall => "corner_ball",
            Scenario::Random => "random",
        }
    }

    pub fn is_fallen(self) -> bool {
        matches!(self, Scenario::FallenSupine | Scenario::FallenProne)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str().replace('_', "") == key)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static normal compression per foot point when standing on four points.
fn standing_sink(cfg: &EnvConfig) -> f64 {
    cfg.body.total_mass() * crate::sim::world::GRAVITY / (4.0 * cfg.contact.stiffness)
}

/// Robot standing on flat feet at horizontal position `(x, z)` facing `yaw`.
pub fn standing_robot(cfg: &EnvConfig, pose: &JointVector, x: f64, z: f64, yaw: f64) -> RobotState {
    let h = cfg.body.standing_height(pose) - standing_sink(cfg);
    let mut s = RobotState::at_rest(Vector3::new(x, h, z), *pose);
    s.orientation = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw);
    s
}

/// Robot lying on the ground with the given orientation, lowest point touching.
fn lying_robot(cfg: &EnvConfig, pose: JointVector, orientation: UnitQuaternion<f64>, x: f64, z: f64) -> RobotState {
    let mut s = RobotState::at_rest(Vector3::new(x, 0.0, z), pose);
    s.orientation = orientation;
    let rot = orientation.to_rotation_matrix();
    let mut lowest = cfg
        .body
        .torso_corners()
        .iter()
        .map(|c| (rot * c).y)
        .fold(f64::INFINITY, f64::min);
    for leg in Leg::BOTH {
        let k = s.leg(&cfg.body, leg);
        for p in [k.knee, k.heel, k.toe] {
            lowest = lowest.min(p.y);
        }
    }
    s.position.y = -lowest;
    s
}

fn jitter(rng: &mut impl Rng, pose: &JointVector, amount: f64) -> JointVector {
    let mut out = *pose;
    for v in out.iter_mut() {
        *v += rng.random_range(-amount..=amount);
    }
    out
}

fn ball_at(cfg: &EnvConfig, x: f64, z: f64) -> Ball {
    Ball {
        position: Vector3::new(x, cfg.ball.radius, z),
        velocity: Vector3::zeros(),
    }
}

/// Fresh single-robot world. Deterministic in `(cfg, pose, scenario, rng state)`.
pub fn reset(cfg: &EnvConfig, pose: &JointVector, scenario: Scenario, rng: &mut impl Rng) -> World {
    let half_l = cfg.field.length / 2.0;
    let half_w = cfg.field.width / 2.0;
    let (state, ball) = match scenario {
        Scenario::StandingCenter => {
            let yaw = rng.random_range(-0.1..=0.1);
            let s = standing_robot(cfg, &jitter(rng, pose, 0.02), 0.0, 0.0, yaw);
            let bx = rng.random_range(0.6..=1.5);
            let bz = rng.random_range(-0.8..=0.8);
            (s, ball_at(cfg, bx, bz))
        }
        Scenario::FallenSupine | Scenario::FallenProne => {
            let sign = if scenario == Scenario::FallenSupine { 1.0 } else { -1.0 };
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let lean = sign * FRAC_PI_2 + rng.random_range(-0.15..=0.15);
            let twist = rng.random_range(-0.15..=0.15);
            let q = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw)
                * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), lean)
                * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), twist);
            let s = lying_robot(cfg, jitter(rng, pose, 0.15), q, 0.0, 0.0);
            (s, ball_at(cfg, 1.0, 0.0))
        }
        Scenario::CornerBall => {
            let yaw = rng.random_range(-0.1..=0.1);
            let s = standing_robot(cfg, &jitter(rng, pose, 0.02), 0.0, 0.0, yaw);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let dx = rng.random_range(0.05..=0.25);
            let dz = rng.random_range(0.05..=0.25);
            let r = cfg.ball.radius;
            (
                s,
                ball_at(cfg, half_l - r - dx, side * (half_w - r - dz)),
            )
        }
        Scenario::Random => {
            let x = rng.random_range(-(half_l - 1.0)..=(half_l - 1.0));
            let z = rng.random_range(-(half_w - 0.5)..=(half_w - 0.5));
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let s = standing_robot(cfg, &jitter(rng, pose, 0.02), x, z, yaw);
            let bx = rng.random_range(-(half_l - 0.5)..=(half_l - 0.5));
            let bz = rng.random_range(-(half_w - 0.5)..=(half_w - 0.5));
            (s, ball_at(cfg, bx, bz))
        }
    };
    World {
        robots: vec![Robot {
            state,
            flipped: false,
        }],
        ball,
        frame: 0,
    }
}

/// Two-robot kickoff: each robot in its own half facing the opponent's goal,
/// ball on the centre spot. Robot 1 plays in the half-turned frame.
pub fn kickoff(
    cfg: &EnvConfig,
    pose: &JointVector,
    rng_home: &mut impl Rng,
    rng_away: &mut impl Rng,
) -> World {
    let place = |rng: &mut dyn rand::RngCore| {
        let yaw = rng.random_range(-0.05..=0.05);
        let mut jittered = *pose;
        for v in jittered.iter_mut() {
            *v += rng.random_range(-0.01..=0.01);
        }
        standing_robot(cfg, &jittered, -1.0, 0.0, yaw)
    };
    World {
        robots: vec![
            Robot {
                state: place(rng_home),
                flipped: false,
            },
            Robot {
                state: place(rng_away),
                flipped: true,
            },
        ],
        ball: ball_at(cfg, 0.0, 0.0),
        frame: 0,
    }
}

/// Joint pose used to stand at reset.
pub fn default_pose() -> JointVector {
    crate::gait::GaitProfile::default().offset
}
