//! The fixed 58-slot observation vector.
//!
//! | slots  | content                                   |
//! |--------|-------------------------------------------|
//! | 0..10  | joint angles                              |
//! | 10..20 | joint velocities                          |
//! | 20..30 | previous residual actions                 |
//! | 30..33 | torso up axis                             |
//! | 33..36 | torso angular velocity, torso frame       |
//! | 36..39 | torso linear velocity                     |
//! | 39     | torso height                              |
//! | 40..42 | gait phase `[sin, cos]`                   |
//! | 42..45 | ball position relative to torso           |
//! | 45..48 | ball velocity                             |
//! | 48..51 | target goal relative to torso             |
//! | 51..54 | opponent relative to torso                |
//! | 54..57 | ball-to-goal vector                       |
//! | 57     | goal distance over `d_max`                |
//!
//! Linear velocity and every relative vector are expressed in the torso's
//! yaw-aligned frame `(forward, up, right)`. Slots from 42 on are
//! exteroceptive and get zeroed for the fall recovery network.

use std::ops::Range;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{JointVector, PhaseClock};
use crate::sim::body::{horizontal_unit, RobotState};
use crate::sim::world::{flip_vec, EnvConfig, World};

pub const OBS_DIM: usize = 58;

pub const JOINT_ANGLES: Range<usize> = 0..10;
pub const JOINT_VELOCITIES: Range<usize> = 10..20;
pub const PREV_RESIDUAL: Range<usize> = 20..30;
pub const UP_AXIS: Range<usize> = 30..33;
pub const ANGULAR_VELOCITY: Range<usize> = 33..36;
pub const LINEAR_VELOCITY: Range<usize> = 36..39;
pub const HEIGHT: usize = 39;
pub const PHASE: Range<usize> = 40..42;
pub const BALL_POSITION: Range<usize> = 42..45;
pub const BALL_VELOCITY: Range<usize> = 45..48;
pub const GOAL_POSITION: Range<usize> = 48..51;
pub const OPPONENT_POSITION: Range<usize> = 51..54;
pub const BALL_TO_GOAL: Range<usize> = 54..57;
pub const GOAL_DISTANCE: usize = 57;

pub const PROPRIOCEPTIVE: Range<usize> = 0..42;
pub const EXTEROCEPTIVE: Range<usize> = 42..58;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Observation58([f64; OBS_DIM]);

impl Observation58 {
    pub fn zeros() -> Self {
        Self([0.0; OBS_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    fn put(&mut self, range: Range<usize>, v: &Vector3<f64>) {
        self.0[range].copy_from_slice(v.as_slice());
    }
}

impl TryFrom<&[f64]> for Observation58 {
    type Error = Error;

    fn try_from(v: &[f64]) -> Result<Self> {
        let arr: [f64; OBS_DIM] = v.try_into().map_err(|_| Error::Length {
            what: "observation",
            expected: OBS_DIM,
            got: v.len(),
        })?;
        Ok(Self(arr))
    }
}

impl TryFrom<Vec<f64>> for Observation58 {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::try_from(v.as_slice())
    }
}

impl From<Observation58> for Vec<f64> {
    fn from(o: Observation58) -> Self {
        o.0.to_vec()
    }
}

/// Basis of the torso's yaw-aligned frame.
pub struct HeadingFrame {
    forward: Vector3<f64>,
    right: Vector3<f64>,
}

impl HeadingFrame {
    pub fn of(s: &RobotState) -> Self {
        let fwd = s.forward_axis();
        // lying on the back or front, the forward axis is near vertical;
        // head direction (the up axis) then gives the heading
        let source = if fwd.x.hypot(fwd.z) > 1e-6 {
            fwd
        } else {
            s.up_axis()
        };
        let forward = horizontal_unit(&source);
        let right = forward.cross(&Vector3::y());
        Self { forward, right }
    }

    pub fn express(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(v.dot(&self.forward), v.y, v.dot(&self.right))
    }

    pub fn forward(&self) -> Vector3<f64> {
        self.forward
    }
}

/// Horizontal distance from the robot to the goal it attacks.
pub fn goal_distance(cfg: &EnvConfig, s: &RobotState) -> f64 {
    let d = cfg.field.target_goal() - s.position;
    d.x.hypot(d.z)
}

/// Build the observation for robot `index`.
pub fn observe(
    cfg: &EnvConfig,
    world: &World,
    index: usize,
    clock: &PhaseClock,
    prev_residual: &JointVector,
) -> Observation58 {
    let robot = &world.robots[index];
    let s = &robot.state;
    let heading = HeadingFrame::of(s);
    let mut o = Observation58::zeros();

    o.0[JOINT_ANGLES].copy_from_slice(&s.joint_angles);
    o.0[JOINT_VELOCITIES].copy_from_slice(&s.joint_velocities);
    o.0[PREV_RESIDUAL].copy_from_slice(prev_residual);
    o.put(UP_AXIS, &s.up_axis());
    o.put(
        ANGULAR_VELOCITY,
        &(s.orientation.inverse() * s.angular_velocity),
    );
    o.put(LINEAR_VELOCITY, &heading.express(&s.linear_velocity));
    o.0[HEIGHT] = s.position.y;
    o.0[PHASE].copy_from_slice(&clock.encoding());

    let ball_pos = flip_vec(&world.ball.position, robot.flipped);
    let ball_vel = flip_vec(&world.ball.velocity, robot.flipped);
    let goal = cfg.field.target_goal();
    o.put(BALL_POSITION, &heading.express(&(ball_pos - s.position)));
    o.put(BALL_VELOCITY, &heading.express(&ball_vel));
    o.put(GOAL_POSITION, &heading.express(&(goal - s.position)));
    if let Some(other) = world.robots.iter().enumerate().find(|(i, _)| *i != index) {
        let opp = flip_vec(&other.1.world_position(), robot.flipped);
        o.put(OPPONENT_POSITION, &heading.express(&(opp - s.position)));
    }
    o.put(BALL_TO_GOAL, &heading.express(&(goal - ball_pos)));
    o.0[GOAL_DISTANCE] = goal_distance(cfg, s) / cfg.d_max();
    o
}
