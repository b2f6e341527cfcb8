//! Robot morphology, state and leg kinematics.
//!
//! The torso is a rigid box carrying most of the robot mass. Each leg is a
//! five-joint chain (hip yaw, hip roll, hip pitch, knee, ankle) whose mass is
//! lumped in two points, half at the knee and half at the ankle; the joints
//! have rotor inertia and are driven by PD servos. Ground contact acts at the
//! knees, heels, toes and torso corners.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{JointLimits, JointVector, JOINT_COUNT};

pub const JOINTS_PER_LEG: usize = 5;
pub const HIP_YAW: usize = 0;
pub const HIP_ROLL: usize = 1;
pub const HIP_PITCH: usize = 2;
pub const KNEE: usize = 3;
pub const ANKLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub const BOTH: [Leg; 2] = [Leg::Left, Leg::Right];

    pub fn first_joint(self) -> usize {
        match self {
            Leg::Left => 0,
            Leg::Right => JOINTS_PER_LEG,
        }
    }

    /// Lateral sign; +z points to the robot's right.
    fn side(self) -> f64 {
        match self {
            Leg::Left => -1.0,
            Leg::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyModel {
    pub torso_mass: f64,
    pub leg_mass: f64,
    /// Half extents of the torso box: forward, up, lateral (m).
    pub torso_half_extents: [f64; 3],
    /// Hip joint below the torso centre (m).
    pub hip_drop: f64,
    /// Lateral hip spacing from the centre line (m).
    pub hip_width: f64,
    pub thigh: f64,
    pub shank: f64,
    /// Ankle height above the sole (m).
    pub sole: f64,
    pub heel: f64,
    pub toe: f64,
    /// Rotor inertia reflected at each joint (kg m^2).
    pub armature: f64,
    /// Passive joint friction (N m s/rad).
    pub joint_damping: f64,
    pub torque_limit: f64,
    pub joint_limits: JointLimits,
    /// Joint stop spring engaging `limit_margin` inside each hard limit.
    pub limit_stiffness: f64,
    pub limit_damping: f64,
    pub limit_margin: f64,
}

impl Default for BodyModel {
    fn default() -> Self {
        Self {
            torso_mass: 2.6,
            leg_mass: 0.2,
            torso_half_extents: [0.06, 0.08, 0.09],
            hip_drop: 0.06,
            hip_width: 0.055,
            thigh: 0.165,
            shank: 0.165,
            sole: 0.035,
            heel: 0.05,
            toe: 0.08,
            armature: 0.05,
            joint_damping: 0.05,
            torque_limit: 8.0,
            joint_limits: mechanical_limits(),
            limit_stiffness: 1000.0,
            limit_damping: 2.0,
            limit_margin: 0.1,
        }
    }
}

/// Command range everywhere, except that knees fold further than they are driven.
fn mechanical_limits() -> JointLimits {
    let mut limits = JointLimits::default();
    for leg in Leg::BOTH {
        limits.upper[leg.first_joint() + KNEE] = 2.6;
    }
    limits
}

impl BodyModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("torso_mass", self.torso_mass),
            ("leg_mass", self.leg_mass),
            ("thigh", self.thigh),
            ("shank", self.shank),
            ("armature", self.armature),
            ("torque_limit", self.torque_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("env.body.{name} must be positive")));
            }
        }
        if self.torso_half_extents.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("env.body.torso_half_extents must be positive".into()));
        }
        if self.limit_stiffness < 0.0 || self.limit_damping < 0.0 || self.limit_margin < 0.0 {
            return Err(Error::Config("env.body joint stop parameters must be >= 0".into()));
        }
        if self.joint_damping < 0.0 {
            return Err(Error::Config("env.body.joint_damping must be >= 0".into()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.torso_mass + 2.0 * self.leg_mass
    }

    /// Body-frame inertia of the torso box about its centre.
    pub fn inertia(&self) -> Matrix3<f64> {
        let [hx, hy, hz] = self.torso_half_extents.map(|h| 2.0 * h);
        let m = self.torso_mass;
        Matrix3::from_diagonal(&Vector3::new(
            m / 12.0 * (hy * hy + hz * hz),
            m / 12.0 * (hx * hx + hz * hz),
            m / 12.0 * (hx * hx + hy * hy),
        ))
    }

    /// Torso centre height when standing on flat feet in `pose`, ignoring contact compliance.
    pub fn standing_height(&self, pose: &JointVector) -> f64 {
        let state = RobotState::at_rest(Vector3::zeros(), *pose);
        let lowest = Leg::BOTH
            .iter()
            .flat_map(|&leg| {
                let k = state.leg(self, leg);
                [k.heel.y, k.toe.y]
            })
            .fold(f64::INFINITY, f64::min);
        -lowest
    }

    /// Torso box corners in the body frame.
    pub fn torso_corners(&self) -> [Vector3<f64>; 8] {
        let [hx, hy, hz] = self.torso_half_extents;
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -hx } else { hx };
            let sy = if i & 2 == 0 { -hy } else { hy };
            let sz = if i & 4 == 0 { -hz } else { hz };
            *c = Vector3::new(sx, sy, sz);
        }
        out
    }
}

/// Robot state, expressed in the robot's team frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    /// World-frame angular velocity.
    pub angular_velocity: Vector3<f64>,
    pub joint_angles: JointVector,
    pub joint_velocities: JointVector,
}

/// World-frame kinematics of one leg.
#[derive(Debug, Clone, Copy)]
pub struct LegKinematics {
    pub origins: [Vector3<f64>; JOINTS_PER_LEG],
    pub axes: [Vector3<f64>; JOINTS_PER_LEG],
    pub knee: Vector3<f64>,
    pub ankle: Vector3<f64>,
    pub heel: Vector3<f64>,
    pub toe: Vector3<f64>,
}

impl LegKinematics {
    /// Velocity contribution of the leg joints at point `p` driven by joints `0..n`.
    pub fn point_velocity(&self, p: &Vector3<f64>, rates: &[f64], n: usize) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for j in 0..n {
            v += self.axes[j].cross(&(p - self.origins[j])) * rates[j];
        }
        v
    }

    /// Joint torques produced by force `f` acting at `p`, for joints `0..n`.
    pub fn transpose_torques(&self, p: &Vector3<f64>, f: &Vector3<f64>, n: usize, out: &mut [f64]) {
        for j in 0..n {
            out[j] += self.axes[j].dot(&(p - self.origins[j]).cross(f));
        }
    }
}

impl RobotState {
    pub fn at_rest(position: Vector3<f64>, joint_angles: JointVector) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            joint_angles,
            joint_velocities: [0.0; JOINT_COUNT],
        }
    }

    pub fn up_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::y()
    }

    pub fn forward_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::x()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && self.joint_angles.iter().all(|v| v.is_finite())
            && self.joint_velocities.iter().all(|v| v.is_finite())
    }

    /// Pitch and roll of the torso in degrees (pitch positive nose-down).
    pub fn pitch_roll_deg(&self) -> (f64, f64) {
        let up = self.up_axis();
        let fwd = self.forward_axis();
        let right = fwd.cross(&Vector3::y());
        let pitch = up.dot(&horizontal_unit(&fwd)).clamp(-1.0, 1.0).asin();
        let roll = if right.norm() > 1e-9 {
            up.dot(&right.normalize()).clamp(-1.0, 1.0).asin()
        } else {
            0.0
        };
        (pitch.to_degrees(), roll.to_degrees())
    }

    pub fn leg(&self, body: &BodyModel, leg: Leg) -> LegKinematics {
        let q = &self.joint_angles[leg.first_joint()..leg.first_joint() + JOINTS_PER_LEG];
        let base = self.orientation.to_rotation_matrix();
        let hip = self.position
            + base * Vector3::new(0.0, -body.hip_drop, leg.side() * body.hip_width);

        let r_yaw = base * Rotation3::from_axis_angle(&Vector3::y_axis(), q[HIP_YAW]);
        let r_roll = r_yaw * Rotation3::from_axis_angle(&Vector3::x_axis(), q[HIP_ROLL]);
        let r_pitch = r_roll * Rotation3::from_axis_angle(&Vector3::z_axis(), q[HIP_PITCH]);
        let knee = hip + r_pitch * Vector3::new(0.0, -body.thigh, 0.0);
        let r_knee = r_pitch * Rotation3::from_axis_angle(&Vector3::z_axis(), -q[KNEE]);
        let ankle = knee + r_knee * Vector3::new(0.0, -body.shank, 0.0);
        let r_foot = r_knee * Rotation3::from_axis_angle(&Vector3::z_axis(), q[ANKLE]);
        let heel = ankle + r_foot * Vector3::new(-body.heel, -body.sole, 0.0);
        let toe = ankle + r_foot * Vector3::new(body.toe, -body.sole, 0.0);

        LegKinematics {
            origins: [hip, hip, hip, knee, ankle],
            axes: [
                base * Vector3::y(),
                r_yaw * Vector3::x(),
                r_roll * Vector3::z(),
                -(r_pitch * Vector3::z()),
                r_knee * Vector3::z(),
            ],
            knee,
            ankle,
            heel,
            toe,
        }
    }

    /// Velocity of a point rigidly attached to the torso.
    pub fn torso_point_velocity(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.linear_velocity + self.angular_velocity.cross(&(p - self.position))
    }
}

/// Unit horizontal projection of `v`, or the forward axis when `v` is vertical.
pub fn horizontal_unit(v: &Vector3<f64>) -> Vector3<f64> {
    let h = Vector3::new(v.x, 0.0, v.z);
    let n = h.norm();
    if n > 1e-9 {
        h / n
    } else {
        Vector3::x()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::GaitProfile;

    #[test]
    fn default_pose_stands_near_nominal_height() {
        let body = BodyModel::default();
        let h = body.standing_height(&GaitProfile::default().offset);
        assert!((h - 0.41).abs() < 0.01, "{h}");
    }

    #[test]
    fn torso_carries_most_mass() {
        let body = BodyModel::default();
        assert!(body.torso_mass / body.total_mass() >= 0.85);
    }

    #[test]
    fn default_feet_are_flat_and_below_hips() {
        let body = BodyModel::default();
        let s = RobotState::at_rest(Vector3::zeros(), GaitProfile::default().offset);
        for leg in Leg::BOTH {
            let k = s.leg(&body, leg);
            assert!((k.heel.y - k.toe.y).abs() < 1e-12);
            assert!(k.ankle.y < k.knee.y && k.knee.y < -body.hip_drop);
            assert!(k.toe.x > k.heel.x);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let body = BodyModel::default();
        let mut s = RobotState::at_rest(Vector3::new(0.1, 0.3, -0.2), [0.0; JOINT_COUNT]);
        s.orientation = UnitQuaternion::from_euler_angles(0.3, -0.2, 0.7);
        s.joint_angles = [0.1, -0.2, 0.5, 0.8, -0.3, -0.1, 0.2, 0.4, 0.6, 0.2];
        let h = 1e-7;
        for leg in Leg::BOTH {
            let k = s.leg(&body, leg);
            for j in 0..JOINTS_PER_LEG {
                let mut rates = [0.0; JOINTS_PER_LEG];
                rates[j] = 1.0;
                let analytic = k.point_velocity(&k.toe, &rates, JOINTS_PER_LEG);
                let mut sp = s.clone();
                sp.joint_angles[leg.first_joint() + j] += h;
                let mut sm = s.clone();
                sm.joint_angles[leg.first_joint() + j] -= h;
                let fd = (sp.leg(&body, leg).toe - sm.leg(&body, leg).toe) / (2.0 * h);
                assert!((analytic - fd).norm() < 1e-6, "joint {j}: {analytic} vs {fd}");
            }
        }
    }

    #[test]
    fn pitch_roll_signs() {
        let mut s = RobotState::at_rest(Vector3::zeros(), [0.0; JOINT_COUNT]);
        // nose down: rotate about -z
        s.orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -0.2);
        let (pitch, roll) = s.pitch_roll_deg();
        assert!((pitch - 0.2f64.to_degrees()).abs() < 1e-9);
        assert!(roll.abs() < 1e-9);
    }
}
