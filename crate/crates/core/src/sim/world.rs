//! World state and the fixed-step integrator.

use nalgebra::{SMatrix, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::curriculum::Wrench;
use crate::error::{Error, Result};
use crate::gait::{JointTargets, JOINT_COUNT};
use crate::sim::body::{BodyModel, Leg, LegKinematics, RobotState, JOINTS_PER_LEG};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServoGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for ServoGains {
    fn default() -> Self {
        Self { kp: 30.0, kd: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    /// Normal stiffness per contact point (N/m).
    pub stiffness: f64,
    /// Normal damping per contact point (N s/m).
    pub damping: f64,
    /// Tangential viscous coefficient before the Coulomb clamp (N s/m).
    pub tangential_damping: f64,
    pub friction: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 5000.0,
            damping: 60.0,
            tangential_damping: 300.0,
            friction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallParams {
    pub radius: f64,
    pub mass: f64,
    /// Rolling resistance as a fraction of g.
    pub rolling_resistance: f64,
    pub ground_restitution: f64,
    pub wall_restitution: f64,
    pub kick_restitution: f64,
    /// Radius of the spherical foot and knee contact used against the ball (m).
    pub foot_radius: f64,
}

impl Default for BallParams {
    fn default() -> Self {
        Self {
            radius: 0.06,
            mass: 0.15,
            rolling_resistance: 0.06,
            ground_restitution: 0.5,
            wall_restitution: 0.6,
            kick_restitution: 0.5,
            foot_radius: 0.025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldParams {
    /// Along x, goal lines at +-length/2 (m).
    pub length: f64,
    /// Along z (m).
    pub width: f64,
    pub goal_width: f64,
    pub goal_depth: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            length: 6.0,
            width: 4.0,
            goal_width: 1.0,
            goal_depth: 0.3,
        }
    }
}

impl FieldParams {
    pub fn diagonal(&self) -> f64 {
        self.length.hypot(self.width)
    }

    /// Centre of the goal a team attacks, in that team's frame.
    pub fn target_goal(&self) -> Vector3<f64> {
        Vector3::new(self.length / 2.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub dt: f64,
    pub gravity: bool,
    pub servo: ServoGains,
    pub contact: ContactParams,
    pub ball: BallParams,
    pub field: FieldParams,
    pub body: BodyModel,
    /// Goal-distance normalisation; defaults to the field diagonal when absent.
    pub d_max: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            gravity: true,
            servo: ServoGains::default(),
            contact: ContactParams::default(),
            ball: BallParams::default(),
            field: FieldParams::default(),
            body: BodyModel::default(),
            d_max: None,
        }
    }
}

impl EnvConfig {
    pub fn d_max(&self) -> f64 {
        self.d_max.unwrap_or_else(|| self.field.diagonal())
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        if self.gravity {
            Vector3::new(0.0, -GRAVITY, 0.0)
        } else {
            Vector3::zeros()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config("env.dt must be positive".into()));
        }
        if !(self.servo.kp >= 0.0 && self.servo.kd >= 0.0) {
            return Err(Error::Config("env.servo gains must be non-negative".into()));
        }
        if !(self.contact.stiffness > 0.0 && self.contact.damping >= 0.0) {
            return Err(Error::Config("env.contact parameters out of range".into()));
        }
        if !(self.ball.radius > 0.0 && self.ball.mass > 0.0) {
            return Err(Error::Config("env.ball radius and mass must be positive".into()));
        }
        if !(self.field.length > 0.0 && self.field.width > 0.0) {
            return Err(Error::Config("env.field dimensions must be positive".into()));
        }
        if !(self.d_max() > 0.0) {
            return Err(Error::Config("env.d_max must be positive".into()));
        }
        self.body.validate()
    }
}

/// A robot and the frame it plays in. Team frames differ from the world
/// frame by a half turn about the vertical, so every robot attacks +x in
/// its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub state: RobotState,
    pub flipped: bool,
}

/// Map between a team frame and the world frame (an involution).
pub fn flip_vec(v: &Vector3<f64>, flipped: bool) -> Vector3<f64> {
    if flipped {
        Vector3::new(-v.x, v.y, -v.z)
    } else {
        *v
    }
}

impl Robot {
    pub fn world_position(&self) -> Vector3<f64> {
        flip_vec(&self.state.position, self.flipped)
    }

    pub fn world_velocity(&self) -> Vector3<f64> {
        flip_vec(&self.state.linear_velocity, self.flipped)
    }

    pub fn world_orientation(&self) -> UnitQuaternion<f64> {
        if self.flipped {
            let q = &self.state.orientation;
            // half turn about y composed on the left
            UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(-q.j, q.k, q.w, -q.i))
        } else {
            self.state.orientation
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Which end the ball went in, by the team that attacks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalFor {
    /// The goal at world +x.
    Home,
    /// The goal at world -x.
    Away,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Per robot: its legs or torso struck the ball this frame.
    pub kicked: Vec<bool>,
    pub goal: Option<GoalFor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub robots: Vec<Robot>,
    pub ball: Ball,
    pub frame: u64,
}

/// Generalised velocity: torso linear (3), torso angular (3), joints (10).
const DOF: usize = 6 + JOINT_COUNT;
type DofMatrix = SMatrix<f64, DOF, DOF>;
type DofVector = SVector<f64, DOF>;

struct RobotForces {
    /// Generalised force without gravity.
    generalized: DofVector,
    /// Velocity and position derivatives of the generalised force (negated),
    /// used for the linearised implicit step.
    damping: DofMatrix,
    stiffness: DofMatrix,
}

impl World {
    /// Advance one frame. `targets` and `assists` are indexed like `robots`;
    /// assist wrenches are expressed in each robot's own frame.
    pub fn step(
        &mut self,
        cfg: &EnvConfig,
        targets: &[JointTargets],
        assists: &[Wrench],
    ) -> Result<StepReport> {
        if targets.len() != self.robots.len() || assists.len() != self.robots.len() {
            return Err(Error::Length {
                what: "per-robot commands",
                expected: self.robots.len(),
                got: targets.len().min(assists.len()),
            });
        }
        let g = cfg.gravity_vector();

        // ball impulses come from the pre-step state of every robot, summed
        let mut ball_dv = Vector3::zeros();
        let mut ball_dx = Vector3::zeros();
        let mut kicked = Vec::with_capacity(self.robots.len());
        for robot in &self.robots {
            let hit = ball_contact(cfg, robot, &self.ball);
            kicked.push(hit.is_some());
            if let Some((dv, dx)) = hit {
                ball_dv += dv;
                ball_dx += dx;
            }
        }

        for (i, robot) in self.robots.iter_mut().enumerate() {
            let forces = robot_forces(cfg, &robot.state, &targets[i]);
            integrate_robot(cfg, &mut robot.state, &forces, &assists[i], &g);
            if !robot.state.is_finite() {
                return Err(Error::Unstable {
                    frame: self.frame,
                    detail: format!("robot {i} state is not finite"),
                });
            }
        }

        let goal = integrate_ball(cfg, &mut self.ball, ball_dv, ball_dx, &g);
        if !(self.ball.position.iter().chain(self.ball.velocity.iter())).all(|v| v.is_finite()) {
            return Err(Error::Unstable {
                frame: self.frame,
                detail: "ball state is not finite".into(),
            });
        }
        self.frame += 1;
        Ok(StepReport { kicked, goal })
    }

    /// Add an instantaneous impulse (N s, world frame) at a robot's centre of mass.
    pub fn knockdown(&mut self, cfg: &EnvConfig, robot: usize, impulse: &Vector3<f64>) -> Result<()> {
        if impulse.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("knockdown impulse"));
        }
        let r = self
            .robots
            .get_mut(robot)
            .ok_or_else(|| Error::Config(format!("no robot {robot}")))?;
        let dv = flip_vec(impulse, r.flipped) / cfg.body.total_mass();
        r.state.linear_velocity += dv;
        Ok(())
    }
}

/// All ground contact points of a robot with the data needed to map forces.
enum ContactSite {
    Torso,
    Leg { leg: Leg, joints: usize },
}

fn contact_points(cfg: &EnvConfig, s: &RobotState) -> (Vec<(Vector3<f64>, ContactSite)>, [LegKinematics; 2]) {
    let legs = [s.leg(&cfg.body, Leg::Left), s.leg(&cfg.body, Leg::Right)];
    let mut pts = Vec::with_capacity(14);
    for (leg, k) in Leg::BOTH.iter().zip(&legs) {
        pts.push((k.knee, ContactSite::Leg { leg: *leg, joints: 3 }));
        pts.push((k.heel, ContactSite::Leg { leg: *leg, joints: JOINTS_PER_LEG }));
        pts.push((k.toe, ContactSite::Leg { leg: *leg, joints: JOINTS_PER_LEG }));
    }
    let rot = s.orientation.to_rotation_matrix();
    for c in cfg.body.torso_corners() {
        pts.push((s.position + rot * c, ContactSite::Torso));
    }
    (pts, legs)
}

/// Ground reaction at a point, plus the active tangential damping, normal
/// damping and normal stiffness (zero when inactive or clamped). A point
/// still above the ground that will be inside it by the end of the step is
/// included with its (possibly negative) linear force, so that contact onset
/// is resolved by the implicit step.
fn ground_force(c: &ContactParams, p: &Vector3<f64>, v: &Vector3<f64>, dt: f64) -> Option<(Vector3<f64>, [f64; 3])> {
    let depth = -p.y;
    let raw = c.stiffness * depth - c.damping * v.y;
    if depth <= 0.0 {
        let ahead = c.stiffness * (depth - dt * v.y) - c.damping * v.y;
        if ahead <= 0.0 {
            return None;
        }
        return Some((Vector3::new(0.0, raw, 0.0), [0.0, c.damping, c.stiffness]));
    }
    if raw <= 0.0 {
        return Some((Vector3::zeros(), [0.0; 3]));
    }
    // sliding friction stays viscous, with the coefficient lowered so the
    // force sits on the Coulomb limit; keeps the tangential term implicit
    let speed = v.x.hypot(v.z);
    let ct = if c.tangential_damping * speed > c.friction * raw {
        c.friction * raw / speed
    } else {
        c.tangential_damping
    };
    Some((Vector3::new(-ct * v.x, raw, -ct * v.z), [ct, c.damping, c.stiffness]))
}

fn robot_forces(cfg: &EnvConfig, s: &RobotState, targets: &JointTargets) -> RobotForces {
    let body = &cfg.body;
    let mut generalized = DofVector::zeros();
    let mut damping = DofMatrix::zeros();
    let mut stiffness = DofMatrix::zeros();
    for j in 0..JOINT_COUNT {
        let servo = cfg.servo.kp * (targets.0[j] - s.joint_angles[j])
            - cfg.servo.kd * s.joint_velocities[j];
        let d = 6 + j;
        damping[(d, d)] += body.joint_damping;
        if servo.abs() < body.torque_limit {
            damping[(d, d)] += cfg.servo.kd;
            stiffness[(d, d)] += cfg.servo.kp;
        }
        generalized[d] = servo.clamp(-body.torque_limit, body.torque_limit)
            - body.joint_damping * s.joint_velocities[j];

        let (q, qd) = (s.joint_angles[j], s.joint_velocities[j]);
        let ahead = q + cfg.dt * qd;
        let lo = body.joint_limits.lower[j] + body.limit_margin;
        let hi = body.joint_limits.upper[j] - body.limit_margin;
        let stop = if q > hi || ahead > hi {
            Some(hi)
        } else if q < lo || ahead < lo {
            Some(lo)
        } else {
            None
        };
        if let Some(edge) = stop {
            generalized[d] -= body.limit_stiffness * (q - edge) + body.limit_damping * qd;
            damping[(d, d)] += body.limit_damping;
            stiffness[(d, d)] += body.limit_stiffness;
        }
    }

    let (points, legs) = contact_points(cfg, s);
    let mut cols: Vec<(usize, Vector3<f64>)> = Vec::with_capacity(DOF);
    for (p, site) in &points {
        point_jacobian(s, &legs, p, site, &mut cols);
        let mut v = Vector3::zeros();
        for (i, c) in &cols {
            v += c * velocity_component(s, *i);
        }
        let Some((f, [ct, cn, kn])) = ground_force(&cfg.contact, p, &v, cfg.dt) else {
            continue;
        };
        for (a, ja) in &cols {
            generalized[*a] += ja.dot(&f);
            for (b, jb) in &cols {
                damping[(*a, *b)] += ct * (ja.x * jb.x + ja.z * jb.z) + cn * ja.y * jb.y;
                stiffness[(*a, *b)] += kn * ja.y * jb.y;
            }
        }
    }
    RobotForces {
        generalized,
        damping,
        stiffness,
    }
}

/// Jacobian columns of a point: (dof index, point velocity per unit rate).
fn point_jacobian(
    s: &RobotState,
    legs: &[LegKinematics; 2],
    p: &Vector3<f64>,
    site: &ContactSite,
    cols: &mut Vec<(usize, Vector3<f64>)>,
) {
    let r = p - s.position;
    cols.clear();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        cols.push((k, e));
        cols.push((3 + k, e.cross(&r)));
    }
    if let ContactSite::Leg { leg, joints } = site {
        let k = &legs[leg_index(*leg)];
        for j in 0..*joints {
            cols.push((6 + leg.first_joint() + j, k.axes[j].cross(&(p - k.origins[j]))));
        }
    }
}

/// Acceleration of point `p` (moved by joints `0..n` of leg `k`) when every
/// generalised acceleration is zero: the velocity-product part of its motion.
fn bias_acceleration(s: &RobotState, k: &LegKinematics, rates: &[f64], p: &Vector3<f64>, n: usize) -> Vector3<f64> {
    let w = s.angular_velocity;
    let p_rel = k.point_velocity(p, rates, n);
    let mut acc = w.cross(&(w.cross(&(p - s.position)) + p_rel));
    let mut frame_rate = w;
    for j in 0..n {
        let origin_rel = k.point_velocity(&k.origins[j], rates, j);
        let axis_rate = frame_rate.cross(&k.axes[j]);
        let lever = p - k.origins[j];
        // relative velocity of p with respect to the joint origin
        let dp = w.cross(&lever) + p_rel - origin_rel;
        acc += (axis_rate.cross(&lever) + k.axes[j].cross(&dp)) * rates[j];
        frame_rate += k.axes[j] * rates[j];
    }
    acc
}

/// Points carrying leg mass, with the number of joints that move each.
fn leg_masses(body: &BodyModel, k: &LegKinematics) -> [(Vector3<f64>, usize, f64); 2] {
    let m = 0.5 * body.leg_mass;
    [(k.knee, 3, m), (k.ankle, 4, m)]
}

/// Mass matrix and the generalised gravity, gyroscopic and velocity-product
/// forces of the torso plus the leg point masses.
fn mass_and_bias(cfg: &EnvConfig, s: &RobotState, legs: &[LegKinematics; 2], g: &Vector3<f64>) -> (DofMatrix, DofVector) {
    let body = &cfg.body;
    let rot = s.orientation.to_rotation_matrix();
    let inertia = rot.matrix() * body.inertia() * rot.matrix().transpose();
    let mut m = DofMatrix::zeros();
    let mut force = DofVector::zeros();
    for k in 0..3 {
        m[(k, k)] = body.torso_mass;
        force[k] = body.torso_mass * g[k];
    }
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&inertia);
    let gyro = s.angular_velocity.cross(&(inertia * s.angular_velocity));
    for k in 0..3 {
        force[3 + k] = -gyro[k];
    }
    for j in 0..JOINT_COUNT {
        m[(6 + j, 6 + j)] = body.armature;
    }
    let mut cols = Vec::with_capacity(DOF);
    for (leg, k) in Leg::BOTH.iter().zip(legs) {
        let first = leg.first_joint();
        let rates = &s.joint_velocities[first..first + JOINTS_PER_LEG];
        for (p, joints, mass) in leg_masses(body, k) {
            point_jacobian(s, legs, &p, &ContactSite::Leg { leg: *leg, joints }, &mut cols);
            let f = mass * (g - bias_acceleration(s, k, rates, &p, joints));
            for (a, ja) in &cols {
                force[*a] += ja.dot(&f);
                for (b, jb) in &cols {
                    m[(*a, *b)] += mass * ja.dot(jb);
                }
            }
        }
    }
    (m, force)
}

fn velocity_component(s: &RobotState, i: usize) -> f64 {
    match i {
        0..3 => s.linear_velocity[i],
        3..6 => s.angular_velocity[i - 3],
        _ => s.joint_velocities[i - 6],
    }
}

fn leg_index(leg: Leg) -> usize {
    match leg {
        Leg::Left => 0,
        Leg::Right => 1,
    }
}

fn integrate_robot(
    cfg: &EnvConfig,
    s: &mut RobotState,
    f: &RobotForces,
    assist: &Wrench,
    g: &Vector3<f64>,
) {
    let dt = cfg.dt;
    let body = &cfg.body;
    let legs = [s.leg(body, Leg::Left), s.leg(body, Leg::Right)];
    let (m, bias) = mass_and_bias(cfg, s, &legs, g);
    let mut force = f.generalized + bias;
    let mut v = DofVector::zeros();
    for k in 0..3 {
        v[k] = s.linear_velocity[k];
        v[3 + k] = s.angular_velocity[k];
        force[k] += assist.force[k];
        force[3 + k] += assist.torque[k];
    }
    for j in 0..JOINT_COUNT {
        v[6 + j] = s.joint_velocities[j];
    }

    // implicit velocity update linearised about the current state, positions
    // from the mean of old and new velocities (exact under constant force)
    let a = m + f.damping * dt + f.stiffness * (0.5 * dt * dt);
    let rhs = (force - f.stiffness * v * dt) * dt;
    let dv = match a.cholesky() {
        Some(c) => c.solve(&rhs),
        None => m.try_inverse().unwrap_or_else(DofMatrix::zeros) * rhs,
    };
    let mean = v + dv * 0.5;
    let v = v + dv;

    let mut spin_rate = Vector3::zeros();
    for k in 0..3 {
        s.position[k] += dt * mean[k];
        spin_rate[k] = mean[3 + k];
        s.linear_velocity[k] = v[k];
        s.angular_velocity[k] = v[3 + k];
    }
    let spin = UnitQuaternion::from_scaled_axis(spin_rate * dt);
    s.orientation = UnitQuaternion::new_normalize((spin * s.orientation).into_inner());

    let limits = &body.joint_limits;
    for j in 0..JOINT_COUNT {
        s.joint_velocities[j] = v[6 + j];
        let next = s.joint_angles[j] + dt * mean[6 + j];
        let clamped = limits.clamp(j, next);
        if clamped != next {
            s.joint_velocities[j] = 0.0;
        }
        s.joint_angles[j] = clamped;
    }
}

/// Velocity change and position correction for the ball from one robot.
fn ball_contact(cfg: &EnvConfig, robot: &Robot, ball: &Ball) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let bp = &cfg.ball;
    let s = &robot.state;
    // work in the robot's frame so mirrored robots see mirrored contacts
    let ball_pos = flip_vec(&ball.position, robot.flipped);
    let ball_vel = flip_vec(&ball.velocity, robot.flipped);

    let mut best: Option<(f64, Vector3<f64>, Vector3<f64>, f64)> = None;
    let mut consider = |p: Vector3<f64>, v: Vector3<f64>, radius: f64, mass: f64| {
        let d = ball_pos - p;
        let dist = d.norm();
        let reach = bp.radius + radius;
        if dist >= reach || dist < 1e-12 {
            return;
        }
        let n = d / dist;
        let rel = v - ball_vel;
        if rel.dot(&n) <= 0.0 {
            return;
        }
        if best.as_ref().is_none_or(|b| dist < b.0) {
            let share = (1.0 + bp.kick_restitution) * mass / (mass + bp.mass);
            best = Some((dist, rel * share, n * (reach - dist), mass));
        }
    };

    let legs = [s.leg(&cfg.body, Leg::Left), s.leg(&cfg.body, Leg::Right)];
    for (leg, k) in Leg::BOTH.iter().zip(&legs) {
        let first = leg.first_joint();
        let rates = &s.joint_velocities[first..first + JOINTS_PER_LEG];
        for (p, n) in [(k.knee, 3), (k.ankle, 4), (k.heel, 5), (k.toe, 5)] {
            let v = s.torso_point_velocity(&p) + k.point_velocity(&p, rates, n);
            consider(p, v, bp.foot_radius, cfg.body.leg_mass + 0.5 * cfg.body.torso_mass);
        }
    }
    let torso_radius = cfg.body.torso_half_extents[0];
    consider(s.position, s.linear_velocity, torso_radius, cfg.body.total_mass());

    best.map(|(_, dv, dx, _)| (flip_vec(&dv, robot.flipped), flip_vec(&dx, robot.flipped)))
}

fn integrate_ball(
    cfg: &EnvConfig,
    ball: &mut Ball,
    dv: Vector3<f64>,
    dx: Vector3<f64>,
    g: &Vector3<f64>,
) -> Option<GoalFor> {
    let bp = &cfg.ball;
    let field = &cfg.field;
    let dt = cfg.dt;
    let r = bp.radius;
    let before_x = ball.position.x;

    ball.velocity += dv;
    ball.position += dx;
    ball.velocity += dt * g;
    ball.position += dt * ball.velocity - 0.5 * dt * dt * g;

    if ball.position.y < r {
        ball.position.y = r;
        if ball.velocity.y < 0.0 {
            ball.velocity.y = -bp.ground_restitution * ball.velocity.y;
            if ball.velocity.y < 0.1 {
                ball.velocity.y = 0.0;
            }
        }
    }
    if ball.position.y <= r + 1e-9 && cfg.gravity {
        let speed = ball.velocity.x.hypot(ball.velocity.z);
        if speed > 0.0 {
            let slowed = (speed - bp.rolling_resistance * GRAVITY * dt).max(0.0);
            ball.velocity.x *= slowed / speed;
            ball.velocity.z *= slowed / speed;
        }
    }

    let half_w = field.width / 2.0;
    reflect(&mut ball.position.z, &mut ball.velocity.z, half_w - r, bp.wall_restitution);

    let half_l = field.length / 2.0;
    let in_mouth = ball.position.z.abs() < field.goal_width / 2.0 - r;
    let x_limit = if in_mouth {
        half_l + field.goal_depth - r
    } else {
        half_l - r
    };
    reflect(&mut ball.position.x, &mut ball.velocity.x, x_limit, bp.wall_restitution);

    let inside_posts = ball.position.z.abs() < field.goal_width / 2.0;
    if inside_posts && before_x.abs() <= half_l && ball.position.x.abs() > half_l {
        return Some(if ball.position.x > 0.0 {
            GoalFor::Home
        } else {
            GoalFor::Away
        });
    }
    None
}

fn reflect(pos: &mut f64, vel: &mut f64, limit: f64, restitution: f64) {
    if *pos > limit {
        *pos = limit;
        if *vel > 0.0 {
            *vel = -restitution * *vel;
        }
    } else if *pos < -limit {
        *pos = -limit;
        if *vel < 0.0 {
            *vel = -restitution * *vel;
        }
    }
}

/// Mechanical energy of a robot: kinetic, rotor, gravitational, contact
/// spring and joint stop spring.
pub fn robot_energy(cfg: &EnvConfig, s: &RobotState) -> f64 {
    let body = &cfg.body;
    let legs = [s.leg(body, Leg::Left), s.leg(body, Leg::Right)];
    let (m, _) = mass_and_bias(cfg, s, &legs, &Vector3::zeros());
    let mut v = DofVector::zeros();
    for k in 0..3 {
        v[k] = s.linear_velocity[k];
        v[3 + k] = s.angular_velocity[k];
    }
    for j in 0..JOINT_COUNT {
        v[6 + j] = s.joint_velocities[j];
    }
    let kinetic = 0.5 * v.dot(&(m * v));
    let potential = if cfg.gravity {
        let legs_h: f64 = legs
            .iter()
            .flat_map(|k| leg_masses(body, k))
            .map(|(p, _, mass)| mass * p.y)
            .sum();
        GRAVITY * (body.torso_mass * s.position.y + legs_h)
    } else {
        0.0
    };
    let (points, _) = contact_points(cfg, s);
    let spring: f64 = points
        .iter()
        .map(|(p, _)| {
            let d = (-p.y).max(0.0);
            0.5 * cfg.contact.stiffness * d * d
        })
        .sum();
    let stops: f64 = (0..JOINT_COUNT)
        .map(|j| {
            let q = s.joint_angles[j];
            let over = (q - (body.joint_limits.upper[j] - body.limit_margin)).max(0.0)
                + ((body.joint_limits.lower[j] + body.limit_margin) - q).max(0.0);
            0.5 * body.limit_stiffness * over * over
        })
        .sum();
    kinetic + potential + spring + stops
}
