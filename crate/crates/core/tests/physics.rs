use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinker_soccer::arbiter::{classify, ArbiterConfig, Posture};
use tinker_soccer::curriculum::Wrench;
use tinker_soccer::gait::{JointTargets, PhaseClock, JOINT_COUNT};
use tinker_soccer::sim::body::{Leg, RobotState};
use tinker_soccer::sim::observation::*;
use tinker_soccer::sim::scenario::{default_pose, standing_robot};
use tinker_soccer::sim::world::{robot_energy, ServoGains, GRAVITY};
use tinker_soccer::sim::{detect_events, observe, reset, Ball, EnvConfig, Event, Robot, Scenario, StepReport, World};
use tinker_soccer::task::posture_features;

fn lone(cfg: &EnvConfig, state: RobotState, ball: Vector3<f64>) -> World {
    World {
        robots: vec![Robot { state, flipped: false }],
        ball: Ball {
            position: ball,
            velocity: Vector3::zeros(),
        },
        frame: 0,
    }
    .tap(|_| assert!(cfg.validate().is_ok()))
}

trait Tap: Sized {
    fn tap(self, f: impl FnOnce(&Self)) -> Self {
        f(&self);
        self
    }
}
impl Tap for World {}

fn far_ball(cfg: &EnvConfig) -> Vector3<f64> {
    Vector3::new(2.5, cfg.ball.radius, 1.5)
}

fn step(cfg: &EnvConfig, w: &mut World, targets: [f64; JOINT_COUNT]) -> StepReport {
    w.step(cfg, &[JointTargets(targets)], &[Wrench::zero()]).unwrap()
}

fn random_targets(rng: &mut ChaCha8Rng) -> [f64; JOINT_COUNT] {
    let mut t = default_pose();
    for v in &mut t {
        *v += rng.random_range(-0.4..0.4);
    }
    t
}

#[test]
fn identical_inputs_give_bit_identical_trajectories() {
    let cfg = EnvConfig::default();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut w = reset(&cfg, &default_pose(), Scenario::Random, &mut rng);
        let mut frames = vec![];
        for _ in 0..300 {
            let t = random_targets(&mut rng);
            step(&cfg, &mut w, t);
            frames.push(w.clone());
        }
        frames
    };
    assert_eq!(run(), run());
}

#[test]
fn reset_is_deterministic_per_seed() {
    let cfg = EnvConfig::default();
    for s in Scenario::ALL {
        let a = reset(&cfg, &default_pose(), s, &mut ChaCha8Rng::seed_from_u64(3));
        let b = reset(&cfg, &default_pose(), s, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b, "{s}");
    }
}

/// With servos and joint friction off nothing acts but gravity, so the torso
/// drops by exactly g t^2 / 2.
#[test]
fn free_fall_matches_the_closed_form() {
    let mut cfg = EnvConfig::default();
    cfg.servo = ServoGains { kp: 0.0, kd: 0.0 };
    cfg.body.joint_damping = 0.0;
    let h0 = 5.0;
    let mut w = lone(&cfg, RobotState::at_rest(Vector3::new(0.0, h0, 0.0), default_pose()), far_ball(&cfg));
    for n in 1..=50 {
        step(&cfg, &mut w, default_pose());
        let t = n as f64 * cfg.dt;
        let expected = 0.5 * GRAVITY * t * t;
        let drop = h0 - w.robots[0].state.position.y;
        assert!((drop - expected).abs() <= 0.02 * expected, "t={t}: {drop} vs {expected}");
    }
}

#[test]
fn unpowered_standing_robot_sinks() {
    let mut cfg = EnvConfig::default();
    cfg.servo = ServoGains { kp: 0.0, kd: 0.0 };
    let pose = default_pose();
    let mut w = lone(&cfg, standing_robot(&cfg, &pose, 0.0, 0.0, 0.0), far_ball(&cfg));
    let mut h = w.robots[0].state.position.y;
    for i in 0..50 {
        step(&cfg, &mut w, pose);
        let next = w.robots[0].state.position.y;
        assert!(next < h, "step {i}: {next} >= {h}");
        h = next;
    }
}

#[test]
fn zero_gravity_rest_is_a_fixed_point() {
    let mut cfg = EnvConfig::default();
    cfg.gravity = false;
    let pose = default_pose();
    let start = RobotState::at_rest(Vector3::new(0.3, 1.0, -0.2), pose);
    let mut w = lone(&cfg, start.clone(), far_ball(&cfg));
    let before = w.clone();
    for _ in 0..100 {
        step(&cfg, &mut w, pose);
    }
    let s = &w.robots[0].state;
    assert!((s.position - start.position).norm() < 1e-9);
    assert!(s.orientation.angle_to(&start.orientation) < 1e-9);
    assert!(s.linear_velocity.norm() < 1e-9 && s.angular_velocity.norm() < 1e-9);
    for j in 0..JOINT_COUNT {
        assert!((s.joint_angles[j] - pose[j]).abs() < 1e-9);
        assert!(s.joint_velocities[j].abs() < 1e-9);
    }
    assert_eq!(w.ball, before.ball);
}

#[test]
fn ball_never_passes_through_the_ground() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut w = reset(&cfg, &default_pose(), Scenario::StandingCenter, &mut rng);
    let r = cfg.ball.radius;
    let half_l = cfg.field.length / 2.0 + cfg.field.goal_depth;
    let half_w = cfg.field.width / 2.0;
    let pose = default_pose();
    let mut prev_frame = w.frame;
    for i in 0..100_000u32 {
        if i % 400 == 0 {
            // hurl the ball, often straight at the floor
            w.ball.velocity = Vector3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-25.0..4.0),
                rng.random_range(-6.0..6.0),
            );
            if i % 4000 == 0 {
                w = World {
                    ball: w.ball.clone(),
                    ..reset(&cfg, &pose, Scenario::StandingCenter, &mut rng)
                };
                w.frame = prev_frame;
            }
        }
        step(&cfg, &mut w, pose);
        let p = w.ball.position;
        assert!(p.y >= r - 1e-12, "frame {}: y = {}", w.frame, p.y);
        assert!(p.x.abs() <= half_l + 1e-12 && p.z.abs() <= half_w + 1e-12, "frame {}: {p}", w.frame);
        assert!(w.frame > prev_frame);
        prev_frame = w.frame;
    }
}

#[test]
fn states_stay_valid_under_random_commands() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut w = reset(&cfg, &default_pose(), Scenario::StandingCenter, &mut rng);
    let limits = &cfg.body.joint_limits;
    for _ in 0..2000 {
        let mut t = [0.0; JOINT_COUNT];
        for v in &mut t {
            *v = rng.random_range(-1.57..1.57);
        }
        step(&cfg, &mut w, t);
        let s = &w.robots[0].state;
        assert!((s.orientation.coords.norm() - 1.0).abs() < 1e-9);
        for j in 0..JOINT_COUNT {
            assert!(limits.lower[j] <= s.joint_angles[j] && s.joint_angles[j] <= limits.upper[j]);
        }
    }
}

#[test]
fn energy_does_not_grow_without_actuation() {
    let mut cfg = EnvConfig::default();
    cfg.servo = ServoGains { kp: 0.0, kd: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..4 {
        let mut s = standing_robot(&cfg, &default_pose(), 0.0, 0.0, 0.0);
        s.position.y += 0.15;
        s.linear_velocity = Vector3::new(rng.random_range(-1.0..1.0), 0.0, rng.random_range(-1.0..1.0));
        s.angular_velocity = Vector3::new(rng.random_range(-2.0..2.0), 0.0, rng.random_range(-2.0..2.0));
        let mut w = lone(&cfg, s, far_ball(&cfg));
        let mut e = robot_energy(&cfg, &w.robots[0].state);
        let e0 = e;
        for i in 0..300 {
            step(&cfg, &mut w, default_pose());
            let next = robot_energy(&cfg, &w.robots[0].state);
            assert!(next <= e + 1e-6 * e0.abs().max(1.0), "trial {trial} step {i}: {next} > {e}");
            e = next;
        }
        assert!(e < e0, "trial {trial}");
    }
}

#[test]
fn zero_impulse_changes_nothing() {
    let cfg = EnvConfig::default();
    let mut w = reset(&cfg, &default_pose(), Scenario::StandingCenter, &mut ChaCha8Rng::seed_from_u64(1));
    let before = w.clone();
    w.knockdown(&cfg, 0, &Vector3::zeros()).unwrap();
    assert_eq!(w, before);
    assert!(w.knockdown(&cfg, 0, &Vector3::new(f64::NAN, 0.0, 0.0)).is_err());
}

#[test]
fn large_lateral_impulse_topples_the_robot() {
    let cfg = EnvConfig::default();
    let acfg = ArbiterConfig::default();
    for (seed, dir) in [(1, 1.0), (2, -1.0), (3, 1.0)] {
        let mut w = reset(&cfg, &default_pose(), Scenario::StandingCenter, &mut ChaCha8Rng::seed_from_u64(seed));
        for _ in 0..50 {
            step(&cfg, &mut w, default_pose());
        }
        w.knockdown(&cfg, 0, &Vector3::new(0.0, 0.0, 4.0 * dir)).unwrap();
        let fell = (0..100).any(|_| {
            step(&cfg, &mut w, default_pose());
            classify(&posture_features(&w.robots[0].state), &acfg).unwrap() == Posture::Fallen
        });
        assert!(fell, "seed {seed}");
    }
}

#[test]
fn opposite_impulses_give_mirrored_motion() {
    let cfg = EnvConfig::default();
    let pose = default_pose();
    let run = |sign: f64| {
        let mut w = lone(&cfg, standing_robot(&cfg, &pose, 0.0, 0.0, 0.0), far_ball(&cfg));
        w.knockdown(&cfg, 0, &Vector3::new(0.0, 0.0, 1.5 * sign)).unwrap();
        let v0 = w.robots[0].state.linear_velocity;
        for _ in 0..30 {
            step(&cfg, &mut w, pose);
        }
        (v0, w.robots[0].state.clone())
    };
    let (va, a) = run(1.0);
    let (vb, b) = run(-1.0);
    assert_eq!(va, Vector3::new(vb.x, vb.y, -vb.z));
    let tol = 1e-9;
    let lv = b.linear_velocity;
    assert!((a.linear_velocity - Vector3::new(lv.x, lv.y, -lv.z)).norm() < tol, "{} {}", a.linear_velocity, lv);
    // angular velocity is a pseudovector: mirroring z flips x and y
    let av = b.angular_velocity;
    assert!((a.angular_velocity - Vector3::new(-av.x, -av.y, av.z)).norm() < tol);
    assert!((a.position.y - b.position.y).abs() < tol);
}

#[test]
fn swinging_foot_kicks_the_ball_along_its_velocity() {
    let mut cfg = EnvConfig::default();
    cfg.gravity = false;
    let mut s = RobotState::at_rest(Vector3::new(0.0, 0.5, 0.0), default_pose());
    let first = Leg::Right.first_joint();
    s.joint_velocities[first + 2] = -6.0;
    let k = s.leg(&cfg.body, Leg::Right);
    let rates = &s.joint_velocities[first..first + 5];
    let toe_v = s.torso_point_velocity(&k.toe) + k.point_velocity(&k.toe, rates, 5);
    assert!(toe_v.norm() > 0.1);
    let dir = toe_v.normalize();
    let ball = k.toe + dir * (cfg.ball.radius + cfg.ball.foot_radius - 0.005);
    let mut w = lone(&cfg, s.clone(), ball);
    let rep = step(&cfg, &mut w, s.joint_angles);
    assert!(rep.kicked[0]);
    assert!(w.ball.velocity.norm() > 0.0);
    assert!(w.ball.velocity.dot(&dir) > 0.0);

    let before = w.clone();
    let events = detect_events(&cfg, &before, &w, 0, &rep, None);
    assert_eq!(events, vec![Event::BallKicked]);
}

#[test]
fn quiet_frame_has_no_events() {
    let cfg = EnvConfig::default();
    let w = reset(&cfg, &default_pose(), Scenario::StandingCenter, &mut ChaCha8Rng::seed_from_u64(0));
    let rep = StepReport {
        kicked: vec![false],
        goal: None,
    };
    assert!(detect_events(&cfg, &w, &w, 0, &rep, None).is_empty());
}

#[test]
fn ball_rolling_between_the_posts_scores() {
    let cfg = EnvConfig::default();
    let pose = default_pose();
    let x = cfg.field.length / 2.0 - 0.01;
    let mut w = lone(&cfg, standing_robot(&cfg, &pose, 0.0, 0.0, 0.0), Vector3::new(x, cfg.ball.radius, 0.1));
    w.ball.velocity = Vector3::new(3.0, 0.0, 0.0);
    let before = w.clone();
    let rep = step(&cfg, &mut w, pose);
    assert!(rep.goal.is_some());
    assert!(detect_events(&cfg, &before, &w, 0, &rep, None).contains(&Event::GoalScored));

    // wide of the posts bounces off the end wall instead
    let z = cfg.field.goal_width / 2.0 + 0.3;
    let mut w = lone(&cfg, standing_robot(&cfg, &pose, 0.0, 0.0, 0.0), Vector3::new(x, cfg.ball.radius, z));
    w.ball.velocity = Vector3::new(3.0, 0.0, 0.0);
    assert!(step(&cfg, &mut w, pose).goal.is_none());
    assert!(w.ball.velocity.x < 0.0);
}

fn golden() -> Vec<(String, usize, usize)> {
    include_str!("golden/observation_layout.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn observation_layout_matches_golden_file() {
    let actual = [
        ("joint_angles", JOINT_ANGLES),
        ("joint_velocities", JOINT_VELOCITIES),
        ("prev_residual", PREV_RESIDUAL),
        ("up_axis", UP_AXIS),
        ("angular_velocity", ANGULAR_VELOCITY),
        ("linear_velocity", LINEAR_VELOCITY),
        ("height", HEIGHT..HEIGHT + 1),
        ("phase", PHASE),
        ("ball_position", BALL_POSITION),
        ("ball_velocity", BALL_VELOCITY),
        ("goal_position", GOAL_POSITION),
        ("opponent_position", OPPONENT_POSITION),
        ("ball_to_goal", BALL_TO_GOAL),
        ("goal_distance", GOAL_DISTANCE..GOAL_DISTANCE + 1),
    ];
    let actual: Vec<(String, usize, usize)> = actual.iter().map(|(n, r)| (n.to_string(), r.start, r.end)).collect();
    assert_eq!(actual, golden());
    // contiguous cover of all slots
    assert_eq!(actual.first().unwrap().1, 0);
    assert_eq!(actual.last().unwrap().2, OBS_DIM);
    assert!(actual.windows(2).all(|p| p[0].2 == p[1].1));
    assert_eq!((PROPRIOCEPTIVE, EXTEROCEPTIVE), (0..42, 42..58));
}

#[test]
fn observation_slots_hold_their_quantities() {
    let cfg = EnvConfig::default();
    let pose = default_pose();
    let s = standing_robot(&cfg, &pose, 0.5, -0.25, 0.0);
    let mut w = lone(&cfg, s.clone(), Vector3::new(1.5, cfg.ball.radius, 0.75));
    w.ball.velocity = Vector3::new(0.2, 0.0, -0.1);
    let clock = PhaseClock::at(3, 30).unwrap();
    let prev: [f64; JOINT_COUNT] = std::array::from_fn(|j| 0.01 * j as f64);
    let o = observe(&cfg, &w, 0, &clock, &prev);
    let v = o.as_slice();
    assert_eq!(v.len(), 58);
    assert_eq!(&v[JOINT_ANGLES], &pose[..]);
    assert!(v[JOINT_VELOCITIES].iter().all(|&x| x == 0.0));
    assert_eq!(&v[PREV_RESIDUAL], &prev[..]);
    assert!((v[UP_AXIS.start + 1] - 1.0).abs() < 1e-12);
    assert_eq!(v[HEIGHT], s.position.y);
    assert_eq!(&v[PHASE], &clock.encoding()[..]);
    let close = |a: &[f64], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&v[BALL_POSITION], [1.0, cfg.ball.radius - s.position.y, 1.0]));
    assert!(close(&v[BALL_VELOCITY], [0.2, 0.0, -0.1]));
    let goal = cfg.field.target_goal();
    assert!(close(&v[GOAL_POSITION], [goal.x - 0.5, goal.y - s.position.y, goal.z + 0.25]));
    assert!(v[OPPONENT_POSITION].iter().all(|&x| x == 0.0));
    assert!(close(&v[BALL_TO_GOAL], [goal.x - 1.5, goal.y - cfg.ball.radius, goal.z - 0.75]));
}

#[test]
fn goal_distance_slot_is_normalised() {
    let cfg = EnvConfig::default();
    let pose = default_pose();
    let goal = cfg.field.target_goal();
    let clock = PhaseClock::new(30).unwrap();
    let at = |x: f64, z: f64| {
        let w = lone(&cfg, standing_robot(&cfg, &pose, x, z, 0.0), far_ball(&cfg));
        observe(&cfg, &w, 0, &clock, &[0.0; JOINT_COUNT]).as_slice()[GOAL_DISTANCE]
    };
    assert_eq!(at(goal.x, goal.z), 0.0);
    assert!((at(goal.x - cfg.d_max(), goal.z) - 1.0).abs() < 1e-12);
}

#[test]
fn phase_slots_have_unit_norm() {
    let cfg = EnvConfig::default();
    let w = reset(&cfg, &default_pose(), Scenario::Random, &mut ChaCha8Rng::seed_from_u64(2));
    for t1 in [2, 7, 30] {
        let mut clock = PhaseClock::new(t1).unwrap();
        for _ in 0..200 {
            let o = observe(&cfg, &w, 0, &clock, &[0.0; JOINT_COUNT]);
            let p = &o.as_slice()[PHASE];
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-9);
            clock = clock.advance();
        }
    }
}

#[test]
fn scenarios_start_in_their_postures() {
    let cfg = EnvConfig::default();
    let acfg = ArbiterConfig::default();
    let h_stand = cfg.body.standing_height(&default_pose());
    let corners = |b: &Vector3<f64>| {
        let (hl, hw) = (cfg.field.length / 2.0, cfg.field.width / 2.0);
        [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)]
            .iter()
            .map(|(x, z)| (b.x - x).hypot(b.z - z))
            .fold(f64::INFINITY, f64::min)
    };
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in Scenario::ALL {
            let w = reset(&cfg, &default_pose(), s, &mut rng);
            let f = posture_features(&w.robots[0].state);
            let p = classify(&f, &acfg).unwrap();
            match s {
                Scenario::FallenSupine | Scenario::FallenProne => {
                    assert_eq!(p, Posture::Fallen, "{s} seed {seed}");
                    assert!(w.robots[0].state.up_axis().y < 0.3);
                }
                _ => {
                    assert_eq!(p, Posture::Standing, "{s} seed {seed}");
                    assert!(f.theta_tilt < 5.0);
                    assert!((f.h_torso - h_stand).abs() < 0.01);
                }
            }
            if s == Scenario::CornerBall {
                assert!(corners(&w.ball.position) < 0.5);
                let p = w.robots[0].state.position;
                assert!(p.x.hypot(p.z) < 1e-12);
            }
        }
    }
    assert!("penalty_spot".parse::<Scenario>().is_err());
}
