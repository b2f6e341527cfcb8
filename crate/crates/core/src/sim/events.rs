//! Per-frame event detection.

use serde::{Deserialize, Serialize};

use crate::arbiter::{Network, Switch};
use crate::sim::world::{EnvConfig, GoalFor, StepReport, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Event {
    Fell,
    Recovered,
    BallKicked,
    GoalScored,
    OutOfBounds,
}

/// Events of one robot between two consecutive frames.
pub fn detect_events(
    cfg: &EnvConfig,
    before: &World,
    after: &World,
    robot: usize,
    report: &StepReport,
    switch: Option<Switch>,
) -> Vec<Event> {
    let mut events = Vec::new();
    match switch {
        Some(Switch { to: Network::Frn, .. }) => events.push(Event::Fell),
        Some(Switch { to: Network::Bskn, .. }) => events.push(Event::Recovered),
        None => {}
    }
    if report.kicked.get(robot).copied().unwrap_or(false) {
        events.push(Event::BallKicked);
    }
    if report.goal.is_some() {
        events.push(Event::GoalScored);
    }
    let outside = |w: &World| {
        w.robots.get(robot).is_some_and(|r| {
            let p = r.world_position();
            p.x.abs() > cfg.field.length / 2.0 + OUT_MARGIN
                || p.z.abs() > cfg.field.width / 2.0 + OUT_MARGIN
        })
    };
    if outside(after) && !outside(before) {
        events.push(Event::OutOfBounds);
    }
    events
}

/// How far past the touch lines a robot may wander (m).
pub const OUT_MARGIN: f64 = 0.3;

/// Goal scored by the robot playing in frame `flipped`, if any.
pub fn scored_by(goal: GoalFor, flipped: bool) -> bool {
    matches!((goal, flipped), (GoalFor::Home, false) | (GoalFor::Away, true))
}
