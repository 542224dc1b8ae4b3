use nalgebra::Vector3;

use super::occupancy::OccupancyMap;
use super::EpisodeConfig;
use crate::flight_dynamics::QuadState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Running,
    CrashZ,
    Collision,
    Success,
    Timeout,
    /// Non-finite simulation state; not produced by [`check_termination`].
    Fault,
}

impl Termination {
    pub fn is_done(self) -> bool {
        self != Termination::Running
    }

    /// True for episode ends that are not a time limit.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Termination::CrashZ | Termination::Collision | Termination::Success | Termination::Fault
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Running => "running",
            Termination::CrashZ => "crash_z",
            Termination::Collision => "collision",
            Termination::Success => "success",
            Termination::Timeout => "timeout",
            Termination::Fault => "fault",
        }
    }
}

/// Classifies `quad` after `steps` control steps. Precedence is
/// crash_z, collision, success, timeout.
pub fn check_termination(quad: &QuadState, steps: usize, cfg: &EpisodeConfig, map: &OccupancyMap) -> Termination {
    let z = quad.position.z;
    if !(z >= cfg.z_range.0 && z <= cfg.z_range.1) {
        Termination::CrashZ
    } else if map.is_occupied(&quad.position) {
        Termination::Collision
    } else if (quad.position - Vector3::from(cfg.goal)).norm() <= cfg.reach_radius {
        Termination::Success
    } else if steps >= cfg.max_steps {
        Termination::Timeout
    } else {
        Termination::Running
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav_env::occupancy::build_occupancy;

    fn cfg() -> EpisodeConfig {
        EpisodeConfig {
            goal: [3.0, 0.0, 1.0],
            ..Default::default()
        }
    }

    fn at(x: f64, y: f64, z: f64) -> QuadState {
        QuadState::at_rest(Vector3::new(x, y, z), 0.0)
    }

    #[test]
    fn classification_and_precedence() {
        let map = build_occupancy(&[Vector3::new(3.0, 0.0, 0.1)], 0.1, 0.2);
        let c = cfg();
        assert_eq!(check_termination(&at(0.0, 0.0, 0.05), 0, &c, &map), Termination::CrashZ);
        assert_eq!(check_termination(&at(0.0, 0.0, 1.75), 0, &c, &map), Termination::CrashZ);
        assert_eq!(check_termination(&at(0.0, 0.0, 1.0), 0, &c, &map), Termination::Running);
        assert_eq!(check_termination(&at(2.8, 0.0, 1.0), 0, &c, &map), Termination::Success);
        assert_eq!(
            check_termination(&at(0.0, 0.0, 1.0), c.max_steps, &c, &map),
            Termination::Timeout
        );
        assert_eq!(
            check_termination(&at(3.0, 0.0, 0.15), 0, &c, &map),
            Termination::Collision
        );
        // crash outranks collision, success outranks timeout
        assert_eq!(check_termination(&at(3.0, 0.0, 0.05), 0, &c, &map), Termination::CrashZ);
        assert_eq!(
            check_termination(&at(3.0, 0.0, 1.0), c.max_steps, &c, &map),
            Termination::Success
        );
    }

    #[test]
    fn nan_altitude_is_a_crash() {
        let map = OccupancyMap::empty(0.1, 0.2);
        assert_eq!(
            check_termination(&at(0.0, 0.0, f64::NAN), 0, &cfg(), &map),
            Termination::CrashZ
        );
    }
}
