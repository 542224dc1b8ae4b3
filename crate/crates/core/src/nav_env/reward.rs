use nalgebra::Vector3;

use super::termination::Termination;
use super::EpisodeConfig;
use crate::flight_dynamics::{Action, QuadState};

/// Weights applied to each reward component. Penalty components are stored
/// as non-negative magnitudes, so their weights are negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub collision: f64,
    pub z_velocity: f64,
    pub action_magnitude: f64,
    pub action_change: f64,
    pub distance: f64,
    pub success: f64,
    pub velocity_excess: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            collision: -80.0,
            z_velocity: -0.5,
            action_magnitude: -0.3,
            action_change: -0.6,
            distance: 30.0,
            success: 80.0,
            velocity_excess: -1.0,
        }
    }
}

/// One value per reward component, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardComponents {
    pub collision: f64,
    pub z_velocity: f64,
    pub action_magnitude: f64,
    pub action_change: f64,
    pub distance: f64,
    pub success: f64,
    pub velocity_excess: f64,
}

impl RewardComponents {
    pub const NAMES: [&'static str; 7] = [
        "collision",
        "z_velocity",
        "action_magnitude",
        "action_change",
        "distance",
        "success",
        "velocity_excess",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.collision,
            self.z_velocity,
            self.action_magnitude,
            self.action_change,
            self.distance,
            self.success,
            self.velocity_excess,
        ]
    }

    fn weighted(&self, w: &RewardWeights) -> Self {
        Self {
            collision: w.collision * self.collision,
            z_velocity: w.z_velocity * self.z_velocity,
            action_magnitude: w.action_magnitude * self.action_magnitude,
            action_change: w.action_change * self.action_change,
            distance: w.distance * self.distance,
            success: w.success * self.success,
            velocity_excess: w.velocity_excess * self.velocity_excess,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    /// Unweighted component values `r_i`.
    pub raw: RewardComponents,
    /// Contributions `w_i·r_i`.
    pub weighted: RewardComponents,
    /// Sum of `weighted`, accumulated in component order.
    pub total: f64,
}

fn sq_norm3(a: [f64; 3]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Reward for the transition `prev → cur` under action `a_t`, given the
/// previous action and the termination event of `cur`.
pub fn compute_reward(
    prev: &QuadState,
    cur: &QuadState,
    a_t: &Action,
    a_prev: &Action,
    event: Termination,
    cfg: &EpisodeConfig,
    dt: f64,
) -> RewardBreakdown {
    let goal = Vector3::from(cfg.goal);
    let d_step = cfg.v_max * dt;
    let d_prev = (prev.position - goal).norm();
    let d_cur = (cur.position - goal).norm();
    let head = a_t.head();
    let prev_head = a_prev.head();
    let speed = cur.velocity.norm();

    let raw = RewardComponents {
        collision: (event == Termination::Collision) as u8 as f64,
        z_velocity: cur.body_velocity().z.abs().min(1.0),
        action_magnitude: sq_norm3(head),
        action_change: sq_norm3([0, 1, 2].map(|k| head[k] - prev_head[k])),
        distance: (d_prev - d_cur).clamp(-d_step, d_step),
        success: (event == Termination::Success) as u8 as f64,
        velocity_excess: if speed > cfg.v_max {
            ((speed - cfg.v_max).exp() - 1.0).min(5.0)
        } else {
            0.0
        },
    };
    let weighted = raw.weighted(&cfg.weights);
    let total = weighted.to_array().iter().sum();
    RewardBreakdown { raw, weighted, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, z: f64) -> QuadState {
        QuadState::at_rest(Vector3::new(x, y, z), 0.0)
    }

    fn cfg() -> EpisodeConfig {
        EpisodeConfig {
            goal: [5.0, 0.0, 1.0],
            ..Default::default()
        }
    }

    #[test]
    fn hover_with_zero_action_scores_zero() {
        let s = at(0.0, 0.0, 1.0);
        let r = compute_reward(&s, &s, &Action::ZERO, &Action::ZERO, Termination::Running, &cfg(), 0.02);
        assert_eq!(r.total, 0.0);
        assert_eq!(r.raw, RewardComponents::default());
    }

    #[test]
    fn distance_is_clamped_to_step() {
        let r = compute_reward(
            &at(0.0, 0.0, 1.0),
            &at(0.1, 0.0, 1.0),
            &Action::ZERO,
            &Action::ZERO,
            Termination::Running,
            &cfg(),
            0.02,
        );
        assert!((r.weighted.distance - 1.2).abs() < 1e-12);
        let r = compute_reward(
            &at(0.1, 0.0, 1.0),
            &at(0.0, 0.0, 1.0),
            &Action::ZERO,
            &Action::ZERO,
            Termination::Running,
            &cfg(),
            0.02,
        );
        assert!((r.weighted.distance + 1.2).abs() < 1e-12);
    }

    #[test]
    fn velocity_excess_at_three_metres_per_second() {
        let mut s = at(0.0, 0.0, 1.0);
        s.velocity = Vector3::new(3.0, 0.0, 0.0);
        let r = compute_reward(&s, &s, &Action::ZERO, &Action::ZERO, Termination::Running, &cfg(), 0.02);
        assert!((r.weighted.velocity_excess + (1f64.exp() - 1.0)).abs() < 1e-12);
        s.velocity = Vector3::new(10.0, 0.0, 0.0);
        let r = compute_reward(&s, &s, &Action::ZERO, &Action::ZERO, Termination::Running, &cfg(), 0.02);
        assert_eq!(r.weighted.velocity_excess, -5.0);
    }

    #[test]
    fn collision_contributes_minus_eighty() {
        let s = at(0.0, 0.0, 1.0);
        let r = compute_reward(
            &s,
            &s,
            &Action::ZERO,
            &Action::ZERO,
            Termination::Collision,
            &cfg(),
            0.02,
        );
        assert_eq!(r.weighted.collision, -80.0);
        assert_eq!(r.total, -80.0);
    }

    #[test]
    fn yaw_component_is_ignored() {
        let s = at(0.0, 0.0, 1.0);
        let a = Action::new(0.0, 0.0, 0.0, 1.0);
        let r = compute_reward(&s, &s, &a, &Action::ZERO, Termination::Running, &cfg(), 0.02);
        assert_eq!(r.total, 0.0);
    }
}
