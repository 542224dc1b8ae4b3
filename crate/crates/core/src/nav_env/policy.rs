//! Scripted policies used for rollouts and sanity checks.

use nalgebra::Vector3;
use rand::Rng;

use super::env::NavEnv;
use crate::flight_dynamics::Action;

/// Proportional velocity-to-goal controller mapped into the action space
/// through small-angle attitude inversion. Uses ground-truth state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GotoPolicy {
    /// Position error → horizontal velocity setpoint (1/s).
    pub kp_position: f64,
    pub max_speed: f64,
    /// Velocity error → acceleration (1/s).
    pub kp_velocity: f64,
    pub kp_z: f64,
    pub kd_z: f64,
}

impl Default for GotoPolicy {
    fn default() -> Self {
        Self {
            kp_position: 0.8,
            max_speed: 1.0,
            kp_velocity: 1.5,
            kp_z: 2.0,
            kd_z: 1.5,
        }
    }
}

impl GotoPolicy {
    pub fn act(&self, env: &NavEnv) -> Action {
        let cfg = env.config();
        let q = env.state();
        let g = cfg.dynamics.gravity;
        let err = Vector3::from(cfg.episode.goal) - q.position;

        let mut v_sp = Vector3::new(err.x, err.y, 0.0) * self.kp_position;
        let speed = v_sp.norm();
        if speed > self.max_speed {
            v_sp *= self.max_speed / speed;
        }
        let acc = (v_sp - Vector3::new(q.velocity.x, q.velocity.y, 0.0)) * self.kp_velocity;

        let (_, _, yaw) = q.orientation.euler_angles();
        let forward = yaw.cos() * acc.x + yaw.sin() * acc.y;
        let left = -yaw.sin() * acc.x + yaw.cos() * acc.y;
        let tilt_max = cfg.gains.tilt_max_deg.to_radians();
        let pitch = (forward / g).atan().clamp(-tilt_max, tilt_max);
        let roll = (-left / g).atan().clamp(-tilt_max, tilt_max);

        let acc_z = self.kp_z * err.z - self.kd_z * q.velocity.z;
        let thrust_ratio = (g + acc_z) / (g * roll.cos() * pitch.cos());
        let thrust = (thrust_ratio - 1.0) / cfg.gains.k_thrust;

        Action::new(thrust, roll / tilt_max, pitch / tilt_max, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Goto(GotoPolicy),
    /// Zero action: the controller holds level hover thrust.
    Hover,
    /// Independent uniform actions in `[-1, 1]⁴`.
    Random,
}

impl Policy {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "goto" => Some(Policy::Goto(GotoPolicy::default())),
            "hover" => Some(Policy::Hover),
            "random" => Some(Policy::Random),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Goto(_) => "goto",
            Policy::Hover => "hover",
            Policy::Random => "random",
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, env: &NavEnv, rng: &mut R) -> Action {
        match self {
            Policy::Goto(p) => p.act(env),
            Policy::Hover => Action::ZERO,
            Policy::Random => Action::from_array(std::array::from_fn(|_| rng.random_range(-1.0..=1.0))),
        }
    }
}
