use nalgebra::Vector3;

use super::{Action, DynamicsParams, QuadState};

/// Setpoint scaling and loop gains of the attitude/rate cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub tilt_max_deg: f64,
    pub yawrate_max_deg: f64,
    /// Fractional thrust authority: thrust = m·g·(1 + cmd·k_thrust).
    pub k_thrust: f64,
    pub thrust_max: f64,
    /// Angle error → body-rate setpoint (1/s) for roll and pitch.
    pub kp_angle: f64,
    /// Rate error → angular acceleration (1/s).
    pub kp_rate: Vector3<f64>,
    /// Derivative on measured rate (dimensionless).
    pub kd_rate: Vector3<f64>,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            tilt_max_deg: 35.0,
            yawrate_max_deg: 120.0,
            k_thrust: 0.5,
            thrust_max: 2.0 * 9.81,
            kp_angle: 8.0,
            kp_rate: Vector3::new(25.0, 25.0, 12.0),
            kd_rate: Vector3::new(0.02, 0.02, 0.0),
        }
    }
}

/// Outer angle loop (P) feeding an inner body-rate loop (PD, derivative on
/// measurement).
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedPid {
    pub gains: PidGains,
    prev_rate: Option<Vector3<f64>>,
}

impl CascadedPid {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, prev_rate: None }
    }

    pub fn reset(&mut self) {
        self.prev_rate = None;
    }

    /// Collective thrust (N) and body torque (N·m) for command `a`.
    pub fn step(&mut self, state: &QuadState, a: &Action, params: &DynamicsParams, dt: f64) -> (f64, Vector3<f64>) {
        let g = &self.gains;
        let thrust = (params.hover_thrust() * (1.0 + a.thrust * g.k_thrust)).clamp(0.0, g.thrust_max);

        let tilt = g.tilt_max_deg.to_radians();
        let (roll, pitch, _) = state.orientation.euler_angles();
        let rate_sp = Vector3::new(
            g.kp_angle * (a.roll * tilt - roll),
            g.kp_angle * (a.pitch * tilt - pitch),
            a.yaw * g.yawrate_max_deg.to_radians(),
        );
        let rate = state.angular_velocity;
        let deriv = match self.prev_rate {
            Some(prev) if dt > 0.0 => (rate - prev) / dt,
            _ => Vector3::zeros(),
        };
        self.prev_rate = Some(rate);
        let ang_acc = g.kp_rate.component_mul(&(rate_sp - rate)) - g.kd_rate.component_mul(&deriv);
        (thrust, params.inertia.component_mul(&ang_acc))
    }
}

#[cfg(test)]
mod tests {
    use super::super::integrate;
    use super::*;

    #[test]
    fn hover_equilibrium() {
        let p = DynamicsParams::default();
        let mut pid = CascadedPid::new(PidGains::default());
        let s = QuadState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.4);
        let (t, tau) = pid.step(&s, &Action::ZERO, &p, p.dt_sim);
        assert!((t - p.mass * p.gravity).abs() < 1e-9);
        assert_eq!(tau, Vector3::zeros());
    }

    #[test]
    fn roll_command_gives_pure_roll_torque() {
        let p = DynamicsParams::default();
        let mut pid = CascadedPid::new(PidGains::default());
        let s = QuadState::at_rest(Vector3::zeros(), 0.0);
        let (_, tau) = pid.step(&s, &Action::new(0.0, 0.5, 0.0, 0.0), &p, p.dt_sim);
        assert!(tau.x > 0.0);
        assert_eq!((tau.y, tau.z), (0.0, 0.0));
    }

    #[test]
    fn thrust_is_clamped() {
        let p = DynamicsParams::default();
        let gains = PidGains {
            k_thrust: 5.0,
            ..Default::default()
        };
        let mut pid = CascadedPid::new(gains);
        let s = QuadState::at_rest(Vector3::zeros(), 0.0);
        assert_eq!(
            pid.step(&s, &Action::new(1.0, 0.0, 0.0, 0.0), &p, 0.004).0,
            gains.thrust_max
        );
        assert_eq!(pid.step(&s, &Action::new(-1.0, 0.0, 0.0, 0.0), &p, 0.004).0, 0.0);
    }

    #[test]
    fn roll_step_settles_within_one_degree_in_one_second() {
        let p = DynamicsParams::default();
        let gains = PidGains::default();
        let mut pid = CascadedPid::new(gains);
        let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let cmd = Action::new(0.0, 10.0 / gains.tilt_max_deg, 0.0, 0.0);
        let steps = (1.0 / p.dt_sim).round() as usize;
        let mut history = Vec::new();
        for _ in 0..steps {
            let (t, tau) = pid.step(&s, &cmd, &p, p.dt_sim);
            s = integrate(&s, t, &tau, &p, p.dt_sim).unwrap();
            history.push(s.orientation.euler_angles().0.to_degrees());
        }
        let final_roll = *history.last().unwrap();
        assert!((final_roll - 10.0).abs() < 1.0, "roll {final_roll}");
        // and stays there for the last 20% of the window
        assert!(history[steps * 4 / 5..].iter().all(|r| (r - 10.0).abs() < 1.0));
    }
}
