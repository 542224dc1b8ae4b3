//! Quadrotor rigid-body dynamics driven through a cascaded PID.
//!
//! Frames: world is z-up with gravity along -z; the body frame is x forward,
//! y left, z up, and collective thrust acts along body +z.

mod latency;
mod pid;

pub use latency::{add_action_noise, LatencyConfig, LatencyModel};
pub use pid::{CascadedPid, PidGains};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("simulation fault: non-finite state after integration")]
    NonFinite,
    #[error("invalid time step {0}")]
    TimeStep(f64),
}

/// Normalized command `[thrust, roll, pitch, yaw-rate]`, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        thrust: 0.0,
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    /// Clamps every component to `[-1, 1]`; NaN becomes 0.
    pub fn new(thrust: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::from_array([thrust, roll, pitch, yaw])
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        let c = a.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) });
        Self {
            thrust: c[0],
            roll: c[1],
            pitch: c[2],
            yaw: c[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.thrust, self.roll, self.pitch, self.yaw]
    }

    /// The first three components, as used by the reward and observation.
    pub fn head(self) -> [f64; 3] {
        [self.thrust, self.roll, self.pitch]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Body to world.
    pub orientation: UnitQuaternion<f64>,
    /// Body frame (rad/s).
    pub angular_velocity: Vector3<f64>,
    pub last_action: [f64; 3],
}

impl QuadState {
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
            angular_velocity: Vector3::zeros(),
            last_action: [0.0; 3],
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    /// Velocity expressed in the body frame.
    pub fn body_velocity(&self) -> Vector3<f64> {
        self.orientation.inverse() * self.velocity
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
    }
}

/// Physical constants of the airframe and the simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub mass: f64,
    pub inertia: Vector3<f64>,
    pub gravity: f64,
    /// Linear drag coefficient (1/s).
    pub drag: f64,
    pub dt_sim: f64,
    /// Physics substeps per control step.
    pub decimation: usize,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: Vector3::new(0.01, 0.01, 0.02),
            gravity: 9.81,
            drag: 0.1,
            dt_sim: 0.004,
            decimation: 5,
        }
    }
}

impl DynamicsParams {
    pub fn dt_ctrl(&self) -> f64 {
        self.dt_sim * self.decimation as f64
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// One semi-implicit step of the 6-DOF rigid body.
///
/// Angular velocity uses the implicit midpoint rule on Euler's equations
/// (conserves rotational energy without torque), then orientation, then
/// translational velocity from the pre-step attitude, then position from the
/// updated velocity.
pub fn integrate(
    state: &QuadState,
    thrust: f64,
    torque: &Vector3<f64>,
    params: &DynamicsParams,
    dt: f64,
) -> Result<QuadState, DynamicsError> {
    if !(dt > 0.0 && dt <= 0.02) {
        return Err(DynamicsError::TimeStep(dt));
    }
    let inertia = params.inertia;
    let w0 = state.angular_velocity;
    let mut w1 = w0;
    for _ in 0..4 {
        let wm = 0.5 * (w0 + w1);
        let gyro = wm.cross(&inertia.component_mul(&wm));
        w1 = w0 + dt * (torque - gyro).component_div(&inertia);
    }

    let mut orientation = state.orientation * UnitQuaternion::from_scaled_axis(w1 * dt);
    orientation.renormalize();

    let thrust_world = state.orientation * Vector3::new(0.0, 0.0, thrust / params.mass);
    let accel = Vector3::new(0.0, 0.0, -params.gravity) + thrust_world - params.drag * state.velocity;
    let velocity = state.velocity + dt * accel;
    let position = state.position + dt * velocity;

    let next = QuadState {
        position,
        velocity,
        orientation,
        angular_velocity: w1,
        last_action: state.last_action,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_is_clamped() {
        let a = Action::new(1.5, -2.0, 0.3, f64::NAN);
        assert_eq!(a.to_array(), [1.0, -1.0, 0.3, 0.0]);
    }

    #[test]
    fn hover_thrust_holds_position() {
        let p = DynamicsParams::default();
        let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 1.0), 0.3);
        for _ in 0..100 {
            s = integrate(&s, p.hover_thrust(), &Vector3::zeros(), &p, p.dt_sim).unwrap();
        }
        assert!((s.position - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
        assert!(s.velocity.norm() < p.drag * p.dt_sim);
    }

    #[test]
    fn free_fall_step() {
        let p = DynamicsParams::default();
        let s = QuadState::at_rest(Vector3::zeros(), 0.0);
        let n = integrate(&s, 0.0, &Vector3::zeros(), &p, 0.01).unwrap();
        assert!((n.velocity.z + 9.81 * 0.01).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_time_step() {
        let p = DynamicsParams::default();
        let s = QuadState::at_rest(Vector3::zeros(), 0.0);
        assert!(integrate(&s, 0.0, &Vector3::zeros(), &p, 0.0).is_err());
        assert!(integrate(&s, 0.0, &Vector3::zeros(), &p, 0.03).is_err());
    }

    #[test]
    fn non_finite_is_a_fault() {
        let p = DynamicsParams::default();
        let s = QuadState::at_rest(Vector3::zeros(), 0.0);
        let r = integrate(&s, f64::INFINITY, &Vector3::zeros(), &p, 0.004);
        assert_eq!(r.unwrap_err(), DynamicsError::NonFinite);
    }

    #[test]
    fn torque_free_tumbling_conserves_energy() {
        let p = DynamicsParams {
            gravity: 0.0,
            drag: 0.0,
            inertia: Vector3::new(0.01, 0.015, 0.02),
            ..Default::default()
        };
        let mut s = QuadState::at_rest(Vector3::zeros(), 0.0);
        s.angular_velocity = Vector3::new(3.0, 0.5, 2.0);
        let energy = |s: &QuadState| 0.5 * s.angular_velocity.dot(&p.inertia.component_mul(&s.angular_velocity));
        let e0 = energy(&s);
        for _ in 0..1000 {
            s = integrate(&s, 0.0, &Vector3::zeros(), &p, p.dt_sim).unwrap();
            assert!((s.orientation.norm() - 1.0).abs() < 1e-9);
        }
        assert!(((energy(&s) - e0) / e0).abs() < 0.01);
    }
}
