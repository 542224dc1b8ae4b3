use nalgebra::Vector3;

use super::ou::PerceptionOffsets;
use super::EpisodeConfig;
use crate::flight_dynamics::QuadState;
use crate::rasterizer::{Image, RenderOutput};

pub const STATE_DIM: usize = 20;

/// Policy input: a rendered view plus the proprioceptive state
/// `[v_b(3), R(9, row-major), d_g(3), z_c, z_t, a_last(3)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvObservation {
    pub rgb: Image,
    /// Expected depth in metres, present only in privileged mode.
    pub depth: Option<Image>,
    pub state: [f64; STATE_DIM],
}

/// Proprioceptive state with perception offsets applied. The goal direction
/// is the zero vector once the drone is within the reach radius.
pub fn state_vector(quad: &QuadState, cfg: &EpisodeConfig, offsets: &PerceptionOffsets) -> [f64; STATE_DIM] {
    let goal = Vector3::from(cfg.goal);
    let v_b = quad.body_velocity() + Vector3::from(offsets.velocity);
    let r = quad.rotation_matrix();
    let to_goal = goal - quad.position;
    let dist = to_goal.norm();
    let d_g = if dist <= cfg.reach_radius || dist == 0.0 {
        Vector3::zeros()
    } else {
        let noisy = to_goal / dist + Vector3::from(offsets.direction);
        let n = noisy.norm();
        if n > 1e-12 {
            noisy / n
        } else {
            to_goal / dist
        }
    };

    let mut s = [0.0; STATE_DIM];
    s[0..3].copy_from_slice(v_b.as_slice());
    for row in 0..3 {
        for col in 0..3 {
            s[3 + 3 * row + col] = r[(row, col)];
        }
    }
    s[12..15].copy_from_slice(d_g.as_slice());
    s[15] = quad.position.z + offsets.z;
    s[16] = goal.z;
    s[17..20].copy_from_slice(&quad.last_action);
    s
}

pub fn assemble_observation(
    quad: &QuadState,
    cfg: &EpisodeConfig,
    offsets: &PerceptionOffsets,
    view: RenderOutput,
) -> EnvObservation {
    EnvObservation {
        rgb: view.rgb.expect("observation views always include rgb"),
        depth: view.depth,
        state: state_vector(quad, cfg, offsets),
    }
}

/// Running per-channel standardization of the state vector (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct ObsNormalizer {
    count: u64,
    mean: [f64; STATE_DIM],
    m2: [f64; STATE_DIM],
    frozen: bool,
    pub epsilon: f64,
}

impl Default for ObsNormalizer {
    fn default() -> Self {
        Self {
            count: 0,
            mean: [0.0; STATE_DIM],
            m2: [0.0; STATE_DIM],
            frozen: false,
            epsilon: 1e-8,
        }
    }
}

impl ObsNormalizer {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64; STATE_DIM] {
        &self.mean
    }

    pub fn variance(&self) -> [f64; STATE_DIM] {
        if self.count < 2 {
            return [1.0; STATE_DIM];
        }
        self.m2.map(|m| m / self.count as f64)
    }

    pub fn freeze(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn update(&mut self, s: &[f64; STATE_DIM]) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        for k in 0..STATE_DIM {
            let d = s[k] - self.mean[k];
            self.mean[k] += d / n;
            self.m2[k] += d * (s[k] - self.mean[k]);
        }
    }

    pub fn normalize(&self, s: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
        let var = self.variance();
        std::array::from_fn(|k| (s[k] - self.mean[k]) / (var[k] + self.epsilon).sqrt())
    }
}
