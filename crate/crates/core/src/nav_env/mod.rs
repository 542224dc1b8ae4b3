//! Navigation environment: observations, perception noise, reward,
//! termination, occupancy-map collision and batched stepping.

mod env;
mod observation;
mod occupancy;
mod ou;
pub mod policy;
mod reward;
mod termination;

pub use env::{sample_fov, EnvConfig, EnvError, NavEnv, SceneAssets, StepInfo, StepResult, VecEnv, MAX_START_TRIES};
pub use observation::{assemble_observation, state_vector, EnvObservation, ObsNormalizer, STATE_DIM};
pub use occupancy::{build_occupancy, OccupancyMap};
pub use ou::{OuNoise, PerceptionNoise, PerceptionNoiseConfig, PerceptionOffsets};
pub use policy::{GotoPolicy, Policy};
pub use reward::{compute_reward, RewardBreakdown, RewardComponents, RewardWeights};
pub use termination::{check_termination, Termination};

/// Task definition shared by every episode in a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub goal: [f64; 3],
    pub start_min: [f64; 3],
    pub start_max: [f64; 3],
    /// Legal altitude band (m).
    pub z_range: (f64, f64),
    pub v_max: f64,
    pub reach_radius: f64,
    pub max_steps: usize,
    pub weights: RewardWeights,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            goal: [3.0, 0.0, 1.0],
            start_min: [-0.5, -0.5, 0.8],
            start_max: [0.5, 0.5, 1.2],
            z_range: (0.1, 1.7),
            v_max: 2.0,
            reach_radius: 0.3,
            max_steps: 512,
            weights: RewardWeights::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.z_range.0 < self.z_range.1) {
            return Err(format!("z range {:?} is not ordered", self.z_range));
        }
        if !(self.v_max > 0.0) {
            return Err(format!("v_max must be positive, got {}", self.v_max));
        }
        if !(self.reach_radius > 0.0) {
            return Err(format!("reach radius must be positive, got {}", self.reach_radius));
        }
        if self.max_steps == 0 {
            return Err("max steps must be at least 1".into());
        }
        if (0..3).any(|k| self.start_min[k] > self.start_max[k]) {
            return Err("start region minimum exceeds maximum".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
