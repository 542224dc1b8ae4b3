//! Gaussian splatting rendering and quadrotor navigation simulation.
//!
//! The crate is organised by subsystem:
//!
//! - [`splat_scene`]: Gaussian cloud storage, PLY IO, scene transforms, color
//!   randomization and pruning.
//! - [`rasterizer`]: EWA projection, tile binning, front-to-back compositing
//!   and per-Gaussian importance scores.
//! - [`flight_dynamics`]: rigid-body quadrotor, cascaded attitude/rate PID,
//!   command latency and actuator noise.
//! - [`nav_env`]: the navigation environment (observations, reward,
//!   termination, occupancy map, perception noise, vectorized stepping).
//! - [`domain_adapt`]: a small manually differentiated encoder/discriminator
//!   with gradient reversal, plus separability metrics.
//! - [`config`]: the sectioned `key = value` engine configuration.

pub mod config;
pub mod domain_adapt;
pub mod flight_dynamics;
pub mod nav_env;
pub mod rasterizer;
pub mod rng;
pub mod splat_scene;

pub use config::{ConfigError, EngineConfig};
pub use splat_scene::GaussianCloud;
