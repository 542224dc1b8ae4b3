//! Mean-reverting perception noise: `n ← (1 − θ)·n + N(0, σ²)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    theta: f64,
    sigma: Vec<f64>,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: Vec<f64>) -> Self {
        assert!(theta > 0.0 && theta < 1.0, "theta must be in (0, 1)");
        let state = vec![0.0; sigma.len()];
        Self { theta, sigma, state }
    }

    pub fn isotropic(theta: f64, sigma: f64, channels: usize) -> Self {
        Self::new(theta, vec![sigma; channels])
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for (n, s) in self.state.iter_mut().zip(&self.sigma) {
            let z: f64 = StandardNormal.sample(rng);
            *n = (1.0 - self.theta) * *n + s * z;
        }
        &self.state
    }

    /// Closed-form stationary standard deviation `σ / √(1 − (1 − θ)²)`.
    pub fn stationary_std(theta: f64, sigma: f64) -> f64 {
        sigma / (1.0 - (1.0 - theta).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionNoiseConfig {
    pub enabled: bool,
    pub theta: f64,
    pub velocity_sigma: f64,
    pub direction_sigma: f64,
    pub z_sigma: f64,
}

impl Default for PerceptionNoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            theta: 0.1,
            velocity_sigma: 0.08,
            direction_sigma: 0.05,
            z_sigma: 0.03,
        }
    }
}

/// Current observation offsets for velocity, goal direction and altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerceptionOffsets {
    pub velocity: [f64; 3],
    pub direction: [f64; 3],
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionNoise {
    enabled: bool,
    velocity: OuNoise,
    direction: OuNoise,
    z: OuNoise,
}

impl PerceptionNoise {
    pub fn new(cfg: &PerceptionNoiseConfig) -> Self {
        Self {
            enabled: cfg.enabled,
            velocity: OuNoise::isotropic(cfg.theta, cfg.velocity_sigma, 3),
            direction: OuNoise::isotropic(cfg.theta, cfg.direction_sigma, 3),
            z: OuNoise::isotropic(cfg.theta, cfg.z_sigma, 1),
        }
    }

    pub fn reset(&mut self) {
        self.velocity.reset();
        self.direction.reset();
        self.z.reset();
    }

    pub fn offsets(&self) -> PerceptionOffsets {
        let v = self.velocity.state();
        let d = self.direction.state();
        PerceptionOffsets {
            velocity: [v[0], v[1], v[2]],
            direction: [d[0], d[1], d[2]],
            z: self.z.state()[0],
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> PerceptionOffsets {
        if self.enabled {
            self.velocity.step(rng);
            self.direction.step(rng);
            self.z.step(rng);
        }
        self.offsets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_stays_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut n = OuNoise::isotropic(0.1, 0.0, 2);
        for _ in 0..1000 {
            assert_eq!(n.step(&mut rng), &[0.0, 0.0]);
        }
    }

    #[test]
    fn stationary_std_closed_form() {
        assert!((OuNoise::stationary_std(0.1, 0.08) - 0.08 / 0.19f64.sqrt()).abs() < 1e-15);
        assert!((OuNoise::stationary_std(0.1, 0.08) - 0.1835).abs() < 1e-4);
    }

    #[test]
    fn disabled_perception_noise_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PerceptionNoise::new(&PerceptionNoiseConfig {
            enabled: false,
            ..Default::default()
        });
        assert_eq!(p.step(&mut rng), PerceptionOffsets::default());
    }
}
