//! Command latency as a moving average over recent commands, with delay and
//! additive actuator noise re-drawn at random intervals.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Action;
use crate::splat_scene::uniform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyConfig {
    pub enabled: bool,
    /// Range of the averaging window D (ms).
    pub delay_ms: (f64, f64),
    /// Range of the resampling interval T (ms).
    pub resample_ms: (f64, f64),
    /// Standard deviation of the held per-component action noise.
    pub noise_sigma: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            delay_ms: (0.0, 80.0),
            resample_ms: (10.0, 100.0),
            noise_sigma: 0.02,
        }
    }
}

impl LatencyConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            noise_sigma: 0.0,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel {
    pub config: LatencyConfig,
    history: VecDeque<Action>,
    delay_ms: f64,
    resample_interval_ms: f64,
    time_since_resample_ms: f64,
    noise: [f64; 4],
}

/// `a + noise`, re-clamped to `[-1, 1]`.
pub fn add_action_noise(a: &Action, noise: &[f64; 4]) -> Action {
    let v = a.to_array();
    Action::from_array([0, 1, 2, 3].map(|k| v[k] + noise[k]))
}

impl LatencyModel {
    pub fn new(config: LatencyConfig) -> Self {
        Self {
            config,
            history: VecDeque::new(),
            delay_ms: 0.0,
            resample_interval_ms: f64::INFINITY,
            time_since_resample_ms: 0.0,
            noise: [0.0; 4],
        }
    }

    /// A model with a fixed window and no noise or resampling.
    pub fn fixed(delay_ms: f64) -> Self {
        let mut m = Self::new(LatencyConfig::disabled());
        m.delay_ms = delay_ms;
        m
    }

    pub fn delay_ms(&self) -> f64 {
        self.delay_ms
    }

    pub fn resample_interval_ms(&self) -> f64 {
        self.resample_interval_ms
    }

    pub fn noise(&self) -> [f64; 4] {
        self.noise
    }

    /// Clears history and draws fresh delay, interval and noise.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.history.clear();
        self.time_since_resample_ms = 0.0;
        if self.config.enabled {
            self.resample(rng);
        } else {
            self.noise = [0.0; 4];
        }
    }

    fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.delay_ms = uniform(rng, self.config.delay_ms);
        self.resample_interval_ms = uniform(rng, self.config.resample_ms);
        self.noise = sample_noise(self.config.noise_sigma, rng);
    }

    /// Pushes `raw` and returns the mean of the commands issued within the
    /// current window (at least the newest one).
    pub fn effective_action<R: Rng + ?Sized>(&mut self, raw: &Action, dt_ctrl: f64, rng: &mut R) -> Action {
        let dt_ms = dt_ctrl * 1000.0;
        let capacity = (self.config.delay_ms.1.max(self.delay_ms) / dt_ms).floor() as usize + 1;
        self.history.push_back(Action::from_array(raw.to_array()));
        while self.history.len() > capacity {
            self.history.pop_front();
        }

        if self.config.enabled {
            self.time_since_resample_ms += dt_ms;
            if self.time_since_resample_ms >= self.resample_interval_ms {
                self.resample(rng);
                self.time_since_resample_ms = 0.0;
            }
        }

        let window = ((self.delay_ms / dt_ms + 1e-9).floor() as usize).clamp(1, self.history.len());
        let mut sum = [0.0; 4];
        for a in self.history.iter().rev().take(window) {
            for (s, v) in sum.iter_mut().zip(a.to_array()) {
                *s += v;
            }
        }
        Action::from_array(sum.map(|s| s / window as f64))
    }

    /// Adds the currently held noise vector.
    pub fn apply_noise(&self, a: &Action) -> Action {
        add_action_noise(a, &self.noise)
    }
}

pub(crate) fn sample_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> [f64; 4] {
    if sigma <= 0.0 {
        return [0.0; 4];
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    [0; 4].map(|_| n.sample(rng))
}
