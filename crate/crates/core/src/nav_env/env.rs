use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::observation::{assemble_observation, EnvObservation};
use super::occupancy::{build_occupancy, OccupancyMap};
use super::ou::{PerceptionNoise, PerceptionNoiseConfig, PerceptionOffsets};
use super::reward::{compute_reward, RewardBreakdown};
use super::termination::{check_termination, Termination};
use super::EpisodeConfig;
use crate::flight_dynamics::{
    integrate, Action, CascadedPid, DynamicsParams, LatencyConfig, LatencyModel, PidGains, QuadState,
};
use crate::rasterizer::{forward_mount, render_batch, CameraModel, Pose, RenderError, RenderMode, RenderSettings};
use crate::rng::{stream, StreamRng};
use crate::splat_scene::{extract_point_cloud, randomize_colors, uniform, ColorRandomizationRanges, GaussianCloud};

pub const MAX_START_TRIES: usize = 1000;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("no free start position found in {tries} tries; check the start region against the occupancy map")]
    NoFreeStart { tries: usize },
    #[error("render: {0}")]
    Render(#[from] RenderError),
    #[error("{0}")]
    Argument(String),
}

/// Read-only scene data shared by every environment.
#[derive(Debug, Clone)]
pub struct SceneAssets {
    pub cloud: Arc<GaussianCloud>,
    pub map: Arc<OccupancyMap>,
}

impl SceneAssets {
    pub fn new(cloud: GaussianCloud, map: OccupancyMap) -> Self {
        Self {
            cloud: Arc::new(cloud),
            map: Arc::new(map),
        }
    }

    /// Builds the collision map from `collision_points`, or from the means
    /// of Gaussians with opacity ≥ `opacity_min` when none are given.
    pub fn from_cloud(
        cloud: GaussianCloud,
        collision_points: Option<&[Vector3<f64>]>,
        voxel: f64,
        inflation: f64,
        opacity_min: f64,
    ) -> Self {
        let map = match collision_points {
            Some(p) => build_occupancy(p, voxel, inflation),
            None => build_occupancy(&extract_point_cloud(&cloud, opacity_min), voxel, inflation),
        };
        Self::new(cloud, map)
    }
}

/// `base` resized to a horizontal FOV drawn uniformly from `range` (degrees).
pub fn sample_fov<R: Rng + ?Sized>(base: &CameraModel, range: (f64, f64), rng: &mut R) -> CameraModel {
    CameraModel::from_fov(base.width, base.height, uniform(rng, range))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub episode: EpisodeConfig,
    pub dynamics: DynamicsParams,
    pub gains: PidGains,
    pub latency: LatencyConfig,
    pub perception: PerceptionNoiseConfig,
    /// Per-reset color randomization; `None` renders the scene as loaded.
    pub color: Option<ColorRandomizationRanges>,
    /// Per-reset horizontal FOV range in degrees; `None` keeps `camera`.
    pub fov_range: Option<(f64, f64)>,
    pub camera: CameraModel,
    pub mount_pitch_deg: f64,
    pub render: RenderSettings,
    /// Adds the depth map to observations.
    pub privileged: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode: EpisodeConfig::default(),
            dynamics: DynamicsParams::default(),
            gains: PidGains::default(),
            latency: LatencyConfig::default(),
            perception: PerceptionNoiseConfig::default(),
            color: Some(ColorRandomizationRanges::default()),
            fov_range: Some((67.0, 106.0)),
            camera: CameraModel::default(),
            mount_pitch_deg: 0.0,
            render: RenderSettings::default(),
            privileged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// The environment finished an episode on this step and was reset; the
    /// observation belongs to the new episode.
    pub reset: bool,
    pub breakdown: RewardBreakdown,
    pub fault: Option<String>,
    /// Control steps taken in the episode this step belonged to.
    pub episode_steps: usize,
    pub episode: u64,
    /// Ground-truth position at the end of the step, before any reset.
    pub position: [f64; 3],
    /// Command delivered to the controller after latency and noise.
    pub applied_action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: EnvObservation,
    pub reward: f64,
    pub termination: Termination,
    pub info: StepInfo,
}

struct Transition {
    reward: f64,
    termination: Termination,
    info: StepInfo,
}

/// One drone in one scene. All randomness is drawn from the environment's
/// own stream.
#[derive(Debug, Clone)]
pub struct NavEnv {
    scene: SceneAssets,
    cfg: Arc<EnvConfig>,
    rng: StreamRng,
    mount: Matrix3<f64>,
    cloud: Arc<GaussianCloud>,
    camera: CameraModel,
    quad: QuadState,
    pid: CascadedPid,
    latency: LatencyModel,
    noise: PerceptionNoise,
    offsets: PerceptionOffsets,
    prev_action: Action,
    steps: usize,
    episode: u64,
}

impl NavEnv {
    /// Creates the environment and samples its first episode.
    pub fn new(scene: SceneAssets, cfg: Arc<EnvConfig>, rng: StreamRng) -> Result<Self, EnvError> {
        let mut env = Self {
            cloud: scene.cloud.clone(),
            scene,
            mount: forward_mount(cfg.mount_pitch_deg),
            camera: cfg.camera,
            rng,
            quad: QuadState::at_rest(Vector3::zeros(), 0.0),
            pid: CascadedPid::new(cfg.gains),
            latency: LatencyModel::new(cfg.latency),
            noise: PerceptionNoise::new(&cfg.perception),
            offsets: PerceptionOffsets::default(),
            prev_action: Action::ZERO,
            steps: 0,
            episode: 0,
            cfg,
        };
        env.reset_state()?;
        env.episode = 0;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &QuadState {
        &self.quad
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn latency(&self) -> &LatencyModel {
        &self.latency
    }

    pub fn offsets(&self) -> &PerceptionOffsets {
        &self.offsets
    }

    /// The cloud rendered this episode (after color randomization).
    pub fn cloud(&self) -> &GaussianCloud {
        &self.cloud
    }

    pub fn map(&self) -> &OccupancyMap {
        &self.scene.map
    }

    pub fn pose(&self) -> Pose {
        Pose::from_body(self.quad.position, &self.quad.orientation, &self.mount)
    }

    fn render_mode(&self) -> RenderMode {
        if self.cfg.privileged {
            RenderMode::Rgbd
        } else {
            RenderMode::Rgb
        }
    }

    /// Starts a new episode and returns its first observation.
    pub fn reset(&mut self) -> Result<EnvObservation, EnvError> {
        self.reset_state()?;
        self.observe()
    }

    /// Renders the current observation without advancing time.
    pub fn observe(&self) -> Result<EnvObservation, EnvError> {
        let view = render_batch(
            &[&self.cloud],
            &[self.camera],
            &[self.pose()],
            self.render_mode(),
            &self.cfg.render,
        )?
        .pop()
        .expect("one view");
        Ok(assemble_observation(&self.quad, &self.cfg.episode, &self.offsets, view))
    }

    fn reset_state(&mut self) -> Result<(), EnvError> {
        let ep = &self.cfg.episode;
        let mut start = None;
        for _ in 0..MAX_START_TRIES {
            let p = Vector3::from_fn(|k, _| uniform(&mut self.rng, (ep.start_min[k], ep.start_max[k])));
            if !self.scene.map.is_occupied(&p) {
                start = Some(p);
                break;
            }
        }
        let start = start.ok_or(EnvError::NoFreeStart { tries: MAX_START_TRIES })?;
        let yaw = uniform(&mut self.rng, (-std::f64::consts::PI, std::f64::consts::PI));
        self.quad = QuadState::at_rest(start, yaw);
        self.pid.reset();
        self.latency.reset(&mut self.rng);
        self.noise.reset();
        self.offsets = PerceptionOffsets::default();
        self.prev_action = Action::ZERO;
        self.steps = 0;
        self.episode += 1;

        self.cloud = match &self.cfg.color {
            Some(ranges) => {
                let cr = ranges.sample(&mut self.rng);
                Arc::new(randomize_colors(&self.scene.cloud, &cr, &mut self.rng))
            }
            None => self.scene.cloud.clone(),
        };
        self.camera = match self.cfg.fov_range {
            Some(range) => sample_fov(&self.cfg.camera, range, &mut self.rng),
            None => self.cfg.camera,
        };
        Ok(())
    }

    /// Advances one control step and resets if the episode ended. Faults are
    /// reported through the transition rather than returned.
    fn advance(&mut self, action: &Action) -> Transition {
        let cfg = self.cfg.clone();
        let raw = Action::from_array(action.to_array());
        let dt_ctrl = cfg.dynamics.dt_ctrl();
        let delayed = self.latency.effective_action(&raw, dt_ctrl, &mut self.rng);
        let applied = self.latency.apply_noise(&delayed);

        let prev = self.quad;
        let mut fault = None;
        for _ in 0..cfg.dynamics.decimation {
            let (thrust, torque) = self.pid.step(&self.quad, &applied, &cfg.dynamics, cfg.dynamics.dt_sim);
            match integrate(&self.quad, thrust, &torque, &cfg.dynamics, cfg.dynamics.dt_sim) {
                Ok(next) => self.quad = next,
                Err(e) => {
                    fault = Some(e.to_string());
                    break;
                }
            }
        }
        self.steps += 1;

        let (termination, breakdown) = if fault.is_some() {
            (Termination::Fault, RewardBreakdown::default())
        } else {
            let t = check_termination(&self.quad, self.steps, &cfg.episode, &self.scene.map);
            let b = compute_reward(&prev, &self.quad, &raw, &self.prev_action, t, &cfg.episode, dt_ctrl);
            (t, b)
        };
        self.quad.last_action = raw.head();
        self.prev_action = raw;
        self.offsets = self.noise.step(&mut self.rng);

        let mut info = StepInfo {
            reset: false,
            breakdown,
            fault,
            episode_steps: self.steps,
            episode: self.episode,
            position: self.quad.position.into(),
            applied_action: applied,
        };
        if termination.is_done() {
            info.reset = true;
            if let Err(e) = self.reset_state() {
                let msg = e.to_string();
                info.fault = Some(match info.fault.take() {
                    Some(f) => format!("{f}; {msg}"),
                    None => msg,
                });
            }
        }
        Transition {
            reward: breakdown.total,
            termination,
            info,
        }
    }

    /// Single-environment step; equivalent to a batch of one.
    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        let t = self.advance(action);
        Ok(StepResult {
            obs: self.observe()?,
            reward: t.reward,
            termination: t.termination,
            info: t.info,
        })
    }
}

/// A batch of independent environments stepped in lockstep.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<NavEnv>,
}

impl VecEnv {
    /// Environment `i` draws from stream `("env", i)` of `seed`.
    pub fn new(scene: SceneAssets, cfg: EnvConfig, n: usize, seed: u64) -> Result<Self, EnvError> {
        if n == 0 {
            return Err(EnvError::Argument("at least one environment is required".into()));
        }
        let cfg = Arc::new(cfg);
        let envs = (0..n)
            .map(|i| NavEnv::new(scene.clone(), cfg.clone(), stream(seed, "env", i as u64)))
            .collect::<Result<_, _>>()?;
        Ok(Self { envs })
    }

    pub fn from_envs(envs: Vec<NavEnv>) -> Result<Self, EnvError> {
        if envs.is_empty() {
            return Err(EnvError::Argument("at least one environment is required".into()));
        }
        Ok(Self { envs })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[NavEnv] {
        &self.envs
    }

    pub fn into_envs(self) -> Vec<NavEnv> {
        self.envs
    }

    pub fn observe_all(&self) -> Result<Vec<EnvObservation>, EnvError> {
        let views = self.render_all()?;
        Ok(self
            .envs
            .iter()
            .zip(views)
            .map(|(e, v)| assemble_observation(&e.quad, &e.cfg.episode, &e.offsets, v))
            .collect())
    }

    pub fn reset_all(&mut self) -> Result<Vec<EnvObservation>, EnvError> {
        for e in &mut self.envs {
            e.reset_state()?;
        }
        self.observe_all()
    }

    fn render_all(&self) -> Result<Vec<crate::rasterizer::RenderOutput>, EnvError> {
        let first = &self.envs[0];
        let clouds: Vec<&GaussianCloud> = self.envs.iter().map(|e| &*e.cloud).collect();
        let cams: Vec<CameraModel> = self.envs.iter().map(|e| e.camera).collect();
        let poses: Vec<Pose> = self.envs.iter().map(|e| e.pose()).collect();
        let mode = if self.envs.iter().any(|e| e.cfg.privileged) {
            RenderMode::Rgbd
        } else {
            RenderMode::Rgb
        };
        let mut out = render_batch(&clouds, &cams, &poses, mode, &first.cfg.render)?;
        // Environments built with different configs may disagree on depth.
        for (o, e) in out.iter_mut().zip(&self.envs) {
            if !e.cfg.privileged {
                o.depth = None;
            }
        }
        Ok(out)
    }

    /// Advances every environment by one control step, then renders all
    /// observations in one batch.
    pub fn step_batch(&mut self, actions: &[Action]) -> Result<Vec<StepResult>, EnvError> {
        if actions.len() != self.envs.len() {
            return Err(EnvError::Argument(format!(
                "{} actions for {} environments",
                actions.len(),
                self.envs.len()
            )));
        }
        let transitions: Vec<Transition> = self
            .envs
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|(e, a)| e.advance(a))
            .collect();
        let obs = self.observe_all()?;
        Ok(transitions
            .into_iter()
            .zip(obs)
            .map(|(t, obs)| StepResult {
                obs,
                reward: t.reward,
                termination: t.termination,
                info: t.info,
            })
            .collect())
    }
}

#[cfg(test)]
impl NavEnv {
    pub(crate) fn reset_state_for_test(&mut self) -> Result<(), EnvError> {
        self.reset_state()
    }
}
