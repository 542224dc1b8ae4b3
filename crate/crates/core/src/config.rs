//! Sectioned `key = value` engine configuration.
//!
//! ```text
//! # comment
//! [scene]
//! synthetic = open_field
//! [camera]
//! width = 80
//! fov = 90
//! [env]
//! goal = 3, 0, 1
//! ```
//!
//! Lists are comma separated. Every key has a default, unknown sections and
//! keys are errors, and a key may appear once per file. Relative paths are
//! resolved against the directory of the file that names them.
//!
//! `[scene] bundle = dir` points at a scene bundle: `dir/scene.ply`, an
//! optional `dir/points.ply` collision cloud and an optional `dir/scene.cfg`
//! in this same format. The bundle's `scene.cfg` is applied first, so the
//! main file overrides it.

use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

use crate::domain_adapt::DaConfig;
use crate::nav_env::{EnvConfig, SceneAssets};
use crate::rasterizer::{Binning, CameraModel};
use crate::rng::stream;
use crate::splat_scene::{
    apply_transform, load_ply, load_points_ply, synth, ColorRandomizationRanges, GaussianCloud, SceneTransform,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{origin}:{line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}:{line}: unknown section [{section}]")]
    UnknownSection {
        origin: String,
        line: usize,
        section: String,
    },
    #[error("{origin}:{line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        origin: String,
        line: usize,
        section: String,
        key: String,
    },
    #[error("{origin}:{line}: bad value for `{key}`: {message}")]
    Value {
        origin: String,
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("scene {path}: {message}")]
    Scene { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticScene {
    OpenField,
    PillarForest { pillars: usize },
    RandomBox { gaussians: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SceneSource {
    Ply(PathBuf),
    Synthetic(SyntheticScene),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub source: SceneSource,
    /// Separate collision cloud; otherwise Gaussian means are used.
    pub points: Option<PathBuf>,
    pub transform: SceneTransform,
    pub voxel: f64,
    pub inflation: f64,
    /// Opacity threshold for Gaussians that count as obstacles.
    pub opacity_min: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            source: SceneSource::Synthetic(SyntheticScene::OpenField),
            points: None,
            transform: SceneTransform::identity(),
            voxel: 0.1,
            inflation: 0.2,
            opacity_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineConfig {
    pub scene: SceneConfig,
    pub env: EnvConfig,
    pub da: DaConfig,
}

struct Entry {
    origin: String,
    base: PathBuf,
    line: usize,
    section: String,
    key: String,
    value: String,
}

impl Entry {
    fn bad(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            origin: self.origin.clone(),
            line: self.line,
            key: self.key.clone(),
            message: message.into(),
        }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        let v: f64 = self
            .value
            .parse()
            .map_err(|_| self.bad(format!("expected a number, got `{}`", self.value)))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad("value must be finite"))
        }
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.bad(format!("expected a non-negative integer, got `{}`", self.value)))
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.value.as_str() {
            "true" | "on" | "yes" => Ok(true),
            "false" | "off" | "no" => Ok(false),
            v => Err(self.bad(format!("expected true or false, got `{v}`"))),
        }
    }

    fn list(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.bad(format!("expected a number, got `{s}`")))
            })
            .collect()
    }

    fn array<const N: usize>(&self) -> Result<[f64; N], ConfigError> {
        let v = self.list()?;
        <[f64; N]>::try_from(v.as_slice()).map_err(|_| self.bad(format!("expected {N} values, got {}", v.len())))
    }

    fn range(&self) -> Result<(f64, f64), ConfigError> {
        let [lo, hi] = self.array::<2>()?;
        if lo > hi {
            return Err(self.bad(format!("range lower bound {lo} exceeds upper bound {hi}")));
        }
        Ok((lo, hi))
    }

    fn sizes(&self) -> Result<Vec<usize>, ConfigError> {
        self.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| self.bad(format!("expected a positive integer, got `{s}`")))
            })
            .collect()
    }

    fn path(&self) -> PathBuf {
        let p = Path::new(&self.value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

fn parse_entries(text: &str, origin: &str, base: &Path) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let syntax = |message: String| ConfigError::Syntax {
            origin: origin.to_string(),
            line,
            message,
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(format!("unterminated section header `{content}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection {
                    origin: origin.to_string(),
                    line,
                    section: name.to_string(),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(syntax("empty key".into()));
        }
        let section = section
            .clone()
            .ok_or_else(|| syntax(format!("key `{key}` outside any section")))?;
        if let Some(prev) = entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(syntax(format!(
                "duplicate key `{key}` (first set on line {})",
                prev.line
            )));
        }
        entries.push(Entry {
            origin: origin.to_string(),
            base: base.to_path_buf(),
            line,
            section,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

const SECTIONS: [&str; 7] = ["scene", "camera", "dynamics", "randomization", "env", "render", "da"];

/// Settings that only become part of the config once every entry is read.
struct Draft {
    cfg: EngineConfig,
    color: ColorRandomizationRanges,
    color_enabled: bool,
    fov_range: (f64, f64),
    fov_enabled: bool,
    width: usize,
    height: usize,
    fov: f64,
    camera_set: bool,
    synthetic: Option<SyntheticScene>,
    pillars: usize,
    gaussians: usize,
}

impl Draft {
    fn new() -> Self {
        let cfg = EngineConfig::default();
        let cam = cfg.env.camera;
        Self {
            color: cfg.env.color.unwrap_or_default(),
            color_enabled: cfg.env.color.is_some(),
            fov_range: cfg.env.fov_range.unwrap_or((67.0, 106.0)),
            fov_enabled: cfg.env.fov_range.is_some(),
            width: cam.width,
            height: cam.height,
            fov: cam.fov_x_deg(),
            camera_set: false,
            synthetic: None,
            pillars: synth::PillarParams::default().count,
            gaussians: 10_000,
            cfg,
        }
    }

    fn apply(&mut self, e: &Entry) -> Result<(), ConfigError> {
        let c = &mut self.cfg;
        let env = &mut c.env;
        let ep = &mut env.episode;
        let w = &mut ep.weights;
        let dy = &mut env.dynamics;
        let g = &mut env.gains;
        let lat = &mut env.latency;
        let per = &mut env.perception;
        let r = &mut env.render;
        let da = &mut c.da;
        match (e.section.as_str(), e.key.as_str()) {
            ("scene", "ply") => c.scene.source = SceneSource::Ply(e.path()),
            ("scene", "bundle") => {
                let dir = e.path();
                c.scene.source = SceneSource::Ply(dir.join("scene.ply"));
                let points = dir.join("points.ply");
                if points.exists() {
                    c.scene.points = Some(points);
                }
            }
            ("scene", "synthetic") => {
                self.synthetic = Some(match e.value.as_str() {
                    "open_field" => SyntheticScene::OpenField,
                    "pillar_forest" => SyntheticScene::PillarForest { pillars: 0 },
                    "random_box" => SyntheticScene::RandomBox { gaussians: 0 },
                    v => return Err(e.bad(format!("unknown synthetic scene `{v}`"))),
                })
            }
            ("scene", "pillars") => self.pillars = e.usize()?,
            ("scene", "gaussians") => self.gaussians = e.usize()?,
            ("scene", "points") => c.scene.points = Some(e.path()),
            ("scene", "scale") => c.scene.transform.scale = e.f64()?,
            ("scene", "rotation") => {
                let [w, x, y, z] = e.array::<4>()?;
                let q = nalgebra::Quaternion::new(w, x, y, z);
                if q.norm() < 1e-9 {
                    return Err(e.bad("rotation quaternion has zero norm"));
                }
                c.scene.transform.rotation = UnitQuaternion::from_quaternion(q);
            }
            ("scene", "translation") => c.scene.transform.translation = Vector3::from(e.array::<3>()?),
            ("scene", "voxel") => c.scene.voxel = e.f64()?,
            ("scene", "inflation") => c.scene.inflation = e.f64()?,
            ("scene", "opacity_min") => c.scene.opacity_min = e.f64()?,
            ("scene", "color_randomization") => self.color_enabled = e.bool()?,
            ("scene", "color_alpha") => self.color.alpha = e.range()?,
            ("scene", "color_beta") => self.color.beta = e.range()?,
            ("scene", "color_noise_sigma") => self.color.noise_sigma = e.f64()?,
            ("scene", "fov_randomization") => self.fov_enabled = e.bool()?,
            ("scene", "fov_range") => self.fov_range = e.range()?,

            ("camera", "width") => (self.width, self.camera_set) = (e.usize()?, true),
            ("camera", "height") => (self.height, self.camera_set) = (e.usize()?, true),
            ("camera", "fov") => (self.fov, self.camera_set) = (e.f64()?, true),
            ("camera", "mount_pitch") => env.mount_pitch_deg = e.f64()?,

            ("dynamics", "mass") => dy.mass = e.f64()?,
            ("dynamics", "inertia") => dy.inertia = Vector3::from(e.array::<3>()?),
            ("dynamics", "gravity") => dy.gravity = e.f64()?,
            ("dynamics", "drag") => dy.drag = e.f64()?,
            ("dynamics", "dt_sim") => dy.dt_sim = e.f64()?,
            ("dynamics", "decimation") => dy.decimation = e.usize()?,
            ("dynamics", "tilt_max") => g.tilt_max_deg = e.f64()?,
            ("dynamics", "yawrate_max") => g.yawrate_max_deg = e.f64()?,
            ("dynamics", "k_thrust") => g.k_thrust = e.f64()?,
            ("dynamics", "thrust_max") => g.thrust_max = e.f64()?,
            ("dynamics", "kp_angle") => g.kp_angle = e.f64()?,
            ("dynamics", "kp_rate") => g.kp_rate = Vector3::from(e.array::<3>()?),
            ("dynamics", "kd_rate") => g.kd_rate = Vector3::from(e.array::<3>()?),

            ("randomization", "latency") => lat.enabled = e.bool()?,
            ("randomization", "latency_delay_ms") => lat.delay_ms = e.range()?,
            ("randomization", "latency_resample_ms") => lat.resample_ms = e.range()?,
            ("randomization", "action_noise_sigma") => lat.noise_sigma = e.f64()?,
            ("randomization", "perception_noise") => per.enabled = e.bool()?,
            ("randomization", "ou_theta") => per.theta = e.f64()?,
            ("randomization", "velocity_sigma") => per.velocity_sigma = e.f64()?,
            ("randomization", "direction_sigma") => per.direction_sigma = e.f64()?,
            ("randomization", "z_sigma") => per.z_sigma = e.f64()?,

            ("env", "goal") => ep.goal = e.array::<3>()?,
            ("env", "start_min") => ep.start_min = e.array::<3>()?,
            ("env", "start_max") => ep.start_max = e.array::<3>()?,
            ("env", "z_range") => ep.z_range = e.range()?,
            ("env", "v_max") => ep.v_max = e.f64()?,
            ("env", "reach_radius") => ep.reach_radius = e.f64()?,
            ("env", "max_steps") => ep.max_steps = e.usize()?,
            ("env", "privileged") => env.privileged = e.bool()?,
            ("env", "w_collision") => w.collision = e.f64()?,
            ("env", "w_z_velocity") => w.z_velocity = e.f64()?,
            ("env", "w_action_magnitude") => w.action_magnitude = e.f64()?,
            ("env", "w_action_change") => w.action_change = e.f64()?,
            ("env", "w_distance") => w.distance = e.f64()?,
            ("env", "w_success") => w.success = e.f64()?,
            ("env", "w_velocity_excess") => w.velocity_excess = e.f64()?,

            ("render", "binning") => {
                r.binning = match e.value.as_str() {
                    "exact" => Binning::Exact,
                    "square" => Binning::Square,
                    v => return Err(e.bad(format!("expected exact or square, got `{v}`"))),
                }
            }
            ("render", "tile_size") => r.tile_size = e.usize()?,
            ("render", "near") => r.near = e.f64()?,
            ("render", "far") => r.far = e.f64()?,
            ("render", "blur") => r.blur = e.f64()?,
            ("render", "background") => r.background = e.array::<3>()?,

            ("da", "encoder") => da.encoder = e.sizes()?,
            ("da", "disc_hidden") => da.disc_hidden = e.usize()?,
            ("da", "lambda") => da.lambda_grl = e.f64()?,
            ("da", "lambda1") => da.lambda1 = e.f64()?,
            ("da", "lambda2") => da.lambda2 = e.f64()?,
            ("da", "lr") => da.sgd.learning_rate = e.f64()?,
            ("da", "disc_lr_scale") => da.sgd.disc_lr_scale = e.f64()?,
            ("da", "weight_decay") => da.sgd.weight_decay = e.f64()?,
            ("da", "disc_weight_decay") => da.sgd.disc_weight_decay = e.f64()?,
            ("da", "batch_size") => da.batch_size = e.usize()?,
            ("da", "epochs") => da.epochs = e.usize()?,
            ("da", "probe_train_fraction") => da.probe_train_fraction = e.f64()?,
            ("da", "input_dim") => da.data.input_dim = e.usize()?,
            ("da", "content_dim") => da.data.content_dim = e.usize()?,
            ("da", "style_dim") => da.data.style_dim = e.usize()?,
            ("da", "style_shift") => da.data.style_shift = e.f64()?,
            ("da", "noise") => da.data.noise = e.f64()?,
            ("da", "train_per_domain") => da.data.train_per_domain = e.usize()?,
            ("da", "holdout_per_domain") => da.data.holdout_per_domain = e.usize()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: e.origin.clone(),
                    line: e.line,
                    section: e.section.clone(),
                    key: e.key.clone(),
                })
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<EngineConfig, ConfigError> {
        if let Some(kind) = self.synthetic {
            if matches!(self.cfg.scene.source, SceneSource::Ply(_)) {
                return Err(ConfigError::Invalid(
                    "[scene] sets both a PLY source and a synthetic scene".into(),
                ));
            }
            self.cfg.scene.source = SceneSource::Synthetic(match kind {
                SyntheticScene::OpenField => SyntheticScene::OpenField,
                SyntheticScene::PillarForest { .. } => SyntheticScene::PillarForest { pillars: self.pillars },
                SyntheticScene::RandomBox { .. } => SyntheticScene::RandomBox {
                    gaussians: self.gaussians,
                },
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::Invalid("camera width and height must be positive".into()));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(ConfigError::Invalid(format!(
                "camera fov must lie in (0, 180), got {}",
                self.fov
            )));
        }
        if !(self.fov_range.0 > 0.0 && self.fov_range.1 < 180.0) {
            return Err(ConfigError::Invalid(format!(
                "fov_range must lie in (0, 180), got {:?}",
                self.fov_range
            )));
        }
        let env = &mut self.cfg.env;
        if self.camera_set {
            env.camera = CameraModel::from_fov(self.width, self.height, self.fov);
        }
        env.color = self.color_enabled.then_some(self.color);
        env.fov_range = self.fov_enabled.then_some(self.fov_range);
        self.cfg.validate()?;
        Ok(self.cfg)
    }
}

impl EngineConfig {
    /// Parses configuration text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        Self::parse_named(text, "<config>", base)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = read_text(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_named(&text, &path.display().to_string(), &base)
    }

    fn parse_named(text: &str, origin: &str, base: &Path) -> Result<Self, ConfigError> {
        let main = parse_entries(text, origin, base)?;
        let mut entries = Vec::new();
        if let Some(b) = main.iter().find(|e| e.section == "scene" && e.key == "bundle") {
            let cfg_path = b.path().join("scene.cfg");
            if cfg_path.exists() {
                let bundle_text = read_text(&cfg_path)?;
                let bundle = parse_entries(&bundle_text, &cfg_path.display().to_string(), &b.path())?;
                if let Some(nested) = bundle.iter().find(|e| e.section == "scene" && e.key == "bundle") {
                    return Err(nested.bad("a bundle's scene.cfg cannot name another bundle"));
                }
                entries.extend(bundle);
            }
        }
        entries.extend(main);
        let mut draft = Draft::new();
        for e in &entries {
            draft.apply(e)?;
        }
        draft.finish()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.scene;
        if !(s.voxel > 0.0) || !(s.inflation >= 0.0) {
            return bad("scene voxel must be positive and inflation non-negative".into());
        }
        if !(s.transform.scale > 0.0) {
            return bad(format!("scene scale must be positive, got {}", s.transform.scale));
        }
        let env = &self.env;
        env.episode.validate().map_err(ConfigError::Invalid)?;
        let d = &env.dynamics;
        if !(d.mass > 0.0) || d.inertia.iter().any(|&v| !(v > 0.0)) {
            return bad("mass and inertia must be positive".into());
        }
        if !(d.dt_sim > 0.0 && d.dt_sim <= 0.02) || d.decimation == 0 {
            return bad(format!(
                "dt_sim must lie in (0, 0.02] and decimation be at least 1, got {} and {}",
                d.dt_sim, d.decimation
            ));
        }
        if !(env.gains.tilt_max_deg > 0.0 && env.gains.tilt_max_deg < 90.0) {
            return bad(format!("tilt_max must lie in (0, 90), got {}", env.gains.tilt_max_deg));
        }
        let lat = &env.latency;
        if lat.delay_ms.0 < 0.0 || lat.resample_ms.0 <= 0.0 || lat.noise_sigma < 0.0 {
            return bad("latency ranges must be non-negative with a positive resampling interval".into());
        }
        let p = &env.perception;
        if !(p.theta > 0.0 && p.theta < 1.0) {
            return bad(format!("ou_theta must lie in (0, 1), got {}", p.theta));
        }
        if [p.velocity_sigma, p.direction_sigma, p.z_sigma]
            .iter()
            .any(|&v| v < 0.0)
        {
            return bad("perception sigmas must be non-negative".into());
        }
        if let Some(c) = env.color {
            if c.noise_sigma < 0.0 {
                return bad("color_noise_sigma must be non-negative".into());
            }
        }
        let r = &env.render;
        if r.tile_size == 0 || !(r.near > 0.0) || !(r.far > r.near) || r.blur < 0.0 {
            return bad("render tile_size, near, far and blur are out of range".into());
        }
        let da = &self.da;
        if da.encoder.is_empty() || da.disc_hidden == 0 || da.batch_size == 0 {
            return bad("da encoder, disc_hidden and batch_size must be non-empty".into());
        }
        if da.lambda_grl < 0.0 || !(da.sgd.learning_rate > 0.0) {
            return bad("da lambda must be non-negative and lr positive".into());
        }
        if !(da.probe_train_fraction > 0.0 && da.probe_train_fraction < 1.0) {
            return bad(format!(
                "probe_train_fraction must lie in (0, 1), got {}",
                da.probe_train_fraction
            ));
        }
        let dd = &da.data;
        if dd.input_dim == 0 || dd.content_dim == 0 || dd.train_per_domain == 0 || dd.holdout_per_domain < 2 {
            return bad("da dataset dimensions and sizes must be positive".into());
        }
        Ok(())
    }

    /// Loads or generates the scene, applies the transform and builds the
    /// collision map. Synthetic scenes draw from the `scene` stream of `seed`.
    pub fn load_scene(&self, seed: u64) -> Result<SceneAssets, ConfigError> {
        let s = &self.scene;
        let cloud = match &s.source {
            SceneSource::Ply(path) => load_ply(path).map_err(|e| scene_error(path, e))?,
            SceneSource::Synthetic(kind) => synthetic_cloud(*kind, seed),
        };
        let points = match &s.points {
            Some(path) => Some(load_points_ply(path).map_err(|e| scene_error(path, e))?),
            None => None,
        };
        let (cloud, points) = if s.transform.is_identity() {
            (cloud, points)
        } else {
            let t = &s.transform;
            (
                apply_transform(&cloud, t),
                points.map(|p| p.iter().map(|q| t.apply_point(q)).collect()),
            )
        };
        Ok(SceneAssets::from_cloud(
            cloud,
            points.as_deref(),
            s.voxel,
            s.inflation,
            s.opacity_min,
        ))
    }
}

pub fn synthetic_cloud(kind: SyntheticScene, seed: u64) -> GaussianCloud {
    let mut rng = stream(seed, "scene", 0);
    match kind {
        SyntheticScene::OpenField => synth::open_field(&mut rng),
        SyntheticScene::PillarForest { pillars } => synth::pillar_forest(
            &mut rng,
            synth::PillarParams {
                count: pillars,
                ..Default::default()
            },
        ),
        SyntheticScene::RandomBox { gaussians } => synth::random_box(gaussians, &mut rng, synth::BoxParams::default()),
    }
}

fn scene_error(path: &Path, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Scene {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}
