//! Gaussian scenes: storage, IO, transforms, color randomization, pruning.

mod ply;
pub mod synth;

pub use ply::{load_ply, load_points_ply, read_ply, save_ply, write_ply, PlyError};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("array length mismatch: {field} has {got} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in gaussian {index}")]
    NonFinite { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Higher-order spherical harmonic coefficients, stored per Gaussian in the
/// PLY `f_rest_*` order: all coefficients of channel 0, then channel 1, then 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ShRest {
    per_channel: usize,
    data: Vec<f64>,
}

impl ShRest {
    /// `per_channel` must be 3, 8 or 15 (SH degree 1, 2 or 3).
    pub fn new(per_channel: usize, data: Vec<f64>) -> Result<Self, SceneError> {
        if ![3, 8, 15].contains(&per_channel) {
            return Err(SceneError::InvalidArgument(format!(
                "unsupported number of SH coefficients per channel: {per_channel}"
            )));
        }
        if data.len() % (3 * per_channel) != 0 {
            return Err(SceneError::InvalidArgument(
                "SH data length is not a multiple of the per-gaussian stride".into(),
            ));
        }
        Ok(Self { per_channel, data })
    }

    pub fn per_channel(&self) -> usize {
        self.per_channel
    }

    pub fn degree(&self) -> usize {
        match self.per_channel {
            3 => 1,
            8 => 2,
            _ => 3,
        }
    }

    pub fn stride(&self) -> usize {
        3 * self.per_channel
    }

    pub fn get(&self, gaussian: usize) -> &[f64] {
        let s = self.stride();
        &self.data[gaussian * s..(gaussian + 1) * s]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn select(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(keep.len() * self.stride());
        for &i in keep {
            data.extend_from_slice(self.get(i));
        }
        Self {
            per_channel: self.per_channel,
            data,
        }
    }
}

/// A set of 3D Gaussian primitives.
///
/// Scales are stored as logarithms and opacities as logits, exactly as they
/// appear in trained PLY files; activations are applied on use.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    means: Vec<[f64; 3]>,
    log_scales: Vec<[f64; 3]>,
    /// (w, x, y, z)
    rotations: Vec<[f64; 4]>,
    opacity_logits: Vec<f64>,
    sh_dc: Vec<[f64; 3]>,
    sh_rest: Option<ShRest>,
}

impl GaussianCloud {
    /// Builds a cloud, validating lengths and finiteness and normalizing
    /// quaternions that are not already unit within 1e-6.
    pub fn new(
        means: Vec<[f64; 3]>,
        log_scales: Vec<[f64; 3]>,
        rotations: Vec<[f64; 4]>,
        opacity_logits: Vec<f64>,
        sh_dc: Vec<[f64; 3]>,
        sh_rest: Option<ShRest>,
    ) -> Result<Self, SceneError> {
        let n = means.len();
        let check = |field, got| {
            if got == n {
                Ok(())
            } else {
                Err(SceneError::LengthMismatch {
                    field,
                    got,
                    expected: n,
                })
            }
        };
        check("log_scales", log_scales.len())?;
        check("rotations", rotations.len())?;
        check("opacity_logits", opacity_logits.len())?;
        check("sh_dc", sh_dc.len())?;
        if let Some(rest) = &sh_rest {
            check("sh_rest", rest.data.len() / rest.stride())?;
        }

        let mut rotations = rotations;
        for i in 0..n {
            let finite = means[i].iter().all(|v| v.is_finite())
                && log_scales[i].iter().all(|v| v.is_finite())
                && rotations[i].iter().all(|v| v.is_finite())
                && opacity_logits[i].is_finite()
                && sh_dc[i].iter().all(|v| v.is_finite())
                && sh_rest.as_ref().is_none_or(|r| r.get(i).iter().all(|v| v.is_finite()));
            let q = &mut rotations[i];
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !finite || norm == 0.0 {
                return Err(SceneError::NonFinite { index: i });
            }
            if (norm - 1.0).abs() > 1e-6 {
                q.iter_mut().for_each(|v| *v /= norm);
            }
        }

        Ok(Self {
            means,
            log_scales,
            rotations,
            opacity_logits,
            sh_dc,
            sh_rest,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[[f64; 3]] {
        &self.means
    }

    pub fn log_scales(&self) -> &[[f64; 3]] {
        &self.log_scales
    }

    pub fn rotations(&self) -> &[[f64; 4]] {
        &self.rotations
    }

    pub fn opacity_logits(&self) -> &[f64] {
        &self.opacity_logits
    }

    pub fn sh_dc(&self) -> &[[f64; 3]] {
        &self.sh_dc
    }

    pub fn sh_rest(&self) -> Option<&ShRest> {
        self.sh_rest.as_ref()
    }

    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.opacity_logits[i])
    }

    pub fn rotation(&self, i: usize) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotations[i];
        UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z))
    }

    /// World-frame covariance `R S Sᵀ Rᵀ`.
    pub fn covariance(&self, i: usize) -> Matrix3<f64> {
        let s = self.log_scales[i];
        let scale = Matrix3::from_diagonal(&Vector3::new(s[0].exp(), s[1].exp(), s[2].exp()));
        let m = self.rotation(i).to_rotation_matrix().into_inner() * scale;
        m * m.transpose()
    }

    /// Cloud restricted to `keep`, in the given order.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            means: keep.iter().map(|&i| self.means[i]).collect(),
            log_scales: keep.iter().map(|&i| self.log_scales[i]).collect(),
            rotations: keep.iter().map(|&i| self.rotations[i]).collect(),
            opacity_logits: keep.iter().map(|&i| self.opacity_logits[i]).collect(),
            sh_dc: keep.iter().map(|&i| self.sh_dc[i]).collect(),
            sh_rest: self.sh_rest.as_ref().map(|r| r.select(keep)),
        }
    }

    /// Same geometry with a replaced set of DC coefficients.
    pub fn with_sh_dc(&self, sh_dc: Vec<[f64; 3]>) -> Result<Self, SceneError> {
        if sh_dc.len() != self.len() {
            return Err(SceneError::LengthMismatch {
                field: "sh_dc",
                got: sh_dc.len(),
                expected: self.len(),
            });
        }
        Ok(Self { sh_dc, ..self.clone() })
    }
}

/// Similarity transform taking scene coordinates into the simulation world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SceneTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SceneTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Result<Self, SceneError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SceneError::InvalidArgument(format!(
                "transform scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.rotation == UnitQuaternion::identity() && self.translation == Vector3::zeros()
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self {
            scale: 1.0 / self.scale,
            rotation,
            translation: -(rotation * self.translation) / self.scale,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

pub fn apply_transform(cloud: &GaussianCloud, t: &SceneTransform) -> GaussianCloud {
    if t.is_identity() {
        return cloud.clone();
    }
    let ln_scale = t.scale.ln();
    let means = cloud
        .means
        .iter()
        .map(|m| {
            let p = t.apply_point(&Vector3::from(*m));
            [p.x, p.y, p.z]
        })
        .collect();
    let log_scales = cloud
        .log_scales
        .iter()
        .map(|s| [s[0] + ln_scale, s[1] + ln_scale, s[2] + ln_scale])
        .collect();
    let rotations = cloud
        .rotations
        .iter()
        .map(|&[w, x, y, z]| {
            let q = t.rotation.quaternion() * Quaternion::new(w, x, y, z);
            [q.w, q.i, q.j, q.k]
        })
        .collect();
    GaussianCloud {
        means,
        log_scales,
        rotations,
        ..cloud.clone()
    }
}

/// Affine DC color perturbation `α·C + β + ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRandomization {
    pub alpha: f64,
    pub beta: f64,
    pub noise_sigma: f64,
}

/// Sampling ranges for [`ColorRandomization`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRandomizationRanges {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub noise_sigma: f64,
}

impl Default for ColorRandomizationRanges {
    fn default() -> Self {
        Self {
            alpha: (0.8, 1.3),
            beta: (-0.05, 0.05),
            noise_sigma: 0.025,
        }
    }
}

impl ColorRandomizationRanges {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ColorRandomization {
        ColorRandomization {
            alpha: uniform(rng, self.alpha),
            beta: uniform(rng, self.beta),
            noise_sigma: self.noise_sigma,
        }
    }
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

pub fn randomize_colors<R: Rng + ?Sized>(cloud: &GaussianCloud, cr: &ColorRandomization, rng: &mut R) -> GaussianCloud {
    let noise = (cr.noise_sigma > 0.0).then(|| Normal::new(0.0, cr.noise_sigma).unwrap());
    let sh_dc = cloud
        .sh_dc
        .iter()
        .map(|c| {
            c.map(|v| {
                let eps = noise.as_ref().map_or(0.0, |n| n.sample(rng));
                cr.alpha * v + cr.beta + eps
            })
        })
        .collect();
    GaussianCloud { sh_dc, ..cloud.clone() }
}

/// Means of all Gaussians whose activated opacity is at least `opacity_min`.
pub fn extract_point_cloud(cloud: &GaussianCloud, opacity_min: f64) -> Vec<Vector3<f64>> {
    (0..cloud.len())
        .filter(|&i| cloud.opacity(i) >= opacity_min)
        .map(|i| Vector3::from(cloud.means[i]))
        .collect()
}

/// Keeps the `ceil(keep_fraction · count)` highest-scoring Gaussians in their
/// original order. Equal scores favour the lower index.
pub fn prune(cloud: &GaussianCloud, scores: &[f64], keep_fraction: f64) -> Result<GaussianCloud, SceneError> {
    if scores.len() != cloud.len() {
        return Err(SceneError::LengthMismatch {
            field: "scores",
            got: scores.len(),
            expected: cloud.len(),
        });
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(SceneError::InvalidArgument(format!(
            "keep_fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let keep = keep_count(cloud.len(), keep_fraction);
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut survivors = order[..keep].to_vec();
    survivors.sort_unstable();
    Ok(cloud.select(&survivors))
}

pub fn keep_count(count: usize, keep_fraction: f64) -> usize {
    // Guard the ceiling against representation error (0.5 * 2000 etc).
    let raw = keep_fraction * count as f64;
    let rounded = raw.round();
    let k = if (raw - rounded).abs() < 1e-9 {
        rounded
    } else {
        raw.ceil()
    };
    (k as usize).min(count)
}
