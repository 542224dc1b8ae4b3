use rayon::prelude::*;
use thiserror::Error;

use super::{project, tile_bins_exact, tile_bins_square, CameraModel, Image, Pose, ProjectedGaussian, TileBins};
use crate::splat_scene::GaussianCloud;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("invalid render arguments: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Binning {
    Square,
    #[default]
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderMode {
    #[default]
    Rgb,
    Depth,
    Rgbd,
}

impl RenderMode {
    fn rgb(self) -> bool {
        matches!(self, Self::Rgb | Self::Rgbd)
    }

    fn depth(self) -> bool {
        matches!(self, Self::Depth | Self::Rgbd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub tile_size: usize,
    pub binning: Binning,
    /// Camera-z below which Gaussians are culled (m).
    pub near: f64,
    /// Added to the diagonal of every projected covariance (px²).
    pub blur: f64,
    pub alpha_max: f64,
    /// Contributions below this alpha are skipped; also the exact-binning eps.
    pub alpha_min: f64,
    /// Compositing stops once transmittance drops below this value.
    pub transmittance_min: f64,
    /// Footprint support in standard deviations. Also the square-binning
    /// radius multiplier, so both binnings cover the same pixels.
    pub sigma_extent: f64,
    pub background: [f64; 3],
    /// Depth reported where nothing is composited (m).
    pub far: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            tile_size: 16,
            binning: Binning::Exact,
            near: 0.05,
            blur: 0.3,
            alpha_max: 0.99,
            alpha_min: 1.0 / 255.0,
            transmittance_min: 1e-4,
            sigma_extent: 3.0,
            background: [0.0; 3],
            far: 20.0,
        }
    }
}

impl RenderSettings {
    /// Alpha of `g` at pixel center `(px, py)` with multiplier `gain`, and
    /// whether the `alpha_max` clamp is active. `None` when the contribution
    /// is skipped.
    #[inline]
    pub(crate) fn alpha(&self, g: &ProjectedGaussian, gain: f64, px: f64, py: f64) -> Option<(f64, bool)> {
        self.alpha_at(g.power(px - g.mean2d[0], py - g.mean2d[1]), gain * g.opacity)
    }

    /// Alpha rule for Mahalanobis form `q` and peak opacity `weight`.
    #[inline]
    pub(crate) fn alpha_at(&self, q: f64, weight: f64) -> Option<(f64, bool)> {
        if !(q <= self.sigma_extent * self.sigma_extent) {
            return None;
        }
        let raw = weight * (-0.5 * q).exp();
        if raw >= self.alpha_max {
            Some((self.alpha_max, true))
        } else if raw < self.alpha_min {
            None
        } else {
            Some((raw, false))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: Option<Image>,
    pub depth: Option<Image>,
}

/// Bins projected Gaussians with the strategy selected in `settings`.
pub fn bin(projected: &[ProjectedGaussian], cam: &CameraModel, settings: &RenderSettings) -> TileBins {
    match settings.binning {
        Binning::Square => tile_bins_square(projected, cam, settings.tile_size, settings.sigma_extent),
        Binning::Exact => tile_bins_exact(
            projected,
            cam,
            settings.tile_size,
            settings.alpha_min,
            settings.sigma_extent,
        ),
    }
}

struct Packed {
    mean: [f64; 2],
    conic: [f64; 3],
    /// Opacity times gain.
    weight: f64,
    /// Mahalanobis level past which the contribution is skipped.
    level: f64,
    color: [f64; 3],
    depth: f64,
}

struct TileOut {
    tile: usize,
    rgb: Vec<f64>,
    depth: Vec<f64>,
}

fn composite(
    projected: &[ProjectedGaussian],
    bins: &TileBins,
    settings: &RenderSettings,
    mode: RenderMode,
    gains: Option<&[f64]>,
) -> RenderOutput {
    let grid = bins.grid;
    let tiles: Vec<TileOut> = (0..grid.count())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = grid.pixel_bounds(t);
            let n = (x1 - x0) * (y1 - y0);
            let mut rgb = Vec::with_capacity(if mode.rgb() { 3 * n } else { 0 });
            let mut depth = Vec::with_capacity(if mode.depth() { n } else { 0 });
            // Copy the tile's Gaussians by value so the pixel loop streams
            // through contiguous memory.
            let cutoff = settings.sigma_extent * settings.sigma_extent;
            let packed: Vec<Packed> = bins
                .tile(t)
                .iter()
                .map(|e| {
                    let g = &projected[e.index as usize];
                    let weight = gains.map_or(1.0, |gs| gs[g.id as usize]) * g.opacity;
                    // Beyond this level alpha falls below alpha_min; the
                    // margin keeps the skip strictly conservative.
                    let level = 2.0 * (weight / settings.alpha_min).ln();
                    Packed {
                        mean: g.mean2d,
                        conic: g.conic,
                        weight,
                        level: level.min(cutoff) + 1e-9 * (1.0 + level.abs()),
                        color: g.color,
                        depth: g.depth,
                    }
                })
                .collect();
            for y in y0..y1 {
                for x in x0..x1 {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    let mut trans = 1.0;
                    let mut color = [0.0; 3];
                    let mut z_acc = 0.0;
                    let mut a_acc = 0.0;
                    for g in &packed {
                        let [a, b, c] = g.conic;
                        let (dx, dy) = (px - g.mean[0], py - g.mean[1]);
                        let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
                        if !(q <= g.level) {
                            continue;
                        }
                        let Some((alpha, _)) = settings.alpha_at(q, g.weight) else {
                            continue;
                        };
                        let w = alpha * trans;
                        for c in 0..3 {
                            color[c] += w * g.color[c];
                        }
                        z_acc += w * g.depth;
                        a_acc += w;
                        trans *= 1.0 - alpha;
                        if trans < settings.transmittance_min {
                            break;
                        }
                    }
                    if mode.rgb() {
                        for c in 0..3 {
                            rgb.push(color[c] + trans * settings.background[c]);
                        }
                    }
                    if mode.depth() {
                        depth.push(if a_acc <= 1e-6 { settings.far } else { z_acc / a_acc });
                    }
                }
            }
            TileOut { tile: t, rgb, depth }
        })
        .collect();

    let mut rgb_img = mode.rgb().then(|| Image::filled(grid.width, grid.height, 3, 0.0));
    let mut depth_img = mode.depth().then(|| Image::filled(grid.width, grid.height, 1, 0.0));
    for out in tiles {
        let (x0, x1, y0, y1) = grid.pixel_bounds(out.tile);
        let w = x1 - x0;
        for (row, y) in (y0..y1).enumerate() {
            if let Some(img) = rgb_img.as_mut() {
                let dst = (y * grid.width + x0) * 3;
                img.data[dst..dst + 3 * w].copy_from_slice(&out.rgb[row * 3 * w..(row + 1) * 3 * w]);
            }
            if let Some(img) = depth_img.as_mut() {
                let dst = y * grid.width + x0;
                img.data[dst..dst + w].copy_from_slice(&out.depth[row * w..(row + 1) * w]);
            }
        }
    }
    RenderOutput {
        rgb: rgb_img,
        depth: depth_img,
    }
}

pub fn render(
    cloud: &GaussianCloud,
    cam: &CameraModel,
    pose: &Pose,
    mode: RenderMode,
    settings: &RenderSettings,
) -> RenderOutput {
    let projected = project(cloud, cam, pose, settings);
    let bins = bin(&projected, cam, settings);
    composite(&projected, &bins, settings, mode, None)
}

/// RGB render with every Gaussian's alpha scaled by `gains[id]`.
pub fn render_with_gains(
    cloud: &GaussianCloud,
    cam: &CameraModel,
    pose: &Pose,
    settings: &RenderSettings,
    gains: &[f64],
) -> Result<Image, RenderError> {
    if gains.len() != cloud.len() {
        return Err(RenderError::Argument(format!(
            "{} gains for {} gaussians",
            gains.len(),
            cloud.len()
        )));
    }
    let projected = project(cloud, cam, pose, settings);
    // Gains above one can push alphas past the level set used by exact
    // binning, so bin with the widest footprint.
    let bins = tile_bins_square(&projected, cam, settings.tile_size, settings.sigma_extent);
    Ok(composite(&projected, &bins, settings, RenderMode::Rgb, Some(gains))
        .rgb
        .expect("rgb requested"))
}

/// Renders `N` views in parallel. `clouds` holds either one cloud shared by
/// every view or one cloud per view.
pub fn render_batch(
    clouds: &[&GaussianCloud],
    cams: &[CameraModel],
    poses: &[Pose],
    mode: RenderMode,
    settings: &RenderSettings,
) -> Result<Vec<RenderOutput>, RenderError> {
    let n = cams.len();
    if n == 0 {
        return Err(RenderError::Argument("empty batch".into()));
    }
    if poses.len() != n {
        return Err(RenderError::Argument(format!(
            "{} cameras but {} poses",
            n,
            poses.len()
        )));
    }
    if clouds.len() != 1 && clouds.len() != n {
        return Err(RenderError::Argument(format!(
            "{} clouds for {} views",
            clouds.len(),
            n
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let cloud = clouds[if clouds.len() == 1 { 0 } else { i }];
            render(cloud, &cams[i], &poses[i], mode, settings)
        })
        .collect())
}
