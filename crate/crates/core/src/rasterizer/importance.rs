//! Per-Gaussian importance for pruning.
//!
//! Each Gaussian's alpha is scaled by a gain `g` evaluated at `g = 1`. For one
//! pixel, `C = Σ cᵢ αᵢ Tᵢ + T_N·bg`, so
//!
//! ```text
//! ∂C/∂gₖ = αₖ Tₖ cₖ − αₖ / (1 − αₖ) · Sₖ
//! ```
//!
//! where `Sₖ` is everything composited behind `k`, background included. The
//! score of a Gaussian is the sum of `(∂C/∂gₖ)²` over views, pixels and
//! channels. Alphas sitting on the `alpha_max` clamp have zero derivative.

use rayon::prelude::*;

use super::{bin, project, CameraModel, Pose, RenderError, RenderSettings};
use crate::splat_scene::GaussianCloud;

struct Contribution {
    id: u32,
    alpha: f64,
    clamped: bool,
    trans: f64,
    color: [f64; 3],
}

fn view_scores(cloud: &GaussianCloud, cam: &CameraModel, pose: &Pose, settings: &RenderSettings) -> Vec<f64> {
    let projected = project(cloud, cam, pose, settings);
    let bins = bin(&projected, cam, settings);
    let grid = bins.grid;
    let mut scores = vec![0.0; cloud.len()];
    let mut stack: Vec<Contribution> = Vec::new();
    for t in 0..grid.count() {
        let (x0, x1, y0, y1) = grid.pixel_bounds(t);
        let entries = bins.tile(t);
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                stack.clear();
                let mut trans = 1.0;
                for e in entries {
                    let g = &projected[e.index as usize];
                    let Some((alpha, clamped)) = settings.alpha(g, 1.0, px, py) else {
                        continue;
                    };
                    stack.push(Contribution {
                        id: g.id,
                        alpha,
                        clamped,
                        trans,
                        color: g.color,
                    });
                    trans *= 1.0 - alpha;
                    if trans < settings.transmittance_min {
                        break;
                    }
                }
                let mut suffix = settings.background.map(|b| b * trans);
                for c in stack.iter().rev() {
                    if !c.clamped {
                        let k = c.alpha / (1.0 - c.alpha);
                        let mut sq = 0.0;
                        for ch in 0..3 {
                            let d = c.alpha * c.trans * c.color[ch] - k * suffix[ch];
                            sq += d * d;
                        }
                        scores[c.id as usize] += sq;
                    }
                    for ch in 0..3 {
                        suffix[ch] += c.color[ch] * c.alpha * c.trans;
                    }
                }
            }
        }
    }
    scores
}

/// Importance score of every Gaussian accumulated over `views`.
pub fn importance_scores(
    cloud: &GaussianCloud,
    views: &[(CameraModel, Pose)],
    settings: &RenderSettings,
) -> Result<Vec<f64>, RenderError> {
    if views.is_empty() {
        return Err(RenderError::Argument("at least one view is required".into()));
    }
    let per_view: Vec<Vec<f64>> = views
        .par_iter()
        .map(|(cam, pose)| view_scores(cloud, cam, pose, settings))
        .collect();
    let mut total = vec![0.0; cloud.len()];
    for v in per_view {
        total.iter_mut().zip(v).for_each(|(t, s)| *t += s);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat_scene::{logit, synth};

    fn on_axis(items: &[(f64, f64, f64, [f64; 3])]) -> GaussianCloud {
        GaussianCloud::new(
            items.iter().map(|i| [0.0, 0.0, i.0]).collect(),
            items.iter().map(|i| [i.1.ln(); 3]).collect(),
            vec![[1.0, 0.0, 0.0, 0.0]; items.len()],
            items.iter().map(|i| logit(i.2)).collect(),
            items.iter().map(|i| synth::rgb_to_dc(i.3)).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_gaussian_single_pixel() {
        // one pixel camera looking at one Gaussian
        let cam = CameraModel {
            width: 1,
            height: 1,
            fx: 10.0,
            fy: 10.0,
            cx: 0.5,
            cy: 0.5,
        };
        let color = [0.2, 0.5, 0.7];
        let c = on_axis(&[(2.0, 0.1, 0.6, color)]);
        let s = RenderSettings::default();
        let scores = importance_scores(&c, &[(cam, Pose::default())], &s).unwrap();
        let a = s
            .alpha(&project(&c, &cam, &Pose::default(), &s)[0], 1.0, 0.5, 0.5)
            .unwrap()
            .0;
        let want = a * a * color.iter().map(|v| v * v).sum::<f64>();
        assert!((scores[0] - want).abs() < 1e-12);
    }

    #[test]
    fn fully_occluded_gaussian_scores_near_zero() {
        let cam = CameraModel::default();
        // a large, saturated Gaussian in front of a small one
        let c = on_axis(&[(1.0, 0.5, 0.9999, [0.9; 3]), (3.0, 0.02, 0.8, [0.9; 3])]);
        let s = RenderSettings::default();
        let scores = importance_scores(&c, &[(cam, Pose::default())], &s).unwrap();
        assert!(scores[1] < 1e-3 && scores[0] > 100.0 * scores[1], "{scores:?}");
        assert!(importance_scores(&c, &[], &s).is_err());
    }
}
