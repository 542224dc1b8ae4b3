//! Brute-force reference renderer.
//!
//! Every pixel visits every projected Gaussian in a single global depth
//! order, with no tiling and no early termination. It shares only the
//! projection step and the per-pixel alpha rule with the tiled renderer.

use super::{project, CameraModel, Image, Pose, RenderSettings};
use crate::splat_scene::GaussianCloud;

pub fn render_naive(
    cloud: &GaussianCloud,
    cam: &CameraModel,
    pose: &Pose,
    settings: &RenderSettings,
) -> (Image, Image) {
    let mut projected = project(cloud, cam, pose, settings);
    projected.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.id.cmp(&b.id)));
    let mut rgb = Image::filled(cam.width, cam.height, 3, 0.0);
    let mut depth = Image::filled(cam.width, cam.height, 1, settings.far);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut trans = 1.0;
            let mut color = [0.0; 3];
            let (mut z_acc, mut a_acc) = (0.0, 0.0);
            for g in &projected {
                let Some((alpha, _)) = settings.alpha(g, 1.0, px, py) else {
                    continue;
                };
                for c in 0..3 {
                    color[c] += g.color[c] * alpha * trans;
                }
                z_acc += g.depth * alpha * trans;
                a_acc += alpha * trans;
                trans *= 1.0 - alpha;
            }
            let i = y * cam.width + x;
            for c in 0..3 {
                rgb.data[3 * i + c] = color[c] + trans * settings.background[c];
            }
            if a_acc > 1e-6 {
                depth.data[i] = z_acc / a_acc;
            }
        }
    }
    (rgb, depth)
}
