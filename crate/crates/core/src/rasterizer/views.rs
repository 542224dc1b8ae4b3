use nalgebra::Vector3;
use rand::Rng;

use super::Pose;
use crate::splat_scene::GaussianCloud;

/// Robust bounding box of the Gaussian means: the 2nd and 98th percentile
/// per axis. Returns `(center, half_diagonal)`.
pub fn scene_extent(cloud: &GaussianCloud) -> (Vector3<f64>, f64) {
    if cloud.is_empty() {
        return (Vector3::zeros(), 1.0);
    }
    let mut lo = Vector3::zeros();
    let mut hi = Vector3::zeros();
    for axis in 0..3 {
        let mut v: Vec<f64> = cloud.means().iter().map(|m| m[axis]).collect();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
        lo[axis] = at(0.02);
        hi[axis] = at(0.98);
    }
    ((lo + hi) / 2.0, ((hi - lo) / 2.0).norm().max(1e-3))
}

/// `n` cameras on a shell around the scene, each looking at a jittered
/// point near its center with world +z up.
pub fn orbit_poses<R: Rng + ?Sized>(cloud: &GaussianCloud, n: usize, rng: &mut R) -> Vec<Pose> {
    let (center, radius) = scene_extent(cloud);
    (0..n)
        .map(|_| {
            let dir = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let norm = v.norm();
                if norm > 1e-3 && norm <= 1.0 {
                    break v / norm;
                }
            };
            let eye = center + dir * radius * rng.random_range(0.9..1.5);
            let jitter = Vector3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            );
            Pose::look_at(eye, center + jitter * radius, Vector3::z())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasterizer::{render, CameraModel, RenderMode, RenderSettings};
    use crate::rng::stream;
    use crate::splat_scene::synth;

    #[test]
    fn orbit_views_see_the_scene() {
        let cloud = synth::random_box(300, &mut stream(1, "t", 0), Default::default());
        let (center, radius) = scene_extent(&cloud);
        assert!((center - Vector3::new(0.0, 0.0, 3.5)).norm() < 0.3);
        let poses = orbit_poses(&cloud, 10, &mut stream(1, "t", 1));
        for p in &poses {
            let d = (p.center - center).norm();
            assert!(d >= 0.9 * radius - 1e-9 && d <= 1.5 * radius + 1e-9);
            let img = render(
                &cloud,
                &CameraModel::default(),
                p,
                RenderMode::Rgb,
                &RenderSettings::default(),
            )
            .rgb
            .unwrap();
            let lit = img.data.iter().filter(|&&v| v > 0.0).count();
            assert!(lit > img.data.len() / 10, "view covers too little of the scene");
        }
    }
}
