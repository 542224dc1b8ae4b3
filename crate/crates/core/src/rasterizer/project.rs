use nalgebra::{Matrix2x3, Matrix3, Vector3};

use super::{CameraModel, Pose, RenderSettings};
use crate::splat_scene::synth::SH_C0;
use crate::splat_scene::GaussianCloud;

const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// A Gaussian after projection to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian {
    /// Index of the source Gaussian in the cloud.
    pub id: u32,
    pub mean2d: [f64; 2],
    /// Symmetric 2×2 covariance `[xx, xy, yy]` including the blur floor.
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d`, same packing.
    pub conic: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    pub opacity: f64,
}

impl ProjectedGaussian {
    pub fn det(&self) -> f64 {
        self.cov2d[0] * self.cov2d[2] - self.cov2d[1] * self.cov2d[1]
    }

    pub fn lambda_max(&self) -> f64 {
        let [a, b, c] = self.cov2d;
        let mid = 0.5 * (a + c);
        mid + (0.25 * (a - c) * (a - c) + b * b).sqrt()
    }

    /// Mahalanobis form `dᵀ Σ⁻¹ d` at pixel-space offset `(dx, dy)` from the mean.
    #[inline]
    pub fn power(&self, dx: f64, dy: f64) -> f64 {
        let [a, b, c] = self.conic;
        a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    }
}

/// View-dependent color from SH coefficients along world direction `dir`.
pub fn eval_sh(cloud: &GaussianCloud, i: usize, dir: &Vector3<f64>) -> [f64; 3] {
    let dc = cloud.sh_dc()[i];
    let mut out = dc.map(|v| SH_C0 * v);
    if let Some(rest) = cloud.sh_rest() {
        let per = rest.per_channel();
        let coeffs = rest.get(i);
        let (x, y, z) = (dir.x, dir.y, dir.z);
        let mut basis = [0.0f64; 15];
        basis[0] = -SH_C1 * y;
        basis[1] = SH_C1 * z;
        basis[2] = -SH_C1 * x;
        if per >= 8 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            basis[3] = SH_C2[0] * x * y;
            basis[4] = SH_C2[1] * y * z;
            basis[5] = SH_C2[2] * (2.0 * zz - xx - yy);
            basis[6] = SH_C2[3] * x * z;
            basis[7] = SH_C2[4] * (xx - yy);
            if per >= 15 {
                basis[8] = SH_C3[0] * y * (3.0 * xx - yy);
                basis[9] = SH_C3[1] * x * y * z;
                basis[10] = SH_C3[2] * y * (4.0 * zz - xx - yy);
                basis[11] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
                basis[12] = SH_C3[4] * x * (4.0 * zz - xx - yy);
                basis[13] = SH_C3[5] * z * (xx - yy);
                basis[14] = SH_C3[6] * x * (xx - 3.0 * yy);
            }
        }
        for (ch, o) in out.iter_mut().enumerate() {
            let c = &coeffs[ch * per..(ch + 1) * per];
            *o += c.iter().zip(&basis[..per]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    out.map(|v| (v + 0.5).max(0.0))
}

/// EWA projection of every Gaussian in front of the near plane.
pub fn project(
    cloud: &GaussianCloud,
    cam: &CameraModel,
    pose: &Pose,
    settings: &RenderSettings,
) -> Vec<ProjectedGaussian> {
    let w = pose.rotation.to_rotation_matrix().into_inner();
    let mut out = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let mean = Vector3::from(cloud.means()[i]);
        let t = w * (mean - pose.center);
        if t.z <= settings.near {
            continue;
        }
        let inv_z = 1.0 / t.z;
        let j = Matrix2x3::new(
            cam.fx * inv_z,
            0.0,
            -cam.fx * t.x * inv_z * inv_z,
            0.0,
            cam.fy * inv_z,
            -cam.fy * t.y * inv_z * inv_z,
        );
        let jw = j * w;
        let sigma: Matrix3<f64> = cloud.covariance(i);
        let cov = jw * sigma * jw.transpose();
        let cov2d = [
            cov[(0, 0)] + settings.blur,
            0.5 * (cov[(0, 1)] + cov[(1, 0)]),
            cov[(1, 1)] + settings.blur,
        ];
        let det = cov2d[0] * cov2d[2] - cov2d[1] * cov2d[1];
        if !(det > 1e-12) {
            continue;
        }
        let conic = [cov2d[2] / det, -cov2d[1] / det, cov2d[0] / det];
        let dir = (mean - pose.center).normalize();
        out.push(ProjectedGaussian {
            id: i as u32,
            mean2d: [cam.fx * t.x * inv_z + cam.cx, cam.fy * t.y * inv_z + cam.cy],
            cov2d,
            conic,
            depth: t.z,
            color: eval_sh(cloud, i, &dir),
            opacity: cloud.opacity(i),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat_scene::{logit, ShRest};

    fn single(mean: [f64; 3], sigma: f64) -> GaussianCloud {
        GaussianCloud::new(
            vec![mean],
            vec![[sigma.ln(); 3]],
            vec![[1.0, 0.0, 0.0, 0.0]],
            vec![logit(0.8)],
            vec![[0.0; 3]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn on_axis_gaussian_projects_to_principal_point() {
        let cam = CameraModel::default();
        let p = project(
            &single([0.0, 0.0, 1.0], 0.05),
            &cam,
            &Pose::default(),
            &RenderSettings::default(),
        );
        assert_eq!(p.len(), 1);
        assert!((p[0].mean2d[0] - cam.cx).abs() < 1e-4);
        assert!((p[0].mean2d[1] - cam.cy).abs() < 1e-4);
        assert!((p[0].depth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_covariance_on_axis_matches_closed_form() {
        let cam = CameraModel::default();
        let (sigma, z) = (0.03, 2.5);
        let p = project(
            &single([0.0, 0.0, z], sigma),
            &cam,
            &Pose::default(),
            &RenderSettings::default(),
        );
        let expect = (cam.fx * sigma / z).powi(2) + 0.3;
        assert!((p[0].cov2d[0] - expect).abs() < 1e-9);
        assert!((p[0].cov2d[2] - expect).abs() < 1e-9);
        assert!(p[0].cov2d[1].abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let cam = CameraModel::default();
        let s = RenderSettings::default();
        assert!(project(&single([0.0, 0.0, -1.0], 0.1), &cam, &Pose::default(), &s).is_empty());
        assert!(project(&single([0.0, 0.0, 0.04], 0.1), &cam, &Pose::default(), &s).is_empty());
    }

    #[test]
    fn dc_only_color_is_offset_dc() {
        let cloud = GaussianCloud::new(
            vec![[0.0, 0.0, 1.0]],
            vec![[0.0; 3]],
            vec![[1.0, 0.0, 0.0, 0.0]],
            vec![0.0],
            vec![[1.0, -1.0, -3.0]],
            None,
        )
        .unwrap();
        let c = eval_sh(&cloud, 0, &Vector3::z());
        assert!((c[0] - (0.5 + SH_C0)).abs() < 1e-12);
        assert!((c[1] - (0.5 - SH_C0)).abs() < 1e-12);
        assert_eq!(c[2], 0.0);
    }

    #[test]
    fn degree_one_term_depends_on_direction() {
        let mut rest = vec![0.0; 45];
        rest[1] = 1.0; // channel 0, basis z
        let cloud = GaussianCloud::new(
            vec![[0.0; 3]],
            vec![[0.0; 3]],
            vec![[1.0, 0.0, 0.0, 0.0]],
            vec![0.0],
            vec![[0.0; 3]],
            Some(ShRest::new(15, rest).unwrap()),
        )
        .unwrap();
        let up = eval_sh(&cloud, 0, &Vector3::z());
        let side = eval_sh(&cloud, 0, &Vector3::x());
        assert!((up[0] - (0.5 + SH_C1)).abs() < 1e-12);
        assert!((side[0] - 0.5).abs() < 1e-12);
        assert_eq!(up[1], 0.5);
    }
}
