//! Deterministic synthetic scenes for tests, benchmarks and demos.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;

use super::{logit, GaussianCloud};

/// Zeroth-order SH basis constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// DC coefficient that evaluates to `rgb` under the `0.5 + C0·dc` convention.
pub fn rgb_to_dc(rgb: [f64; 3]) -> [f64; 3] {
    rgb.map(|c| (c - 0.5) / SH_C0)
}

#[derive(Debug, Clone, Copy)]
pub struct BoxParams {
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Range of per-axis scales in meters (sampled log-uniformly).
    pub scale: (f64, f64),
    pub opacity: (f64, f64),
}

impl Default for BoxParams {
    fn default() -> Self {
        Self {
            min: [-1.0, -1.0, 2.0],
            max: [1.0, 1.0, 5.0],
            scale: (0.02, 0.25),
            opacity: (0.05, 0.95),
        }
    }
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    let q = UnitQuaternion::from_euler_angles(
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    );
    [q.w, q.i, q.j, q.k]
}

/// `n` anisotropic Gaussians with random colors in `[0, 1]`, uniformly placed
/// in an axis-aligned box.
pub fn random_box<R: Rng + ?Sized>(n: usize, rng: &mut R, p: BoxParams) -> GaussianCloud {
    let (lo, hi) = (p.scale.0.ln(), p.scale.1.ln());
    let mut means = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut rots = Vec::with_capacity(n);
    let mut opac = Vec::with_capacity(n);
    let mut dc = Vec::with_capacity(n);
    for _ in 0..n {
        means.push([0, 1, 2].map(|k| rng.random_range(p.min[k]..p.max[k])));
        scales.push([0, 1, 2].map(|_| rng.random_range(lo..hi)));
        rots.push(random_rotation(rng));
        opac.push(logit(rng.random_range(p.opacity.0..p.opacity.1)));
        dc.push(rgb_to_dc([0, 1, 2].map(|_| rng.random_range(0.0..1.0))));
    }
    GaussianCloud::new(means, scales, rots, opac, dc, None).expect("synthetic cloud is valid")
}

#[derive(Default)]
struct Builder {
    means: Vec<[f64; 3]>,
    scales: Vec<[f64; 3]>,
    rots: Vec<[f64; 4]>,
    opac: Vec<f64>,
    dc: Vec<[f64; 3]>,
}

impl Builder {
    fn push(&mut self, mean: Vector3<f64>, scale: [f64; 3], opacity: f64, rgb: [f64; 3]) {
        self.means.push([mean.x, mean.y, mean.z]);
        self.scales.push(scale.map(f64::ln));
        self.rots.push([1.0, 0.0, 0.0, 0.0]);
        self.opac.push(logit(opacity));
        self.dc.push(rgb_to_dc(rgb));
    }

    fn jitter<R: Rng + ?Sized>(rng: &mut R, base: [f64; 3], amount: f64) -> [f64; 3] {
        base.map(|c| (c + rng.random_range(-amount..amount)).clamp(0.0, 1.0))
    }

    /// Flat textured ground patch covering `[x0,x1]×[y0,y1]` at z = 0.
    fn ground<R: Rng + ?Sized>(&mut self, rng: &mut R, x: (f64, f64), y: (f64, f64), step: f64) {
        let nx = ((x.1 - x.0) / step).ceil() as usize;
        let ny = ((y.1 - y.0) / step).ceil() as usize;
        for i in 0..nx {
            for j in 0..ny {
                let p = Vector3::new(x.0 + (i as f64 + 0.5) * step, y.0 + (j as f64 + 0.5) * step, 0.0);
                let rgb = Self::jitter(rng, [0.35, 0.45, 0.3], 0.1);
                self.push(p, [step * 0.6, step * 0.6, 0.01], 0.9, rgb);
            }
        }
    }

    fn build(self) -> GaussianCloud {
        GaussianCloud::new(self.means, self.scales, self.rots, self.opac, self.dc, None)
            .expect("synthetic cloud is valid")
    }
}

/// Ground plane plus a distant backdrop ring, with no obstacles in the
/// flight volume `|x|, |y| < 6`, `z < 2`.
pub fn open_field<R: Rng + ?Sized>(rng: &mut R) -> GaussianCloud {
    let mut b = Builder::default();
    b.ground(rng, (-8.0, 8.0), (-8.0, 8.0), 0.5);
    backdrop(&mut b, rng, 10.0);
    b.build()
}

fn backdrop<R: Rng + ?Sized>(b: &mut Builder, rng: &mut R, radius: f64) {
    let n = 96;
    for i in 0..n {
        let a = i as f64 / n as f64 * std::f64::consts::TAU;
        for k in 0..6 {
            let z = 0.25 + k as f64 * 0.5;
            let rgb = Builder::jitter(rng, [0.55, 0.6, 0.75], 0.15);
            b.push(
                Vector3::new(radius * a.cos(), radius * a.sin(), z),
                [0.35, 0.35, 0.3],
                0.95,
                rgb,
            );
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PillarParams {
    pub count: usize,
    /// Pillars are placed in `[x0,x1]×[y0,y1]`.
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub radius: f64,
    pub height: f64,
}

impl Default for PillarParams {
    fn default() -> Self {
        Self {
            count: 12,
            x: (1.0, 6.0),
            y: (-2.5, 2.5),
            radius: 0.15,
            height: 2.2,
        }
    }
}

/// Open field with vertical cylindrical pillars built from small Gaussians.
pub fn pillar_forest<R: Rng + ?Sized>(rng: &mut R, p: PillarParams) -> GaussianCloud {
    let mut b = Builder::default();
    b.ground(rng, (-8.0, 8.0), (-8.0, 8.0), 0.5);
    backdrop(&mut b, rng, 10.0);
    for _ in 0..p.count {
        let cx = rng.random_range(p.x.0..p.x.1);
        let cy = rng.random_range(p.y.0..p.y.1);
        let base = Builder::jitter(rng, [0.6, 0.35, 0.2], 0.2);
        let around = 10;
        let rings = (p.height / 0.12).ceil() as usize;
        for r in 0..rings {
            for k in 0..around {
                let a = k as f64 / around as f64 * std::f64::consts::TAU;
                let pos = Vector3::new(
                    cx + p.radius * a.cos(),
                    cy + p.radius * a.sin(),
                    (r as f64 + 0.5) * 0.12,
                );
                let rgb = Builder::jitter(rng, base, 0.05);
                b.push(pos, [0.06, 0.06, 0.08], 0.95, rgb);
            }
        }
    }
    b.build()
}

/// A planar wall of overlapping opaque Gaussians at depth `z0` in front of a
/// camera at the origin looking down +z.
pub fn wall(z0: f64, half_extent: f64, spacing: f64) -> GaussianCloud {
    let mut b = Builder::default();
    let n = (2.0 * half_extent / spacing).round() as i64;
    for i in 0..=n {
        for j in 0..=n {
            let x = -half_extent + i as f64 * spacing;
            let y = -half_extent + j as f64 * spacing;
            b.push(Vector3::new(x, y, z0), [spacing, spacing, 0.005], 0.98, [0.8, 0.8, 0.8]);
        }
    }
    b.build()
}
