//! Gaussian-to-tile assignment.
//!
//! Two strategies are provided: the conventional square footprint of
//! half-width `⌈k·√λmax⌉` and an exact test against the ellipse on which the
//! Gaussian's alpha reaches the skip threshold.

use super::{CameraModel, ProjectedGaussian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub width: usize,
    pub height: usize,
}

impl TileGrid {
    pub fn new(cam: &CameraModel, tile_size: usize) -> Self {
        Self {
            tile_size,
            tiles_x: cam.width.div_ceil(tile_size),
            tiles_y: cam.height.div_ceil(tile_size),
            width: cam.width,
            height: cam.height,
        }
    }

    pub fn count(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Pixel ranges `(x0..x1, y0..y1)` covered by tile `t`.
    pub fn pixel_bounds(&self, t: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (t % self.tiles_x, t / self.tiles_x);
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        (
            x0,
            (x0 + self.tile_size).min(self.width),
            y0,
            (y0 + self.tile_size).min(self.height),
        )
    }

    /// Tile index range touched by the continuous interval `[lo, hi]` along
    /// an axis with `n` tiles. Tiles are half-open `[k·s, (k+1)·s)`.
    fn span(&self, lo: f64, hi: f64, n: usize) -> (usize, usize) {
        let s = self.tile_size as f64;
        let a = (lo / s).floor().clamp(0.0, n as f64) as usize;
        let b = (hi / s).ceil().clamp(0.0, n as f64) as usize;
        (a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinEntry {
    /// Index into the projected list the bins were built from.
    pub index: u32,
    pub depth: f64,
}

/// Per-tile Gaussian lists, each sorted front to back (ties by Gaussian id).
#[derive(Debug, Clone)]
pub struct TileBins {
    pub grid: TileGrid,
    offsets: Vec<usize>,
    entries: Vec<BinEntry>,
}

impl TileBins {
    fn build(grid: TileGrid, projected: &[ProjectedGaussian], pairs: Vec<(u32, u32)>) -> Self {
        // Rank Gaussians once by (depth, id), then counting-sort the pairs
        // by tile visiting Gaussians in rank order.
        let mut order: Vec<u32> = (0..projected.len() as u32).collect();
        order.sort_unstable_by_key(|&i| {
            let g = &projected[i as usize];
            (order_key(g.depth), g.id)
        });
        let mut by_gaussian = vec![0usize; projected.len() + 1];
        let mut offsets = vec![0usize; grid.count() + 1];
        for &(t, i) in &pairs {
            by_gaussian[i as usize + 1] += 1;
            offsets[t as usize + 1] += 1;
        }
        for i in 0..projected.len() {
            by_gaussian[i + 1] += by_gaussian[i];
        }
        for t in 0..grid.count() {
            offsets[t + 1] += offsets[t];
        }
        let mut tiles_by_gaussian = vec![0u32; pairs.len()];
        let mut fill = by_gaussian.clone();
        for &(t, i) in &pairs {
            tiles_by_gaussian[fill[i as usize]] = t;
            fill[i as usize] += 1;
        }
        let mut cursor = offsets.clone();
        let mut entries = vec![BinEntry { index: 0, depth: 0.0 }; pairs.len()];
        for &i in &order {
            let depth = projected[i as usize].depth;
            for &t in &tiles_by_gaussian[by_gaussian[i as usize]..by_gaussian[i as usize + 1]] {
                entries[cursor[t as usize]] = BinEntry { index: i, depth };
                cursor[t as usize] += 1;
            }
        }
        Self { grid, offsets, entries }
    }

    pub fn tile(&self, t: usize) -> &[BinEntry] {
        &self.entries[self.offsets[t]..self.offsets[t + 1]]
    }

    /// Total number of (tile, Gaussian) pairs.
    pub fn pair_count(&self) -> usize {
        self.entries.len()
    }

    /// Tiles that list projected Gaussian `index`, ascending.
    pub fn tiles_of(&self, index: u32) -> Vec<usize> {
        (0..self.grid.count())
            .filter(|&t| self.tile(t).iter().any(|e| e.index == index))
            .collect()
    }
}

/// Integer key whose unsigned order matches `f64::total_cmp`.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Square footprint radius `⌈k·√λmax⌉` in pixels.
pub fn square_radius(g: &ProjectedGaussian, sigma_extent: f64) -> f64 {
    (sigma_extent * g.lambda_max().sqrt()).ceil()
}

pub fn tile_bins_square(
    projected: &[ProjectedGaussian],
    cam: &CameraModel,
    tile_size: usize,
    sigma_extent: f64,
) -> TileBins {
    let grid = TileGrid::new(cam, tile_size);
    let mut pairs = Vec::new();
    for (i, g) in projected.iter().enumerate() {
        let r = square_radius(g, sigma_extent);
        let [mx, my] = g.mean2d;
        let (x0, x1) = grid.span(mx - r, mx + r, grid.tiles_x);
        let (y0, y1) = grid.span(my - r, my + r, grid.tiles_y);
        for ty in y0..y1 {
            for tx in x0..x1 {
                pairs.push(((ty * grid.tiles_x + tx) as u32, i as u32));
            }
        }
    }
    TileBins::build(grid, projected, pairs)
}

/// Level `L` such that `alpha ≥ eps ⇔ dᵀΣ⁻¹d ≤ L`, capped by the support
/// cutoff `sigma_extent²`. `None` when the Gaussian never reaches `eps`.
pub fn ellipse_level(opacity: f64, eps: f64, sigma_extent: f64) -> Option<f64> {
    if opacity <= eps {
        return None;
    }
    Some((2.0 * (opacity / eps).ln()).min(sigma_extent * sigma_extent))
}

/// Minimum of the quadratic form `[a b; b c]` over the box `[x0,x1]×[y0,y1]`.
pub fn box_min_quadratic(conic: [f64; 3], x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let [a, b, c] = conic;
    if x0 <= 0.0 && x1 >= 0.0 && y0 <= 0.0 && y1 >= 0.0 {
        return 0.0;
    }
    let q = |x: f64, y: f64| a * x * x + 2.0 * b * x * y + c * y * y;
    let mut best = f64::INFINITY;
    for x in [x0, x1] {
        let y = if c > 0.0 { (-b * x / c).clamp(y0, y1) } else { y0 };
        best = best.min(q(x, y));
    }
    for y in [y0, y1] {
        let x = if a > 0.0 { (-b * y / a).clamp(x0, x1) } else { x0 };
        best = best.min(q(x, y));
    }
    best
}

pub fn tile_bins_exact(
    projected: &[ProjectedGaussian],
    cam: &CameraModel,
    tile_size: usize,
    eps: f64,
    sigma_extent: f64,
) -> TileBins {
    let grid = TileGrid::new(cam, tile_size);
    let mut pairs = Vec::new();
    for (i, g) in projected.iter().enumerate() {
        if g.det() <= 1e-12 {
            continue;
        }
        let Some(level) = ellipse_level(g.opacity, eps, sigma_extent) else {
            continue;
        };
        let [mx, my] = g.mean2d;
        let hx = (level * g.cov2d[0]).sqrt();
        let hy = (level * g.cov2d[2]).sqrt();
        let (x0, x1) = grid.span(mx - hx, mx + hx, grid.tiles_x);
        let (y0, y1) = grid.span(my - hy, my + hy, grid.tiles_y);
        for ty in y0..y1 {
            for tx in x0..x1 {
                let t = ty * grid.tiles_x + tx;
                // rectangle spanned by the tile's pixel centers
                let (px0, px1, py0, py1) = grid.pixel_bounds(t);
                let q = box_min_quadratic(
                    g.conic,
                    px0 as f64 + 0.5 - mx,
                    px1 as f64 - 0.5 - mx,
                    py0 as f64 + 0.5 - my,
                    py1 as f64 - 0.5 - my,
                );
                if q <= level {
                    pairs.push((t as u32, i as u32));
                }
            }
        }
    }
    TileBins::build(grid, projected, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(mean: [f64; 2], cov: [f64; 3], opacity: f64) -> ProjectedGaussian {
        let det = cov[0] * cov[2] - cov[1] * cov[1];
        ProjectedGaussian {
            id: 0,
            mean2d: mean,
            cov2d: cov,
            conic: [cov[2] / det, -cov[1] / det, cov[0] / det],
            depth: 1.0,
            color: [1.0; 3],
            opacity,
        }
    }

    fn cam() -> CameraModel {
        CameraModel::default()
    }

    #[test]
    fn order_key_matches_total_cmp() {
        let vals = [-3.5, -0.0, 0.0, 1e-300, 0.5, 2.0, f64::INFINITY, f64::NEG_INFINITY];
        for a in vals {
            for b in vals {
                assert_eq!(order_key(a).cmp(&order_key(b)), a.total_cmp(&b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn unit_covariance_at_tile_center_hits_one_tile() {
        let g = gaussian([24.0, 24.0], [1.0, 0.0, 1.0], 0.9);
        assert_eq!(square_radius(&g, 3.0), 3.0);
        let bins = tile_bins_square(&[g], &cam(), 16, 3.0);
        assert_eq!(bins.tiles_of(0), vec![1 * 5 + 1]);
    }

    #[test]
    fn corner_mean_hits_four_tiles() {
        let g = gaussian([32.0, 16.0], [1.0, 0.0, 1.0], 0.9);
        let bins = tile_bins_square(&[g], &cam(), 16, 3.0);
        assert_eq!(bins.tiles_of(0), vec![1, 2, 6, 7]);
    }

    #[test]
    fn large_square_enumerated_by_hand() {
        // λmax = 100 → r = 30; mean (37, 25) → x ∈ [7, 67], y ∈ [-5, 55]
        // x tiles 0..=4 (67/16 → ceil 5), y tiles 0..=3 clipped to the 4-row grid
        let g = gaussian([37.0, 25.0], [100.0, 0.0, 4.0], 0.9);
        assert_eq!(square_radius(&g, 3.0), 30.0);
        let bins = tile_bins_square(&[g], &cam(), 16, 3.0);
        assert_eq!(bins.tiles_of(0), (0..20).collect::<Vec<_>>());
        let g = gaussian([20.0, 20.0], [100.0, 0.0, 4.0], 0.9);
        // x ∈ [-10, 50] → tiles 0..=3, y ∈ [-10, 50] → rows 0..=3
        let want: Vec<usize> = (0..4).flat_map(|ty| (0..4).map(move |tx| ty * 5 + tx)).collect();
        assert_eq!(tile_bins_square(&[g], &cam(), 16, 3.0).tiles_of(0), want);
    }

    #[test]
    fn sub_threshold_opacity_bins_nowhere() {
        let eps = 1.0 / 255.0;
        let g = gaussian([40.0, 30.0], [4.0, 0.0, 4.0], eps / 2.0);
        assert_eq!(tile_bins_exact(&[g], &cam(), 16, eps, 3.0).pair_count(), 0);
    }

    #[test]
    fn singular_covariance_is_skipped() {
        let mut g = gaussian([40.0, 30.0], [1.0, 0.0, 1.0], 0.9);
        g.cov2d = [1.0, 1.0, 1.0];
        assert_eq!(tile_bins_exact(&[g], &cam(), 16, 1.0 / 255.0, 3.0).pair_count(), 0);
    }

    #[test]
    fn anisotropic_exact_drops_rows_the_square_keeps() {
        let g = gaussian([40.0, 24.0], [400.0, 0.0, 1.0], 0.99);
        let sq = tile_bins_square(&[g], &cam(), 16, 3.0).tiles_of(0);
        let ex = tile_bins_exact(&[g], &cam(), 16, 1.0 / 255.0, 3.0).tiles_of(0);
        assert!(ex.iter().all(|t| sq.contains(t)));
        assert!(ex.len() < sq.len());
        // the ellipse is ~3 px tall around y=24: only tile row 1
        assert!(ex.iter().all(|t| t / 5 == 1));
        assert!(sq.iter().any(|t| t / 5 != 1));
    }

    #[test]
    fn box_min_matches_dense_sampling() {
        let conic = [0.3, -0.2, 0.5];
        let (x0, x1, y0, y1) = (2.0, 9.0, -4.0, 3.0);
        let mut brute = f64::INFINITY;
        for i in 0..=700 {
            for j in 0..=700 {
                let x = x0 + (x1 - x0) * i as f64 / 700.0;
                let y = y0 + (y1 - y0) * j as f64 / 700.0;
                brute = brute.min(conic[0] * x * x + 2.0 * conic[1] * x * y + conic[2] * y * y);
            }
        }
        let exact = box_min_quadratic(conic, x0, x1, y0, y1);
        assert!(exact <= brute + 1e-12 && brute - exact < 1e-3, "{exact} {brute}");
    }
}
