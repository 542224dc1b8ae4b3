//! Tile-based Gaussian splatting rasterizer.
//!
//! A view is rendered in four stages: EWA projection of every Gaussian,
//! assignment of projected Gaussians to 16×16 screen tiles, a per-tile
//! depth sort, and front-to-back alpha compositing per pixel. The same
//! compositing pass is differentiated with respect to a per-Gaussian alpha
//! multiplier to produce pruning importance scores.

mod camera;
mod image;
mod importance;
mod project;
pub mod reference;
mod render;
mod tiles;
mod views;

pub use camera::{forward_mount, CameraModel, Pose};
pub use image::{psnr, write_pgm16, write_ppm, Image};
pub use importance::importance_scores;
pub use project::{eval_sh, project, ProjectedGaussian};
pub use render::{
    bin, render, render_batch, render_with_gains, Binning, RenderError, RenderMode, RenderOutput, RenderSettings,
};
pub use tiles::{
    box_min_quadratic, ellipse_level, square_radius, tile_bins_exact, tile_bins_square, BinEntry, TileBins, TileGrid,
};
pub use views::{orbit_poses, scene_extent};
