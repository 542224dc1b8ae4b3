use nalgebra::Vector3;

/// Dense voxel grid marking every voxel within `inflation` of an input
/// point. Marking is conservative: a voxel is set when its center lies within
/// `inflation + ½·voxel·√3` of a point, so any query point within
/// `inflation` of an input point reports occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    voxel: f64,
    inflation: f64,
    origin: Vector3<f64>,
    dims: [usize; 3],
    bits: Vec<u64>,
    /// What queries outside the grid report.
    pub outside_occupied: bool,
}

impl OccupancyMap {
    pub fn empty(voxel: f64, inflation: f64) -> Self {
        Self {
            voxel,
            inflation,
            origin: Vector3::zeros(),
            dims: [0; 3],
            bits: Vec::new(),
            outside_occupied: false,
        }
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]
    }

    fn index_of(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.voxel).floor();
            if !(f >= 0.0 && f < self.dims[k] as f64) {
                return None;
            }
            idx[k] = f as usize;
        }
        Some(idx)
    }

    pub fn is_occupied(&self, p: &Vector3<f64>) -> bool {
        match self.index_of(p) {
            Some(idx) => {
                let i = self.linear(idx);
                self.bits[i / 64] >> (i % 64) & 1 == 1
            }
            None => self.outside_occupied,
        }
    }
}

pub fn build_occupancy(points: &[Vector3<f64>], voxel: f64, inflation: f64) -> OccupancyMap {
    assert!(
        voxel > 0.0 && inflation >= 0.0,
        "voxel must be positive, inflation non-negative"
    );
    if points.is_empty() {
        return OccupancyMap::empty(voxel, inflation);
    }
    let reach = inflation + 0.5 * voxel * 3f64.sqrt();
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let pad = Vector3::repeat(reach + voxel);
    let origin = lo - pad;
    let extent = hi + pad - origin;
    let dims = [0, 1, 2].map(|k| (extent[k] / voxel).ceil() as usize + 1);
    let total = dims[0] * dims[1] * dims[2];
    let mut map = OccupancyMap {
        voxel,
        inflation,
        origin,
        dims,
        bits: vec![0u64; total.div_ceil(64)],
        outside_occupied: false,
    };

    let r2 = reach * reach;
    for p in points {
        let lo = [0, 1, 2].map(|k| ((p[k] - reach - origin[k]) / voxel).floor().max(0.0) as usize);
        let hi = [0, 1, 2].map(|k| (((p[k] + reach - origin[k]) / voxel).floor() as usize).min(dims[k] - 1));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let c = origin + Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * voxel;
                    if (c - p).norm_squared() <= r2 {
                        let i = map.linear([x, y, z]);
                        map.bits[i / 64] |= 1 << (i % 64);
                    }
                }
            }
        }
    }
    map
}
