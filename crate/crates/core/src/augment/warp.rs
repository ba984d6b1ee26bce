//! Backward resampling. Each output voxel reads the input at a continuous
//! voxel coordinate; samples outside the grid read background (0).

use crate::case::Case;
use crate::volume::{Grid, Volume3D};

/// Input sample coordinates (voxel units) for every output voxel.
#[derive(Debug, Clone)]
pub struct SampleMap {
    dims: [usize; 3],
    coords: Vec<[f64; 3]>,
}

impl SampleMap {
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> [f64; 3]) -> Self {
        let mut coords = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    coords.push(f(x, y, z));
                }
            }
        }
        Self { dims, coords }
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }
}

#[inline]
fn fetch(data: &[f64], dims: [usize; 3], x: i64, y: i64, z: i64) -> f64 {
    if x < 0 || y < 0 || z < 0 || x >= dims[0] as i64 || y >= dims[1] as i64 || z >= dims[2] as i64 {
        0.0
    } else {
        data[x as usize + dims[0] * (y as usize + dims[1] * z as usize)]
    }
}

/// Trilinear interpolation. Corners with zero weight are skipped, so an
/// integer coordinate returns the stored value bit for bit.
pub fn sample_trilinear(data: &[f64], dims: [usize; 3], p: [f64; 3]) -> f64 {
    let base = p.map(f64::floor);
    let frac = [p[0] - base[0], p[1] - base[1], p[2] - base[2]];
    let b = base.map(|v| v as i64);
    let mut acc: Option<f64> = None;
    for corner in 0..8 {
        let (dx, dy, dz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let w = [dx, dy, dz]
            .iter()
            .zip(frac)
            .map(|(&d, f)| if d == 1 { f } else { 1.0 - f })
            .product::<f64>();
        if w == 0.0 {
            continue;
        }
        let v = fetch(data, dims, b[0] + dx as i64, b[1] + dy as i64, b[2] + dz as i64) * w;
        acc = Some(acc.map_or(v, |a| a + v));
    }
    acc.unwrap_or(0.0)
}

pub fn sample_nearest(data: &[f64], dims: [usize; 3], p: [f64; 3]) -> f64 {
    let r = p.map(|v| v.round() as i64);
    fetch(data, dims, r[0], r[1], r[2])
}

pub fn warp_volume(vol: &Volume3D, map: &SampleMap, nearest: bool) -> Volume3D {
    debug_assert_eq!(vol.dims(), map.dims);
    let dims = vol.dims();
    let src = vol.data();
    let out = map
        .coords
        .iter()
        .map(|&p| {
            if nearest {
                sample_nearest(src, dims, p)
            } else {
                sample_trilinear(src, dims, p)
            }
        })
        .collect();
    vol.with_data(out)
}

/// Warps all modalities (trilinear) and the segmentation (nearest) through
/// one shared sample map.
pub fn warp_case(case: &Case, map: &SampleMap) -> Case {
    case.map_volumes(|v, is_seg| warp_volume(v, map, is_seg))
}

/// Voxel coordinate of the grid centre along each axis.
pub fn grid_center(grid: &Grid) -> [f64; 3] {
    grid.dims.map(|n| (n as f64 - 1.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_coordinates_are_exact() {
        let dims = [3, 2, 2];
        let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.1 + 1e-7).collect();
        for (i, &v) in data.iter().enumerate() {
            let p = [(i % 3) as f64, ((i / 3) % 2) as f64, (i / 6) as f64];
            assert_eq!(sample_trilinear(&data, dims, p).to_bits(), v.to_bits());
            assert_eq!(sample_nearest(&data, dims, p), v);
        }
    }

    #[test]
    fn trilinear_midpoints_and_background() {
        let dims = [2, 1, 1];
        let data = vec![2.0, 4.0];
        assert_eq!(sample_trilinear(&data, dims, [0.5, 0.0, 0.0]), 3.0);
        // half outside -> blends with background
        assert_eq!(sample_trilinear(&data, dims, [1.5, 0.0, 0.0]), 2.0);
        assert_eq!(sample_trilinear(&data, dims, [5.0, 0.0, 0.0]), 0.0);
        assert_eq!(sample_nearest(&data, dims, [-0.6, 0.0, 0.0]), 0.0);
        assert_eq!(sample_nearest(&data, dims, [0.6, 0.0, 0.0]), 4.0);
    }
}
