//! Random affine and flip transforms.

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::warp::{grid_center, warp_case, SampleMap};
use crate::case::Case;
use crate::error::{Error, Result};
use crate::volume::Volume3D;

/// Sampling ranges for [`random_affine`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffineParams {
    /// Each Euler angle is drawn from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Per-axis scale factor range.
    pub scale: [f64; 2],
    /// Each translation component is drawn from `[-translation_mm, translation_mm]`.
    pub translation_mm: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self {
            rotation_deg: 10.0,
            scale: [0.9, 1.1],
            translation_mm: 5.0,
        }
    }
}

impl AffineParams {
    pub fn identity() -> Self {
        Self {
            rotation_deg: 0.0,
            scale: [1.0, 1.0],
            translation_mm: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rotation_deg >= 0.0
            && self.translation_mm >= 0.0
            && self.scale[0] <= self.scale[1]
            && self.scale[1] > 0.0
            && self.scale.iter().all(|s| s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid affine parameters {self:?}")))
        }
    }
}

/// A concrete affine map about the grid centre, in physical (mm) space.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    /// Rotation about x, then y, then z, in degrees.
    pub rotation_deg: [f64; 3],
    pub scale: [f64; 3],
    pub translation_mm: [f64; 3],
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self {
            rotation_deg: [0.0; 3],
            scale: [1.0; 3],
            translation_mm: [0.0; 3],
        }
    }

    pub fn sample(params: &AffineParams, rng: &mut RngStream) -> Self {
        let r = params.rotation_deg;
        let rotation_deg = [rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r)];
        let scale = [0; 3].map(|_| loop {
            let s = rng.uniform(params.scale[0], params.scale[1]);
            if s > 0.0 {
                break s;
            }
        });
        let t = params.translation_mm;
        let translation_mm = [rng.uniform(-t, t), rng.uniform(-t, t), rng.uniform(-t, t)];
        Self {
            rotation_deg,
            scale,
            translation_mm,
        }
    }

    /// Forward rotation matrix `Rz * Ry * Rx`.
    fn rotation(&self) -> [[f64; 3]; 3] {
        let [ax, ay, az] = self.rotation_deg.map(f64::to_radians);
        let (sx, cx) = ax.sin_cos();
        let (sy, cy) = ay.sin_cos();
        let (sz, cz) = az.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        matmul(&rz, &matmul(&ry, &rx))
    }

    /// Backward map: output voxel `i` samples input voxel `M (i - c) + b + c`.
    pub fn sample_map(&self, dims: [usize; 3], spacing: [f64; 3], center: [f64; 3]) -> SampleMap {
        let r = self.rotation();
        // inverse of (R * S) in mm is S^-1 * R^T
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                // voxel -> mm (spacing[j]) -> inverse map -> voxel (1/spacing[i])
                m[i][j] = r[j][i] / self.scale[i] * spacing[j] / spacing[i];
            }
        }
        for v in m.iter_mut().flatten() {
            let rounded = v.round();
            if (*v - rounded).abs() < 1e-12 {
                *v = rounded;
            }
        }
        let mut b = [0.0; 3];
        for i in 0..3 {
            let mm: f64 = (0..3).map(|j| r[j][i] * self.translation_mm[j]).sum::<f64>() / self.scale[i];
            b[i] = -mm / spacing[i];
        }
        SampleMap::from_fn(dims, |x, y, z| {
            let d = [x as f64 - center[0], y as f64 - center[1], z as f64 - center[2]];
            [0, 1, 2].map(|i| m[i][0] * d[0] + m[i][1] * d[1] + m[i][2] * d[2] + b[i] + center[i])
        })
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_deg == [0.0; 3] && self.scale == [1.0; 3] && self.translation_mm == [0.0; 3]
    }

    /// Applies this map to every volume of the case: trilinear for modalities,
    /// nearest for the segmentation.
    pub fn apply(&self, case: &Case) -> Case {
        if self.is_identity() {
            return case.clone();
        }
        let grid = case.grid();
        let map = self.sample_map(grid.dims, grid.spacing, grid_center(grid));
        warp_case(case, &map)
    }
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn random_affine(case: &Case, params: &AffineParams, rng: &mut RngStream) -> Case {
    AffineTransform::sample(params, rng).apply(case)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlipParams {
    /// Probability of mirroring along x (left-right), y and z.
    pub axes_probabilities: [f64; 3],
}

impl Default for FlipParams {
    fn default() -> Self {
        Self {
            axes_probabilities: [1.0, 0.0, 0.0],
        }
    }
}

impl FlipParams {
    pub fn validate(&self) -> Result<()> {
        if self.axes_probabilities.iter().all(|p| (0.0..=1.0).contains(p)) {
            Ok(())
        } else {
            Err(Error::Config(format!("flip probabilities must lie in [0, 1], got {self:?}")))
        }
    }
}

pub fn flip_volume(vol: &Volume3D, axis: usize) -> Volume3D {
    let [nx, ny, nz] = vol.dims();
    let src = vol.data();
    let mut out = Vec::with_capacity(src.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let (sx, sy, sz) = match axis {
                    0 => (nx - 1 - x, y, z),
                    1 => (x, ny - 1 - y, z),
                    _ => (x, y, nz - 1 - z),
                };
                out.push(src[sx + nx * (sy + ny * sz)]);
            }
        }
    }
    vol.with_data(out)
}

pub fn flip_case(case: &Case, axes: [bool; 3]) -> Case {
    let mut out = case.clone();
    for (axis, _) in axes.iter().enumerate().filter(|(_, f)| **f) {
        out = out.map_volumes(|v, _| flip_volume(v, axis));
    }
    out
}

/// Mirrors each axis independently with its probability. One draw per axis
/// is always consumed.
pub fn random_flip(case: &Case, params: &FlipParams, rng: &mut RngStream) -> Case {
    let axes = params.axes_probabilities.map(|p| rng.unit() < p);
    flip_case(case, axes)
}
