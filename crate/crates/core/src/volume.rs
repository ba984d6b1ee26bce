//! Dense 3D scalar volumes.
//!
//! Voxels are stored flat with x varying fastest, then y, then z:
//! `index = x + nx * (y + ny * z)`. Every operation in the crate uses this
//! convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Affine = [[f64; 4]; 4];

/// Grid geometry shared by all volumes of a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    /// Voxel size in mm along x, y, z.
    pub spacing: [f64; 3],
    /// Voxel index to world mm.
    pub affine: Affine,
}

impl Grid {
    /// Grid whose affine is `diag(spacing)` with the origin at voxel 0.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::with_affine(dims, spacing, diagonal_affine(spacing))
    }

    pub fn with_affine(dims: [usize; 3], spacing: [f64; 3], affine: Affine) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume("affine has non-finite entries".into()));
        }
        let det = det3(&affine);
        if det.abs() < 1e-12 {
            return Err(Error::InvalidVolume("affine rotation/scale block is singular".into()));
        }
        Ok(Self {
            dims,
            spacing,
            affine,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Same dims, spacing within `tol` mm, affine entries within `tol`.
    pub fn matches(&self, other: &Grid, tol: f64) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .affine
                .iter()
                .flatten()
                .zip(other.affine.iter().flatten())
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn ensure_matches(&self, other: &Grid, what: &str) -> Result<()> {
        if self.matches(other, 1e-3) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

pub fn diagonal_affine(spacing: [f64; 3]) -> Affine {
    [
        [spacing[0], 0.0, 0.0, 0.0],
        [0.0, spacing[1], 0.0, 0.0],
        [0.0, 0.0, spacing[2], 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn det3(m: &Affine) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeKind {
    Intensity,
    Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    grid: Grid,
    kind: VolumeKind,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(grid: Grid, kind: VolumeKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if kind == VolumeKind::Label {
            if let Some((index, &value)) = data
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v >= 0.0 && v.fract() == 0.0))
            {
                return Err(Error::InvalidVolume(format!(
                    "label volume holds non-integer or negative value {value} at voxel {index}"
                )));
            }
        }
        Ok(Self { grid, kind, data })
    }

    pub fn intensity(grid: Grid, data: Vec<f64>) -> Result<Self> {
        Self::new(grid, VolumeKind::Intensity, data)
    }

    pub fn label(grid: Grid, data: Vec<f64>) -> Result<Self> {
        Self::new(grid, VolumeKind::Label, data)
    }

    pub fn filled(grid: Grid, kind: VolumeKind, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            kind,
            data: vec![value; n],
        }
    }

    /// Replaces the voxel data, keeping grid and kind. Label integrality is
    /// not re-checked; callers only use this with closed operations.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.grid.len());
        Self {
            grid: self.grid.clone(),
            kind: self.kind,
            data,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn affine(&self) -> &Affine {
        &self.grid.affine
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Sorted distinct values; intended for label volumes.
    pub fn distinct_labels(&self) -> Vec<u32> {
        let mut seen = std::collections::BTreeSet::new();
        for &v in &self.data {
            seen.insert(v as u32);
        }
        seen.into_iter().collect()
    }

    /// Exact grid and kind equality plus bitwise equality of the voxel data
    /// (distinguishes -0.0 and NaN payloads).
    pub fn bitwise_eq(&self, other: &Volume3D) -> bool {
        self.grid == other.grid
            && self.kind == other.kind
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Dense boolean mask on a grid's dims, used by the metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    dims: [usize; 3],
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(dims: [usize; 3], data: Vec<bool>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidVolume(format!(
                "mask length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn empty(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { dims, data }
    }

    /// Nonzero voxels of any volume.
    pub fn from_volume(vol: &Volume3D) -> Self {
        Self {
            dims: vol.dims(),
            data: vol.data().iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn to_volume(&self, grid: &Grid) -> Result<Volume3D> {
        if grid.dims != self.dims {
            return Err(Error::GeometryMismatch(format!(
                "mask dims {:?} vs grid dims {:?}",
                self.dims, grid.dims
            )));
        }
        Volume3D::label(
            grid.clone(),
            self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub(crate) fn ensure_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims == other.dims {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "mask dims {:?} vs {:?}",
                self.dims, other.dims
            )))
        }
    }

    /// Dilation by a cube of half-width `radius` (Chebyshev ball), i.e.
    /// `radius` iterations of a 26-connected dilation. Separable per axis.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let mut cur = self.data.clone();
        let dims = self.dims;
        for axis in 0..3 {
            cur = dilate_axis(&cur, dims, axis, radius);
        }
        BinaryMask { dims, data: cur }
    }
}

fn dilate_axis(src: &[bool], dims: [usize; 3], axis: usize, radius: usize) -> Vec<bool> {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut out = vec![false; src.len()];
    let mut line = vec![false; n];
    for start in line_starts(dims, axis) {
        for (i, slot) in line.iter_mut().enumerate() {
            *slot = src[start + i * stride];
        }
        // distance to the most recent set voxel, swept both ways
        let mut last: Option<usize> = None;
        for i in 0..n {
            if line[i] {
                last = Some(i);
            }
            if matches!(last, Some(j) if i - j <= radius) {
                out[start + i * stride] = true;
            }
        }
        let mut next: Option<usize> = None;
        for i in (0..n).rev() {
            if line[i] {
                next = Some(i);
            }
            if matches!(next, Some(j) if j - i <= radius) {
                out[start + i * stride] = true;
            }
        }
    }
    out
}

/// Flat indices of the first voxel of every 1D line along `axis`.
pub(crate) fn line_starts(dims: [usize; 3], axis: usize) -> impl Iterator<Item = usize> {
    let [nx, ny, nz] = dims;
    let (a, b) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    (0..b).flat_map(move |j| {
        (0..a).map(move |i| match axis {
            0 => nx * (i + ny * j),
            1 => i + nx * ny * j,
            _ => i + nx * j,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_spacing() {
        let g = Grid::new([2, 2, 2], [1.0; 3]).unwrap();
        assert!(Volume3D::intensity(g.clone(), vec![0.0; 7]).is_err());
        assert!(Grid::new([2, 2, 2], [1.0, 0.0, 1.0]).is_err());
        assert!(Grid::new([0, 2, 2], [1.0; 3]).is_err());
        let mut singular = diagonal_affine([1.0; 3]);
        singular[2][2] = 0.0;
        assert!(Grid::with_affine([2, 2, 2], [1.0; 3], singular).is_err());
        assert!(Volume3D::label(g, vec![0.0, 1.0, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn index_is_x_fastest() {
        let g = Grid::new([3, 4, 5], [1.0; 3]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
        assert_eq!(g.coords(g.index(2, 3, 4)), [2, 3, 4]);
    }

    #[test]
    fn dilation_matches_chebyshev_ball() {
        let dims = [9, 8, 7];
        let mut m = BinaryMask::empty(dims);
        m.set(4, 4, 3, true);
        m.set(0, 0, 0, true);
        let d = m.dilate(2);
        let expected = BinaryMask::from_fn(dims, |x, y, z| {
            let near = |cx: usize, cy: usize, cz: usize| {
                x.abs_diff(cx).max(y.abs_diff(cy)).max(z.abs_diff(cz)) <= 2
            };
            near(4, 4, 3) || near(0, 0, 0)
        });
        assert_eq!(d, expected);
    }
}
