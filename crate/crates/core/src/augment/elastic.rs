//! Elastic deformation: random displacements on a coarse control grid,
//! upsampled trilinearly to a dense field and applied by backward warping.
//! The label-masked variant confines the field to the tumour neighbourhood.

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::warp::{warp_case, SampleMap};
use crate::case::Case;
use crate::error::{Error, Result};
use crate::labels::{region_mask, LabelScheme, Region};
use crate::volume::{line_starts, BinaryMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticParams {
    pub control_grid: [usize; 3],
    pub max_displacement_mm: f64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        Self {
            control_grid: [7, 7, 7],
            max_displacement_mm: 6.0,
        }
    }
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        validate_field_params(self.control_grid, self.max_displacement_mm)
    }
}

fn validate_field_params(grid: [usize; 3], max_disp: f64) -> Result<()> {
    if grid.iter().any(|&g| g < 2) {
        return Err(Error::Config(format!("control grid needs >= 2 points per axis, got {grid:?}")));
    }
    if !(max_disp >= 0.0 && max_disp.is_finite()) {
        return Err(Error::Config(format!("max displacement must be >= 0, got {max_disp}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelMaskedElasticParams {
    pub control_grid: [usize; 3],
    pub max_displacement_mm: f64,
    /// Margin around the whole tumour, in voxels (26-connected dilation).
    pub dilation_vox: usize,
    /// Gaussian smoothing of the dilated mask, in voxels.
    pub sigma_vox: f64,
}

impl Default for LabelMaskedElasticParams {
    fn default() -> Self {
        Self {
            control_grid: [7, 7, 7],
            max_displacement_mm: 10.0,
            dilation_vox: 5,
            sigma_vox: 2.0,
        }
    }
}

impl LabelMaskedElasticParams {
    pub fn validate(&self) -> Result<()> {
        validate_field_params(self.control_grid, self.max_displacement_mm)?;
        if !(self.sigma_vox >= 0.0 && self.sigma_vox.is_finite()) {
            return Err(Error::Config(format!("sigma_vox must be >= 0, got {}", self.sigma_vox)));
        }
        Ok(())
    }
}

/// Dense displacement vectors in mm, one per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub dims: [usize; 3],
    pub vectors: Vec<[f64; 3]>,
}

impl DisplacementField {
    pub fn zero(dims: [usize; 3]) -> Self {
        Self {
            dims,
            vectors: vec![[0.0; 3]; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.vectors.iter().all(|v| *v == [0.0; 3])
    }

    /// Draws interior control points uniformly in `[-max, max]` per
    /// component (boundary points stay zero) and upsamples trilinearly.
    pub fn sample(dims: [usize; 3], control: [usize; 3], max_disp_mm: f64, rng: &mut RngStream) -> Self {
        let [gx, gy, gz] = control;
        let mut ctrl = vec![[0.0f64; 3]; gx * gy * gz];
        for k in 1..gz.saturating_sub(1) {
            for j in 1..gy.saturating_sub(1) {
                for i in 1..gx.saturating_sub(1) {
                    let v = &mut ctrl[i + gx * (j + gy * k)];
                    for c in v.iter_mut() {
                        *c = rng.uniform(-max_disp_mm, max_disp_mm);
                    }
                }
            }
        }
        Self::from_control_grid(dims, control, &ctrl)
    }

    /// Trilinear upsampling of control vectors spread evenly from the first
    /// to the last voxel along each axis.
    pub fn from_control_grid(dims: [usize; 3], control: [usize; 3], ctrl: &[[f64; 3]]) -> Self {
        let axis_weights = |n: usize, g: usize| -> Vec<(usize, f64)> {
            (0..n)
                .map(|i| {
                    let t = if n <= 1 { 0.0 } else { i as f64 * (g - 1) as f64 / (n - 1) as f64 };
                    let k = (t.floor() as usize).min(g - 2);
                    (k, t - k as f64)
                })
                .collect()
        };
        let (wx, wy, wz) = (
            axis_weights(dims[0], control[0]),
            axis_weights(dims[1], control[1]),
            axis_weights(dims[2], control[2]),
        );
        let [gx, gy, _] = control;
        let mut vectors = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for &(kz, fz) in &wz {
            for &(ky, fy) in &wy {
                for &(kx, fx) in &wx {
                    let mut v = [0.0; 3];
                    for corner in 0..8 {
                        let (dx, dy, dz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
                        let w = (if dx == 1 { fx } else { 1.0 - fx })
                            * (if dy == 1 { fy } else { 1.0 - fy })
                            * (if dz == 1 { fz } else { 1.0 - fz });
                        if w == 0.0 {
                            continue;
                        }
                        let c = ctrl[(kx + dx) + gx * ((ky + dy) + gy * (kz + dz))];
                        for a in 0..3 {
                            v[a] += w * c[a];
                        }
                    }
                    vectors.push(v);
                }
            }
        }
        Self { dims, vectors }
    }

    /// Multiplies every vector by the voxel weight.
    pub fn scale_by(&mut self, weights: &[f64]) {
        for (v, &w) in self.vectors.iter_mut().zip(weights) {
            if w == 0.0 {
                *v = [0.0; 3];
            } else {
                *v = v.map(|c| c * w);
            }
        }
    }

    /// Output voxel `x` samples the input at `x - u(x)` (converted to voxels).
    pub fn sample_map(&self, spacing: [f64; 3]) -> SampleMap {
        let nx = self.dims[0];
        let ny = self.dims[1];
        SampleMap::from_fn(self.dims, |x, y, z| {
            let u = self.vectors[x + nx * (y + ny * z)];
            [
                x as f64 - u[0] / spacing[0],
                y as f64 - u[1] / spacing[1],
                z as f64 - u[2] / spacing[2],
            ]
        })
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn apply_field(case: &Case, field: &DisplacementField) -> Case {
    if field.is_zero() {
        return case.clone();
    }
    warp_case(case, &field.sample_map(case.grid().spacing))
}

pub fn random_elastic(case: &Case, params: &ElasticParams, rng: &mut RngStream) -> Case {
    let field = DisplacementField::sample(case.grid().dims, params.control_grid, params.max_displacement_mm, rng);
    apply_field(case, &field)
}

/// Normalised 1D Gaussian taps, truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = kernel_radius(sigma) as i64;
    let taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

pub fn kernel_radius(sigma: f64) -> usize {
    if sigma <= 0.0 {
        0
    } else {
        (3.0 * sigma).ceil() as usize
    }
}

/// Separable convolution with zero padding.
pub fn gaussian_smooth(data: &[f64], dims: [usize; 3], sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    if kernel.len() == 1 {
        return data.to_vec();
    }
    let r = (kernel.len() / 2) as i64;
    let mut cur = data.to_vec();
    for axis in 0..3 {
        let n = dims[axis];
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let mut next = vec![0.0; cur.len()];
        for start in line_starts(dims, axis) {
            for i in 0..n as i64 {
                let mut acc = 0.0;
                for (t, k) in kernel.iter().enumerate() {
                    let j = i + t as i64 - r;
                    if j >= 0 && j < n as i64 {
                        let v = cur[start + j as usize * stride];
                        if v != 0.0 {
                            acc += k * v;
                        }
                    }
                }
                next[start + i as usize * stride] = acc;
            }
        }
        cur = next;
    }
    cur
}

/// Per-voxel weight confining the label-masked field to the tumour.
#[derive(Debug, Clone)]
pub struct TumorWeight {
    /// 1 on the whole-tumour mask, tapering to 0 outside it.
    pub weights: Vec<f64>,
    /// Whole-tumour mask dilated by `dilation_vox`.
    pub dilated: BinaryMask,
}

impl TumorWeight {
    /// Voxels with nonzero weight.
    pub fn support(&self) -> BinaryMask {
        BinaryMask::new(self.dilated.dims(), self.weights.iter().map(|&w| w > 0.0).collect())
            .expect("dims match")
    }
}

/// Dilate the WT mask, smooth it, and rescale so the weight is exactly 1 on
/// the undilated mask. The weight is 0 at every voxel farther than
/// `dilation_vox + ceil(3 sigma)` (Chebyshev) from the tumour.
pub fn tumor_weight(wt: &BinaryMask, dilation_vox: usize, sigma_vox: f64) -> TumorWeight {
    let dims = wt.dims();
    let dilated = wt.dilate(dilation_vox);
    let as_f: Vec<f64> = dilated.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let smooth = gaussian_smooth(&as_f, dims, sigma_vox);
    let floor = wt
        .data()
        .iter()
        .zip(&smooth)
        .filter(|(m, _)| **m)
        .map(|(_, &s)| s)
        .fold(f64::INFINITY, f64::min);
    let weights = smooth
        .iter()
        .zip(wt.data())
        .map(|(&s, &inside)| {
            if inside {
                1.0
            } else if s > 0.0 {
                (s / floor).min(1.0)
            } else {
                0.0
            }
        })
        .collect();
    TumorWeight { weights, dilated }
}

/// Elastic warp weighted to vanish away from the whole tumour. One field,
/// shared by all modalities and the segmentation. An empty tumour mask
/// returns the case unchanged.
pub fn label_masked_elastic(
    case: &Case,
    scheme: &LabelScheme,
    params: &LabelMaskedElasticParams,
    rng: &mut RngStream,
) -> Result<Case> {
    let seg = case.segmentation.as_ref().ok_or(Error::MissingSegmentation)?;
    let wt = region_mask(seg, Region::Wt, scheme)?.mask;
    if wt.is_empty() {
        log::warn!("{}: empty whole-tumour mask, label-masked elastic skipped", case.case_id);
        return Ok(case.clone());
    }
    let (field, _) = label_masked_field(case, &wt, params, rng);
    Ok(apply_field(case, &field))
}

/// The weighted displacement field and its weight map.
pub fn label_masked_field(
    case: &Case,
    wt: &BinaryMask,
    params: &LabelMaskedElasticParams,
    rng: &mut RngStream,
) -> (DisplacementField, TumorWeight) {
    let dims = case.grid().dims;
    let mut field = DisplacementField::sample(dims, params.control_grid, params.max_displacement_mm, rng);
    let weight = tumor_weight(wt, params.dilation_vox, params.sigma_vox);
    field.scale_by(&weight.weights);
    (field, weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Grid, Volume3D};

    fn uniform_case(n: usize, value: f64) -> Case {
        let g = Grid::new([n; 3], [1.0; 3]).unwrap();
        let im = Volume3D::intensity(g.clone(), vec![value; n * n * n]).unwrap();
        let mut seg = vec![0.0; n * n * n];
        seg[g.index(n / 2, n / 2, n / 2)] = 3.0;
        Case::new("u", std::array::from_fn(|_| im.clone()), Some(Volume3D::label(g, seg).unwrap())).unwrap()
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let c = uniform_case(9, 2.0);
        let p = ElasticParams {
            control_grid: [4, 4, 4],
            max_displacement_mm: 0.0,
        };
        assert!(random_elastic(&c, &p, &mut RngStream::from_seed(1)).content_eq(&c));
    }

    #[test]
    fn field_vanishes_on_faces_and_is_bounded() {
        let mut rng = RngStream::from_seed(2);
        let dims = [13, 11, 9];
        let f = DisplacementField::sample(dims, [5, 4, 3], 3.0, &mut rng);
        assert!(!f.is_zero());
        let g = Grid::new(dims, [1.0; 3]).unwrap();
        for (i, v) in f.vectors.iter().enumerate() {
            let [x, y, z] = g.coords(i);
            let on_face = x == 0 || y == 0 || z == 0 || x == 12 || y == 10 || z == 8;
            if on_face {
                assert_eq!(*v, [0.0; 3]);
            }
            assert!(v.iter().all(|c| c.abs() <= 3.0 && c.is_finite()));
        }
    }

    #[test]
    fn control_points_are_interpolated_exactly_at_nodes() {
        // 3 control points on 5 voxels: nodes at voxels 0, 2, 4
        let control = [3, 2, 2];
        let mut ctrl = vec![[0.0; 3]; 12];
        ctrl[1] = [1.0, -2.0, 0.5];
        let f = DisplacementField::from_control_grid([5, 1, 1], control, &ctrl);
        assert_eq!(f.vectors[2], [1.0, -2.0, 0.5]);
        assert_eq!(f.vectors[1], [0.5, -1.0, 0.25]);
        assert_eq!(f.vectors[0], [0.0; 3]);
    }

    #[test]
    fn constant_image_stays_constant_in_interior() {
        let c = uniform_case(16, 5.0);
        let p = ElasticParams {
            control_grid: [5, 5, 5],
            max_displacement_mm: 2.0,
        };
        let out = random_elastic(&c, &p, &mut RngStream::from_seed(4));
        let v = &out.modalities[0];
        // displacement below 2 voxels, so voxels 2 away from the faces sample only inside
        for z in 2..14 {
            for y in 2..14 {
                for x in 2..14 {
                    assert!((v.get(x, y, z) - 5.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gaussian_kernel_normalized() {
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }

    #[test]
    fn weight_is_one_on_tumor_and_zero_far_away() {
        let dims = [30, 30, 30];
        let wt = BinaryMask::from_fn(dims, |x, y, z| {
            (12..16).contains(&x) && (13..17).contains(&y) && (14..17).contains(&z)
        });
        let w = tumor_weight(&wt, 3, 1.5);
        let reach = 3 + kernel_radius(1.5);
        for z in 0..30usize {
            for y in 0..30usize {
                for x in 0..30usize {
                    let i = wt.index(x, y, z);
                    let cheb = [(x, 12, 15), (y, 13, 16), (z, 14, 16)]
                        .iter()
                        .map(|&(c, lo, hi)| if c < lo { lo - c } else { c.saturating_sub(hi) })
                        .max()
                        .unwrap();
                    if wt.data()[i] {
                        assert_eq!(w.weights[i], 1.0);
                    }
                    assert!((0.0..=1.0).contains(&w.weights[i]));
                    if cheb > reach {
                        assert_eq!(w.weights[i], 0.0);
                    } else {
                        assert!(w.weights[i] > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn masked_elastic_needs_segmentation_and_skips_empty_tumor() {
        let mut c = uniform_case(8, 1.0);
        let p = LabelMaskedElasticParams::default();
        let scheme = LabelScheme::default();
        c.segmentation = Some(c.segmentation.unwrap().with_data(vec![0.0; 512]));
        let out = label_masked_elastic(&c, &scheme, &p, &mut RngStream::from_seed(1)).unwrap();
        assert!(out.content_eq(&c));
        c.segmentation = None;
        assert!(matches!(
            label_masked_elastic(&c, &scheme, &p, &mut RngStream::from_seed(1)),
            Err(Error::MissingSegmentation)
        ));
    }
}
