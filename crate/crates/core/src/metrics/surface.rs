//! Boundary extraction, exact Euclidean distance transform and the
//! normalized surface distance.

use crate::error::{Error, Result};
use crate::volume::{line_starts, BinaryMask};

/// Tie tolerance added to `tau` when testing surface distances.
pub const NSD_EPSILON: f64 = 1e-9;

/// Mask voxels with at least one face neighbour outside the mask; the volume
/// border counts as outside.
pub fn surface_voxels(mask: &BinaryMask) -> BinaryMask {
    let [nx, ny, nz] = mask.dims();
    BinaryMask::from_fn(mask.dims(), |x, y, z| {
        if !mask.get(x, y, z) {
            return false;
        }
        x == 0
            || y == 0
            || z == 0
            || x + 1 == nx
            || y + 1 == ny
            || z + 1 == nz
            || !mask.get(x - 1, y, z)
            || !mask.get(x + 1, y, z)
            || !mask.get(x, y - 1, z)
            || !mask.get(x, y + 1, z)
            || !mask.get(x, y, z - 1)
            || !mask.get(x, y, z + 1)
    })
}

/// Lower envelope of parabolas `w (q - p)^2 + f(p)` for one line.
fn edt_1d(f: &[f64], w: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let pf = p as f64;
                    let s = ((fq + w * qf * qf) - (f[p] + w * pf * pf)) / (2.0 * w * (qf - pf));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let d = qf - p as f64;
        *o = w * d * d + f[p];
    }
}

/// Squared distance (mm^2) from every voxel centre to the nearest `true`
/// voxel centre, using per-axis spacing. Infinite everywhere if the mask is
/// empty.
pub fn squared_distance_map(mask: &BinaryMask, spacing: [f64; 3]) -> Vec<f64> {
    let dims = mask.dims();
    let mut cur: Vec<f64> = mask.data().iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        let n = dims[axis];
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let w = spacing[axis] * spacing[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for start in line_starts(dims, axis) {
            for (i, l) in line.iter_mut().enumerate() {
                *l = cur[start + i * stride];
            }
            edt_1d(&line, w, &mut out, &mut v, &mut z);
            for (i, o) in out.iter().enumerate() {
                cur[start + i * stride] = *o;
            }
        }
    }
    cur
}

/// Fraction of both boundaries lying within `tau_mm` of the other boundary.
/// Both empty gives 1.0; exactly one empty gives 0.0.
pub fn nsd(gt: &BinaryMask, pred: &BinaryMask, spacing: [f64; 3], tau_mm: f64) -> Result<f64> {
    gt.ensure_same_dims(pred)?;
    if !(tau_mm >= 0.0) {
        return Err(Error::Config(format!("tau must be >= 0, got {tau_mm}")));
    }
    let (ge, pe) = (gt.is_empty(), pred.is_empty());
    if ge && pe {
        return Ok(1.0);
    }
    if ge || pe {
        return Ok(0.0);
    }
    let sg = surface_voxels(gt);
    let sp = surface_voxels(pred);
    let dg = squared_distance_map(&sg, spacing);
    let dp = squared_distance_map(&sp, spacing);
    let limit = tau_mm + NSD_EPSILON;
    let within = |s: &BinaryMask, d: &[f64]| -> (usize, usize) {
        s.data()
            .iter()
            .zip(d)
            .filter(|(b, _)| **b)
            .fold((0, 0), |(hit, all), (_, &d2)| (hit + (d2.sqrt() <= limit) as usize, all + 1))
    };
    let (hp, np) = within(&sp, &dg);
    let (hg, ng) = within(&sg, &dp);
    Ok((hp + hg) as f64 / (np + ng) as f64)
}
