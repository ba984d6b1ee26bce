//! Lesion-wise Dice.
//!
//! Ground-truth lesions are the connected components of the GT mask. Each
//! lesion is dilated by `dilation_vox` (26-connected) to form a matching
//! zone. A prediction component that touches one or more zones is assigned
//! to the zone it overlaps most (ties go to the lower lesion id); a
//! component touching none is a false positive. Each lesion scores the Dice
//! between itself and the union of its assigned components, false positives
//! score 0, and LSD is the mean over lesions plus false positives.

use serde::{Deserialize, Serialize};

use super::components::{connected_components, ComponentLabeling, Connectivity};
use super::overlap::dice_from_counts;
use crate::error::Result;
use crate::volume::BinaryMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LesionParams {
    pub connectivity: Connectivity,
    pub dilation_vox: usize,
    /// Components smaller than this (voxels) are ignored on both sides.
    pub min_lesion_vox: usize,
}

impl Default for LesionParams {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::TwentySix,
            dilation_vox: 3,
            min_lesion_vox: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMatch {
    pub gt_id: u32,
    pub voxels: usize,
    pub matched_pred: Vec<u32>,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LesionMatchReport {
    pub lesions: Vec<LesionMatch>,
    /// Prediction components overlapping no lesion zone.
    pub false_positives: Vec<u32>,
    /// Lesions with no assigned prediction component.
    pub false_negatives: Vec<u32>,
}

impl LesionMatchReport {
    /// Mean of per-lesion Dice with every false positive counted as 0.
    pub fn score(&self) -> f64 {
        let n = self.lesions.len() + self.false_positives.len();
        if n == 0 {
            1.0
        } else {
            self.lesions.iter().map(|l| l.dice).sum::<f64>() / n as f64
        }
    }
}

/// Lesion ids kept after the size filter.
fn kept(cc: &ComponentLabeling, min: usize) -> Vec<bool> {
    // index 0 = background
    std::iter::once(false).chain(cc.sizes.iter().map(|&s| s >= min)).collect()
}

pub fn lesion_wise_dice(gt: &BinaryMask, pred: &BinaryMask, params: &LesionParams) -> Result<(f64, LesionMatchReport)> {
    gt.ensure_same_dims(pred)?;
    let dims = gt.dims();
    let gcc = connected_components(gt, params.connectivity);
    let pcc = connected_components(pred, params.connectivity);
    let gkeep = kept(&gcc, params.min_lesion_vox);
    let pkeep = kept(&pcc, params.min_lesion_vox);

    // overlap[p][g]: voxels of pred component p inside the zone of lesion g
    let np = pcc.count;
    let ng = gcc.count;
    let mut overlap = vec![Vec::<(u32, usize)>::new(); np + 1];
    let bboxes = bounding_boxes(&gcc);
    let r = params.dilation_vox;
    for g in 1..=ng as u32 {
        if !gkeep[g as usize] {
            continue;
        }
        let (lo, hi) = bboxes[g as usize - 1];
        let lo = [0, 1, 2].map(|a| lo[a].saturating_sub(r));
        let hi = [0, 1, 2].map(|a| (hi[a] + r).min(dims[a] - 1));
        let local_dims = [0, 1, 2].map(|a| hi[a] - lo[a] + 1);
        let local = BinaryMask::from_fn(local_dims, |x, y, z| {
            gcc.labels[(x + lo[0]) + dims[0] * ((y + lo[1]) + dims[1] * (z + lo[2]))] == g
        });
        let zone = local.dilate(r);
        let mut counts = std::collections::BTreeMap::<u32, usize>::new();
        for z in 0..local_dims[2] {
            for y in 0..local_dims[1] {
                for x in 0..local_dims[0] {
                    if !zone.get(x, y, z) {
                        continue;
                    }
                    let p = pcc.labels[(x + lo[0]) + dims[0] * ((y + lo[1]) + dims[1] * (z + lo[2]))];
                    if p != 0 && pkeep[p as usize] {
                        *counts.entry(p).or_default() += 1;
                    }
                }
            }
        }
        for (p, c) in counts {
            overlap[p as usize].push((g, c));
        }
    }

    let mut assigned = vec![0u32; np + 1];
    let mut false_positives = Vec::new();
    for p in 1..=np {
        if !pkeep[p] {
            continue;
        }
        // lesions were visited in increasing id, so the first maximum is the lowest id
        let best = overlap[p]
            .iter()
            .fold(None::<(u32, usize)>, |best, &(g, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((g, c)),
            });
        match best {
            Some((g, _)) => assigned[p] = g,
            None => false_positives.push(p as u32),
        }
    }

    // per-lesion intersection with its assigned components
    let mut inter = vec![0usize; ng + 1];
    for (gl, pl) in gcc.labels.iter().zip(&pcc.labels) {
        if *gl != 0 && *pl != 0 && assigned[*pl as usize] == *gl {
            inter[*gl as usize] += 1;
        }
    }
    let mut lesions = Vec::new();
    let mut false_negatives = Vec::new();
    for g in 1..=ng as u32 {
        if !gkeep[g as usize] {
            continue;
        }
        let matched_pred: Vec<u32> = (1..=np as u32).filter(|&p| assigned[p as usize] == g).collect();
        let pred_size: usize = matched_pred.iter().map(|&p| pcc.sizes[p as usize - 1]).sum();
        let voxels = gcc.sizes[g as usize - 1];
        if matched_pred.is_empty() {
            false_negatives.push(g);
        }
        lesions.push(LesionMatch {
            gt_id: g,
            voxels,
            dice: dice_from_counts(inter[g as usize], voxels, pred_size),
            matched_pred,
        });
    }
    let report = LesionMatchReport {
        lesions,
        false_positives,
        false_negatives,
    };
    Ok((report.score(), report))
}

/// Inclusive (min, max) voxel corners per component.
fn bounding_boxes(cc: &ComponentLabeling) -> Vec<([usize; 3], [usize; 3])> {
    let mut boxes = vec![([usize::MAX; 3], [0usize; 3]); cc.count];
    let [nx, ny, _] = cc.dims;
    for (i, &l) in cc.labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let p = [i % nx, (i / nx) % ny, i / (nx * ny)];
        let b = &mut boxes[l as usize - 1];
        for a in 0..3 {
            b.0[a] = b.0[a].min(p[a]);
            b.1[a] = b.1[a].max(p[a]);
        }
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(lo: [usize; 3], size: usize) -> impl Fn(usize, usize, usize) -> bool {
        move |x, y, z| {
            (lo[0]..lo[0] + size).contains(&x) && (lo[1]..lo[1] + size).contains(&y) && (lo[2]..lo[2] + size).contains(&z)
        }
    }

    #[test]
    fn identical_single_lesion() {
        let dims = [12, 12, 12];
        let m = BinaryMask::from_fn(dims, cube([3, 3, 3], 4));
        let (s, r) = lesion_wise_dice(&m, &m, &LesionParams::default()).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(r.lesions.len(), 1);
        assert!(r.false_positives.is_empty() && r.false_negatives.is_empty());
    }

    #[test]
    fn spurious_distant_component_halves_score() {
        let dims = [30, 12, 12];
        let gt = BinaryMask::from_fn(dims, cube([2, 2, 2], 4));
        let fp = cube([22, 2, 2], 3);
        let pred = BinaryMask::from_fn(dims, |x, y, z| gt.get(x, y, z) || fp(x, y, z));
        let (s, r) = lesion_wise_dice(&gt, &pred, &LesionParams::default()).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(r.false_positives, vec![2]);
    }

    #[test]
    fn missed_lesion_halves_score() {
        let dims = [30, 12, 12];
        let a = cube([2, 2, 2], 4);
        let b = cube([20, 2, 2], 4);
        let gt = BinaryMask::from_fn(dims, |x, y, z| a(x, y, z) || b(x, y, z));
        let pred = BinaryMask::from_fn(dims, a);
        let (s, r) = lesion_wise_dice(&gt, &pred, &LesionParams::default()).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(r.false_negatives, vec![2]);
    }

    #[test]
    fn empty_cases() {
        let dims = [8, 8, 8];
        let e = BinaryMask::empty(dims);
        let m = BinaryMask::from_fn(dims, cube([1, 1, 1], 2));
        let p = LesionParams::default();
        assert_eq!(lesion_wise_dice(&e, &e, &p).unwrap().0, 1.0);
        assert_eq!(lesion_wise_dice(&e, &m, &p).unwrap().0, 0.0);
        assert_eq!(lesion_wise_dice(&m, &e, &p).unwrap().0, 0.0);
    }

    #[test]
    fn nearby_prediction_within_zone_is_matched() {
        // prediction disjoint from the lesion but within the 3-voxel zone
        let dims = [20, 10, 10];
        let gt = BinaryMask::from_fn(dims, cube([2, 2, 2], 4));
        let pred = BinaryMask::from_fn(dims, cube([8, 2, 2], 4));
        let (s, r) = lesion_wise_dice(&gt, &pred, &LesionParams::default()).unwrap();
        assert_eq!(s, 0.0);
        assert!(r.false_positives.is_empty());
        assert_eq!(r.lesions[0].matched_pred, vec![1]);
        // just outside the zone it becomes a false positive
        let pred = BinaryMask::from_fn(dims, cube([9, 2, 2], 4));
        let (_, r) = lesion_wise_dice(&gt, &pred, &LesionParams::default()).unwrap();
        assert_eq!(r.false_positives, vec![1]);
    }

    #[test]
    fn component_bridging_two_zones_goes_to_larger_overlap() {
        let dims = [30, 6, 6];
        let a = cube([2, 1, 1], 4);
        let b = cube([16, 1, 1], 4);
        let gt = BinaryMask::from_fn(dims, |x, y, z| a(x, y, z) || b(x, y, z));
        // bar spanning x in 4..=18, overlapping lesion 2's zone more
        let pred = BinaryMask::from_fn(dims, |x, y, z| (4..=19).contains(&x) && (1..5).contains(&y) && (1..5).contains(&z));
        let (_, r) = lesion_wise_dice(&gt, &pred, &LesionParams::default()).unwrap();
        assert!(r.lesions[0].matched_pred.is_empty());
        assert_eq!(r.lesions[1].matched_pred, vec![1]);
        assert_eq!(r.false_negatives, vec![1]);
    }

    #[test]
    fn tie_between_close_lesions_goes_to_lower_id() {
        // single-voxel lesions one voxel apart: each lies wholly inside the
        // other's zone, so the identical prediction of lesion 2 ties and goes
        // to lesion 1
        let dims = [9, 3, 3];
        let gt = BinaryMask::from_fn(dims, |x, y, z| (x == 2 || x == 4) && y == 1 && z == 1);
        let (s, r) = lesion_wise_dice(&gt, &gt, &LesionParams::default()).unwrap();
        assert_eq!(r.lesions[0].matched_pred, vec![1, 2]);
        assert_eq!(r.false_negatives, vec![2]);
        // lesion 1: 2*1/(1+2); lesion 2: 0
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_lesion_size_filters_both_sides() {
        let dims = [30, 8, 8];
        let big = cube([2, 2, 2], 4);
        let tiny = cube([20, 2, 2], 1);
        let gt = BinaryMask::from_fn(dims, |x, y, z| big(x, y, z) || tiny(x, y, z));
        let pred = BinaryMask::from_fn(dims, |x, y, z| big(x, y, z) || cube([25, 5, 5], 1)(x, y, z));
        let p = LesionParams {
            min_lesion_vox: 2,
            ..LesionParams::default()
        };
        assert_eq!(lesion_wise_dice(&gt, &pred, &p).unwrap().0, 1.0);
        assert!(lesion_wise_dice(&gt, &pred, &LesionParams::default()).unwrap().0 < 1.0);
    }
}
