//! Fusing predictions of several segmentation models.
//!
//! Probability fusion picks the argmax of the voxelwise weighted mean of the
//! members' class probabilities (ties to the lowest label).
//! Hard-label fusion is a weighted vote (ties prefer the lowest
//! non-background label). Per-voxel sums are taken in sorted order so the
//! result does not depend on member order.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::{find_volume, SEG_SUFFIX};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::nifti::{read_nifti, read_nifti_channels, write_nifti};
use crate::volume::{Grid, Volume3D, VolumeKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVolume {
    grid: Grid,
    /// Label value of each channel, strictly ascending.
    labels: Vec<u32>,
    channels: Vec<Vec<f64>>,
}

impl ProbabilityVolume {
    pub fn new(grid: Grid, labels: Vec<u32>, channels: Vec<Vec<f64>>) -> Result<Self> {
        if labels.is_empty() || labels.len() != channels.len() {
            return Err(Error::InvalidVolume(format!(
                "{} labels for {} probability channels",
                labels.len(),
                channels.len()
            )));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidVolume(format!("channel labels must ascend, got {labels:?}")));
        }
        if channels.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidVolume("probability channel length does not match grid".into()));
        }
        for i in 0..grid.len() {
            let mut sum = 0.0;
            for c in &channels {
                if !(c[i] >= 0.0) {
                    return Err(Error::InvalidVolume(format!("negative or NaN probability at voxel {i}")));
                }
                sum += c[i];
            }
            if (sum - 1.0).abs() > 1e-5 {
                return Err(Error::InvalidVolume(format!("probabilities at voxel {i} sum to {sum}")));
            }
        }
        Ok(Self { grid, labels, channels })
    }

    /// One-hot encoding of a hard segmentation over `labels`.
    pub fn one_hot(seg: &Volume3D, labels: &[u32]) -> Result<Self> {
        let mut channels = vec![vec![0.0; seg.data().len()]; labels.len()];
        for (i, &v) in seg.data().iter().enumerate() {
            let c = labels
                .iter()
                .position(|&l| l as f64 == v)
                .ok_or(Error::UnknownLabel { value: v, index: i })?;
            channels[c][i] = 1.0;
        }
        Self::new(seg.grid().clone(), labels.to_vec(), channels)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn argmax(&self) -> Volume3D {
        fuse_probabilities(std::slice::from_ref(self), None).expect("single member is always compatible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    ProbabilityMean,
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    /// Display names of the members, e.g. `["S", "M", "R"]`.
    pub members: Vec<String>,
    /// Positive weights, one per member; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub mode: FusionMode,
}

/// Validated raw weights. Only the argmax matters, so they are left
/// unnormalised: dividing by their sum would add a rounding step that can
/// split exact ties.
fn member_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::Config(format!("{} weights for {n} members", w.len())));
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::Config(format!("weights must be positive, got {w:?}")));
            }
            Ok(w.to_vec())
        }
    }
}

/// Order-independent sum of a handful of terms.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

pub fn fuse_probabilities(members: &[ProbabilityVolume], weights: Option<&[f64]>) -> Result<Volume3D> {
    let first = members.first().ok_or(Error::Empty("no ensemble members"))?;
    for m in &members[1..] {
        first.grid.ensure_matches(&m.grid, "ensemble member")?;
        if m.labels != first.labels {
            return Err(Error::GeometryMismatch(format!(
                "member label sets differ: {:?} vs {:?}",
                first.labels, m.labels
            )));
        }
    }
    let w = member_weights(weights, members.len())?;
    let n = first.grid.len();
    let mut terms = vec![0.0; members.len()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = (f64::NEG_INFINITY, 0u32);
        for (c, &label) in first.labels.iter().enumerate() {
            for (k, m) in members.iter().enumerate() {
                terms[k] = w[k] * m.channels[c][i];
            }
            let total = canonical_sum(&mut terms);
            // strict comparison keeps the lowest label on ties
            if total > best.0 {
                best = (total, label);
            }
        }
        out.push(best.1 as f64);
    }
    Volume3D::label(first.grid.clone(), out)
}

/// Weighted voxelwise vote. Among tied labels the lowest non-background one
/// wins; background wins only as the unique mode.
pub fn fuse_labels_vote(members: &[Volume3D], weights: Option<&[f64]>, background: u32) -> Result<Volume3D> {
    let first = members.first().ok_or(Error::Empty("no ensemble members"))?;
    for m in &members[1..] {
        first.grid().ensure_matches(m.grid(), "ensemble member")?;
    }
    let w = member_weights(weights, members.len())?;
    let n = first.grid().len();
    let mut out = Vec::with_capacity(n);
    let mut votes: Vec<(u32, f64)> = Vec::with_capacity(members.len());
    let mut terms = Vec::with_capacity(members.len());
    for i in 0..n {
        votes.clear();
        for (k, m) in members.iter().enumerate() {
            votes.push((m.data()[i] as u32, w[k]));
        }
        votes.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut tallies: Vec<(u32, f64)> = Vec::new();
        let mut j = 0;
        while j < votes.len() {
            let label = votes[j].0;
            terms.clear();
            while j < votes.len() && votes[j].0 == label {
                terms.push(votes[j].1);
                j += 1;
            }
            tallies.push((label, canonical_sum(&mut terms)));
        }
        let top = tallies.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<u32> = tallies.iter().filter(|t| t.1 == top).map(|t| t.0).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            // tallies ascend by label, so the first non-background entry is the lowest
            *tied.iter().find(|&&l| l != background).unwrap_or(&tied[0])
        };
        out.push(winner as f64);
    }
    Volume3D::label(first.grid().clone(), out)
}

/// A member's prediction for one case.
#[derive(Debug, Clone)]
pub enum Prediction {
    Probabilities(ProbabilityVolume),
    Labels(Volume3D),
}

impl Prediction {
    pub fn into_probabilities(self, labels: &[u32]) -> Result<ProbabilityVolume> {
        match self {
            Prediction::Probabilities(p) => Ok(p),
            Prediction::Labels(v) => ProbabilityVolume::one_hot(&v, labels),
        }
    }

    pub fn into_labels(self) -> Volume3D {
        match self {
            Prediction::Probabilities(p) => p.argmax(),
            Prediction::Labels(v) => v,
        }
    }
}

const PROB_SUFFIX: &str = "prob";

/// Case ids available in a member directory: subdirectory names plus the
/// stems of loose NIfTI files.
pub fn member_case_ids(dir: &Path) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_dir() {
            ids.insert(name);
            continue;
        }
        let Some(stem) = name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii")) else {
            continue;
        };
        let id = match stem.rsplit_once('-') {
            Some((id, tail)) if tail == SEG_SUFFIX || tail.starts_with(PROB_SUFFIX) => id,
            _ => stem,
        };
        ids.insert(id.to_owned());
    }
    Ok(ids)
}

fn find_plain(dir: &Path, id: &str) -> Option<PathBuf> {
    ["nii.gz", "nii"]
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

/// Locates a prediction in `<dir>/<id>/` or directly in `<dir>`. Preference:
/// 4D `<id>-prob`, per-label `<id>-prob<label>`, then hard `<id>-seg` or `<id>`.
/// 4D channels are ordered by ascending label code.
pub fn load_prediction(dir: &Path, id: &str, scheme: &LabelScheme) -> Result<Prediction> {
    let labels = scheme.sorted_codes();
    for place in [dir.join(id), dir.to_path_buf()] {
        if !place.is_dir() {
            continue;
        }
        if let Some(p) = find_volume(&place, id, PROB_SUFFIX) {
            let (grid, channels) = read_nifti_channels(&p)?;
            if channels.len() != labels.len() {
                return Err(Error::InvalidVolume(format!(
                    "{}: {} channels, expected {}",
                    p.display(),
                    channels.len(),
                    labels.len()
                )));
            }
            return Ok(Prediction::Probabilities(ProbabilityVolume::new(grid, labels, channels)?));
        }
        let per_label: Vec<Option<PathBuf>> = labels
            .iter()
            .map(|l| find_volume(&place, id, &format!("{PROB_SUFFIX}{l}")))
            .collect();
        if per_label.iter().all(Option::is_some) {
            let mut grid = None;
            let mut channels = Vec::new();
            for p in per_label.into_iter().flatten() {
                let v = read_nifti(&p)?;
                if let Some(g) = &grid {
                    v.grid().ensure_matches(g, "probability channel")?;
                } else {
                    grid = Some(v.grid().clone());
                }
                channels.push(v.into_data());
            }
            return Ok(Prediction::Probabilities(ProbabilityVolume::new(grid.unwrap(), labels, channels)?));
        }
        if let Some(p) = find_volume(&place, id, SEG_SUFFIX).or_else(|| find_plain(&place, id)) {
            let v = read_nifti(&p)?;
            if v.kind() != VolumeKind::Label {
                return Err(Error::InvalidVolume(format!("{}: not a label volume", p.display())));
            }
            scheme.check_volume(&v)?;
            return Ok(Prediction::Labels(v));
        }
    }
    Err(Error::MissingModality {
        case_id: id.to_owned(),
        what: format!("prediction in {}", dir.display()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFusion {
    pub case_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub members: Vec<String>,
    pub mode: FusionMode,
    pub fused: Vec<String>,
    pub skipped: Vec<SkippedFusion>,
}

/// Fuses every case present in all member directories and writes
/// `<output>/<id>/<id>-seg.nii.gz`. Cases missing from any member, or
/// failing to load, are skipped and reported.
pub fn fuse_case_set(
    member_dirs: &[PathBuf],
    output_dir: &Path,
    spec: &EnsembleSpec,
    scheme: &LabelScheme,
) -> Result<FusionReport> {
    if member_dirs.is_empty() {
        return Err(Error::Empty("no ensemble member directories"));
    }
    let weights = spec.weights.as_deref();
    member_weights(weights, member_dirs.len())?;
    if !spec.members.is_empty() && spec.members.len() != member_dirs.len() {
        return Err(Error::Config(format!(
            "ensemble spec names {} members but {} directories were given",
            spec.members.len(),
            member_dirs.len()
        )));
    }
    let names: Vec<String> = if spec.members.is_empty() {
        member_dirs
            .iter()
            .map(|d| d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned()))
            .collect()
    } else {
        spec.members.clone()
    };

    let id_sets = member_dirs
        .iter()
        .map(|d| member_case_ids(d))
        .collect::<Result<Vec<_>>>()?;
    let all: BTreeSet<String> = id_sets.iter().flatten().cloned().collect();
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let labels = scheme.sorted_codes();

    let outcomes: Vec<std::result::Result<String, SkippedFusion>> = all
        .par_iter()
        .map(|id| {
            let skip = |reason: String| SkippedFusion {
                case_id: id.clone(),
                reason,
            };
            let absent: Vec<&str> = id_sets
                .iter()
                .zip(&names)
                .filter(|(set, _)| !set.contains(id))
                .map(|(_, n)| n.as_str())
                .collect();
            if !absent.is_empty() {
                return Err(skip(format!("missing in member(s) {}", absent.join(", "))));
            }
            let preds = member_dirs
                .iter()
                .map(|d| load_prediction(d, id, scheme))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| skip(e.to_string()))?;
            let fused = match spec.mode {
                FusionMode::ProbabilityMean => {
                    let probs = preds
                        .into_iter()
                        .map(|p| p.into_probabilities(&labels))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| skip(e.to_string()))?;
                    fuse_probabilities(&probs, weights)
                }
                FusionMode::MajorityVote => {
                    let hard: Vec<Volume3D> = preds.into_iter().map(Prediction::into_labels).collect();
                    fuse_labels_vote(&hard, weights, scheme.background)
                }
            }
            .map_err(|e| skip(e.to_string()))?;
            let dir = output_dir.join(id);
            fs::create_dir_all(&dir).map_err(|e| skip(e.to_string()))?;
            write_nifti(&fused, dir.join(format!("{id}-{SEG_SUFFIX}.nii.gz"))).map_err(|e| skip(e.to_string()))?;
            Ok(id.clone())
        })
        .collect();

    let mut fused = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(id) => fused.push(id),
            Err(s) => {
                log::warn!("fusion skipped {}: {}", s.case_id, s.reason);
                skipped.push(s)
            }
        }
    }
    Ok(FusionReport {
        members: names,
        mode: spec.mode,
        fused,
        skipped,
    })
}
