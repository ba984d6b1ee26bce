//! Per-case scoring over the ET/TC/WT regions and table-style aggregation.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lesion::{lesion_wise_dice, LesionParams};
use super::surface::nsd;
use crate::ensemble::{load_prediction, member_case_ids};
use crate::error::{Error, Result};
use crate::labels::{region_mask, LabelScheme, Region};
use crate::volume::Volume3D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricParams {
    pub lesion: LesionParams,
    pub nsd_tolerance_mm: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            lesion: LesionParams::default(),
            nsd_tolerance_mm: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub lsd: f64,
    pub nsd: f64,
}

/// One case; `regions` follows [`Region::ALL`] (ET, TC, WT).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub case_id: String,
    pub regions: [RegionScore; 3],
}

impl ScoreRow {
    pub fn get(&self, region: Region) -> RegionScore {
        self.regions[Region::ALL.iter().position(|r| *r == region).unwrap()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    /// Per-region means over all rows, ET/TC/WT.
    pub mean: [RegionScore; 3],
    /// Mean of the three per-region means.
    pub avg: RegionScore,
}

pub fn score_case(
    case_id: &str,
    gt_seg: &Volume3D,
    pred_seg: &Volume3D,
    scheme: &LabelScheme,
    params: &MetricParams,
) -> Result<ScoreRow> {
    gt_seg.grid().ensure_matches(pred_seg.grid(), "ground truth vs prediction")?;
    let spacing = gt_seg.spacing();
    let mut regions = [RegionScore { lsd: 0.0, nsd: 0.0 }; 3];
    for (slot, region) in regions.iter_mut().zip(Region::ALL) {
        let g = region_mask(gt_seg, region, scheme)?.mask;
        let p = region_mask(pred_seg, region, scheme)?.mask;
        let (lsd, _) = lesion_wise_dice(&g, &p, &params.lesion)?;
        *slot = RegionScore {
            lsd,
            nsd: nsd(&g, &p, spacing, params.nsd_tolerance_mm)?,
        };
    }
    Ok(ScoreRow {
        case_id: case_id.to_owned(),
        regions,
    })
}

/// Per-region arithmetic means, summed in row order.
pub fn aggregate(rows: Vec<ScoreRow>) -> Result<ScoreReport> {
    if rows.is_empty() {
        return Err(Error::Empty("no score rows to aggregate"));
    }
    let n = rows.len() as f64;
    let mut mean = [RegionScore { lsd: 0.0, nsd: 0.0 }; 3];
    for (k, m) in mean.iter_mut().enumerate() {
        m.lsd = rows.iter().map(|r| r.regions[k].lsd).sum::<f64>() / n;
        m.nsd = rows.iter().map(|r| r.regions[k].nsd).sum::<f64>() / n;
    }
    let avg = RegionScore {
        lsd: mean.iter().map(|m| m.lsd).sum::<f64>() / 3.0,
        nsd: mean.iter().map(|m| m.nsd).sum::<f64>() / 3.0,
    };
    Ok(ScoreReport { rows, mean, avg })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCase {
    pub case_id: String,
    pub error: String,
}

/// Result of scoring a prediction tree against a ground-truth tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub rows: Vec<ScoreRow>,
    /// `None` when no case could be scored.
    pub report: Option<ScoreReport>,
    /// Case ids present on only one side.
    pub missing: Vec<String>,
    pub failed: Vec<FailedCase>,
}

impl ScoreSet {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.failed.is_empty() && self.report.is_some()
    }
}

/// Scores every case id found in both trees, in id order. Either tree may use
/// the BraTS layout (`<dir>/<id>/<id>-seg.nii.gz`) or flat `<id>.nii.gz`
/// files; probability predictions are reduced by argmax.
pub fn score_case_set(gt_dir: &Path, pred_dir: &Path, scheme: &LabelScheme, params: &MetricParams) -> Result<ScoreSet> {
    let gt_ids = member_case_ids(gt_dir)?;
    let pred_ids = member_case_ids(pred_dir)?;
    let missing: Vec<String> = gt_ids.symmetric_difference(&pred_ids).cloned().collect();
    let common: Vec<&String> = gt_ids.intersection(&pred_ids).collect();
    let results: Vec<std::result::Result<ScoreRow, FailedCase>> = common
        .par_iter()
        .map(|id| {
            let run = || -> Result<ScoreRow> {
                let gt = load_prediction(gt_dir, id, scheme)?.into_labels();
                let pred = load_prediction(pred_dir, id, scheme)?.into_labels();
                score_case(id, &gt, &pred, scheme, params)
            };
            run().map_err(|e| FailedCase {
                case_id: (*id).clone(),
                error: e.to_string(),
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failed.push(f),
        }
    }
    let report = if rows.is_empty() { None } else { Some(aggregate(rows.clone())?) };
    Ok(ScoreSet {
        rows,
        report,
        missing,
        failed,
    })
}

/// Header `case_id,region,lsd,nsd`, one row per case per region, then
/// `MEAN` rows per region and a `MEAN,AVG` row when a report is given.
pub fn write_csv(mut w: impl Write, rows: &[ScoreRow], report: Option<&ScoreReport>) -> std::io::Result<()> {
    writeln!(w, "case_id,region,lsd,nsd")?;
    for row in rows {
        for (region, s) in Region::ALL.iter().zip(&row.regions) {
            writeln!(w, "{},{},{},{}", row.case_id, region, s.lsd, s.nsd)?;
        }
    }
    if let Some(rep) = report {
        for (region, s) in Region::ALL.iter().zip(&rep.mean) {
            writeln!(w, "MEAN,{},{},{}", region, s.lsd, s.nsd)?;
        }
        writeln!(w, "MEAN,AVG,{},{}", rep.avg.lsd, rep.avg.nsd)?;
    }
    Ok(())
}

/// Nested JSON: `{"cases": [{"case_id", "ET": {lsd, nsd}, ...}], "mean": {...,"AVG"}}`.
pub fn report_json(rows: &[ScoreRow], report: Option<&ScoreReport>, missing: &[String]) -> serde_json::Value {
    use serde_json::{json, Map, Value};
    let region_map = |scores: &[RegionScore; 3]| -> Map<String, Value> {
        Region::ALL
            .iter()
            .zip(scores)
            .map(|(r, s)| (r.to_string(), json!({"lsd": s.lsd, "nsd": s.nsd})))
            .collect()
    };
    let cases: Vec<Value> = rows
        .iter()
        .map(|row| {
            let mut m = region_map(&row.regions);
            m.insert("case_id".into(), json!(row.case_id));
            Value::Object(m)
        })
        .collect();
    let mean = report.map(|rep| {
        let mut m = region_map(&rep.mean);
        m.insert("AVG".into(), json!({"lsd": rep.avg.lsd, "nsd": rep.avg.nsd}));
        Value::Object(m)
    });
    json!({"cases": cases, "mean": mean, "missing": missing})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn row(id: &str, lsd: [f64; 3], nsd: [f64; 3]) -> ScoreRow {
        ScoreRow {
            case_id: id.into(),
            regions: [0, 1, 2].map(|k| RegionScore { lsd: lsd[k], nsd: nsd[k] }),
        }
    }

    #[test]
    fn aggregate_single_row_is_identity() {
        let r = row("a", [0.1, 0.2, 0.3], [0.4, 0.5, 0.6]);
        let rep = aggregate(vec![r.clone()]).unwrap();
        assert_eq!(rep.mean, r.regions);
        assert!((rep.avg.lsd - 0.2).abs() < 1e-12);
    }

    #[test]
    fn aggregate_empty_errors() {
        assert!(aggregate(vec![]).is_err());
    }

    #[test]
    fn table_row_average() {
        let rep = aggregate(vec![row("m+r", [0.860, 0.846, 0.897], [0.852, 0.780, 0.812])]).unwrap();
        assert!((rep.avg.lsd - 2.603 / 3.0).abs() < 1e-12);
        assert!((rep.avg.nsd - 2.444 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{:.3}", rep.avg.nsd), "0.815");
        // 2.603 / 3 = 0.86767
        assert_eq!(format!("{:.3}", rep.avg.lsd), "0.868");
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let g = Grid::new([10, 10, 10], [1.0; 3]).unwrap();
        let mut labels = vec![0.0; 1000];
        for z in 3..7 {
            for y in 3..7 {
                for x in 3..7 {
                    labels[g.index(x, y, z)] = if x == 3 { 2.0 } else if x < 6 { 3.0 } else { 1.0 };
                }
            }
        }
        let gt = Volume3D::label(g.clone(), labels).unwrap();
        let scheme = LabelScheme::default();
        let p = MetricParams::default();
        let r = score_case("c", &gt, &gt, &scheme, &p).unwrap();
        assert!(r.regions.iter().all(|s| s.lsd == 1.0 && s.nsd == 1.0));
        let empty = Volume3D::label(g, vec![0.0; 1000]).unwrap();
        let r = score_case("c", &gt, &empty, &scheme, &p).unwrap();
        assert!(r.regions.iter().all(|s| s.lsd == 0.0 && s.nsd == 0.0));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![row("a", [1.0; 3], [1.0; 3])];
        let rep = aggregate(rows.clone()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, Some(&rep)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "case_id,region,lsd,nsd");
        assert_eq!(lines[1], "a,ET,1,1");
        assert_eq!(lines[4], "MEAN,ET,1,1");
        assert_eq!(lines[7], "MEAN,AVG,1,1");
    }
}
