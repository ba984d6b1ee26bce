//! Chained augmentation and offline dataset expansion.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bias::{random_bias_field, BiasFieldParams};
use super::elastic::{label_masked_elastic, random_elastic, ElasticParams, LabelMaskedElasticParams};
use super::rng::{case_seed, RngStream};
use super::spatial::{random_affine, random_flip, AffineParams, FlipParams};
use crate::case::{case_id_of, list_case_dirs, load_case, write_case, Case};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;

fn default_probability<const P: u8>() -> f64 {
    P as f64 / 10.0
}

/// One step of the pipeline, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Affine {
        #[serde(default = "default_probability::<5>")]
        probability: f64,
        #[serde(default)]
        params: AffineParams,
    },
    Flip {
        #[serde(default = "default_probability::<5>")]
        probability: f64,
        #[serde(default)]
        params: FlipParams,
    },
    BiasField {
        #[serde(default = "default_probability::<3>")]
        probability: f64,
        #[serde(default)]
        params: BiasFieldParams,
    },
    Elastic {
        #[serde(default = "default_probability::<3>")]
        probability: f64,
        #[serde(default)]
        params: ElasticParams,
    },
    /// Always applied.
    LabelMaskedElastic {
        #[serde(default = "default_probability::<10>")]
        probability: f64,
        #[serde(default)]
        params: LabelMaskedElasticParams,
    },
}

impl TransformSpec {
    pub fn probability(&self) -> f64 {
        match self {
            TransformSpec::Affine { probability, .. }
            | TransformSpec::Flip { probability, .. }
            | TransformSpec::BiasField { probability, .. }
            | TransformSpec::Elastic { probability, .. }
            | TransformSpec::LabelMaskedElastic { probability, .. } => *probability,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Affine { .. } => "affine",
            TransformSpec::Flip { .. } => "flip",
            TransformSpec::BiasField { .. } => "bias_field",
            TransformSpec::Elastic { .. } => "elastic",
            TransformSpec::LabelMaskedElastic { .. } => "label_masked_elastic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probability();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{}: probability {p} outside [0, 1]", self.name())));
        }
        match self {
            TransformSpec::Affine { params, .. } => params.validate(),
            TransformSpec::Flip { params, .. } => params.validate(),
            TransformSpec::BiasField { params, .. } => params.validate(),
            TransformSpec::Elastic { params, .. } => params.validate(),
            TransformSpec::LabelMaskedElastic { probability, params } => {
                if *probability != 1.0 {
                    return Err(Error::Config(format!(
                        "label_masked_elastic is deterministic, probability must be 1.0 (got {probability})"
                    )));
                }
                params.validate()
            }
        }
    }

    fn apply(&self, case: &Case, scheme: &LabelScheme, rng: &mut RngStream) -> Result<Case> {
        Ok(match self {
            TransformSpec::Affine { params, .. } => random_affine(case, params, rng),
            TransformSpec::Flip { params, .. } => random_flip(case, params, rng),
            TransformSpec::BiasField { params, .. } => random_bias_field(case, params, rng),
            TransformSpec::Elastic { params, .. } => random_elastic(case, params, rng),
            TransformSpec::LabelMaskedElastic { params, .. } => label_masked_elastic(case, scheme, params, rng)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub transforms: Vec<TransformSpec>,
    #[serde(default)]
    pub global_seed: u64,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            transforms: vec![
                TransformSpec::Affine {
                    probability: 0.5,
                    params: AffineParams::default(),
                },
                TransformSpec::Flip {
                    probability: 0.5,
                    params: FlipParams::default(),
                },
                TransformSpec::BiasField {
                    probability: 0.3,
                    params: BiasFieldParams::default(),
                },
                TransformSpec::Elastic {
                    probability: 0.3,
                    params: ElasticParams::default(),
                },
                TransformSpec::LabelMaskedElastic {
                    probability: 1.0,
                    params: LabelMaskedElasticParams::default(),
                },
            ],
            global_seed: 0,
        }
    }
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        self.transforms.iter().try_for_each(TransformSpec::validate)
    }
}

pub fn augmented_id(case_id: &str, replicate: u64) -> String {
    format!("{case_id}-aug{replicate}")
}

/// Runs the transforms in order. Transform `t` draws from the stream keyed by
/// `(global_seed, case_id, replicate, t)`; its first draw decides whether it
/// fires (`u < probability`).
pub fn apply_pipeline(case: &Case, spec: &PipelineSpec, replicate: u64, scheme: &LabelScheme) -> Result<Case> {
    spec.validate()?;
    let seed = case_seed(spec.global_seed, &case.case_id, replicate);
    let mut cur = case.clone();
    for (t, transform) in spec.transforms.iter().enumerate() {
        let mut rng = RngStream::for_transform(seed, t as u64);
        let u = rng.unit();
        let fires = matches!(transform, TransformSpec::LabelMaskedElastic { .. }) || u < transform.probability();
        if fires {
            log::trace!("{} r{replicate}: {}", case.case_id, transform.name());
            cur = transform.apply(&cur, scheme, &mut rng)?;
        }
    }
    cur.case_id = augmented_id(&case.case_id, replicate);
    Ok(cur)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandOptions {
    pub replicates: u64,
    /// Also copy each source case unchanged into the output.
    pub include_originals: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub case_id: String,
    pub replicate: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedCase {
    pub source_id: String,
    pub outputs: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub case: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub global_seed: u64,
    pub replicates: u64,
    pub include_originals: bool,
    pub input_cases: usize,
    pub output_cases: usize,
    pub cases: Vec<ExpandedCase>,
    pub skipped: Vec<SkippedCase>,
}

/// Writes `replicates` augmented copies of every case under `input_dir` into
/// `output_dir`, in parallel on the current rayon pool. Cases that fail to
/// load or augment are listed in `skipped`. Output is independent of thread
/// scheduling.
pub fn expand_dataset(
    input_dir: impl AsRef<Path>,
    output_dir: impl AsRef<Path>,
    spec: &PipelineSpec,
    scheme: &LabelScheme,
    options: &ExpandOptions,
) -> Result<ExpansionReport> {
    let output_dir = output_dir.as_ref();
    if options.replicates == 0 {
        return Err(Error::Config("replicates must be >= 1".into()));
    }
    spec.validate()?;
    scheme.validate()?;
    let dirs = list_case_dirs(input_dir)?;
    if dirs.is_empty() {
        return Err(Error::Empty("input directory holds no case directories"));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let results: Vec<std::result::Result<ExpandedCase, SkippedCase>> = dirs
        .par_iter()
        .map(|dir| {
            let name = case_id_of(dir).unwrap_or_else(|_| dir.display().to_string());
            let skipped = |e: Error| SkippedCase {
                case: name.clone(),
                error: e.to_string(),
            };
            let case = load_case(dir, scheme).map_err(skipped)?;
            if options.include_originals {
                write_case(&case, output_dir).map_err(skipped)?;
            }
            let mut outputs = Vec::with_capacity(options.replicates as usize);
            for r in 0..options.replicates {
                let aug = apply_pipeline(&case, spec, r, scheme).map_err(skipped)?;
                write_case(&aug, output_dir).map_err(skipped)?;
                outputs.push(ReplicateRecord {
                    case_id: aug.case_id,
                    replicate: r,
                    seed: case_seed(spec.global_seed, &case.case_id, r),
                });
            }
            Ok(ExpandedCase {
                source_id: case.case_id,
                outputs,
            })
        })
        .collect();

    let mut cases = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(c) => cases.push(c),
            Err(s) => {
                log::warn!("skipped {}: {}", s.case, s.error);
                skipped.push(s)
            }
        }
    }
    let per_case = options.replicates as usize + usize::from(options.include_originals);
    Ok(ExpansionReport {
        global_seed: spec.global_seed,
        replicates: options.replicates,
        include_originals: options.include_originals,
        input_cases: dirs.len(),
        output_cases: cases.len() * per_case,
        cases,
        skipped,
    })
}
