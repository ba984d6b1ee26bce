//! The single JSON configuration file shared by every subcommand.
//!
//! ```json
//! {
//!   "labels":   {"background": 0, "ncr": 1, "ed": 2, "et": 3},
//!   "pipeline": {"global_seed": 0, "transforms": [{"kind": "affine", "probability": 0.5, "params": {}}]},
//!   "ensemble": {"members": ["S", "M", "R"], "weights": null, "mode": "probability_mean"},
//!   "metrics":  {"lesion": {"connectivity": 26, "dilation_vox": 3, "min_lesion_vox": 0}, "nsd_tolerance_mm": 1.0},
//!   "workers":  null,
//!   "seed":     null
//! }
//! ```
//!
//! Every section is optional and every unknown key is an error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::PipelineSpec;
use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::metrics::MetricParams;

/// Overrides the configured seed when set.
pub const SEED_ENV: &str = "NEUROVOLVE_SEED";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolConfig {
    pub labels: LabelScheme,
    pub pipeline: PipelineSpec,
    pub ensemble: EnsembleSpec,
    pub metrics: MetricParams,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    /// Global seed; takes precedence over `pipeline.global_seed`.
    pub seed: Option<u64>,
}

impl ToolConfig {
    /// Parses JSON text. Errors name the offending key path and line.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ToolConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.labels.validate()?;
        self.pipeline.validate()?;
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if !(self.metrics.nsd_tolerance_mm >= 0.0) {
            return Err(Error::Config("metrics.nsd_tolerance_mm must be >= 0".into()));
        }
        if let Some(w) = &self.ensemble.weights {
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::Config(format!("ensemble.weights must be positive, got {w:?}")));
            }
            if !self.ensemble.members.is_empty() && w.len() != self.ensemble.members.len() {
                return Err(Error::Config("ensemble.weights and ensemble.members differ in length".into()));
            }
        }
        Ok(())
    }

    /// Applies the seed precedence `NEUROVOLVE_SEED` > `seed` >
    /// `pipeline.global_seed`, writing the result into the pipeline.
    pub fn resolve_seed(&mut self) -> Result<u64> {
        self.resolve_seed_with(std::env::var(SEED_ENV).ok().as_deref())
    }

    pub fn resolve_seed_with(&mut self, env: Option<&str>) -> Result<u64> {
        let seed = match env {
            Some(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("{SEED_ENV}={v:?}: {e}")))?,
            None => self.seed.unwrap_or(self.pipeline.global_seed),
        };
        self.seed = Some(seed);
        self.pipeline.global_seed = seed;
        Ok(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(ToolConfig::from_json("{}").unwrap(), ToolConfig::default());
    }

    #[test]
    fn unknown_key_reports_path_and_line() {
        let text = "{\n  \"metrics\": {\n    \"nsd_tolerance\": 2.0\n  }\n}";
        let msg = ToolConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("metrics"), "{msg}");
        assert!(msg.contains("nsd_tolerance"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(ToolConfig::from_json(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ToolConfig::from_json(r#"{"workers": 0}"#).is_err());
        assert!(ToolConfig::from_json(r#"{"labels": {"ncr": 0}}"#).is_err());
        assert!(ToolConfig::from_json(r#"{"ensemble": {"weights": [1.0, -1.0]}}"#).is_err());
    }

    #[test]
    fn seed_precedence() {
        let mut c = ToolConfig::from_json(r#"{"pipeline": {"transforms": [], "global_seed": 3}}"#).unwrap();
        assert_eq!(c.clone().resolve_seed_with(None).unwrap(), 3);
        c.seed = Some(9);
        assert_eq!(c.clone().resolve_seed_with(None).unwrap(), 9);
        assert_eq!(c.resolve_seed_with(Some("42")).unwrap(), 42);
        assert_eq!(c.pipeline.global_seed, 42);
        assert!(c.resolve_seed_with(Some("x")).is_err());
    }

    #[test]
    fn full_example_parses() {
        let text = r#"{
            "labels": {"background": 0, "ncr": 1, "ed": 2, "et": 4},
            "pipeline": {"global_seed": 1, "transforms": [{"kind": "bias_field", "probability": 0.3}]},
            "ensemble": {"members": ["S", "M", "R"], "weights": [1, 1, 2], "mode": "majority_vote"},
            "metrics": {"lesion": {"connectivity": 6}, "nsd_tolerance_mm": 2.0},
            "workers": 2,
            "seed": 5
        }"#;
        let c = ToolConfig::from_json(text).unwrap();
        assert_eq!(c.labels.et, 4);
        assert_eq!(c.workers, Some(2));
    }
}
