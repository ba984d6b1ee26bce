//! Lesion-wise Dice and normalized surface distance, per tumour region.

pub mod components;
pub mod lesion;
pub mod overlap;
pub mod score;
pub mod surface;

pub use components::{connected_components, ComponentLabeling, Connectivity};
pub use lesion::{lesion_wise_dice, LesionMatch, LesionMatchReport, LesionParams};
pub use overlap::dice;
pub use score::{
    aggregate, report_json, score_case, score_case_set, write_csv, FailedCase, MetricParams, RegionScore, ScoreReport,
    ScoreRow, ScoreSet,
};
pub use surface::{nsd, squared_distance_map, surface_voxels, NSD_EPSILON};
