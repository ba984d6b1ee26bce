//! Segmentation-aware offline augmentation.
//!
//! Whole-volume transforms (affine, flip, bias field, elastic) fire with
//! their configured probabilities; the label-masked elastic transform always
//! fires and deforms only the tumour neighbourhood.

pub mod bias;
pub mod elastic;
pub mod pipeline;
pub mod rng;
pub mod spatial;
pub mod warp;

pub use bias::{random_bias_field, BiasField, BiasFieldParams};
pub use elastic::{
    label_masked_elastic, random_elastic, tumor_weight, DisplacementField, ElasticParams, LabelMaskedElasticParams,
    TumorWeight,
};
pub use pipeline::{
    apply_pipeline, augmented_id, expand_dataset, ExpandOptions, ExpansionReport, PipelineSpec, TransformSpec,
};
pub use rng::{case_seed, RngStream};
pub use spatial::{flip_case, random_affine, random_flip, AffineParams, AffineTransform, FlipParams};
