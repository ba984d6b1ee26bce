//! Toolkit for multi-sequence brain-tumour MRI volumes: NIfTI I/O,
//! segmentation-aware offline augmentation, ensemble fusion, lesion-wise
//! Dice and normalized surface distance, and synthetic phantom cases.

pub mod augment;
pub mod case;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod labels;
pub mod metrics;
pub mod nifti;
pub mod phantom;
pub mod preview;
pub mod volume;

pub use case::{load_case, write_case, Case, Modality};
pub use config::ToolConfig;
pub use error::{Error, Result};
pub use labels::{region_mask, LabelScheme, Region, RegionMask};
pub use nifti::{read_nifti, write_nifti};
pub use volume::{BinaryMask, Grid, Volume3D, VolumeKind};
