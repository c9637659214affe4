//! PET/CT data-centric toolkit.
//!
//! Volume I/O and geometry, augmentation schemes with CT-only misalignment,
//! SUV-threshold postprocessing, lesion metrics, and a scheduler that fits
//! ensembling and mirror test-time augmentation into a per-case time budget.

pub mod augment;
pub mod case;
pub mod cli;
pub mod components;
pub mod error;
pub mod geometry;
pub mod manifest;
pub mod metrics;
pub mod misalign;
pub mod nifti;
pub mod postprocess;
pub mod rng;
pub mod scheduler;
pub mod volume;

pub use augment::{
    apply_scheme, apply_scheme_logged, baseline_scheme, subtle_scheme, with_misalignment,
    AugmentScheme, TransformKind, TransformSpec,
};
pub use case::{PetCtCase, Tracer};
pub use components::{connected_components, ComponentLabeling, Connectivity};
pub use error::{Error, Result};
pub use geometry::{apply_rigid, mirror, Axis, AxisSet, Interp, RigidParams};
pub use manifest::{CaseEntry, DatasetManifest};
pub use metrics::{
    aggregate, dice, false_negative_volume_ml, false_positive_volume_ml, CaseMetrics, MetricsReport,
};
pub use misalign::{apply_misalignment, sample_misalignment, MisalignConfig};
pub use nifti::{load_nifti, save_nifti};
pub use postprocess::suv_mask;
pub use scheduler::{
    plan_ensemble, plan_tta, run_dynamic_inference, tta_transform_sequence, Predictor, ScheduleTrace,
    SchedulerBudget,
};
pub use volume::{volume_ml, Volume3, VolumeKind};
