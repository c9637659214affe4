//! SUV-threshold masking of predicted lesion masks.

use crate::error::Result;
use crate::volume::{Volume3, VolumeKind};

pub const DEFAULT_SUV_THRESHOLD: f64 = 1.0;

/// Clears predicted voxels whose SUV is strictly below `threshold`.
///
/// Voxels exactly at the threshold are kept. The output never gains
/// foreground relative to `pred`.
pub fn suv_mask(pred: &Volume3, pet: &Volume3, threshold: f64) -> Result<Volume3> {
    pred.require_kind(VolumeKind::Binary)?;
    pred.check_same_grid(pet, "prediction/PET")?;
    let data = pred
        .data()
        .iter()
        .zip(pet.data())
        .map(|(&p, &s)| if s < threshold { 0.0 } else { p })
        .collect();
    Ok(pred.with_data_unchecked(data))
}
