//! Misalignment augmentation.
//!
//! A small random rigid motion is applied to the CT only. PET and the lesion
//! mask stay where they are, so the network sees plausible CT/PET
//! registration errors while the ground truth remains tied to PET.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::case::PetCtCase;
use crate::error::{Error, Result};
use crate::geometry::{apply_rigid, Axis, Interp, RigidParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisalignConfig {
    pub max_rotation_deg: f64,
    pub rotation_axis: Axis,
    pub max_shift_voxels: [f64; 3],
    pub p_rotation: f64,
    pub p_translation: f64,
    pub interp: Interp,
    pub ct_pad_hu: f64,
}

impl Default for MisalignConfig {
    fn default() -> Self {
        MisalignConfig {
            max_rotation_deg: 5.0,
            rotation_axis: Axis::Z,
            max_shift_voxels: [2.0, 2.0, 0.0],
            p_rotation: 0.1,
            p_translation: 0.1,
            interp: Interp::Trilinear,
            ct_pad_hu: -1000.0,
        }
    }
}

impl MisalignConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.max_rotation_deg) {
            return Err(Error::Config(format!(
                "max_rotation_deg must be >= 0, got {}",
                self.max_rotation_deg
            )));
        }
        if !self.max_shift_voxels.iter().all(|&s| finite_nonneg(s)) {
            return Err(Error::Config(format!(
                "max_shift_voxels must be >= 0, got {:?}",
                self.max_shift_voxels
            )));
        }
        for (name, p) in [("p_rotation", self.p_rotation), ("p_translation", self.p_translation)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !self.ct_pad_hu.is_finite() {
            return Err(Error::Config("ct_pad_hu must be finite".into()));
        }
        Ok(())
    }
}

fn symmetric_uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Draws one rigid perturbation.
///
/// Rotation and translation fire independently. A fired rotation draws its
/// angle from `U(-max, max)`; a fired translation draws every component
/// from `U(-max_i, max_i)`. Components with a zero bound are exactly zero.
pub fn sample_misalignment<R: Rng + ?Sized>(cfg: &MisalignConfig, rng: &mut R) -> RigidParams {
    let mut params = RigidParams {
        rotation_axis: cfg.rotation_axis,
        ..RigidParams::identity()
    };
    if rng.random::<f64>() < cfg.p_rotation {
        params.rotation_deg = symmetric_uniform(rng, cfg.max_rotation_deg);
    }
    if rng.random::<f64>() < cfg.p_translation {
        for (shift, &bound) in params.shift_voxels.iter_mut().zip(&cfg.max_shift_voxels) {
            *shift = symmetric_uniform(rng, bound);
        }
    }
    params
}

/// Displaces the CT by `params` (rotation first, then translation).
/// PET and label are passed through untouched.
pub fn apply_misalignment(case: &PetCtCase, params: &RigidParams, cfg: &MisalignConfig) -> PetCtCase {
    if params.is_identity() {
        return case.clone();
    }
    let ct = apply_rigid(case.ct(), params, cfg.interp, cfg.ct_pad_hu);
    case.with_volumes(ct, case.pet().clone(), case.label().cloned())
        .expect("rigid resampling preserves the grid")
}
