//! Dense 3D scalar volumes on a regular grid.
//!
//! Data is stored flat in x-fastest order, matching the NIfTI on-disk layout,
//! so that `data[x + nx * (y + ny * z)]` is voxel `(x, y, z)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the scalar values of a volume mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VolumeKind {
    /// CT intensities in Hounsfield units.
    Hu,
    /// PET standardized uptake values.
    Suv,
    /// Segmentation mask, every value 0 or 1.
    Binary,
    /// Voxelwise probabilities in `[0, 1]`.
    Prob,
}

impl VolumeKind {
    pub fn name(self) -> &'static str {
        match self {
            VolumeKind::Hu => "HU",
            VolumeKind::Suv => "SUV",
            VolumeKind::Binary => "BINARY",
            VolumeKind::Prob => "PROB",
        }
    }

    /// Value used for voxels sampled outside the field of view.
    ///
    /// Air for CT, zero for everything else.
    pub fn default_pad(self) -> f64 {
        match self {
            VolumeKind::Hu => -1000.0,
            _ => 0.0,
        }
    }

    fn check_value(self, v: f64) -> bool {
        match self {
            VolumeKind::Binary => v == 0.0 || v == 1.0,
            VolumeKind::Prob => (0.0..=1.0).contains(&v),
            VolumeKind::Hu | VolumeKind::Suv => !v.is_nan(),
        }
    }
}

impl fmt::Display for VolumeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume3 {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: Vec<f64>,
    kind: VolumeKind,
}

impl Volume3 {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        data: Vec<f64>,
        kind: VolumeKind,
    ) -> Result<Self> {
        let vol = Volume3 {
            dims,
            spacing,
            origin: [0.0; 3],
            data,
            kind,
        };
        vol.validate()?;
        Ok(vol)
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], value: f64, kind: VolumeKind) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, spacing, vec![value; n], kind)
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], kind: VolumeKind) -> Result<Self> {
        Self::filled(dims, spacing, 0.0, kind)
    }

    pub fn with_origin(mut self, origin: [f64; 3]) -> Self {
        self.origin = origin;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidVolume(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        let expected = self
            .dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidVolume("voxel count overflows".into()))?;
        if self.data.len() != expected {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {:?}",
                self.data.len(),
                self.dims
            )));
        }
        if !self.spacing.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        if let Some(bad) = self.data.iter().find(|&&v| !self.kind.check_value(v)) {
            return Err(Error::InvalidVolume(format!(
                "value {bad} not allowed in a {} volume",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    /// Replaces the voxel values, keeping geometry. Kind invariants are rechecked.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        self.with_data_kind(data, self.kind)
    }

    pub fn with_data_kind(&self, data: Vec<f64>, kind: VolumeKind) -> Result<Self> {
        let vol = Volume3 {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            data,
            kind,
        };
        vol.validate()?;
        Ok(vol)
    }

    /// Same as [`with_data`](Self::with_data) for callers that already
    /// guarantee the kind invariants (length is still asserted).
    pub(crate) fn with_data_unchecked(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Volume3 {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            data,
            kind: self.kind,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// True when both volumes have the same dims and spacing.
    pub fn same_grid(&self, other: &Volume3) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub(crate) fn check_same_grid(&self, other: &Volume3, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }

    pub(crate) fn require_kind(&self, kind: VolumeKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.name(),
                found: self.kind.name(),
            })
        }
    }

    /// Number of nonzero voxels.
    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Geometry, kind and data compared bit for bit (NaN-safe, sign-of-zero aware).
    pub fn bitwise_eq(&self, other: &Volume3) -> bool {
        self.dims == other.dims
            && self.kind == other.kind
            && bits_eq(&self.spacing, &other.spacing)
            && bits_eq(&self.origin, &other.origin)
            && bits_eq(&self.data, &other.data)
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Physical volume of `voxel_count` voxels in milliliters.
pub fn volume_ml(voxel_count: usize, spacing: [f64; 3]) -> f64 {
    voxel_count as f64 * spacing[0] * spacing[1] * spacing[2] / 1000.0
}
