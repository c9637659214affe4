use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{mirror, AxisSet};
use crate::volume::{Volume3, VolumeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tracer {
    Fdg,
    Psma,
}

impl Tracer {
    pub fn name(self) -> &'static str {
        match self {
            Tracer::Fdg => "FDG",
            Tracer::Psma => "PSMA",
        }
    }
}

impl fmt::Display for Tracer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tracer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FDG" => Ok(Tracer::Fdg),
            "PSMA" => Ok(Tracer::Psma),
            _ => Err(format!("unknown tracer {s:?} (expected FDG or PSMA)")),
        }
    }
}

/// Co-registered CT, PET and optional lesion mask of one exam.
#[derive(Clone, Debug)]
pub struct PetCtCase {
    case_id: String,
    tracer: Tracer,
    ct: Volume3,
    pet: Volume3,
    label: Option<Volume3>,
}

impl PetCtCase {
    pub fn new(
        case_id: impl Into<String>,
        tracer: Tracer,
        ct: Volume3,
        pet: Volume3,
        label: Option<Volume3>,
    ) -> Result<Self> {
        let case = PetCtCase {
            case_id: case_id.into(),
            tracer,
            ct,
            pet,
            label,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        self.ct.require_kind(VolumeKind::Hu)?;
        self.pet.require_kind(VolumeKind::Suv)?;
        self.ct.check_same_grid(&self.pet, &format!("case {} ct/pet", self.case_id))?;
        if let Some(label) = &self.label {
            label.require_kind(VolumeKind::Binary)?;
            self.ct
                .check_same_grid(label, &format!("case {} ct/label", self.case_id))?;
        }
        Ok(())
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn tracer(&self) -> Tracer {
        self.tracer
    }

    pub fn ct(&self) -> &Volume3 {
        &self.ct
    }

    pub fn pet(&self) -> &Volume3 {
        &self.pet
    }

    pub fn label(&self) -> Option<&Volume3> {
        self.label.as_ref()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.ct.dims()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.ct.spacing()
    }

    /// Replaces volumes, re-checking the co-registration invariant.
    pub fn with_volumes(&self, ct: Volume3, pet: Volume3, label: Option<Volume3>) -> Result<Self> {
        PetCtCase::new(self.case_id.clone(), self.tracer, ct, pet, label)
    }

    /// The same case with every volume flipped along `axes`.
    pub fn mirrored(&self, axes: AxisSet) -> PetCtCase {
        PetCtCase {
            case_id: self.case_id.clone(),
            tracer: self.tracer,
            ct: mirror(&self.ct, axes),
            pet: mirror(&self.pet, axes),
            label: self.label.as_ref().map(|l| mirror(l, axes)),
        }
    }

    pub fn bitwise_eq(&self, other: &PetCtCase) -> bool {
        self.case_id == other.case_id
            && self.tracer == other.tracer
            && self.ct.bitwise_eq(&other.ct)
            && self.pet.bitwise_eq(&other.pet)
            && match (&self.label, &other.label) {
                (Some(a), Some(b)) => a.bitwise_eq(b),
                (None, None) => true,
                _ => false,
            }
    }

    pub fn into_parts(self) -> (String, Tracer, Volume3, Volume3, Option<Volume3>) {
        (self.case_id, self.tracer, self.ct, self.pet, self.label)
    }
}
