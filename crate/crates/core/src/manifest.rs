//! Dataset manifests: which files make up each case.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::case::{PetCtCase, Tracer};
use crate::error::{Error, Result};
use crate::nifti::load_nifti;
use crate::volume::VolumeKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseEntry {
    pub case_id: String,
    pub tracer: Tracer,
    pub ct_path: PathBuf,
    pub pet_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Base directory for relative case paths. Itself relative to the manifest file.
    #[serde(default)]
    pub root: PathBuf,
    pub cases: Vec<CaseEntry>,
}

impl DatasetManifest {
    /// Parses a manifest and checks that case ids are unique. File existence
    /// is not checked; see [`load`](Self::load) for the strict variant.
    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        if manifest.root.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            manifest.root = base.join(&manifest.root);
        }
        manifest.check_unique()?;
        Ok(manifest)
    }

    /// Like [`load_unchecked`](Self::load_unchecked), but also requires every referenced file to exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let manifest = Self::load_unchecked(path)?;
        if let Some((id, err)) = manifest.missing_files().into_iter().next() {
            return Err(Error::Manifest(format!("case {id}: {err}")));
        }
        Ok(manifest)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.cases {
            if !seen.insert(c.case_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate case_id {:?}", c.case_id)));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    /// `(case_id, message)` for every referenced file that does not exist.
    pub fn missing_files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for c in &self.cases {
            let paths = [Some(&c.ct_path), Some(&c.pet_path), c.label_path.as_ref()];
            for p in paths.into_iter().flatten() {
                let full = self.resolve(p);
                if !full.is_file() {
                    out.push((c.case_id.clone(), format!("missing file {}", full.display())));
                }
            }
        }
        out
    }

    pub fn load_case(&self, entry: &CaseEntry) -> Result<PetCtCase> {
        let ct = load_nifti(self.resolve(&entry.ct_path), VolumeKind::Hu)?;
        let pet = load_nifti(self.resolve(&entry.pet_path), VolumeKind::Suv)?;
        let label = entry
            .label_path
            .as_ref()
            .map(|p| load_nifti(self.resolve(p), VolumeKind::Binary))
            .transpose()?;
        PetCtCase::new(entry.case_id.clone(), entry.tracer, ct, pet, label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

fn infer_tracer(case_id: &str) -> Option<Tracer> {
    let lower = case_id.to_ascii_lowercase();
    match (lower.contains("psma"), lower.contains("fdg")) {
        (true, false) => Some(Tracer::Psma),
        (false, true) => Some(Tracer::Fdg),
        _ => None,
    }
}

/// Builds a manifest from files named `<case_id>_{ct,pet,label}.nii[.gz]`.
///
/// The tracer is inferred from the case id when it mentions exactly one of
/// `fdg` / `psma`, otherwise `default_tracer` is used. Cases lacking a CT or
/// PET file are reported as errors.
pub fn scan_directory(dir: impl AsRef<Path>, default_tracer: Option<Tracer>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let mut found: BTreeMap<String, [Option<PathBuf>; 3]> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let stem = name
            .strip_suffix(".nii.gz")
            .or_else(|| name.strip_suffix(".nii"));
        let Some(stem) = stem else { continue };
        for (slot, suffix) in ["_ct", "_pet", "_label"].into_iter().enumerate() {
            if let Some(id) = stem.strip_suffix(suffix) {
                if !id.is_empty() {
                    found.entry(id.to_string()).or_default()[slot] = Some(PathBuf::from(&name));
                }
            }
        }
    }

    let mut cases = Vec::with_capacity(found.len());
    for (case_id, [ct, pet, label]) in found {
        let (Some(ct_path), Some(pet_path)) = (ct, pet) else {
            return Err(Error::Manifest(format!("case {case_id}: needs both _ct and _pet files")));
        };
        let tracer = infer_tracer(&case_id)
            .or(default_tracer)
            .ok_or_else(|| Error::Manifest(format!("case {case_id}: cannot infer tracer, pass one explicitly")))?;
        cases.push(CaseEntry {
            case_id,
            tracer,
            ct_path,
            pet_path,
            label_path: label,
        });
    }
    Ok(DatasetManifest {
        root: dir.to_path_buf(),
        cases,
    })
}
