use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use super::Predictor;
use crate::case::PetCtCase;
use crate::error::{Error, Result};
use crate::geometry::AxisSet;
use crate::nifti::{load_nifti, save_nifti};
use crate::volume::{Volume3, VolumeKind};

static PASS_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Runs an external program once per pass.
///
/// The (mirrored) CT and PET are written to a scratch directory and the
/// placeholders `{ct}`, `{pet}` and `{out}` in the argument list are
/// replaced by their paths. The program must write a probability map to
/// `{out}`; a non-zero exit status is a failed pass.
pub struct CommandPredictor {
    name: String,
    program: String,
    args: Vec<String>,
    scratch: PathBuf,
}

impl CommandPredictor {
    pub fn new(name: impl Into<String>, program: impl Into<String>, args: Vec<String>) -> Self {
        CommandPredictor {
            name: name.into(),
            program: program.into(),
            args,
            scratch: std::env::temp_dir(),
        }
    }

    /// Parses a whitespace-separated command line such as `predict.sh {ct} {pet} {out}`.
    pub fn from_command_line(name: impl Into<String>, line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty predictor command".into()))?;
        Ok(Self::new(name, program, parts.collect()))
    }

    pub fn with_scratch_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scratch = dir.into();
        self
    }
}

impl Predictor for CommandPredictor {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn predict(&mut self, case: &PetCtCase, transform: AxisSet) -> Result<Volume3> {
        let id = PASS_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = self
            .scratch
            .join(format!("petct-pass-{}-{id}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let result = (|| {
            let input = case.mirrored(transform);
            let ct = dir.join("ct.nii.gz");
            let pet = dir.join("pet.nii.gz");
            let out = dir.join("out.nii.gz");
            save_nifti(input.ct(), &ct)?;
            save_nifti(input.pet(), &pet)?;
            let args: Vec<String> = self
                .args
                .iter()
                .map(|a| {
                    a.replace("{ct}", &ct.to_string_lossy())
                        .replace("{pet}", &pet.to_string_lossy())
                        .replace("{out}", &out.to_string_lossy())
                })
                .collect();
            let status = Command::new(&self.program)
                .args(&args)
                .status()
                .map_err(|e| Error::Predictor(format!("{}: {e}", self.program)))?;
            if !status.success() {
                return Err(Error::Predictor(format!("{} exited with {status}", self.program)));
            }
            load_nifti(&out, VolumeKind::Prob)
        })();
        let _ = std::fs::remove_dir_all(&dir);
        result
    }
}
