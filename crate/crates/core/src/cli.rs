//! Command-line front end. [`run`] returns the process exit code:
//! 0 on success, 1 on data or I/O errors, 2 on usage errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::augment::{apply_scheme_logged, baseline_scheme, subtle_scheme, with_misalignment, AugmentScheme};
use crate::case::Tracer;
use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::manifest::{scan_directory, CaseEntry, DatasetManifest};
use crate::metrics::{aggregate, evaluate_case, CaseMetrics, MetricsReport};
use crate::misalign::MisalignConfig;
use crate::nifti::{load_nifti, save_nifti};
use crate::postprocess::{suv_mask, DEFAULT_SUV_THRESHOLD};
use crate::rng::derive_seed;
use crate::scheduler::mock::{simulate, LatencySpec};
use crate::scheduler::{run_dynamic_inference, CommandPredictor, MonotonicClock, SchedulerBudget};
use crate::volume::VolumeKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "petct-datakit", version, about = "PET/CT augmentation, postprocessing, evaluation and inference scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Materialize augmented copies of every case for inspection.
    Augment(AugmentArgs),
    /// Drop predicted voxels whose SUV is below a threshold.
    Postprocess(PostprocessArgs),
    /// Compute Dice and FP/FN lesion volumes against the manifest labels.
    Evaluate(EvaluateArgs),
    /// Run the dynamic scheduler with mock predictors on a simulated clock.
    ScheduleSim(ScheduleSimArgs),
    /// Run the dynamic scheduler with external predictor commands.
    Infer(InferArgs),
    /// Manifest helpers.
    #[command(subcommand)]
    Manifest(ManifestCommand),
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Scheme JSON file, or one of the presets `baseline` and `subtle`.
    #[arg(long)]
    scheme: String,
    /// Prepend CT-only misalignment with the default settings.
    #[arg(long)]
    misalign: bool,
    /// Prepend CT-only misalignment configured from a JSON file.
    #[arg(long, conflicts_with = "misalign")]
    misalign_config: Option<PathBuf>,
    #[arg(long, env = "PETCT_DATAKIT_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Args, Debug)]
struct PostprocessArgs {
    /// Single prediction file (use with --pet and --out).
    #[arg(long, requires_all = ["pet", "out"], conflicts_with_all = ["pred_dir", "manifest", "out_dir"])]
    pred: Option<PathBuf>,
    #[arg(long)]
    pet: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory of `<case_id>.nii.gz` predictions (use with --manifest and --out-dir).
    #[arg(long, requires_all = ["manifest", "out_dir"])]
    pred_dir: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SUV_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory of `<case_id>.nii.gz` binary predictions.
    #[arg(long, requires = "manifest", conflicts_with = "report_in")]
    pred_dir: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Validate and re-serialize an existing report instead of computing one.
    #[arg(long)]
    report_in: Option<PathBuf>,
    #[arg(long, default_value = "26")]
    connectivity: Connectivity,
    /// Report JSON path. The CSV goes next to it unless --csv is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Args, Debug)]
struct ScheduleSimArgs {
    /// `constant:SECONDS`, `scripted:S1,S2,...` or the equivalent JSON object.
    #[arg(long)]
    latency: String,
    /// Budget JSON; omitted fields take their defaults.
    #[arg(long)]
    budget: Option<PathBuf>,
    /// Number of mock ensemble members available.
    #[arg(long, default_value_t = 5)]
    models: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Predictor command line with `{ct}`, `{pet}` and `{out}` placeholders. Repeat per ensemble member.
    #[arg(long = "predictor", required = true)]
    predictors: Vec<String>,
    #[arg(long)]
    budget: Option<PathBuf>,
    /// Receives `<case_id>.nii.gz` probability maps and `<case_id>.trace.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ManifestCommand {
    /// Build a manifest from `<case_id>_{ct,pet,label}.nii.gz` files.
    Scan {
        #[arg(long)]
        dir: PathBuf,
        /// Tracer for case ids that name neither FDG nor PSMA.
        #[arg(long)]
        tracer: Option<Tracer>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Augment(a) => cmd_augment(&a),
        Command::Postprocess(a) => cmd_postprocess(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::ScheduleSim(a) => cmd_schedule_sim(&a),
        Command::Infer(a) => cmd_infer(&a),
        Command::Manifest(ManifestCommand::Scan { dir, tracer, out }) => cmd_manifest_scan(&dir, tracer, out.as_deref()),
    }
}

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    eprintln!("Run with --help for usage.");
    EXIT_USAGE
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_DATA
}

fn report_case_errors(errors: &[(String, Error)]) -> i32 {
    for (id, e) in errors {
        eprintln!("case {id}: {e}");
    }
    if errors.is_empty() {
        EXIT_OK
    } else {
        eprintln!("{} case(s) failed", errors.len());
        EXIT_DATA
    }
}

/// Runs `f` over the cases on a pool of `jobs` threads and collects failures.
fn for_each_case<F>(cases: &[CaseEntry], jobs: u32, f: F) -> Vec<(String, Error)>
where
    F: Fn(&CaseEntry) -> Result<()> + Sync,
{
    let errors = Mutex::new(Vec::new());
    let body = || {
        cases.par_iter().for_each(|c| {
            if let Err(e) = f(c) {
                errors.lock().expect("error list").push((c.case_id.clone(), e));
            }
        })
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build() {
        Ok(pool) => pool.install(body),
        Err(_) => body(),
    }
    let mut errors = errors.into_inner().expect("error list");
    errors.sort_by(|a, b| a.0.cmp(&b.0));
    errors
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn resolve_scheme(spec: &str) -> Result<AugmentScheme> {
    match spec {
        "baseline" => Ok(baseline_scheme()),
        "subtle" => Ok(subtle_scheme()),
        path => AugmentScheme::load(path),
    }
}

fn load_budget(path: Option<&Path>) -> Result<SchedulerBudget> {
    let budget = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)?
        }
        None => SchedulerBudget::default(),
    };
    budget.validate()?;
    Ok(budget)
}

/// `<dir>/<case_id>.nii.gz`, falling back to `.nii`.
fn prediction_path(dir: &Path, case_id: &str) -> PathBuf {
    let gz = dir.join(format!("{case_id}.nii.gz"));
    if gz.exists() {
        return gz;
    }
    let plain = dir.join(format!("{case_id}.nii"));
    if plain.exists() {
        plain
    } else {
        gz
    }
}

fn cmd_augment(a: &AugmentArgs) -> i32 {
    let scheme = (|| {
        let scheme = resolve_scheme(&a.scheme)?;
        let misalign = match (&a.misalign_config, a.misalign) {
            (Some(p), _) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let cfg: MisalignConfig = serde_json::from_str(&text)?;
                cfg.validate()?;
                Some(cfg)
            }
            (None, true) => Some(MisalignConfig::default()),
            (None, false) => None,
        };
        match misalign {
            Some(cfg) => with_misalignment(&scheme, cfg),
            None => Ok(scheme),
        }
    })();
    let scheme = match scheme {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let manifest = match DatasetManifest::load_unchecked(&a.manifest) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    if let Err(e) = create_dir(&a.out_dir) {
        return fail(e);
    }

    let errors = for_each_case(&manifest.cases, a.jobs, |entry| {
        let case = manifest.load_case(entry)?;
        for r in 0..a.repeats {
            let seed = derive_seed(a.seed, "augment-repeat", r as u64);
            let (out, fired) = apply_scheme_logged(&case, &scheme, seed)?;
            let dir = a.out_dir.join(&entry.case_id).join(format!("r{r:03}"));
            create_dir(&dir)?;
            save_nifti(out.ct(), dir.join("ct.nii.gz"))?;
            save_nifti(out.pet(), dir.join("pet.nii.gz"))?;
            if let Some(label) = out.label() {
                save_nifti(label, dir.join("label.nii.gz"))?;
            }
            let provenance = json!({
                "case_id": entry.case_id,
                "tracer": entry.tracer,
                "repeat": r,
                "base_seed": a.seed,
                "seed": seed,
                "scheme": scheme.name,
                "fired": fired,
            });
            let text = serde_json::to_string_pretty(&provenance)?;
            write_text(&dir.join("provenance.json"), &text)?;
        }
        Ok(())
    });
    report_case_errors(&errors)
}

fn cmd_postprocess(a: &PostprocessArgs) -> i32 {
    if !(a.threshold.is_finite()) {
        return usage("--threshold must be finite");
    }
    if let (Some(pred), Some(pet), Some(out)) = (&a.pred, &a.pet, &a.out) {
        let res = (|| {
            let p = load_nifti(pred, VolumeKind::Binary)?;
            let s = load_nifti(pet, VolumeKind::Suv)?;
            save_nifti(&suv_mask(&p, &s, a.threshold)?, out)
        })();
        return match res {
            Ok(()) => EXIT_OK,
            Err(e) => fail(e),
        };
    }
    let (Some(pred_dir), Some(manifest), Some(out_dir)) = (&a.pred_dir, &a.manifest, &a.out_dir) else {
        return usage("give either --pred/--pet/--out or --pred-dir/--manifest/--out-dir");
    };
    let manifest = match DatasetManifest::load_unchecked(manifest) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    if let Err(e) = create_dir(out_dir) {
        return fail(e);
    }
    let errors = for_each_case(&manifest.cases, a.jobs, |entry| {
        let pred = load_nifti(prediction_path(pred_dir, &entry.case_id), VolumeKind::Binary)?;
        let pet = load_nifti(manifest.resolve(&entry.pet_path), VolumeKind::Suv)?;
        let masked = suv_mask(&pred, &pet, a.threshold)?;
        save_nifti(&masked, out_dir.join(format!("{}.nii.gz", entry.case_id)))
    });
    report_case_errors(&errors)
}

fn cmd_evaluate(a: &EvaluateArgs) -> i32 {
    let csv_path = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));

    if let Some(input) = &a.report_in {
        let res = (|| {
            let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
            let report = MetricsReport::from_json(&text)?;
            report.write_json(&a.out)?;
            report.write_csv(&csv_path)
        })();
        return match res {
            Ok(()) => EXIT_OK,
            Err(e) => fail(e),
        };
    }

    let (Some(pred_dir), Some(manifest)) = (&a.pred_dir, &a.manifest) else {
        return usage("give --pred-dir with --manifest, or --report-in");
    };
    let manifest = match DatasetManifest::load_unchecked(manifest) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let rows: Mutex<Vec<(usize, CaseMetrics)>> = Mutex::new(Vec::new());
    let index_of = |id: &str| manifest.cases.iter().position(|c| c.case_id == id).unwrap_or(usize::MAX);
    let errors = for_each_case(&manifest.cases, a.jobs, |entry| {
        let label_path = entry
            .label_path
            .as_ref()
            .ok_or_else(|| Error::Manifest("no label_path for evaluation".into()))?;
        let gt = load_nifti(manifest.resolve(label_path), VolumeKind::Binary)?;
        let pred = load_nifti(prediction_path(pred_dir, &entry.case_id), VolumeKind::Binary)?;
        let m = evaluate_case(&entry.case_id, entry.tracer, &pred, &gt, a.connectivity)?;
        rows.lock().expect("rows").push((index_of(&entry.case_id), m));
        Ok(())
    });
    let mut rows = rows.into_inner().expect("rows");
    rows.sort_by_key(|(i, _)| *i);
    let per_case: Vec<CaseMetrics> = rows.into_iter().map(|(_, m)| m).collect();

    let mut code = report_case_errors(&errors);
    if per_case.is_empty() {
        return fail("no case could be evaluated");
    }
    let res = (|| {
        let mut report = aggregate(per_case)?;
        report.name = a.name.clone();
        report.write_json(&a.out)?;
        report.write_csv(&csv_path)
    })();
    if let Err(e) = res {
        code = fail(e);
    }
    code
}

fn cmd_schedule_sim(a: &ScheduleSimArgs) -> i32 {
    let spec = match LatencySpec::parse(&a.latency) {
        Ok(s) => s,
        Err(e) => return usage(format!("--latency: {e}")),
    };
    if a.models == 0 {
        return usage("--models must be at least 1");
    }
    let res = (|| {
        let budget = load_budget(a.budget.as_deref())?;
        let (_, trace) = simulate(&spec, &budget, a.models)?;
        write_text(&a.out, &trace.to_json())
    })();
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}

fn cmd_infer(a: &InferArgs) -> i32 {
    let mut predictors = Vec::with_capacity(a.predictors.len());
    for (i, line) in a.predictors.iter().enumerate() {
        match CommandPredictor::from_command_line(format!("model{i}"), line) {
            Ok(p) => predictors.push(p),
            Err(e) => return usage(e),
        }
    }
    let setup = (|| {
        let budget = load_budget(a.budget.as_deref())?;
        let manifest = DatasetManifest::load_unchecked(&a.manifest)?;
        create_dir(&a.out_dir)?;
        Ok::<_, Error>((budget, manifest))
    })();
    let (budget, manifest) = match setup {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    // Sequential on purpose: timing is the point.
    let mut errors = Vec::new();
    for entry in &manifest.cases {
        let res = (|| {
            let case = manifest.load_case(entry)?;
            let clock = MonotonicClock::new();
            let (prob, trace) = run_dynamic_inference(&case, &mut predictors, &budget, &clock)?;
            save_nifti(&prob, a.out_dir.join(format!("{}.nii.gz", entry.case_id)))?;
            write_text(&a.out_dir.join(format!("{}.trace.json", entry.case_id)), &trace.to_json())
        })();
        if let Err(e) = res {
            errors.push((entry.case_id.clone(), e));
        }
    }
    report_case_errors(&errors)
}

fn cmd_manifest_scan(dir: &Path, tracer: Option<Tracer>, out: Option<&Path>) -> i32 {
    let manifest = match scan_directory(dir, tracer) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let text = manifest.to_json();
    match out {
        Some(p) => match write_text(p, &text) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(e),
        },
        None => {
            println!("{text}");
            EXIT_OK
        }
    }
}
