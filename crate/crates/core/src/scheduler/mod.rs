//! Deadline-aware dynamic ensembling with mirror test-time augmentation.
//!
//! The first forward pass of the first model is timed. That latency decides
//! how many mirror TTA passes fit into the per-model TTA window, and the
//! time of the whole first model (plain pass plus TTA) decides how many
//! ensemble members fit into the ensemble window. All passes are averaged
//! voxelwise after undoing their mirror.

mod clock;
mod command;
pub mod mock;

use serde::{Deserialize, Serialize};

pub use clock::{Clock, MonotonicClock, SimClock};
pub use command::CommandPredictor;

use crate::case::PetCtCase;
use crate::error::{Error, Result};
use crate::geometry::{mirror, AxisSet};
use crate::volume::{Volume3, VolumeKind};

/// Fixed TTA order: single axes first, then pairs, then all three.
pub const TTA_ORDER: [AxisSet; 7] = [
    AxisSet::X,
    AxisSet::Y,
    AxisSet::Z,
    AxisSet::XY,
    AxisSet::XZ,
    AxisSet::YZ,
    AxisSet::ALL,
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyEstimate {
    /// Plan once from the first model (default).
    #[default]
    FirstPass,
    /// Re-plan the ensemble size after every model from the mean model time.
    RunningAverage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerBudget {
    pub case_limit_s: f64,
    pub ensemble_limit_s: f64,
    pub tta_limit_per_model_s: f64,
    pub max_tta: usize,
    pub max_models: usize,
    /// Whether the plain forward pass counts against the TTA window.
    pub tta_window_includes_first_pass: bool,
    pub latency_estimate: LatencyEstimate,
}

impl Default for SchedulerBudget {
    fn default() -> Self {
        SchedulerBudget {
            case_limit_s: 300.0,
            ensemble_limit_s: 170.0,
            tta_limit_per_model_s: 25.0,
            max_tta: 2,
            max_models: 5,
            tta_window_includes_first_pass: true,
            latency_estimate: LatencyEstimate::FirstPass,
        }
    }
}

impl SchedulerBudget {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tta_limit_per_model_s > 0.0
            && self.tta_limit_per_model_s <= self.ensemble_limit_s
            && self.ensemble_limit_s <= self.case_limit_s
            && self.case_limit_s.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "budget requires 0 < tta_limit_per_model_s <= ensemble_limit_s <= case_limit_s, got {} / {} / {}",
                self.tta_limit_per_model_s, self.ensemble_limit_s, self.case_limit_s
            )));
        }
        if self.max_models < 1 {
            return Err(Error::Config("max_models must be >= 1".into()));
        }
        if self.max_tta > TTA_ORDER.len() {
            return Err(Error::Config(format!(
                "max_tta must be <= {}, got {}",
                TTA_ORDER.len(),
                self.max_tta
            )));
        }
        Ok(())
    }
}

/// Number of TTA passes so that `(1 + n) · first_pass_s` stays within the
/// per-model TTA window, capped at `max_tta`.
pub fn plan_tta(first_pass_s: f64, budget: &SchedulerBudget) -> usize {
    assert!(first_pass_s > 0.0, "first pass latency must be positive");
    let fits = (budget.tta_limit_per_model_s / first_pass_s).floor();
    let extra = if budget.tta_window_includes_first_pass {
        fits - 1.0
    } else {
        fits
    };
    (extra.max(0.0) as usize).min(budget.max_tta)
}

/// Number of models (including the one already run) that fit into the
/// ensemble window, between 1 and `max_models`.
pub fn plan_ensemble(model_time_s: f64, budget: &SchedulerBudget) -> usize {
    assert!(model_time_s > 0.0, "model time must be positive");
    let fits = (budget.ensemble_limit_s / model_time_s).floor();
    (fits.max(1.0) as usize).clamp(1, budget.max_models)
}

/// First `max` entries of [`TTA_ORDER`].
pub fn tta_transform_sequence(max: usize) -> Result<Vec<AxisSet>> {
    if max > TTA_ORDER.len() {
        return Err(Error::Config(format!(
            "at most {} mirror transforms exist, asked for {max}",
            TTA_ORDER.len()
        )));
    }
    Ok(TTA_ORDER[..max].to_vec())
}

/// Produces a lesion probability map for a (possibly mirrored) case.
///
/// `transform` is applied to the case before inference and the returned
/// volume lives in that mirrored frame; the identity transform is a plain
/// forward pass. Outputs must be `PROB` volumes on the case grid.
pub trait Predictor {
    fn name(&self) -> String {
        "predictor".into()
    }

    fn predict(&mut self, case: &PetCtCase, transform: AxisSet) -> Result<Volume3>;
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn predict(&mut self, case: &PetCtCase, transform: AxisSet) -> Result<Volume3> {
        (**self).predict(case, transform)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub model: usize,
    pub transform: AxisSet,
    pub seconds: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub first_pass_s: f64,
    pub n_tta: usize,
    pub n_models: usize,
    pub per_pass_s: Vec<f64>,
    pub total_s: f64,
    pub decisions: Vec<String>,
    #[serde(default)]
    pub passes: Vec<PassRecord>,
    /// Some pass failed and the output averages fewer passes than planned.
    #[serde(default)]
    pub degraded: bool,
}

impl ScheduleTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

struct Accumulator {
    sum: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    count: usize,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            sum: vec![0.0; n],
            min: vec![f64::INFINITY; n],
            max: vec![f64::NEG_INFINITY; n],
            count: 0,
        }
    }

    fn add(&mut self, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.sum[i] += v;
            self.min[i] = self.min[i].min(v);
            self.max[i] = self.max[i].max(v);
        }
        self.count += 1;
    }

    /// Voxelwise mean, clamped to the contributing range so rounding
    /// never leaves `[min, max]`.
    fn mean(self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .into_iter()
            .zip(self.min.into_iter().zip(self.max))
            .map(|(s, (lo, hi))| (s / n).clamp(lo, hi))
            .collect()
    }
}

struct Run<'a> {
    case: &'a PetCtCase,
    clock: &'a dyn Clock,
    acc: Accumulator,
    trace: ScheduleTrace,
}

impl Run<'_> {
    /// Runs one pass, returning its duration on success.
    fn pass(&mut self, predictor: &mut dyn Predictor, model: usize, transform: AxisSet) -> Option<f64> {
        let start = self.clock.now();
        let result = predictor
            .predict(self.case, transform)
            .and_then(|v| check_prediction(self.case, v));
        let seconds = self.clock.now() - start;
        self.trace.per_pass_s.push(seconds);
        self.trace.passes.push(PassRecord {
            model,
            transform,
            seconds,
            ok: result.is_ok(),
        });
        match result {
            Ok(vol) => {
                self.acc.add(mirror(&vol, transform).data());
                Some(seconds)
            }
            Err(e) => {
                self.trace.degraded = true;
                self.trace.decisions.push(format!(
                    "model {model} ({}) pass {transform} failed: {e}",
                    predictor.name()
                ));
                None
            }
        }
    }

    /// Runs the plain pass plus `transforms`; returns the model time if the
    /// plain pass succeeded. A failed pass ends the model early.
    fn model(&mut self, predictor: &mut dyn Predictor, model: usize, transforms: &[AxisSet]) -> Option<f64> {
        let mut elapsed = self.pass(predictor, model, AxisSet::EMPTY)?;
        for &t in transforms {
            match self.pass(predictor, model, t) {
                Some(s) => elapsed += s,
                None => break,
            }
        }
        Some(elapsed)
    }

    fn elapsed(&self) -> f64 {
        self.trace.per_pass_s.iter().sum()
    }
}

fn check_prediction(case: &PetCtCase, vol: Volume3) -> Result<Volume3> {
    vol.require_kind(VolumeKind::Prob)?;
    case.ct().check_same_grid(&vol, "prediction/case")?;
    Ok(vol)
}

/// Runs as many models and TTA passes as the budget allows and averages them.
///
/// Predictor failures never abort the run: the failing model's remaining
/// passes are skipped, the trace is flagged as degraded, and the next
/// predictor is used instead. Only when no pass at all succeeds is an
/// error returned.
pub fn run_dynamic_inference<P: Predictor>(
    case: &PetCtCase,
    predictors: &mut [P],
    budget: &SchedulerBudget,
    clock: &dyn Clock,
) -> Result<(Volume3, ScheduleTrace)> {
    budget.validate()?;
    case.validate()?;
    if predictors.is_empty() {
        return Err(Error::Config("at least one predictor is required".into()));
    }
    let mut run = Run {
        case,
        clock,
        acc: Accumulator::new(case.ct().len()),
        trace: ScheduleTrace {
            first_pass_s: 0.0,
            n_tta: 0,
            n_models: 0,
            per_pass_s: Vec::new(),
            total_s: 0.0,
            decisions: Vec::new(),
            passes: Vec::new(),
            degraded: false,
        },
    };

    // Reference model: the first predictor whose plain pass succeeds.
    let mut reference = None;
    for (i, p) in predictors.iter_mut().enumerate() {
        if let Some(t) = run.pass(p, i, AxisSet::EMPTY) {
            reference = Some((i, t));
            break;
        }
    }
    let Some((first, first_pass_s)) = reference else {
        return Err(Error::NoPrediction);
    };
    run.trace.first_pass_s = first_pass_s;

    let n_tta = if first_pass_s > 0.0 {
        plan_tta(first_pass_s, budget)
    } else {
        budget.max_tta
    };
    let transforms = tta_transform_sequence(n_tta)?;
    run.trace.n_tta = n_tta;
    run.trace.decisions.push(format!(
        "first pass {first_pass_s:.3} s with {}: {n_tta} TTA pass(es) within {} s per model",
        predictors[first].name(),
        budget.tta_limit_per_model_s
    ));

    let mut model_time = first_pass_s;
    for &t in &transforms {
        match run.pass(&mut predictors[first], first, t) {
            Some(s) => model_time += s,
            None => break,
        }
    }
    let mut model_times = vec![model_time];
    let available = predictors.len() - first;
    let mut target = plan_models(model_time, budget, available);
    run.trace.decisions.push(format!(
        "model time {model_time:.3} s: ensemble of {target} model(s) within {} s ({available} available)",
        budget.ensemble_limit_s
    ));

    let mut used = 1;
    for (i, predictor) in predictors.iter_mut().enumerate().skip(first + 1) {
        if used >= target {
            break;
        }
        let estimate = model_times.iter().sum::<f64>() / model_times.len() as f64;
        if run.elapsed() + estimate > budget.case_limit_s {
            run.trace.decisions.push(format!(
                "stopping before model {i}: {:.3} s elapsed + {estimate:.3} s estimate exceeds case limit {} s",
                run.elapsed(),
                budget.case_limit_s
            ));
            break;
        }
        if let Some(t) = run.model(predictor, i, &transforms) {
            used += 1;
            model_times.push(t);
            if budget.latency_estimate == LatencyEstimate::RunningAverage {
                let avg = model_times.iter().sum::<f64>() / model_times.len() as f64;
                let replanned = plan_models(avg, budget, available).max(used);
                if replanned != target {
                    run.trace.decisions.push(format!(
                        "mean model time {avg:.3} s: ensemble re-planned from {target} to {replanned}"
                    ));
                    target = replanned;
                }
            }
        }
    }

    run.trace.n_models = used;
    run.trace.total_s = run.elapsed();
    run.trace.decisions.push(format!(
        "averaged {} pass(es) from {used} model(s) in {:.3} s",
        run.acc.count, run.trace.total_s
    ));

    let Run { acc, trace, .. } = run;
    let output = case.ct().with_data_kind(acc.mean(), VolumeKind::Prob)?;
    Ok((output, trace))
}

fn plan_models(model_time: f64, budget: &SchedulerBudget, available: usize) -> usize {
    let planned = if model_time > 0.0 {
        plan_ensemble(model_time, budget)
    } else {
        budget.max_models
    };
    planned.min(available)
}
