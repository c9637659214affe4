//! Lesion segmentation metrics: Dice, false-positive and false-negative
//! volume, and per-tracer aggregation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::case::Tracer;
use crate::components::{connected_components, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{volume_ml, Volume3, VolumeKind};

fn check_pair(pred: &Volume3, gt: &Volume3) -> Result<()> {
    pred.require_kind(VolumeKind::Binary)?;
    gt.require_kind(VolumeKind::Binary)?;
    pred.check_same_grid(gt, "prediction/ground truth")
}

/// `2|P∩G| / (|P|+|G|)`; two empty masks score 1.
pub fn dice(pred: &Volume3, gt: &Volume3) -> Result<f64> {
    check_pair(pred, gt)?;
    let (mut inter, mut p, mut g) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (a, b) = (a != 0.0, b != 0.0);
        p += a as usize;
        g += b as usize;
        inter += (a && b) as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Total volume of components of `source` that share no voxel with `other`.
fn unmatched_volume_ml(source: &Volume3, other: &Volume3, connectivity: Connectivity) -> Result<f64> {
    let labeling = connected_components(source, connectivity)?;
    let mut touched = vec![false; labeling.component_count];
    for (&label, &o) in labeling.labels.iter().zip(other.data()) {
        if label > 0 && o != 0.0 {
            touched[label as usize - 1] = true;
        }
    }
    let voxels: usize = labeling
        .component_voxel_counts
        .iter()
        .zip(&touched)
        .filter(|(_, &t)| !t)
        .map(|(&n, _)| n)
        .sum();
    Ok(volume_ml(voxels, source.spacing()))
}

/// Volume of predicted components that do not overlap any ground-truth voxel.
pub fn false_positive_volume_ml(pred: &Volume3, gt: &Volume3, connectivity: Connectivity) -> Result<f64> {
    check_pair(pred, gt)?;
    unmatched_volume_ml(pred, gt, connectivity)
}

/// Volume of ground-truth lesions that no predicted voxel touches.
pub fn false_negative_volume_ml(pred: &Volume3, gt: &Volume3, connectivity: Connectivity) -> Result<f64> {
    check_pair(pred, gt)?;
    unmatched_volume_ml(gt, pred, connectivity)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseMetrics {
    pub case_id: String,
    pub tracer: Tracer,
    pub dice: f64,
    pub fp_vol_ml: f64,
    pub fn_vol_ml: f64,
}

impl CaseMetrics {
    fn validate(&self, units: Units) -> Result<()> {
        let top = units.full_scale();
        if !(self.dice.is_finite() && (0.0..=top).contains(&self.dice)) {
            return Err(Error::Metrics(format!("case {}: dice {} out of range", self.case_id, self.dice)));
        }
        for v in [self.fp_vol_ml, self.fn_vol_ml] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Metrics(format!("case {}: invalid volume {v}", self.case_id)));
            }
        }
        Ok(())
    }
}

pub fn evaluate_case(
    case_id: &str,
    tracer: Tracer,
    pred: &Volume3,
    gt: &Volume3,
    connectivity: Connectivity,
) -> Result<CaseMetrics> {
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        tracer,
        dice: dice(pred, gt)?,
        fp_vol_ml: false_positive_volume_ml(pred, gt, connectivity)?,
        fn_vol_ml: false_negative_volume_ml(pred, gt, connectivity)?,
    })
}

/// Scale of the Dice values in a report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Fraction,
    Percent,
}

impl Units {
    fn full_scale(self) -> f64 {
        match self {
            Units::Fraction => 1.0,
            Units::Percent => 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub dice_fdg: Option<f64>,
    pub dice_psma: Option<f64>,
    pub dice_mean: f64,
    /// Mean of the per-tracer means (equal tracer weight).
    pub dice_balanced: f64,
    pub fp_vol_mean_ml: f64,
    pub fn_vol_mean_ml: f64,
    pub n_fdg: Option<usize>,
    pub n_psma: Option<usize>,
    /// Only one tracer present; `dice_balanced` then equals that tracer's mean.
    #[serde(default)]
    pub single_tracer: bool,
    #[serde(default)]
    pub units: Units,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub per_case: Vec<CaseMetrics>,
    pub summary: Summary,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(per_case: Vec<CaseMetrics>) -> Result<MetricsReport> {
    if per_case.is_empty() {
        return Err(Error::Metrics("no cases to aggregate".into()));
    }
    for c in &per_case {
        c.validate(Units::Fraction)?;
    }
    let tracer_mean = |t: Tracer| mean(per_case.iter().filter(|c| c.tracer == t).map(|c| c.dice));
    let dice_fdg = tracer_mean(Tracer::Fdg);
    let dice_psma = tracer_mean(Tracer::Psma);
    let (dice_balanced, single_tracer) = match (dice_fdg, dice_psma) {
        (Some(f), Some(p)) => (0.5 * f + 0.5 * p, false),
        (Some(only), None) | (None, Some(only)) => (only, true),
        (None, None) => unreachable!("per_case is non-empty"),
    };
    let count = |t: Tracer| per_case.iter().filter(|c| c.tracer == t).count();
    let summary = Summary {
        dice_fdg,
        dice_psma,
        dice_mean: mean(per_case.iter().map(|c| c.dice)).expect("non-empty"),
        dice_balanced,
        fp_vol_mean_ml: mean(per_case.iter().map(|c| c.fp_vol_ml)).expect("non-empty"),
        fn_vol_mean_ml: mean(per_case.iter().map(|c| c.fn_vol_ml)).expect("non-empty"),
        n_fdg: Some(count(Tracer::Fdg)),
        n_psma: Some(count(Tracer::Psma)),
        single_tracer,
        units: Units::Fraction,
    };
    Ok(MetricsReport {
        name: None,
        per_case,
        summary,
    })
}

impl MetricsReport {
    /// Range checks. When per-case rows are present the summary must also
    /// agree with re-aggregating them.
    pub fn validate(&self) -> Result<()> {
        let s = &self.summary;
        let top = s.units.full_scale();
        let in_range = |v: f64| v.is_finite() && (0.0..=top).contains(&v);
        let dices = [Some(s.dice_mean), Some(s.dice_balanced), s.dice_fdg, s.dice_psma];
        if !dices.into_iter().flatten().all(in_range) {
            return Err(Error::Metrics("dice summary out of range".into()));
        }
        if !(s.fp_vol_mean_ml >= 0.0 && s.fn_vol_mean_ml >= 0.0) {
            return Err(Error::Metrics("negative mean volume".into()));
        }
        if let (Some(f), Some(p)) = (s.dice_fdg, s.dice_psma) {
            if s.dice_balanced < f.min(p) || s.dice_balanced > f.max(p) {
                return Err(Error::Metrics(format!(
                    "balanced dice {} outside per-tracer range [{}, {}]",
                    s.dice_balanced,
                    f.min(p),
                    f.max(p)
                )));
            }
        }
        for c in &self.per_case {
            c.validate(s.units)?;
        }
        if !self.per_case.is_empty() && s.units == Units::Fraction {
            let expected = aggregate(self.per_case.clone())?.summary;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
            let opt_close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            };
            let consistent = opt_close(s.dice_fdg, expected.dice_fdg)
                && opt_close(s.dice_psma, expected.dice_psma)
                && close(s.dice_mean, expected.dice_mean)
                && close(s.dice_balanced, expected.dice_balanced)
                && close(s.fp_vol_mean_ml, expected.fp_vol_mean_ml)
                && close(s.fn_vol_mean_ml, expected.fn_vol_mean_ml);
            if !consistent {
                return Err(Error::Metrics("summary disagrees with per-case rows".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: MetricsReport = serde_json::from_str(s)?;
        report.validate()?;
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        if self.per_case.is_empty() {
            w.write_record(["case_id", "tracer", "dice", "fp_vol_ml", "fn_vol_ml"])?;
        }
        for row in &self.per_case {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
