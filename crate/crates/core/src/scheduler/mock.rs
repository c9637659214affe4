//! Synthetic predictors and latency scripts for exercising the scheduler
//! without a trained network.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_dynamic_inference, Predictor, SchedulerBudget, ScheduleTrace, SimClock};
use crate::case::{PetCtCase, Tracer};
use crate::error::{Error, Result};
use crate::geometry::{mirror, AxisSet};
use crate::volume::{Volume3, VolumeKind};

/// Returns a fixed probability map, expressed in whatever frame it is asked
/// for, so that every pass agrees once its mirror is undone.
pub struct ConstantPredictor {
    output: Volume3,
}

impl ConstantPredictor {
    pub fn new(output: Volume3) -> Result<Self> {
        output.require_kind(VolumeKind::Prob)?;
        Ok(ConstantPredictor { output })
    }
}

impl Predictor for ConstantPredictor {
    fn name(&self) -> String {
        "constant".into()
    }

    fn predict(&mut self, case: &PetCtCase, transform: AxisSet) -> Result<Volume3> {
        case.ct().check_same_grid(&self.output, "constant predictor")?;
        Ok(mirror(&self.output, transform))
    }
}

/// Voxelwise map of the input case: `suv / (suv + 1)` for positive SUV, 0
/// otherwise. Being voxelwise, it commutes with every mirror.
#[derive(Default)]
pub struct EquivariantPredictor;

impl Predictor for EquivariantPredictor {
    fn name(&self) -> String {
        "equivariant".into()
    }

    fn predict(&mut self, case: &PetCtCase, transform: AxisSet) -> Result<Volume3> {
        let pet = mirror(case.pet(), transform);
        let data = pet
            .data()
            .iter()
            .map(|&s| if s > 0.0 { s / (s + 1.0) } else { 0.0 })
            .collect();
        pet.with_data_kind(data, VolumeKind::Prob)
    }
}

/// Pass latencies in seconds. A sequence repeats its last entry once exhausted.
/// Clones share the cursor, so one script can drive several predictors.
#[derive(Clone, Debug)]
pub struct LatencyScript {
    values: Arc<Vec<f64>>,
    cursor: Arc<AtomicUsize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LatencySpec {
    Constant { seconds: f64 },
    Scripted { seconds: Vec<f64> },
}

impl LatencySpec {
    /// Parses `constant:5` or `scripted:5,6.5,7` (also accepts a JSON object).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if s.starts_with('{') {
            serde_json::from_str(s)?
        } else {
            let (kind, rest) = s
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("latency spec {s:?} needs the form kind:values")))?;
            let numbers = rest
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("latency spec {s:?}: {e}")))?;
            match (kind.trim(), numbers.as_slice()) {
                ("constant", [v]) => LatencySpec::Constant { seconds: *v },
                ("scripted", _) => LatencySpec::Scripted { seconds: numbers },
                _ => return Err(Error::Config(format!("unknown latency spec {s:?}"))),
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let values: &[f64] = match self {
            LatencySpec::Constant { seconds } => std::slice::from_ref(seconds),
            LatencySpec::Scripted { seconds } => seconds,
        };
        if values.is_empty() || !values.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::Config("latencies must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn script(&self) -> LatencyScript {
        match self {
            LatencySpec::Constant { seconds } => LatencyScript::constant(*seconds),
            LatencySpec::Scripted { seconds } => LatencyScript::sequence(seconds.clone()),
        }
    }
}

impl LatencyScript {
    pub fn constant(seconds: f64) -> Self {
        Self::sequence(vec![seconds])
    }

    pub fn sequence(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "latency script needs at least one value");
        LatencyScript {
            values: Arc::new(values),
            cursor: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn next_latency(&self) -> f64 {
        let i = self.cursor.fetch_add(1, Ordering::SeqCst);
        self.values[i.min(self.values.len() - 1)]
    }
}

/// Wraps a predictor and advances a [`SimClock`] by the scripted latency on every call.
pub struct ScriptedLatency<P> {
    inner: P,
    clock: SimClock,
    script: LatencyScript,
}

impl<P> ScriptedLatency<P> {
    pub fn new(inner: P, clock: SimClock, script: LatencyScript) -> Self {
        ScriptedLatency {
            inner,
            clock,
            script,
        }
    }
}

impl<P: Predictor> Predictor for ScriptedLatency<P> {
    fn name(&self) -> String {
        format!("scripted({})", self.inner.name())
    }

    fn predict(&mut self, case: &PetCtCase, transform: AxisSet) -> Result<Volume3> {
        self.clock.advance(self.script.next_latency());
        self.inner.predict(case, transform)
    }
}

/// Small deterministic case with a bright blob in the PET.
pub fn synthetic_case(dims: [usize; 3]) -> PetCtCase {
    let n: usize = dims.iter().product();
    let mut ct = Vec::with_capacity(n);
    let mut pet = Vec::with_capacity(n);
    let c = dims.map(|d| d as f64 / 3.0);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let r2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2);
                ct.push(-1000.0 + 40.0 * ((x + 2 * y + 3 * z) % 50) as f64);
                pet.push(0.3 + 8.0 * (-r2 / 6.0).exp() + 0.01 * x as f64);
            }
        }
    }
    PetCtCase::new(
        "synthetic",
        Tracer::Fdg,
        Volume3::new(dims, [2.0, 2.0, 3.0], ct, VolumeKind::Hu).expect("valid dims"),
        Volume3::new(dims, [2.0, 2.0, 3.0], pet, VolumeKind::Suv).expect("valid dims"),
        None,
    )
    .expect("co-registered")
}

/// Runs the scheduler on [`synthetic_case`] with `n_models` equivariant
/// predictors sharing one latency script on a simulated clock.
pub fn simulate(spec: &LatencySpec, budget: &SchedulerBudget, n_models: usize) -> Result<(Volume3, ScheduleTrace)> {
    spec.validate()?;
    let case = synthetic_case([8, 8, 6]);
    let clock = SimClock::new();
    let script = spec.script();
    let mut predictors: Vec<_> = (0..n_models)
        .map(|_| ScriptedLatency::new(EquivariantPredictor, clock.clone(), script.clone()))
        .collect();
    run_dynamic_inference(&case, &mut predictors, budget, &clock)
}
