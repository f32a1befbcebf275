//! Model comparison curves over loss and delay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Estimator, ModelKind, NetworkCondition, QualityEstimate};

/// All three models at one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub condition: NetworkCondition,
    pub simplified: QualityEstimate,
    pub enhanced: QualityEstimate,
    pub subjective: QualityEstimate,
    pub extrapolated: bool,
}

impl SweepRow {
    pub fn get(&self, model: ModelKind) -> &QualityEstimate {
        match model {
            ModelKind::Simplified => &self.simplified,
            ModelKind::Enhanced => &self.enhanced,
            ModelKind::Subjective => &self.subjective,
        }
    }
}

/// Evaluates every model on the cross product, delay-major then loss.
pub fn sweep(
    estimator: &Estimator,
    losses: &[f64],
    delays: &[f64],
    allow_extrapolation: bool,
) -> Result<Vec<SweepRow>> {
    if losses.is_empty() {
        return Err(Error::Empty("loss range".into()));
    }
    if delays.is_empty() {
        return Err(Error::Empty("delay list".into()));
    }
    let mut rows = Vec::with_capacity(losses.len() * delays.len());
    for &d in delays {
        for &p in losses {
            let c = NetworkCondition::new(p, d)?;
            let simplified = estimator.estimate(ModelKind::Simplified, &c, allow_extrapolation)?;
            let enhanced = estimator.estimate(ModelKind::Enhanced, &c, allow_extrapolation)?;
            let subjective = estimator.estimate(ModelKind::Subjective, &c, allow_extrapolation)?;
            rows.push(SweepRow {
                condition: c,
                simplified,
                enhanced,
                subjective,
                extrapolated: simplified.extrapolated,
            });
        }
    }
    Ok(rows)
}

/// `start, start + step, …` up to and including `end` (within round-off).
pub fn inclusive_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() {
        return Err(Error::Config(format!("invalid range {start}:{end}:{step}")));
    }
    if end < start {
        return Ok(Vec::new());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}
