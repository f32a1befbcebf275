//! Model accuracy assessment: MAPE over subjective test sets, error
//! reduction between two models, and reconstruction of integer vote
//! multisets from published (mean, sd, n) aggregates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Estimator, ModelKind, NetworkCondition};

/// Largest participant count for which vote multisets are enumerated.
pub const MAX_RECONSTRUCTION_N: usize = 10;

/// Mean and SD are published to two decimals.
pub const RECONSTRUCTION_TOLERANCE: f64 = 0.005;

/// One participant's vote under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectiveRecord {
    pub scenario_id: String,
    pub loss_percent: f64,
    pub delay_ms: f64,
    pub score: f64,
    pub test_set: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
}

impl SubjectiveRecord {
    pub fn condition(&self) -> NetworkCondition {
        NetworkCondition {
            loss_percent: self.loss_percent,
            delay_ms: self.delay_ms,
        }
    }

    /// All problems with this record, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.scenario_id.trim().is_empty() {
            out.push("scenario_id is empty".to_string());
        }
        if self.test_set.trim().is_empty() {
            out.push("test_set is empty".to_string());
        }
        if !(self.score >= 1.0 && self.score <= 5.0) {
            out.push(format!("score {} outside [1, 5]", self.score));
        }
        if !(self.loss_percent.is_finite() && self.loss_percent >= 0.0) {
            out.push(format!(
                "loss_percent {} is negative or not finite",
                self.loss_percent
            ));
        }
        if !(self.delay_ms.is_finite() && self.delay_ms >= 0.0) {
            out.push(format!(
                "delay_ms {} is negative or not finite",
                self.delay_ms
            ));
        }
        out
    }
}

/// Published summary of the votes for one scenario within a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub scenario_id: String,
    pub loss_percent: f64,
    pub delay_ms: f64,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl ScenarioAggregate {
    pub fn condition(&self) -> NetworkCondition {
        NetworkCondition {
            loss_percent: self.loss_percent,
            delay_ms: self.delay_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observations {
    Records(Vec<SubjectiveRecord>),
    Aggregates(Vec<ScenarioAggregate>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub id: String,
    pub observations: Observations,
}

impl TestSet {
    pub fn from_records(id: impl Into<String>, records: Vec<SubjectiveRecord>) -> Result<Self> {
        let t = Self {
            id: id.into(),
            observations: Observations::Records(records),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_aggregates(
        id: impl Into<String>,
        aggregates: Vec<ScenarioAggregate>,
    ) -> Result<Self> {
        let t = Self {
            id: id.into(),
            observations: Observations::Aggregates(aggregates),
        };
        t.validate()?;
        Ok(t)
    }

    /// Groups records by their `test_set` field, ordered by id.
    pub fn group_records(records: Vec<SubjectiveRecord>) -> Result<Vec<TestSet>> {
        let mut groups: BTreeMap<String, Vec<SubjectiveRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(r.test_set.clone()).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(id, recs)| TestSet::from_records(id, recs))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match &self.observations {
            Observations::Records(r) if r.is_empty() => {
                Err(Error::Empty(format!("test set {} has no records", self.id)))
            }
            Observations::Aggregates(a) if a.is_empty() => Err(Error::Empty(format!(
                "test set {} has no scenarios",
                self.id
            ))),
            Observations::Records(r) => match r.iter().find(|r| !r.problems().is_empty()) {
                Some(bad) => Err(Error::Config(format!(
                    "test set {}: record for {}: {}",
                    self.id,
                    bad.scenario_id,
                    bad.problems().join("; ")
                ))),
                None => Ok(()),
            },
            Observations::Aggregates(a) => {
                for s in a {
                    if s.n == 0 || !(s.sd >= 0.0) || !(1.0..=5.0).contains(&s.mean) {
                        return Err(Error::Config(format!(
                            "test set {}: scenario {} has invalid aggregate (mean {}, sd {}, n {})",
                            self.id, s.scenario_id, s.mean, s.sd, s.n
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Number of individual votes behind the set.
    pub fn record_count(&self) -> usize {
        match &self.observations {
            Observations::Records(r) => r.len(),
            Observations::Aggregates(a) => a.iter().map(|s| s.n).sum(),
        }
    }

    /// Scenario-level view: records are grouped by scenario id, keeping
    /// first-appearance order.
    pub fn scenario_means(&self) -> Vec<ScenarioAggregate> {
        match &self.observations {
            Observations::Aggregates(a) => a.clone(),
            Observations::Records(records) => {
                let mut order: Vec<String> = Vec::new();
                let mut groups: BTreeMap<String, Vec<&SubjectiveRecord>> = BTreeMap::new();
                for r in records {
                    if !groups.contains_key(&r.scenario_id) {
                        order.push(r.scenario_id.clone());
                    }
                    groups.entry(r.scenario_id.clone()).or_default().push(r);
                }
                order
                    .into_iter()
                    .map(|id| {
                        let g = &groups[&id];
                        let scores: Vec<f64> = g.iter().map(|r| r.score).collect();
                        ScenarioAggregate {
                            scenario_id: id,
                            loss_percent: g[0].loss_percent,
                            delay_ms: g[0].delay_ms,
                            mean: mean(&scores),
                            sd: sample_sd(&scores),
                            n: scores.len(),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Mean absolute percentage error, in percent.
pub fn mape(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch {
            predicted: predicted.len(),
            observed: observed.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::Empty("MAPE of zero values".into()));
    }
    let mut acc = 0.0;
    for (i, (p, o)) in predicted.iter().zip(observed).enumerate() {
        if *o == 0.0 {
            return Err(Error::ZeroObserved { index: i });
        }
        acc += ((p - o) / o).abs();
    }
    Ok(100.0 * acc / observed.len() as f64)
}

/// `(baseline − enhanced) / baseline · 100`.
pub fn error_reduction(baseline_mape: f64, enhanced_mape: f64) -> Result<f64> {
    if !(baseline_mape > 0.0) {
        return Err(Error::Domain(format!(
            "baseline MAPE must be > 0, got {baseline_mape}"
        )));
    }
    Ok((baseline_mape - enhanced_mape) / baseline_mape * 100.0)
}

/// Conventional reading of a MAPE value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualityBand {
    Perfect,
    HighlyAccurate,
    Good,
    Reasonable,
    Inaccurate,
}

impl QualityBand {
    pub fn classify(mape: f64) -> Self {
        if mape == 0.0 {
            QualityBand::Perfect
        } else if mape < 10.0 {
            QualityBand::HighlyAccurate
        } else if mape < 20.0 {
            QualityBand::Good
        } else if mape < 50.0 {
            QualityBand::Reasonable
        } else {
            QualityBand::Inaccurate
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            QualityBand::Perfect => "perfect forecast",
            QualityBand::HighlyAccurate => "highly accurate forecast",
            QualityBand::Good => "good forecast",
            QualityBand::Reasonable => "reasonable forecast",
            QualityBand::Inaccurate => "inaccurate forecast",
        }
    }
}

impl fmt::Display for QualityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard deviation with the `n − 1` denominator; zero for a single value.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn check_reconstruction_args(mean: f64, sd: f64, n: usize) -> Result<()> {
    if n == 0 || n > MAX_RECONSTRUCTION_N {
        return Err(Error::Domain(format!(
            "reconstruction needs 1 <= n <= {MAX_RECONSTRUCTION_N}, got {n}"
        )));
    }
    if !(1.0..=5.0).contains(&mean) || !(sd >= 0.0) {
        return Err(Error::Domain(format!(
            "reconstruction needs mean in [1, 5] and sd >= 0, got ({mean}, {sd})"
        )));
    }
    Ok(())
}

/// Calls `f` with every non-decreasing sequence of `n` votes in 1..=5.
fn for_each_multiset(n: usize, mut f: impl FnMut(&[u8])) {
    let mut votes = vec![1u8; n];
    loop {
        f(&votes);
        // Advance to the next non-decreasing sequence in lexicographic order.
        let Some(k) = votes.iter().rposition(|&v| v < 5) else {
            return;
        };
        let next = votes[k] + 1;
        for v in &mut votes[k..] {
            *v = next;
        }
    }
}

fn moments(votes: &[u8]) -> (f64, f64) {
    let v: Vec<f64> = votes.iter().map(|&x| f64::from(x)).collect();
    (mean(&v), sample_sd(&v))
}

/// Every multiset of `n` integer votes in [1, 5] whose mean and sample SD
/// both round to the published values (±0.005). Sorted ascending, each
/// multiset in non-decreasing order. Empty when nothing matches.
pub fn reconstruct_score_multisets(mean: f64, sd: f64, n: usize) -> Result<Vec<Vec<u8>>> {
    check_reconstruction_args(mean, sd, n)?;
    let tol = RECONSTRUCTION_TOLERANCE + 1e-9;
    let mut out = Vec::new();
    for_each_multiset(n, |votes| {
        let (m, s) = moments(votes);
        if (m - mean).abs() <= tol && (s - sd).abs() <= tol {
            out.push(votes.to_vec());
        }
    });
    Ok(out)
}

/// Multisets minimising `max(|Δmean|, |Δsd|)` against the published values,
/// with that minimal distance. Used for cells no exact multiset explains.
pub fn nearest_score_multisets(mean: f64, sd: f64, n: usize) -> Result<(f64, Vec<Vec<u8>>)> {
    check_reconstruction_args(mean, sd, n)?;
    let mut best = f64::INFINITY;
    let mut out: Vec<Vec<u8>> = Vec::new();
    for_each_multiset(n, |votes| {
        let (m, s) = moments(votes);
        let dist = (m - mean).abs().max((s - sd).abs());
        if dist < best - 1e-12 {
            best = dist;
            out.clear();
            out.push(votes.to_vec());
        } else if (dist - best).abs() <= 1e-12 {
            out.push(votes.to_vec());
        }
    });
    Ok((best, out))
}

/// Plausible vote multisets behind one aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReconstruction {
    /// False when no multiset matches within rounding and the nearest ones
    /// were substituted.
    pub exact: bool,
    /// Worst of |Δmean|, |Δsd| over the chosen multisets.
    pub distance: f64,
    pub multisets: Vec<Vec<u8>>,
}

impl CellReconstruction {
    /// Lexicographically smallest candidate; the deterministic synthetic pick.
    pub fn canonical(&self) -> &[u8] {
        &self.multisets[0]
    }
}

pub fn reconstruct_cell(agg: &ScenarioAggregate) -> Result<CellReconstruction> {
    let exact = reconstruct_score_multisets(agg.mean, agg.sd, agg.n)?;
    if !exact.is_empty() {
        let distance = exact
            .iter()
            .map(|v| {
                let (m, s) = moments(v);
                (m - agg.mean).abs().max((s - agg.sd).abs())
            })
            .fold(0.0, f64::max);
        return Ok(CellReconstruction {
            exact: true,
            distance,
            multisets: exact,
        });
    }
    let (distance, multisets) = nearest_score_multisets(agg.mean, agg.sd, agg.n)?;
    Ok(CellReconstruction {
        exact: false,
        distance,
        multisets,
    })
}

/// Expands aggregates into synthetic per-vote records using each cell's
/// canonical reconstruction.
pub fn expand_canonical(
    test_set: &str,
    aggregates: &[ScenarioAggregate],
) -> Result<Vec<SubjectiveRecord>> {
    let mut out = Vec::new();
    for agg in aggregates {
        let cell = reconstruct_cell(agg)?;
        for (k, v) in cell.canonical().iter().enumerate() {
            out.push(SubjectiveRecord {
                scenario_id: agg.scenario_id.clone(),
                loss_percent: agg.loss_percent,
                delay_ms: agg.delay_ms,
                score: f64::from(*v),
                test_set: test_set.to_string(),
                participant_id: Some(format!("{}-{}-{}", test_set, agg.scenario_id, k + 1)),
            });
        }
    }
    Ok(out)
}

/// How observed MOS values are compared with predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// One term per scenario against its mean vote, weighted by vote count.
    ScenarioMean,
    /// One term per individual vote; needs raw records.
    PerRecord,
    /// Per-vote MAPE bracketed over every vote multiset consistent with the
    /// published aggregates. The point value uses the canonical multiset.
    PerRecordBounds,
}

impl EvalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::ScenarioMean => "scenario-mean",
            EvalMode::PerRecord => "per-record",
            EvalMode::PerRecordBounds => "per-record-bounds",
        }
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scenario-mean" => Ok(EvalMode::ScenarioMean),
            "per-record" => Ok(EvalMode::PerRecord),
            "per-record-bounds" => Ok(EvalMode::PerRecordBounds),
            other => Err(Error::Config(format!("unknown evaluation mode '{other}'"))),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// MAPE of one model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapeCell {
    pub test_set: String,
    pub model: ModelKind,
    pub mape: f64,
    pub band: QualityBand,
    pub records: usize,
    /// Bracket over vote reconstructions (per-record-bounds mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
    /// Scenarios whose aggregates no integer multiset reproduces; their
    /// nearest multisets were used.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub approximated_scenarios: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    /// Unweighted mean of the per-test-set MAPE values.
    pub average_mape: f64,
    pub band: QualityBand,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReduction {
    pub baseline: ModelKind,
    pub improved: ModelKind,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: EvalMode,
    pub cells: Vec<MapeCell>,
    pub averages: Vec<ModelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_reduction: Option<ErrorReduction>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl EvaluationReport {
    pub fn cell(&self, test_set: &str, model: ModelKind) -> Option<&MapeCell> {
        self.cells
            .iter()
            .find(|c| c.test_set == test_set && c.model == model)
    }

    pub fn average(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.averages.iter().find(|a| a.model == model)
    }
}

/// Scores every model on every test set.
///
/// Test sets are reported in id order. Every scenario must lie inside the
/// models' domain; nothing is extrapolated here.
pub fn evaluate_models(
    testsets: &[TestSet],
    models: &[ModelKind],
    estimator: &Estimator,
    mode: EvalMode,
) -> Result<EvaluationReport> {
    if testsets.is_empty() {
        return Err(Error::Empty("no test sets to evaluate".into()));
    }
    if models.is_empty() {
        return Err(Error::Empty("no models to evaluate".into()));
    }
    let mut sets: Vec<&TestSet> = testsets.iter().collect();
    sets.sort_by(|a, b| a.id.cmp(&b.id));

    let mut cells = Vec::new();
    for ts in &sets {
        ts.validate()?;
        for &model in models {
            cells.push(evaluate_cell(ts, model, estimator, mode)?);
        }
    }

    let averages: Vec<ModelSummary> = models
        .iter()
        .map(|&model| {
            let mine: Vec<&MapeCell> = cells.iter().filter(|c| c.model == model).collect();
            let k = mine.len() as f64;
            let average_mape = mine.iter().map(|c| c.mape).sum::<f64>() / k;
            let bounds = if mine.iter().all(|c| c.bounds.is_some()) {
                let lo = mine.iter().map(|c| c.bounds.unwrap().0).sum::<f64>() / k;
                let hi = mine.iter().map(|c| c.bounds.unwrap().1).sum::<f64>() / k;
                Some((lo, hi))
            } else {
                None
            };
            ModelSummary {
                model,
                average_mape,
                band: QualityBand::classify(average_mape),
                bounds,
            }
        })
        .collect();

    let avg = |m: ModelKind| {
        averages
            .iter()
            .find(|a| a.model == m)
            .map(|a| a.average_mape)
    };
    let error_reduction = match (avg(ModelKind::Simplified), avg(ModelKind::Enhanced)) {
        (Some(base), Some(enh)) if base > 0.0 => Some(ErrorReduction {
            baseline: ModelKind::Simplified,
            improved: ModelKind::Enhanced,
            percent: error_reduction(base, enh)?,
        }),
        _ => None,
    };

    let mut notes = vec![match mode {
        EvalMode::ScenarioMean => {
            "scenario-mean mode: predictions compared with per-scenario mean votes, weighted by vote count".to_string()
        }
        EvalMode::PerRecord => "per-record mode: one term per individual vote".to_string(),
        EvalMode::PerRecordBounds => {
            "per-record-bounds mode: bounds span every vote multiset consistent with the aggregates; point value uses the canonical (lexicographically smallest) multiset".to_string()
        }
    }];
    let approx: Vec<String> = cells
        .iter()
        .filter(|c| c.model == models[0])
        .flat_map(|c| {
            c.approximated_scenarios
                .iter()
                .map(move |s| format!("{}/{}", c.test_set, s))
        })
        .collect();
    if !approx.is_empty() {
        notes.push(format!(
            "no integer vote multiset reproduces these aggregates; nearest multisets used: {}",
            approx.join(", ")
        ));
    }

    Ok(EvaluationReport {
        mode,
        cells,
        averages,
        error_reduction,
        notes,
    })
}

fn predict(
    estimator: &Estimator,
    model: ModelKind,
    cond: &NetworkCondition,
    ts: &str,
    scenario: &str,
) -> Result<f64> {
    estimator
        .estimate(model, cond, false)
        .map(|e| e.mos)
        .map_err(|e| match e {
            Error::Domain(msg) => {
                Error::Domain(format!("test set {ts}, scenario {scenario}: {msg}"))
            }
            other => other,
        })
}

fn evaluate_cell(
    ts: &TestSet,
    model: ModelKind,
    estimator: &Estimator,
    mode: EvalMode,
) -> Result<MapeCell> {
    let mut bounds = None;
    let mut approximated = Vec::new();
    let (value, records) = match (mode, &ts.observations) {
        (EvalMode::ScenarioMean, _) => {
            let aggs = ts.scenario_means();
            let mut acc = 0.0;
            let mut n = 0;
            for a in &aggs {
                let p = predict(estimator, model, &a.condition(), &ts.id, &a.scenario_id)?;
                acc += a.n as f64 * ((p - a.mean) / a.mean).abs();
                n += a.n;
            }
            (100.0 * acc / n as f64, n)
        }
        (EvalMode::PerRecord | EvalMode::PerRecordBounds, Observations::Records(recs)) => {
            let mut pred = Vec::with_capacity(recs.len());
            for r in recs {
                pred.push(predict(estimator, model, &r.condition(), &ts.id, &r.scenario_id)?);
            }
            let obs: Vec<f64> = recs.iter().map(|r| r.score).collect();
            let v = mape(&pred, &obs)?;
            if mode == EvalMode::PerRecordBounds {
                bounds = Some((v, v));
            }
            (v, recs.len())
        }
        (EvalMode::PerRecord, Observations::Aggregates(_)) => {
            return Err(Error::Config(format!(
                "test set {} only has aggregates; per-record mode needs raw votes (use per-record-bounds)",
                ts.id
            )))
        }
        (EvalMode::PerRecordBounds, Observations::Aggregates(aggs)) => {
            let mut lo = 0.0;
            let mut hi = 0.0;
            let mut point = 0.0;
            let mut n = 0;
            for a in aggs {
                let p = predict(estimator, model, &a.condition(), &ts.id, &a.scenario_id)?;
                let cell = reconstruct_cell(a)?;
                if !cell.exact {
                    approximated.push(a.scenario_id.clone());
                }
                let term = |votes: &[u8]| {
                    votes
                        .iter()
                        .map(|&v| ((p - f64::from(v)) / f64::from(v)).abs())
                        .sum::<f64>()
                };
                let sums: Vec<f64> = cell.multisets.iter().map(|m| term(m)).collect();
                lo += sums.iter().cloned().fold(f64::INFINITY, f64::min);
                hi += sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                point += sums[0];
                n += a.n;
            }
            let k = 100.0 / n as f64;
            bounds = Some((k * lo, k * hi));
            (k * point, n)
        }
    };
    Ok(MapeCell {
        test_set: ts.id.clone(),
        model,
        mape: value,
        band: QualityBand::classify(value),
        records,
        bounds,
        approximated_scenarios: approximated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mape(&[3.0], &[4.0]).unwrap(), 25.0);
        assert!(matches!(
            mape(&[1.0, 2.0], &[1.0, 0.0]),
            Err(Error::ZeroObserved { index: 1 })
        ));
        assert!(matches!(
            mape(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(mape(&[], &[]).is_err());
    }

    #[test]
    fn error_reduction_examples() {
        assert_abs_diff_eq!(
            error_reduction(28.47, 11.71).unwrap(),
            58.87,
            epsilon = 0.01
        );
        assert_eq!(error_reduction(7.5, 7.5).unwrap(), 0.0);
        assert_eq!(error_reduction(10.0, 0.0).unwrap(), 100.0);
        assert!(error_reduction(0.0, 1.0).is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(QualityBand::classify(0.0), QualityBand::Perfect);
        assert_eq!(QualityBand::classify(4.0), QualityBand::HighlyAccurate);
        assert_eq!(QualityBand::classify(11.71), QualityBand::Good);
        assert_eq!(QualityBand::classify(28.47), QualityBand::Reasonable);
        assert_eq!(QualityBand::classify(60.0), QualityBand::Inaccurate);
    }

    #[test]
    fn reconstruct_zero_sd() {
        let r = reconstruct_score_multisets(4.00, 0.0, 7).unwrap();
        assert_eq!(r, vec![vec![4u8; 7]]);
    }

    #[test]
    fn reconstruct_includes_known_multiset() {
        let r = reconstruct_score_multisets(4.00, 0.63, 6).unwrap();
        assert!(r.contains(&vec![3, 4, 4, 4, 4, 5]));
        for m in &r {
            let (mu, sd) = moments(m);
            assert!((mu - 4.0).abs() <= 0.005 + 1e-9);
            assert!((sd - 0.63).abs() <= 0.005 + 1e-9);
        }
    }

    #[test]
    fn reconstruct_unattainable() {
        assert!(reconstruct_score_multisets(1.00, 3.0, 4)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn reconstruct_argument_checks() {
        assert!(reconstruct_score_multisets(4.0, 0.5, 11).is_err());
        assert!(reconstruct_score_multisets(4.0, 0.5, 0).is_err());
        assert!(reconstruct_score_multisets(5.5, 0.5, 3).is_err());
    }

    #[test]
    fn multiset_enumeration_count() {
        // C(n + 4, 4) multisets of size n over five values.
        let mut k = 0;
        for_each_multiset(7, |_| k += 1);
        assert_eq!(k, 330);
    }

    #[test]
    fn nearest_falls_back() {
        // 3.88 × 7 is not an integer sum.
        assert!(reconstruct_score_multisets(3.88, 0.64, 7)
            .unwrap()
            .is_empty());
        let (d, m) = nearest_score_multisets(3.88, 0.64, 7).unwrap();
        assert!(d > 0.005);
        assert!(!m.is_empty());
        let cell = reconstruct_cell(&ScenarioAggregate {
            scenario_id: "S5".into(),
            loss_percent: 3.0,
            delay_ms: 400.0,
            mean: 3.88,
            sd: 0.64,
            n: 7,
        })
        .unwrap();
        assert!(!cell.exact);
        assert_eq!(cell.canonical().len(), 7);
    }

    fn rec(ts: &str, sid: &str, p: f64, d: f64, score: f64) -> SubjectiveRecord {
        SubjectiveRecord {
            scenario_id: sid.into(),
            loss_percent: p,
            delay_ms: d,
            score,
            test_set: ts.into(),
            participant_id: None,
        }
    }

    #[test]
    fn perfect_model_scores_zero() {
        let est = Estimator::default();
        let m = est
            .estimate(
                ModelKind::Simplified,
                &NetworkCondition::new(0.0, 0.0).unwrap(),
                false,
            )
            .unwrap()
            .mos;
        let ts = TestSet::from_records("T", vec![rec("T", "S1", 0.0, 0.0, m); 3]).unwrap();
        for mode in [EvalMode::ScenarioMean, EvalMode::PerRecord] {
            let r = evaluate_models(
                std::slice::from_ref(&ts),
                &[ModelKind::Simplified],
                &est,
                mode,
            )
            .unwrap();
            assert_eq!(r.cells[0].mape, 0.0);
            assert_eq!(r.cells[0].band, QualityBand::Perfect);
        }
    }

    #[test]
    fn out_of_domain_scenario_rejected() {
        let ts = TestSet::from_records("T", vec![rec("T", "S1", 12.0, 0.0, 3.0)]).unwrap();
        let err = evaluate_models(
            &[ts],
            &[ModelKind::Simplified],
            &Estimator::default(),
            EvalMode::PerRecord,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn per_record_needs_records() {
        let ts = TestSet::from_aggregates(
            "T",
            vec![ScenarioAggregate {
                scenario_id: "S1".into(),
                loss_percent: 0.0,
                delay_ms: 0.0,
                mean: 4.0,
                sd: 0.0,
                n: 3,
            }],
        )
        .unwrap();
        assert!(evaluate_models(
            std::slice::from_ref(&ts),
            &[ModelKind::Enhanced],
            &Estimator::default(),
            EvalMode::PerRecord
        )
        .is_err());
        let r = evaluate_models(
            &[ts],
            &[ModelKind::Enhanced],
            &Estimator::default(),
            EvalMode::PerRecordBounds,
        )
        .unwrap();
        let (lo, hi) = r.cells[0].bounds.unwrap();
        assert_eq!(lo, hi);
        assert_abs_diff_eq!(lo, r.cells[0].mape, epsilon = 1e-12);
    }

    #[test]
    fn scenario_means_group_records() {
        let ts = TestSet::from_records(
            "T",
            vec![
                rec("T", "A", 0.0, 0.0, 4.0),
                rec("T", "B", 2.0, 0.0, 3.0),
                rec("T", "A", 0.0, 0.0, 5.0),
            ],
        )
        .unwrap();
        let m = ts.scenario_means();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].scenario_id, "A");
        assert_eq!(m[0].n, 2);
        assert_eq!(m[0].mean, 4.5);
        assert_abs_diff_eq!(m[0].sd, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn report_orders_test_sets_and_computes_reduction() {
        let a = TestSet::from_records("B", vec![rec("B", "S", 0.0, 400.0, 4.0)]).unwrap();
        let b = TestSet::from_records("A", vec![rec("A", "S", 0.0, 400.0, 3.5)]).unwrap();
        let r = evaluate_models(
            &[a, b],
            &[ModelKind::Simplified, ModelKind::Enhanced],
            &Estimator::default(),
            EvalMode::PerRecord,
        )
        .unwrap();
        assert_eq!(r.cells[0].test_set, "A");
        assert_eq!(r.cells[2].test_set, "B");
        let red = r.error_reduction.clone().unwrap();
        let s = r.average(ModelKind::Simplified).unwrap().average_mape;
        let e = r.average(ModelKind::Enhanced).unwrap().average_mape;
        assert_abs_diff_eq!(red.percent, (s - e) / s * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(TestSet::from_records("T", vec![]).is_err());
        assert!(evaluate_models(
            &[],
            &[ModelKind::Simplified],
            &Estimator::default(),
            EvalMode::ScenarioMean
        )
        .is_err());
    }
}
