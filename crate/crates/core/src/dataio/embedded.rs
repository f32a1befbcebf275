//! Published constants and datasets shipped with the crate.
//!
//! The CSV sources live in `data/` and are compiled in; each file carries a
//! comment header describing where its values come from.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::{ScenarioAggregate, TestSet};
use crate::model::{BiasPolynomial, ModelKind, NetworkCondition, SubjectiveSurface};

const SCENARIOS_CSV: &str = include_str!("../../data/scenarios.csv");
const TEST_SETS_CSV: &str = include_str!("../../data/test_sets.csv");
const GOLDEN_CSV: &str = include_str!("../../data/golden_outputs.csv");
const PUBLISHED_MAPE_CSV: &str = include_str!("../../data/published_mape.csv");
const FIT_CANDIDATES_CSV: &str = include_str!("../../data/fit_candidates.csv");

/// Synthetic per-vote expansion of the test sets (canonical reconstruction).
pub const TEST_SET_RECORDS_CSV: &str = include_str!("../../data/test_set_records.csv");

/// Published error reduction of the enhanced model over the simplified one, in percent.
pub const PUBLISHED_ERROR_REDUCTION: f64 = 58.87;

/// One scenario of the subjective-surface campaign.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SurfaceScenario {
    pub scenario_id: String,
    pub loss_percent: f64,
    pub delay_ms: f64,
    pub participants: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AggregateRow {
    pub test_set: String,
    pub scenario_id: String,
    pub loss_percent: f64,
    pub delay_ms: f64,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub note: Option<String>,
}

impl AggregateRow {
    pub fn flagged_irreproducible(&self) -> bool {
        self.note.as_deref() == Some("irreproducible")
    }

    pub fn aggregate(&self) -> ScenarioAggregate {
        ScenarioAggregate {
            scenario_id: self.scenario_id.clone(),
            loss_percent: self.loss_percent,
            delay_ms: self.delay_ms,
            mean: self.mean,
            sd: self.sd,
            n: self.n,
        }
    }
}

/// Published model outputs for one evaluation scenario.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GoldenRow {
    pub scenario_id: String,
    pub loss_percent: f64,
    pub delay_ms: f64,
    pub simplified_r: f64,
    pub simplified_mos: f64,
    pub enhanced_r: f64,
    pub enhanced_mos: f64,
}

impl GoldenRow {
    pub fn condition(&self) -> NetworkCondition {
        NetworkCondition {
            loss_percent: self.loss_percent,
            delay_ms: self.delay_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PublishedMape {
    /// Test-set id, or `average`.
    pub test_set: String,
    pub model: ModelKind,
    pub mape: f64,
    pub alt_mape: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PublishedFit {
    pub termset: String,
    pub loss_order: u32,
    pub delay_order: u32,
    pub r_squared: f64,
    pub rmse: f64,
    pub selected: bool,
}

/// Everything published that the toolkit reproduces or checks against.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDatasets {
    pub bias: BiasPolynomial,
    pub surface: SubjectiveSurface,
    pub surface_scenarios: Vec<SurfaceScenario>,
    pub test_set_rows: Vec<AggregateRow>,
    pub golden: Vec<GoldenRow>,
    pub published_mape: Vec<PublishedMape>,
    pub published_fits: Vec<PublishedFit>,
}

fn parse<T: for<'de> Deserialize<'de>>(name: &str, text: &str) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Parse(format!("embedded {name}: {e}")))
}

impl EmbeddedDatasets {
    fn load() -> Result<Self> {
        Ok(Self {
            bias: BiasPolynomial::THAI_G729,
            surface: SubjectiveSurface::THAI_G729,
            surface_scenarios: parse("scenarios.csv", SCENARIOS_CSV)?,
            test_set_rows: parse("test_sets.csv", TEST_SETS_CSV)?,
            golden: parse("golden_outputs.csv", GOLDEN_CSV)?,
            published_mape: parse("published_mape.csv", PUBLISHED_MAPE_CSV)?,
            published_fits: parse("fit_candidates.csv", FIT_CANDIDATES_CSV)?,
        })
    }

    /// Parsed once per process.
    pub fn get() -> &'static EmbeddedDatasets {
        static DATA: OnceLock<EmbeddedDatasets> = OnceLock::new();
        DATA.get_or_init(|| Self::load().expect("embedded datasets are well-formed"))
    }

    /// Test sets as scenario aggregates, ordered by id.
    pub fn test_sets(&self) -> Vec<TestSet> {
        let mut ids: Vec<&str> = self
            .test_set_rows
            .iter()
            .map(|r| r.test_set.as_str())
            .collect();
        ids.dedup();
        ids.into_iter()
            .map(|id| {
                TestSet::from_aggregates(
                    id,
                    self.test_set_rows
                        .iter()
                        .filter(|r| r.test_set == id)
                        .map(AggregateRow::aggregate)
                        .collect(),
                )
                .expect("embedded test sets are valid")
            })
            .collect()
    }

    pub fn published_mape(&self, test_set: &str, model: ModelKind) -> Option<&PublishedMape> {
        self.published_mape
            .iter()
            .find(|p| p.test_set == test_set && p.model == model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let d = EmbeddedDatasets::get();
        assert_eq!(d.surface_scenarios.len(), 9);
        assert_eq!(
            d.surface_scenarios
                .iter()
                .map(|s| s.participants)
                .sum::<u32>(),
            250
        );
        assert_eq!(d.golden.len(), 10);
        assert_eq!(d.test_set_rows.len(), 40);
        assert_eq!(d.published_fits.len(), 3);
        assert_eq!(d.published_mape.len(), 10);
        let sets = d.test_sets();
        assert_eq!(sets.len(), 4);
        for ts in &sets {
            assert_eq!(ts.record_count(), 67, "{}", ts.id);
        }
    }

    #[test]
    fn participant_counts_are_six_or_seven() {
        for r in &EmbeddedDatasets::get().test_set_rows {
            assert!(r.n == 6 || r.n == 7);
        }
    }

    #[test]
    fn golden_rows_match_test_set_conditions() {
        let d = EmbeddedDatasets::get();
        for g in &d.golden {
            let rows: Vec<_> = d
                .test_set_rows
                .iter()
                .filter(|r| r.scenario_id == g.scenario_id)
                .collect();
            assert_eq!(rows.len(), 4);
            for r in rows {
                assert_eq!((r.loss_percent, r.delay_ms), (g.loss_percent, g.delay_ms));
            }
        }
    }

    #[test]
    fn ts2_discrepancy_is_embedded() {
        let p = EmbeddedDatasets::get()
            .published_mape("TS2", ModelKind::Simplified)
            .unwrap();
        assert_eq!(p.mape, 29.23);
        assert_eq!(p.alt_mape, Some(29.30));
    }
}
