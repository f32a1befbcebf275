//! Tumbling-window aggregation of streamed loss/delay metrics.
//!
//! Windows are kept per `stream_id` and hold only running sums, so memory is
//! bounded by the number of concurrently open streams.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::dataio::MetricRecord;
use crate::error::{Error, Result};
use crate::model::{Estimator, ModelKind, NetworkCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    /// Close after this many records.
    Records(usize),
    /// Close once a record's timestamp reaches `start + duration`.
    Duration(Duration),
}

impl WindowSpec {
    /// Duration window from a (possibly fractional) number of seconds.
    pub fn from_seconds(seconds: f64) -> Result<Self> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(Error::Config(format!(
                "window duration must be positive, got {seconds}"
            )));
        }
        let spec = WindowSpec::Duration(Duration::nanoseconds((seconds * 1e9).round() as i64));
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WindowSpec::Records(0) => {
                Err(Error::Config("window must hold at least one record".into()))
            }
            WindowSpec::Duration(d) if *d <= Duration::zero() => {
                Err(Error::Config("window duration must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Mean metrics over one closed window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream_id: Option<String>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub records: usize,
    pub mean_loss_percent: f64,
    pub mean_delay_ms: f64,
}

/// A window summary scored by the simplified and enhanced models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    #[serde(flatten)]
    pub window: WindowSummary,
    pub r_simplified: f64,
    pub mos_simplified: f64,
    pub r_enhanced: f64,
    pub mos_enhanced: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
struct OpenWindow {
    start: DateTime<Utc>,
    last: DateTime<Utc>,
    count: usize,
    loss_sum: f64,
    delay_sum: f64,
}

impl OpenWindow {
    fn new(start: DateTime<Utc>) -> Self {
        Self {
            start,
            last: start,
            count: 0,
            loss_sum: 0.0,
            delay_sum: 0.0,
        }
    }

    fn add(&mut self, r: &MetricRecord) {
        self.count += 1;
        self.loss_sum += r.loss_percent;
        self.delay_sum += r.delay_ms;
        if r.ts > self.last {
            self.last = r.ts;
        }
    }

    fn close(self, stream_id: Option<String>, end: DateTime<Utc>) -> Option<WindowSummary> {
        (self.count > 0).then(|| WindowSummary {
            stream_id,
            start: self.start,
            end,
            records: self.count,
            mean_loss_percent: self.loss_sum / self.count as f64,
            mean_delay_ms: self.delay_sum / self.count as f64,
        })
    }
}

pub struct WindowAggregator {
    spec: WindowSpec,
    open: BTreeMap<Option<String>, OpenWindow>,
}

impl WindowAggregator {
    pub fn new(spec: WindowSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            open: BTreeMap::new(),
        })
    }

    /// Adds a record; returns any window it closed.
    pub fn push(&mut self, record: &MetricRecord) -> Option<WindowSummary> {
        let key = record.stream_id.clone();
        let mut closed = None;
        match self.spec {
            WindowSpec::Records(size) => {
                let w = self
                    .open
                    .entry(key.clone())
                    .or_insert_with(|| OpenWindow::new(record.ts));
                w.add(record);
                if w.count >= size {
                    let w = self.open.remove(&key).expect("present");
                    let end = w.last;
                    closed = w.close(key, end);
                }
            }
            WindowSpec::Duration(len) => {
                let start = match self.open.get(&key) {
                    Some(w) if record.ts >= w.start + len => {
                        // Jump straight to the window containing the record;
                        // windows skipped over were empty.
                        let elapsed = (record.ts - w.start).num_nanoseconds().unwrap_or(i64::MAX);
                        let step = len.num_nanoseconds().unwrap_or(i64::MAX).max(1);
                        let next = w.start + Duration::nanoseconds(elapsed / step * step);
                        let w = self.open.remove(&key).expect("present");
                        let end = w.start + len;
                        closed = w.close(key.clone(), end);
                        next
                    }
                    Some(w) => w.start,
                    None => record.ts,
                };
                self.open
                    .entry(key)
                    .or_insert_with(|| OpenWindow::new(start))
                    .add(record);
            }
        }
        closed
    }

    /// Closes every partially filled window, in stream-id order.
    pub fn finish(self) -> Vec<WindowSummary> {
        let spec = self.spec;
        self.open
            .into_iter()
            .filter_map(|(k, w)| {
                let end = match spec {
                    WindowSpec::Records(_) => w.last,
                    WindowSpec::Duration(len) => w.start + len,
                };
                w.close(k, end)
            })
            .collect()
    }
}

/// Scores a window's mean condition. Out-of-domain windows are computed
/// anyway and flagged.
pub fn score_window(window: WindowSummary, estimator: &Estimator) -> Result<WindowEstimate> {
    let cond = NetworkCondition::new(window.mean_loss_percent, window.mean_delay_ms)?;
    let s = estimator.estimate(ModelKind::Simplified, &cond, true)?;
    let e = estimator.estimate(ModelKind::Enhanced, &cond, true)?;
    Ok(WindowEstimate {
        window,
        r_simplified: s.r_value,
        mos_simplified: s.mos,
        r_enhanced: e.r_value,
        mos_enhanced: e.mos,
        extrapolated: s.extrapolated,
    })
}
