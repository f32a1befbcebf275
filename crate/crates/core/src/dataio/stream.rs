//! Line-delimited JSON metric stream.
//!
//! Each line is an object with `ts`, `loss_percent`, `delay_ms` and an
//! optional `stream_id`. `ts` is an RFC 3339 timestamp or a number of
//! seconds since the Unix epoch. Blank lines are skipped.

use std::io::BufRead;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::LineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub ts: DateTime<Utc>,
    pub loss_percent: f64,
    pub delay_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTs {
    Text(String),
    Seconds(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    ts: RawTs,
    loss_percent: f64,
    delay_ms: f64,
    #[serde(default)]
    stream_id: Option<String>,
}

/// What to do after a malformed line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    /// Yield the error and keep reading.
    #[default]
    Continue,
    /// Yield the error, then end the stream.
    Abort,
}

impl MetricRecord {
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let ts = match raw.ts {
            RawTs::Text(s) => DateTime::parse_from_rfc3339(&s)
                .map_err(|e| format!("ts '{s}': {e}"))?
                .with_timezone(&Utc),
            RawTs::Seconds(s) => {
                if !s.is_finite() {
                    return Err("ts is not finite".into());
                }
                let whole = s.floor();
                let nanos = ((s - whole) * 1e9).round() as u32;
                Utc.timestamp_opt(whole as i64, nanos.min(999_999_999))
                    .single()
                    .ok_or_else(|| format!("ts {s} out of range"))?
            }
        };
        if !(raw.loss_percent.is_finite() && raw.loss_percent >= 0.0) {
            return Err(format!(
                "loss_percent {} must be finite and >= 0",
                raw.loss_percent
            ));
        }
        if !(raw.delay_ms.is_finite() && raw.delay_ms >= 0.0) {
            return Err(format!("delay_ms {} must be finite and >= 0", raw.delay_ms));
        }
        Ok(Self {
            ts,
            loss_percent: raw.loss_percent,
            delay_ms: raw.delay_ms,
            stream_id: raw.stream_id,
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metric record serializes")
    }
}

/// Lazy, order-preserving reader over a line-delimited metric source.
pub struct MetricStream<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    policy: ErrorPolicy,
    done: bool,
}

pub fn read_metric_stream<R: BufRead>(source: R, policy: ErrorPolicy) -> MetricStream<R> {
    MetricStream {
        lines: source.lines(),
        line_no: 0,
        policy,
        done: false,
    }
}

impl<R: BufRead> Iterator for MetricStream<R> {
    type Item = Result<MetricRecord, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let parsed = match line {
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => MetricRecord::parse_line(l.trim()),
                Err(e) => Err(e.to_string()),
            };
            return Some(parsed.map_err(|message| {
                if self.policy == ErrorPolicy::Abort {
                    self.done = true;
                }
                LineError {
                    line: self.line_no,
                    message,
                }
            }));
        }
    }
}
