//! Subjective vote records as CSV:
//! `scenario_id,loss_percent,delay_ms,score,test_set[,participant_id]`.

use std::io::{Read, Write};

use crate::error::{Error, LineError, Result};
use crate::eval::SubjectiveRecord;

const REQUIRED: [&str; 5] = [
    "scenario_id",
    "loss_percent",
    "delay_ms",
    "score",
    "test_set",
];

/// Reads and validates every row. On failure the error lists all offending
/// lines (1-based, header is line 1).
pub fn load_subjective_records<R: Read>(source: R) -> Result<Vec<SubjectiveRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("reading header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Validation(vec![LineError {
            line: 1,
            message: "missing header row".into(),
        }]));
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .filter(|c| col(c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(vec![LineError {
            line: 1,
            message: format!("missing column(s): {}", missing.join(", ")),
        }]));
    }
    let [sid, loss, delay, score, ts] = REQUIRED.map(|c| col(c).unwrap());
    let pid = col("participant_id");

    let mut out = Vec::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                errors.push(LineError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let mut problems = Vec::new();
        let mut num = |i: usize, name: &str| -> f64 {
            match field(i).parse::<f64>() {
                Ok(v) => v,
                Err(_) => {
                    problems.push(format!("{name} '{}' is not a number", field(i)));
                    f64::NAN
                }
            }
        };
        let loss_percent = num(loss, "loss_percent");
        let delay_ms = num(delay, "delay_ms");
        let score_v = num(score, "score");
        let rec = SubjectiveRecord {
            scenario_id: field(sid).to_string(),
            loss_percent,
            delay_ms,
            score: score_v,
            test_set: field(ts).to_string(),
            participant_id: pid.map(field).filter(|s| !s.is_empty()).map(str::to_string),
        };
        if problems.is_empty() {
            problems = rec.problems();
        }
        if problems.is_empty() {
            out.push(rec);
        } else {
            errors.push(LineError {
                line,
                message: problems.join("; "),
            });
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(out)
}

/// Canonical CSV form. The `participant_id` column is written only when at
/// least one record carries one.
pub fn write_subjective_records<W: Write>(sink: W, records: &[SubjectiveRecord]) -> Result<()> {
    let with_pid = records.iter().any(|r| r.participant_id.is_some());
    let mut w = csv::Writer::from_writer(sink);
    let map_err = |e: csv::Error| Error::Parse(e.to_string());
    let mut header: Vec<&str> = REQUIRED.to_vec();
    if with_pid {
        header.push("participant_id");
    }
    w.write_record(&header).map_err(map_err)?;
    for r in records {
        let mut row = vec![
            r.scenario_id.clone(),
            r.loss_percent.to_string(),
            r.delay_ms.to_string(),
            r.score.to_string(),
            r.test_set.clone(),
        ];
        if with_pid {
            row.push(r.participant_id.clone().unwrap_or_default());
        }
        w.write_record(&row).map_err(map_err)?;
    }
    w.flush()?;
    Ok(())
}
