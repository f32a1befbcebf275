//! Fit samples as CSV: `x,y,value` with a header row.

use std::io::Read;

use crate::error::{Error, LineError, Result};
use crate::fit::Sample;

/// Reads `x,y,value` rows. Every malformed line is reported.
pub fn load_samples<R: Read>(source: R) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("reading header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(xi), Some(yi), Some(vi)) = (col("x"), col("y"), col("value")) else {
        return Err(Error::Validation(vec![LineError {
            line: 1,
            message: "header must contain x, y and value".into(),
        }]));
    };

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
        let mut bad = Vec::new();
        let mut num = |i: usize, name: &str| -> f64 {
            let raw = row.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    bad.push(format!("{name} '{raw}' is not a finite number"));
                    f64::NAN
                }
            }
        };
        let s = Sample::new(num(xi, "x"), num(yi, "y"), num(vi, "value"));
        if bad.is_empty() {
            out.push(s);
        } else {
            errors.push(LineError {
                line,
                message: bad.join("; "),
            });
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    if out.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    Ok(out)
}
