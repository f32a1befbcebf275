//! Bivariate polynomial term sets and their evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered list of monomials `x^i * y^j`, identified by their exponent pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSet {
    name: String,
    exponents: Vec<(u32, u32)>,
}

impl TermSet {
    /// Builds a term set, rejecting empty lists and duplicate exponent pairs.
    pub fn new(name: impl Into<String>, exponents: Vec<(u32, u32)>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::Config("term set has no terms".into()));
        }
        for (k, e) in exponents.iter().enumerate() {
            if exponents[..k].contains(e) {
                return Err(Error::Config(format!(
                    "duplicate term x^{}y^{} in term set",
                    e.0, e.1
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            exponents,
        })
    }

    fn preset(name: &str, exponents: &[(u32, u32)]) -> Self {
        Self {
            name: name.to_string(),
            exponents: exponents.to_vec(),
        }
    }

    /// Loss up to cubic, delay linear: 1, x, y, x², xy, x³, x²y.
    /// The shape of the subjective MOS surface.
    pub fn poly31() -> Self {
        Self::preset(
            "poly31",
            &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (3, 0), (2, 1)],
        )
    }

    /// Loss up to quadratic, delay up to cubic: 1, x, y, x², xy, y², x²y, xy², y³.
    /// The shape of the bias polynomial.
    pub fn poly23() -> Self {
        Self::preset(
            "poly23",
            &[
                (0, 0),
                (1, 0),
                (0, 1),
                (2, 0),
                (1, 1),
                (0, 2),
                (2, 1),
                (1, 2),
                (0, 3),
            ],
        )
    }

    /// Loss up to cubic, delay up to quadratic, total degree ≤ 3.
    pub fn poly32() -> Self {
        Self::preset(
            "poly32",
            &[
                (0, 0),
                (1, 0),
                (0, 1),
                (2, 0),
                (1, 1),
                (0, 2),
                (3, 0),
                (2, 1),
                (1, 2),
            ],
        )
    }

    /// Full total-degree-3 set (ten terms).
    pub fn poly33() -> Self {
        Self::preset(
            "poly33",
            &[
                (0, 0),
                (1, 0),
                (0, 1),
                (2, 0),
                (1, 1),
                (0, 2),
                (3, 0),
                (2, 1),
                (1, 2),
                (0, 3),
            ],
        )
    }

    /// Looks up a preset by name (`poly31`, `poly23`, `poly32`, `poly33`).
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "poly31" => Some(Self::poly31()),
            "poly23" => Some(Self::poly23()),
            "poly32" => Some(Self::poly32()),
            "poly33" => Some(Self::poly33()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn has_intercept(&self) -> bool {
        self.exponents.contains(&(0, 0))
    }

    /// Same monomials, possibly in a different order or under a different name.
    pub fn same_terms(&self, other: &TermSet) -> bool {
        self.len() == other.len() && self.exponents.iter().all(|e| other.exponents.contains(e))
    }

    /// Values of every monomial at `(x, y)`, in term order.
    pub fn basis(&self, x: f64, y: f64) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|&(i, j)| x.powi(i as i32) * y.powi(j as i32))
            .collect()
    }
}

impl fmt::Display for TermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Σ cₖ · x^iₖ · y^jₖ over the term set.
pub fn evaluate_surface(termset: &TermSet, coefficients: &[f64], x: f64, y: f64) -> Result<f64> {
    if coefficients.len() != termset.len() {
        return Err(Error::CoefficientCount {
            coefficients: coefficients.len(),
            terms: termset.len(),
        });
    }
    Ok(eval_unchecked(termset.exponents(), coefficients, x, y))
}

pub(crate) fn eval_unchecked(
    exponents: &[(u32, u32)],
    coefficients: &[f64],
    x: f64,
    y: f64,
) -> f64 {
    exponents
        .iter()
        .zip(coefficients)
        .map(|(&(i, j), c)| c * x.powi(i as i32) * y.powi(j as i32))
        .sum()
}
