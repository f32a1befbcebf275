//! Linear least-squares fitting of bivariate polynomial surfaces, and the
//! bias-derivation pipeline built on it.
//!
//! The pipeline samples the subjective MOS surface on a loss/delay grid,
//! converts those MOS values to R, subtracts the simplified E-model's R at the
//! same points, and fits a polynomial to the differences. The fitted surface
//! is the bias term the enhanced model adds back.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    mos_to_r, simplified_estimate, BiasPolynomial, CodecProfile, NetworkCondition,
    SubjectiveSurface, MAX_DELAY_MS, MAX_LOSS_PERCENT,
};
use crate::terms::TermSet;

/// One observation `value` at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        Self { x, y, value }
    }
}

/// Denominator used for the root-mean-square error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RmseDenominator {
    /// `n − p`, residual degrees of freedom.
    #[default]
    DegreesOfFreedom,
    /// `n`.
    SampleCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub termset: TermSet,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub rmse: f64,
    pub ss_res: f64,
    pub n_samples: usize,
}

impl FitResult {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        crate::terms::eval_unchecked(self.termset.exponents(), &self.coefficients, x, y)
    }

    /// Reorders the coefficients into a [`BiasPolynomial`]. Only possible when
    /// the fitted terms are exactly the bias polynomial's terms.
    pub fn to_bias_polynomial(&self) -> Result<BiasPolynomial> {
        let target = TermSet::poly23();
        if !self.termset.same_terms(&target) {
            return Err(Error::Config(format!(
                "term set '{}' does not match the bias polynomial's terms",
                self.termset
            )));
        }
        let mut out = [0.0; 9];
        for (slot, e) in out.iter_mut().zip(target.exponents()) {
            let k = self
                .termset
                .exponents()
                .iter()
                .position(|f| f == e)
                .expect("same_terms checked");
            *slot = self.coefficients[k];
        }
        Ok(BiasPolynomial(out))
    }
}

/// Loss/delay grid over which the bias is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub loss_percent: Vec<f64>,
    pub delay_ms: Vec<f64>,
}

impl Default for GridSpec {
    /// Loss 0, 1, …, 10 % by delay 0, 50, …, 400 ms: 99 points.
    fn default() -> Self {
        Self {
            loss_percent: (0..=10).map(f64::from).collect(),
            delay_ms: (0..=8).map(|k| f64::from(k) * 50.0).collect(),
        }
    }
}

impl GridSpec {
    pub fn new(loss_percent: Vec<f64>, delay_ms: Vec<f64>) -> Result<Self> {
        let g = Self {
            loss_percent,
            delay_ms,
        };
        g.validate()?;
        Ok(g)
    }

    /// The nine loss/delay scenarios of the subjective test campaign.
    pub fn scenario_points() -> Vec<NetworkCondition> {
        [
            (0.0, 0.0),
            (2.0, 0.0),
            (4.0, 0.0),
            (6.0, 0.0),
            (10.0, 0.0),
            (0.0, 400.0),
            (3.0, 400.0),
            (5.0, 400.0),
            (10.0, 400.0),
        ]
        .into_iter()
        .map(|(p, d)| NetworkCondition {
            loss_percent: p,
            delay_ms: d,
        })
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("loss", &self.loss_percent, MAX_LOSS_PERCENT)?;
        check_axis("delay", &self.delay_ms, MAX_DELAY_MS)
    }

    /// Grid points, loss-major.
    pub fn points(&self) -> Vec<NetworkCondition> {
        self.loss_percent
            .iter()
            .flat_map(|&p| {
                self.delay_ms.iter().map(move |&d| NetworkCondition {
                    loss_percent: p,
                    delay_ms: d,
                })
            })
            .collect()
    }
}

fn check_axis(name: &str, values: &[f64], max: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if values
        .iter()
        .any(|v| !v.is_finite() || *v < 0.0 || *v > max)
    {
        return Err(Error::Domain(format!(
            "{name} grid values must lie in [0, {max}]"
        )));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Ordinary least squares with the default (`n − p`) RMSE denominator.
pub fn fit_surface(samples: &[Sample], termset: &TermSet) -> Result<FitResult> {
    fit_surface_with(samples, termset, RmseDenominator::default())
}

/// Ordinary least squares of `value` on the term set's monomials.
///
/// Solved through the normal equations after scaling every design column to
/// unit max-abs, with a Cholesky factorisation. Scaling is undone on output.
pub fn fit_surface_with(
    samples: &[Sample],
    termset: &TermSet,
    denominator: RmseDenominator,
) -> Result<FitResult> {
    let n = samples.len();
    let p = termset.len();
    if n < p {
        return Err(Error::TooFewSamples {
            samples: n,
            terms: p,
        });
    }
    if samples
        .iter()
        .any(|s| !(s.x.is_finite() && s.y.is_finite() && s.value.is_finite()))
    {
        return Err(Error::Domain("samples must be finite".into()));
    }

    let design: Vec<Vec<f64>> = samples.iter().map(|s| termset.basis(s.x, s.y)).collect();

    let mut scale = vec![0.0f64; p];
    for row in &design {
        for (s, v) in scale.iter_mut().zip(row) {
            *s = s.max(v.abs());
        }
    }
    let zero_cols: Vec<(u32, u32)> = scale
        .iter()
        .zip(termset.exponents())
        .filter(|(s, _)| **s == 0.0)
        .map(|(_, e)| *e)
        .collect();
    if !zero_cols.is_empty() {
        return Err(Error::RankDeficient {
            dependent_terms: zero_cols,
        });
    }

    // Normal equations on the scaled design: (AᵀA) c = Aᵀb.
    let mut ata = vec![vec![0.0f64; p]; p];
    let mut atb = vec![0.0f64; p];
    for (row, s) in design.iter().zip(samples) {
        let scaled: Vec<f64> = row.iter().zip(&scale).map(|(v, k)| v / k).collect();
        for i in 0..p {
            atb[i] += scaled[i] * s.value;
            for j in 0..=i {
                ata[i][j] += scaled[i] * scaled[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            ata[j][i] = ata[i][j];
        }
    }

    let chol = cholesky(&ata).map_err(|k| Error::RankDeficient {
        dependent_terms: vec![termset.exponents()[k]],
    })?;
    let mut coef = chol.solve(&atb);

    // One round of iterative refinement against the normal equations.
    let resid: Vec<f64> = (0..p)
        .map(|i| atb[i] - (0..p).map(|j| ata[i][j] * coef[j]).sum::<f64>())
        .collect();
    let corr = chol.solve(&resid);
    for (c, d) in coef.iter_mut().zip(&corr) {
        *c += d;
    }

    for (c, k) in coef.iter_mut().zip(&scale) {
        *c /= k;
    }

    let mean = samples.iter().map(|s| s.value).sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (row, s) in design.iter().zip(samples) {
        let fitted: f64 = row.iter().zip(&coef).map(|(v, c)| v * c).sum();
        ss_res += (s.value - fitted).powi(2);
        ss_tot += (s.value - mean).powi(2);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON * n as f64 {
        1.0
    } else {
        0.0
    };
    let dof = match denominator {
        RmseDenominator::DegreesOfFreedom => n - p,
        RmseDenominator::SampleCount => n,
    };
    // An exactly determined system has no residual degrees of freedom.
    let rmse = if dof == 0 {
        0.0
    } else {
        (ss_res / dof as f64).sqrt()
    };

    Ok(FitResult {
        termset: termset.clone(),
        coefficients: coef,
        r_squared,
        rmse,
        ss_res,
        n_samples: n,
    })
}

struct Cholesky {
    l: Vec<Vec<f64>>,
}

/// Lower-triangular factorisation of a symmetric matrix. On a collapsed pivot
/// returns the index of the column that is (numerically) dependent on the
/// preceding ones.
fn cholesky(a: &[Vec<f64>]) -> std::result::Result<Cholesky, usize> {
    let p = a.len();
    let mut l = vec![vec![0.0f64; p]; p];
    for j in 0..p {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 1e-11 * a[j][j].max(f64::MIN_POSITIVE)) {
            return Err(j);
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..p {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    Ok(Cholesky { l })
}

impl Cholesky {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = b.len();
        let l = &self.l;
        let mut z = vec![0.0; p];
        for i in 0..p {
            let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
            z[i] = (b[i] - s) / l[i][i];
        }
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|k| l[k][i] * x[k]).sum();
            x[i] = (z[i] - s) / l[i][i];
        }
        x
    }
}

/// Bias samples over a grid: `mos_to_r(subjective) − simplified R`, keyed by
/// (loss %, delay ms).
pub fn bias_samples(
    surface: &SubjectiveSurface,
    profile: &CodecProfile,
    grid: &GridSpec,
) -> Result<Vec<Sample>> {
    grid.validate()?;
    grid.points()
        .iter()
        .map(|c| {
            let subjective_r = mos_to_r(surface.eval(c)).map_err(|e| {
                Error::Domain(format!(
                    "subjective surface at ({} %, {} ms): {e}",
                    c.loss_percent, c.delay_ms
                ))
            })?;
            let simplified = simplified_estimate(c, profile, false)?;
            Ok(Sample::new(
                c.loss_percent,
                c.delay_ms,
                subjective_r - simplified.r_value,
            ))
        })
        .collect()
}

/// Re-derives a bias surface from the subjective model and the profile.
pub fn derive_bias(
    surface: &SubjectiveSurface,
    profile: &CodecProfile,
    grid: &GridSpec,
    termset: &TermSet,
) -> Result<FitResult> {
    let samples = bias_samples(surface, profile, grid)?;
    fit_surface(&samples, termset)
}

/// Fits every candidate and ranks them: ascending RMSE, then fewer terms,
/// then higher R².
pub fn select_termset(samples: &[Sample], candidates: &[TermSet]) -> Result<Vec<FitResult>> {
    select_termset_with(samples, candidates, RmseDenominator::default())
}

/// [`select_termset`] with an explicit RMSE denominator.
pub fn select_termset_with(
    samples: &[Sample],
    candidates: &[TermSet],
    denominator: RmseDenominator,
) -> Result<Vec<FitResult>> {
    let mut fits = candidates
        .iter()
        .map(|t| fit_surface_with(samples, t, denominator))
        .collect::<Result<Vec<_>>>()?;
    fits.sort_by(rank_order);
    Ok(fits)
}

fn rank_order(a: &FitResult, b: &FitResult) -> Ordering {
    let tol = 1e-9 * a.rmse.abs().max(b.rmse.abs()).max(1e-300);
    if (a.rmse - b.rmse).abs() > tol {
        return a.rmse.total_cmp(&b.rmse);
    }
    a.termset
        .len()
        .cmp(&b.termset.len())
        .then_with(|| b.r_squared.total_cmp(&a.r_squared))
}
