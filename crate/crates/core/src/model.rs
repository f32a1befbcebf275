//! Impairment factors, R ↔ MOS conversions and the three quality models:
//! the simplified E-model, the subjective MOS surface, and the simplified
//! E-model corrected by a bias polynomial.
//!
//! Every [`NetworkCondition`] is stored as (loss in percent, one-way delay in
//! milliseconds). The subjective surface is parameterised in (loss fraction,
//! delay in seconds) and converts internally; the bias polynomial consumes
//! percent and milliseconds directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terms::{eval_unchecked, TermSet};

/// Upper loss bound of the models' validated domain, in percent.
pub const MAX_LOSS_PERCENT: f64 = 10.0;
/// Upper one-way delay bound of the models' validated domain, in milliseconds.
pub const MAX_DELAY_MS: f64 = 400.0;

/// Delay at which the second delay-impairment term kicks in, in milliseconds.
pub const DELAY_KNEE_MS: f64 = 177.3;

/// Basic signal-to-noise ratio used by the simplified E-model.
pub const DEFAULT_RO: f64 = 93.2;

/// A packet loss / one-way delay measurement point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkCondition {
    /// Packet loss rate in percent, `3.0` meaning 3 %.
    pub loss_percent: f64,
    /// Average one-way delay in milliseconds.
    pub delay_ms: f64,
}

impl NetworkCondition {
    /// Validated constructor: both fields must be finite and non-negative.
    pub fn new(loss_percent: f64, delay_ms: f64) -> Result<Self> {
        if !loss_percent.is_finite() || loss_percent < 0.0 {
            return Err(Error::Domain(format!(
                "loss_percent must be finite and >= 0, got {loss_percent}"
            )));
        }
        if !delay_ms.is_finite() || delay_ms < 0.0 {
            return Err(Error::Domain(format!(
                "delay_ms must be finite and >= 0, got {delay_ms}"
            )));
        }
        Ok(Self {
            loss_percent,
            delay_ms,
        })
    }

    /// True iff the point lies in the closed domain [0, 10] % × [0, 400] ms.
    pub fn in_domain(&self) -> bool {
        self.domain_violation().is_none()
    }

    fn domain_violation(&self) -> Option<String> {
        if !(self.loss_percent >= 0.0 && self.delay_ms >= 0.0) {
            return Some(format!(
                "condition ({}, {}) has a negative or non-finite component",
                self.loss_percent, self.delay_ms
            ));
        }
        if self.loss_percent > MAX_LOSS_PERCENT {
            return Some(format!(
                "loss_percent {} exceeds upper bound {MAX_LOSS_PERCENT} %",
                self.loss_percent
            ));
        }
        if self.delay_ms > MAX_DELAY_MS {
            return Some(format!(
                "delay_ms {} exceeds upper bound {MAX_DELAY_MS} ms",
                self.delay_ms
            ));
        }
        None
    }

    /// Applies the out-of-domain policy. Returns whether the result will be
    /// an extrapolation, or an error naming the violated bound.
    pub fn check(&self, allow_extrapolation: bool) -> Result<bool> {
        if !(self.loss_percent.is_finite() && self.delay_ms.is_finite())
            || self.loss_percent < 0.0
            || self.delay_ms < 0.0
        {
            return Err(Error::Domain(format!(
                "invalid condition: loss_percent={}, delay_ms={}",
                self.loss_percent, self.delay_ms
            )));
        }
        match self.domain_violation() {
            None => Ok(false),
            Some(_) if allow_extrapolation => Ok(true),
            Some(msg) => Err(Error::Domain(format!(
                "{msg} (pass the extrapolation flag to compute anyway)"
            ))),
        }
    }
}

/// Nine-coefficient R-scale correction surface over (loss %, delay ms).
///
/// Term order is 1, x, y, x², xy, y², x²y, xy², y³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPolynomial(pub [f64; 9]);

impl BiasPolynomial {
    /// Published bias constants for G.729 and native Thai listeners.
    pub const THAI_G729: BiasPolynomial = BiasPolynomial([
        0.4327, 0.6654, -0.03461, 0.03563, 0.004689, 0.000379, -0.0004205, -3.98e-8, -2.52e-7,
    ]);

    pub fn coefficients(&self) -> &[f64; 9] {
        &self.0
    }

    /// Value at `loss_percent`, `delay_ms` (no domain checks).
    pub fn eval(&self, loss_percent: f64, delay_ms: f64) -> f64 {
        eval_unchecked(
            TermSet::poly23().exponents(),
            &self.0,
            loss_percent,
            delay_ms,
        )
    }
}

/// Subjective MOS regression surface in (loss fraction, delay seconds).
///
/// Term order is 1, x, y, x², xy, x³, x²y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectiveSurface(pub [f64; 7]);

impl SubjectiveSurface {
    /// Conversation-test MOS surface for G.729 and native Thai users.
    pub const THAI_G729: SubjectiveSurface =
        SubjectiveSurface([4.113, -13.960, -0.2849, 92.16, 18.030, -225.9, -165.7]);

    pub fn coefficients(&self) -> &[f64; 7] {
        &self.0
    }

    /// Raw surface value at a loss fraction and a delay in seconds.
    pub fn eval_native(&self, loss_fraction: f64, delay_s: f64) -> f64 {
        eval_unchecked(
            TermSet::poly31().exponents(),
            &self.0,
            loss_fraction,
            delay_s,
        )
    }

    /// Surface value for a condition stored in percent / milliseconds.
    pub fn eval(&self, cond: &NetworkCondition) -> f64 {
        self.eval_native(cond.loss_percent / 100.0, cond.delay_ms / 1000.0)
    }
}

/// Codec-specific constants of the simplified E-model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecProfile {
    pub name: String,
    pub ro: f64,
    /// Advantage factor A; zero unless a profile opts in.
    pub advantage: f64,
    /// Constant term of the loss impairment. For G.729 this is the codec's
    /// intrinsic impairment Ie = 10, so no separate codec term is subtracted.
    pub loss_a: f64,
    pub loss_b: f64,
    pub loss_c: f64,
    /// Divisor applied to `loss_c` inside the logarithm: `ln(1 + c/scale · P)`.
    pub loss_scale: f64,
    pub bias: Option<BiasPolynomial>,
}

impl CodecProfile {
    /// Built-in G.729 profile with the Thai bias polynomial attached.
    pub fn g729() -> Self {
        Self {
            name: "g729".into(),
            ro: DEFAULT_RO,
            advantage: 0.0,
            loss_a: 10.0,
            loss_b: 25.21,
            loss_c: 20.20,
            loss_scale: 100.0,
            bias: Some(BiasPolynomial::THAI_G729),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("profile '{}': {msg}", self.name)));
        if self.name.trim().is_empty() {
            return Err(Error::Config("profile name is empty".into()));
        }
        if !(self.ro > 0.0 && self.ro <= 100.0) {
            return bad(format!("ro must lie in (0, 100], got {}", self.ro));
        }
        if !(self.loss_b > 0.0) {
            return bad(format!("loss_b must be > 0, got {}", self.loss_b));
        }
        if !(self.loss_c > 0.0) {
            return bad(format!("loss_c must be > 0, got {}", self.loss_c));
        }
        if !(self.loss_scale > 0.0) {
            return bad(format!("loss_scale must be > 0, got {}", self.loss_scale));
        }
        if !self.advantage.is_finite() || !self.loss_a.is_finite() {
            return bad("advantage and loss_a must be finite".into());
        }
        if let Some(b) = &self.bias {
            if b.0.iter().any(|c| !c.is_finite()) {
                return bad("bias coefficients must be finite".into());
            }
        }
        Ok(())
    }
}

/// Which quality model produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Simplified,
    Enhanced,
    Subjective,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::Simplified,
        ModelKind::Enhanced,
        ModelKind::Subjective,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Simplified => "simplified",
            ModelKind::Enhanced => "enhanced",
            ModelKind::Subjective => "subjective",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simplified" => Ok(ModelKind::Simplified),
            "enhanced" => Ok(ModelKind::Enhanced),
            "subjective" => Ok(ModelKind::Subjective),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// Output of one of the quality models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityEstimate {
    pub condition: NetworkCondition,
    /// R on the hundred-point scale; may fall outside [0, 100].
    pub r_value: f64,
    /// MOS clamped to [1, 4.5].
    pub mos: f64,
    /// Delay impairment under the profile.
    pub id: f64,
    /// Loss impairment under the profile.
    pub ipl: f64,
    /// Bias term added to R, present for the enhanced model only.
    pub bias: Option<f64>,
    pub model: ModelKind,
    pub extrapolated: bool,
}

/// Delay impairment `0.024·d + 0.11·(d − 177.3)·H(d − 177.3)`, with H(0) = 1.
pub fn delay_impairment(delay_ms: f64) -> Result<f64> {
    if !delay_ms.is_finite() || delay_ms < 0.0 {
        return Err(Error::Domain(format!(
            "delay_ms must be finite and >= 0, got {delay_ms}"
        )));
    }
    let over = delay_ms - DELAY_KNEE_MS;
    let step = if over < 0.0 { 0.0 } else { 1.0 };
    Ok(0.024 * delay_ms + 0.11 * over * step)
}

/// Loss impairment `a + b·ln(1 + (c/scale)·P)` with P in percent.
pub fn packetloss_impairment(loss_percent: f64, profile: &CodecProfile) -> Result<f64> {
    if !loss_percent.is_finite() || loss_percent < 0.0 {
        return Err(Error::Domain(format!(
            "loss_percent must be finite and >= 0, got {loss_percent}"
        )));
    }
    if loss_percent == 0.0 {
        return Ok(profile.loss_a);
    }
    let k = profile.loss_c / profile.loss_scale;
    Ok(profile.loss_a + profile.loss_b * (k * loss_percent).ln_1p())
}

/// R-value to MOS, clamped to 1.0 below R = 0 and to 4.5 above R = 100.
///
/// The cubic dips slightly under 1 for 0 < R < 6.5; the result is floored at
/// 1 there so the mapping stays on the MOS scale and non-decreasing.
pub fn r_to_mos(r: f64) -> f64 {
    if r > 100.0 {
        4.5
    } else if r < 0.0 {
        1.0
    } else {
        (1.0 + 0.035 * r + r * (r - 60.0) * (100.0 - r) * 7e-6).max(1.0)
    }
}

/// Cubic approximate inverse of [`r_to_mos`], defined on MOS ∈ [1, 4.5].
pub fn mos_to_r(mos: f64) -> Result<f64> {
    if !(1.0..=4.5).contains(&mos) {
        return Err(Error::Domain(format!(
            "MOS {mos} outside [1, 4.5] cannot be converted to R"
        )));
    }
    Ok(((3.026 * mos - 25.314) * mos + 87.060) * mos - 57.336)
}

/// Simplified E-model: `R = Ro − Id − Ipl + A`.
pub fn simplified_estimate(
    cond: &NetworkCondition,
    profile: &CodecProfile,
    allow_extrapolation: bool,
) -> Result<QualityEstimate> {
    let extrapolated = cond.check(allow_extrapolation)?;
    let id = delay_impairment(cond.delay_ms)?;
    let ipl = packetloss_impairment(cond.loss_percent, profile)?;
    let r_value = profile.ro - id - ipl + profile.advantage;
    Ok(QualityEstimate {
        condition: *cond,
        r_value,
        mos: r_to_mos(r_value),
        id,
        ipl,
        bias: None,
        model: ModelKind::Simplified,
        extrapolated,
    })
}

/// Raw subjective MOS at a condition. Not clamped.
pub fn subjective_mos(
    cond: &NetworkCondition,
    surface: &SubjectiveSurface,
    allow_extrapolation: bool,
) -> Result<f64> {
    cond.check(allow_extrapolation)?;
    Ok(surface.eval(cond))
}

/// Bias polynomial at a condition. Domain policy is left to the caller.
pub fn bias_value(cond: &NetworkCondition, bias: &BiasPolynomial) -> f64 {
    bias.eval(cond.loss_percent, cond.delay_ms)
}

/// Simplified E-model plus the profile's bias polynomial.
pub fn enhanced_estimate(
    cond: &NetworkCondition,
    profile: &CodecProfile,
    allow_extrapolation: bool,
) -> Result<QualityEstimate> {
    let bias = profile.bias.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "profile '{}' has no bias polynomial; the enhanced model needs one",
            profile.name
        ))
    })?;
    let base = simplified_estimate(cond, profile, allow_extrapolation)?;
    let b = bias_value(cond, bias);
    let r_value = base.r_value + b;
    Ok(QualityEstimate {
        r_value,
        mos: r_to_mos(r_value),
        bias: Some(b),
        model: ModelKind::Enhanced,
        ..base
    })
}

/// The subjective surface expressed as a [`QualityEstimate`].
///
/// MOS is clamped into [1, 4.5] before conversion to R so that far
/// extrapolations still map onto the R scale. Inside the domain the G.729
/// surface never leaves that range.
pub fn subjective_estimate(
    cond: &NetworkCondition,
    profile: &CodecProfile,
    surface: &SubjectiveSurface,
    allow_extrapolation: bool,
) -> Result<QualityEstimate> {
    let extrapolated = cond.check(allow_extrapolation)?;
    let mos = surface.eval(cond).clamp(1.0, 4.5);
    Ok(QualityEstimate {
        condition: *cond,
        r_value: mos_to_r(mos)?,
        mos,
        id: delay_impairment(cond.delay_ms)?,
        ipl: packetloss_impairment(cond.loss_percent, profile)?,
        bias: None,
        model: ModelKind::Subjective,
        extrapolated,
    })
}

/// A codec profile paired with a subjective surface: enough to run any of
/// the three models.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    pub profile: CodecProfile,
    pub surface: SubjectiveSurface,
}

impl Default for Estimator {
    fn default() -> Self {
        Self {
            profile: CodecProfile::g729(),
            surface: SubjectiveSurface::THAI_G729,
        }
    }
}

impl Estimator {
    pub fn new(profile: CodecProfile, surface: SubjectiveSurface) -> Self {
        Self { profile, surface }
    }

    pub fn estimate(
        &self,
        model: ModelKind,
        cond: &NetworkCondition,
        allow_extrapolation: bool,
    ) -> Result<QualityEstimate> {
        match model {
            ModelKind::Simplified => simplified_estimate(cond, &self.profile, allow_extrapolation),
            ModelKind::Enhanced => enhanced_estimate(cond, &self.profile, allow_extrapolation),
            ModelKind::Subjective => {
                subjective_estimate(cond, &self.profile, &self.surface, allow_extrapolation)
            }
        }
    }
}
