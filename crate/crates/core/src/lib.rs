//! VoIP speech-quality estimation for narrowband codecs.
//!
//! The crate implements the simplified E-model (R from delay and loss
//! impairments, then MOS), a subjective MOS regression surface, and a
//! bias-corrected E-model that adds a polynomial fitted to the gap between
//! the two. Around those models it provides the least-squares machinery to
//! re-derive the bias, a MAPE evaluation harness over subjective test sets,
//! and the data formats the command-line tool consumes.
//!
//! ```
//! use emodel_core::{CodecProfile, NetworkCondition, enhanced_estimate};
//!
//! let cond = NetworkCondition::new(3.0, 400.0).unwrap();
//! let est = enhanced_estimate(&cond, &CodecProfile::g729(), false).unwrap();
//! assert!((est.mos - 3.807).abs() < 0.005);
//! ```

// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataio;
pub mod error;
pub mod eval;
pub mod fit;
pub mod model;
pub mod monitor;
pub mod sweep;
pub mod terms;

pub use error::{Error, LineError, Result};
pub use eval::{
    error_reduction, evaluate_models, mape, reconstruct_score_multisets, EvalMode,
    EvaluationReport, QualityBand, ScenarioAggregate, SubjectiveRecord, TestSet,
};
pub use fit::{derive_bias, fit_surface, select_termset, FitResult, GridSpec, Sample};
pub use model::{
    bias_value, delay_impairment, enhanced_estimate, mos_to_r, packetloss_impairment, r_to_mos,
    simplified_estimate, subjective_mos, BiasPolynomial, CodecProfile, Estimator, ModelKind,
    NetworkCondition, QualityEstimate, SubjectiveSurface,
};
pub use terms::{evaluate_surface, TermSet};
