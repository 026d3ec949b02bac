//! Design and evaluation of active-controlled non-inferiority trials under a
//! unified family of synthesis and fixed-margin tests.

pub mod design;
pub mod error;
pub mod framework;
pub mod mc;
pub mod methods;
pub mod scales;
pub mod statdist;

pub use error::{Error, Result, ViolatedBound};
pub use framework::{
    Alpha, CriterionKind, HistoricalEvidence, MarginVariance, MethodSpec, SuccessCriterion, TrialEstimates,
    TruthScenario,
};
pub use scales::{loghr_to_pe, pe_to_loghr, LogHrEffect, PreventionEfficacy};
pub use methods::{MethodFamily, MethodRegistry, PresetId};
pub use statdist::{norm_cdf, norm_pdf, norm_quantile, upper_quantile, Probability};
