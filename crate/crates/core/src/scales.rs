//! Prevention efficacy (1 − HR) and log hazard ratio scales.
//!
//! Negative log-HR values indicate benefit. All framework arithmetic runs on
//! the log-HR scale; PE shows up only at input and output boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An effect on the log hazard ratio scale.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogHrEffect(pub f64);

/// Prevention efficacy, 1 − HR. Always strictly below 1.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PreventionEfficacy(f64);

impl PreventionEfficacy {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain(format!(
                "prevention efficacy must be finite and below 1 (zero hazard has no log HR), got {value}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn to_loghr(self) -> LogHrEffect {
        LogHrEffect((-self.0).ln_1p())
    }
}

impl TryFrom<f64> for PreventionEfficacy {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PreventionEfficacy> for f64 {
    fn from(pe: PreventionEfficacy) -> f64 {
        pe.0
    }
}

impl LogHrEffect {
    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn hazard_ratio(self) -> f64 {
        self.0.exp()
    }

    pub fn to_pe(self) -> Result<PreventionEfficacy> {
        loghr_to_pe(self)
    }
}

/// log(1 − pe).
pub fn pe_to_loghr(pe: f64) -> Result<LogHrEffect> {
    Ok(PreventionEfficacy::new(pe)?.to_loghr())
}

/// 1 − exp(g).
pub fn loghr_to_pe(g: LogHrEffect) -> Result<PreventionEfficacy> {
    if !g.0.is_finite() {
        return Err(Error::invalid("log hazard ratio", format!("{} is not finite", g.0)));
    }
    // −expm1(g) < 1 for every finite g, but saturates to 1 in floating point
    // once exp(g) underflows.
    PreventionEfficacy::new(-g.0.exp_m1())
}
