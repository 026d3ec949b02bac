//! The unified non-inferiority test family and its closed-form operating
//! characteristics.
//!
//! A method is a point `(u, λ₁)`; a success criterion is a pair `(f, Δ₀)`.
//! Every method in the family rejects when
//!
//! ```text
//! T = [γ̂_XC + (1−f)(1+λ₁)γ̂_CP,H − Δ₀] / √(V_XC + u²(1−f)²(1+λ₁)²V_CP,H)  <  −Z_{1−α}
//! ```
//!
//! Unconditional characteristics treat γ̂_CP,H as normal around the true
//! historical effect; conditional ones hold it fixed at its observed value.
//! The true historical effect is unknown, so [`TruthScenario`] carries it
//! explicitly and defaults to the point estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scales::{LogHrEffect, PreventionEfficacy};
use crate::statdist::{phi, quantile_unchecked, Probability};

/// One-sided significance level in `(0, 0.5)`, with its upper quantile cached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha {
    value: f64,
    z: f64,
}

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 0.5) {
            return Err(Error::invalid("alpha", format!("{value} is not in (0, 0.5)")));
        }
        Ok(Self { value, z: -quantile_unchecked(value) })
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.value
    }

    /// Z_{1−α}.
    #[inline]
    pub fn z(self) -> f64 {
        self.z
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.value
    }
}

/// Historical estimate of the active-control effect versus placebo, on the
/// log-HR scale, with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoricalEvidence {
    gamma_hat: f64,
    se: f64,
}

impl HistoricalEvidence {
    pub fn new(gamma_hat: f64, se: f64) -> Result<Self> {
        if !gamma_hat.is_finite() {
            return Err(Error::invalid("gamma_hat", "must be finite"));
        }
        if !(se.is_finite() && se > 0.0) {
            return Err(Error::invalid("se", format!("{se} must be finite and positive")));
        }
        Ok(Self { gamma_hat, se })
    }

    pub fn from_pe(pe: PreventionEfficacy, se: f64) -> Result<Self> {
        Self::new(pe.to_loghr().get(), se)
    }

    #[inline]
    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    #[inline]
    pub fn se(&self) -> f64 {
        self.se
    }

    /// V_CP,H.
    #[inline]
    pub fn variance(&self) -> f64 {
        self.se * self.se
    }

    pub(crate) fn require_efficacious(&self) -> Result<()> {
        if self.gamma_hat < 0.0 {
            Ok(())
        } else {
            Err(Error::precondition(format!(
                "historical control effect estimate must be negative (beneficial), got {}",
                self.gamma_hat
            )))
        }
    }
}

/// Whether the margin component of the statistic is random (synthesis-type
/// methods, `u > 0`) or a deterministic function of the historical data
/// (fixed-margin methods, `u = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginVariance {
    RandomMargin,
    FixedMargin,
}

/// A point `(u, λ₁)` of the method family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    u: f64,
    lambda1: f64,
    margin_variance: MarginVariance,
}

impl MethodSpec {
    pub fn new(name: impl Into<String>, u: f64, lambda1: f64, rule: MarginVariance) -> Result<Self> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::invalid("u", format!("{u} must be finite and non-negative")));
        }
        if !(lambda1.is_finite() && lambda1 > -1.0) {
            return Err(Error::invalid("lambda1", format!("{lambda1} must be finite and above -1")));
        }
        let fixed = rule == MarginVariance::FixedMargin;
        if fixed != (u == 0.0) {
            return Err(Error::invalid(
                "margin_variance_rule",
                format!("fixed_margin is required exactly when u = 0 (u = {u}, rule = {rule:?})"),
            ));
        }
        Ok(Self { name: name.into(), u, lambda1, margin_variance: rule })
    }

    /// Builds a method from a raw `(u, λ₁)` pair; `u = 0` selects the
    /// fixed-margin variance rule.
    pub fn from_pair(name: impl Into<String>, u: f64, lambda1: f64) -> Result<Self> {
        let rule = if u == 0.0 { MarginVariance::FixedMargin } else { MarginVariance::RandomMargin };
        Self::new(name, u, lambda1, rule)
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }

    #[inline]
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    #[inline]
    pub fn margin_variance(&self) -> MarginVariance {
        self.margin_variance
    }

    pub fn is_fixed_margin(&self) -> bool {
        self.margin_variance == MarginVariance::FixedMargin
    }
}

/// Success criterion `(f, Δ₀)`: preservation of a fraction `f` of the control
/// effect (`Δ₀ = 0`) or inferred efficacy beyond `Δ₀` (`f = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    f: f64,
    delta0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionKind {
    PreservationOfEffect,
    InferredEfficacy,
    /// `f = 0` and `Δ₀ = 0`: superiority to a hypothetical placebo.
    PutativePlacebo,
}

impl SuccessCriterion {
    pub fn new(f: f64, delta0: f64) -> Result<Self> {
        if !(f.is_finite() && (0.0..1.0).contains(&f)) {
            return Err(Error::invalid("f", format!("{f} is not in [0, 1)")));
        }
        if !(delta0.is_finite() && delta0 <= 0.0) {
            return Err(Error::invalid("delta0", format!("{delta0} must be finite and <= 0")));
        }
        if f > 0.0 && delta0 != 0.0 {
            return Err(Error::invalid(
                "delta0",
                "preservation of effect (f > 0) requires delta0 = 0; inferred efficacy requires f = 0",
            ));
        }
        Ok(Self { f, delta0 })
    }

    pub fn preservation(f: f64) -> Result<Self> {
        Self::new(f, 0.0)
    }

    pub fn inferred_efficacy(delta0: LogHrEffect) -> Result<Self> {
        Self::new(0.0, delta0.get())
    }

    /// Inferred efficacy against a null prevention efficacy, e.g. 0.30.
    pub fn inferred_efficacy_pe(null_pe: PreventionEfficacy) -> Result<Self> {
        Self::inferred_efficacy(null_pe.to_loghr())
    }

    #[inline]
    pub fn f(&self) -> f64 {
        self.f
    }

    #[inline]
    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn kind(&self) -> CriterionKind {
        if self.f > 0.0 {
            CriterionKind::PreservationOfEffect
        } else if self.delta0 < 0.0 {
            CriterionKind::InferredEfficacy
        } else {
            CriterionKind::PutativePlacebo
        }
    }
}

/// Assumed truth: relative effect deviation λ₀ and experimental-versus-placebo
/// effect γ_XP. `gamma_cph` overrides the true historical control effect used
/// by the unconditional formulas; `None` means the point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthScenario {
    pub lambda0: f64,
    pub gamma_xp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_cph: Option<f64>,
}

impl TruthScenario {
    pub fn new(lambda0: f64, gamma_xp: f64) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > -1.0) {
            return Err(Error::invalid("lambda0", format!("{lambda0} must be finite and above -1")));
        }
        if !gamma_xp.is_finite() {
            return Err(Error::invalid("gamma_xp", "must be finite"));
        }
        Ok(Self { lambda0, gamma_xp, gamma_cph: None })
    }

    pub fn with_true_control_effect(mut self, gamma_cph: f64) -> Self {
        self.gamma_cph = Some(gamma_cph);
        self
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = lambda0;
        self
    }

    pub fn with_gamma_xp(mut self, gamma_xp: f64) -> Self {
        self.gamma_xp = gamma_xp;
        self
    }

    /// The true historical control effect used by unconditional formulas.
    pub fn true_gamma_cph(&self, hist: &HistoricalEvidence) -> f64 {
        self.gamma_cph.unwrap_or(hist.gamma_hat)
    }

    /// λ₀ that makes (1+λ₀)γ_CP,H equal to the log HR of the given control PE.
    pub fn lambda0_for_control_pe(pe: PreventionEfficacy, gamma_cph: f64) -> f64 {
        pe.to_loghr().get() / gamma_cph - 1.0
    }
}

/// Estimates from the active-controlled trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimates {
    pub gamma_hat_xc: f64,
    pub v_xc: f64,
}

/// Ṽ_CP,H: `(1+λ₁)²V_CP,H` for random-margin methods, `V_CP,H` for
/// fixed-margin ones.
pub fn tilde_v_cph(method: &MethodSpec, hist: &HistoricalEvidence) -> f64 {
    match method.margin_variance {
        MarginVariance::RandomMargin => (1.0 + method.lambda1).powi(2) * hist.variance(),
        MarginVariance::FixedMargin => hist.variance(),
    }
}

/// V_XC + u²(1−f)²(1+λ₁)²V_CP,H, the variance the statistic standardises by.
fn statistic_variance(v_xc: f64, hist: &HistoricalEvidence, m: &MethodSpec, c: &SuccessCriterion) -> f64 {
    let k = m.u * (1.0 - c.f) * (1.0 + m.lambda1);
    v_xc + k * k * hist.variance()
}

/// V_XC + (1−f)²Ṽ_CP,H, the actual unconditional variance of the numerator.
fn unconditional_variance(v_xc: f64, hist: &HistoricalEvidence, m: &MethodSpec, c: &SuccessCriterion) -> f64 {
    v_xc + (1.0 - c.f).powi(2) * tilde_v_cph(m, hist)
}

/// Δ₀ + {(1+λ₀) − (1−f)(1+λ₁)}γ_CP,H − γ_XP.
fn drift(gamma_cph: f64, m: &MethodSpec, c: &SuccessCriterion, s: &TruthScenario) -> f64 {
    c.delta0 + ((1.0 + s.lambda0) - (1.0 - c.f) * (1.0 + m.lambda1)) * gamma_cph - s.gamma_xp
}

/// (1−f)(λ₀−λ₁)γ_CP,H, the drift at the scientific null boundary.
fn null_drift(gamma_cph: f64, m: &MethodSpec, c: &SuccessCriterion, lambda0: f64) -> f64 {
    (1.0 - c.f) * (lambda0 - m.lambda1) * gamma_cph
}

pub fn test_statistic(
    est: &TrialEstimates,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
) -> Result<f64> {
    let var = statistic_variance(est.v_xc, hist, m, c);
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::invalid("variance", format!("statistic variance {var} must be positive")));
    }
    Ok(statistic_from_parts(est.gamma_hat_xc, (1.0 + m.lambda1) * hist.gamma_hat, c, var))
}

/// T from its pieces, with the margin component `(1+λ₁)γ̂_CP,H` and the
/// standardising variance supplied by the caller.
#[inline]
pub(crate) fn statistic_from_parts(
    gamma_hat_xc: f64,
    margin_component: f64,
    c: &SuccessCriterion,
    variance: f64,
) -> f64 {
    (gamma_hat_xc + (1.0 - c.f) * margin_component - c.delta0) / variance.sqrt()
}

/// The standardising variance of T, exposed for simulation.
#[inline]
pub(crate) fn standardising_variance(v_xc: f64, hist: &HistoricalEvidence, m: &MethodSpec, c: &SuccessCriterion) -> f64 {
    statistic_variance(v_xc, hist, m, c)
}

/// True iff `t < −Z_{1−α}`.
#[inline]
pub fn reject(t: f64, alpha: Alpha) -> bool {
    t < -alpha.z
}

/// The success margin δ on the log-HR scale: rejecting is equivalent to
/// `γ̂_XC + Z_{1−α}√V_XC < δ`. For `u = 0` it does not depend on `v_xc`.
pub fn success_margin(
    v_xc: f64,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    alpha: Alpha,
) -> LogHrEffect {
    let base = c.delta0 - (1.0 - c.f) * (1.0 + m.lambda1) * hist.gamma_hat;
    if m.u == 0.0 {
        return LogHrEffect(base);
    }
    let spread = statistic_variance(v_xc, hist, m, c).sqrt() - v_xc.sqrt();
    LogHrEffect(base - alpha.z * spread)
}

pub fn unconditional_power(
    v_xc: f64,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
) -> Probability {
    let gamma = s.true_gamma_cph(hist);
    let num = drift(gamma, m, c, s) - alpha.z * statistic_variance(v_xc, hist, m, c).sqrt();
    Probability::clamped(phi(num / unconditional_variance(v_xc, hist, m, c).sqrt()))
}

/// Unconditional type-I error at the scientific null boundary for the
/// scenario's λ₀ (γ_XP is ignored).
pub fn unconditional_t1e(
    v_xc: f64,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
) -> Probability {
    let gamma = s.true_gamma_cph(hist);
    let num = null_drift(gamma, m, c, s.lambda0) - alpha.z * statistic_variance(v_xc, hist, m, c).sqrt();
    Probability::clamped(phi(num / unconditional_variance(v_xc, hist, m, c).sqrt()))
}

/// Conditional power, holding γ̂_CP,H at its observed value.
pub fn conditional_power(
    v_xc: f64,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
) -> Probability {
    let num = drift(hist.gamma_hat, m, c, s) - alpha.z * statistic_variance(v_xc, hist, m, c).sqrt();
    Probability::clamped(phi(num / v_xc.sqrt()))
}

pub fn conditional_t1e(
    v_xc: f64,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
) -> Probability {
    let num = null_drift(hist.gamma_hat, m, c, s.lambda0) - alpha.z * statistic_variance(v_xc, hist, m, c).sqrt();
    Probability::clamped(phi(num / v_xc.sqrt()))
}

/// γ_XP at the boundary of the scientific null: Δ₀ + f(1+λ₀)γ_CP,H.
pub fn null_boundary_gamma_xp(gamma_cph: f64, c: &SuccessCriterion, lambda0: f64) -> f64 {
    c.delta0 + c.f * (1.0 + lambda0) * gamma_cph
}

/// σ², the variance of T at the operational null boundary.
pub fn null_statistic_variance(v_xc: f64, hist: &HistoricalEvidence, m: &MethodSpec, c: &SuccessCriterion) -> f64 {
    unconditional_variance(v_xc, hist, m, c) / statistic_variance(v_xc, hist, m, c)
}

/// Tolerable non-constancy λ₀,min: the smallest λ₀ at which unconditional
/// type-I error stays at or below α. Uses γ̂_CP,H for the true effect.
pub fn lambda0_min(
    v_xc: f64,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    alpha: Alpha,
) -> Result<f64> {
    hist.require_efficacious()?;
    let gap = statistic_variance(v_xc, hist, m, c).sqrt() - unconditional_variance(v_xc, hist, m, c).sqrt();
    Ok(m.lambda1 + gap / ((1.0 - c.f) * hist.gamma_hat) * alpha.z)
}

/// Lowest control PE in the target population for which type-I error stays
/// controlled: 1 − exp((1+λ₀,min)γ̂_CP,H).
pub fn controlled_non_constancy_pe(lambda0_min: f64, hist: &HistoricalEvidence) -> Result<PreventionEfficacy> {
    crate::scales::loghr_to_pe(LogHrEffect((1.0 + lambda0_min) * hist.gamma_hat))
}

/// Supremum of unconditional power over all trial precisions.
pub fn max_unconditional_power(
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
) -> Probability {
    let gamma = s.true_gamma_cph(hist);
    let eps = (1.0 - c.f) * tilde_v_cph(m, hist).sqrt();
    Probability::clamped(phi(-m.u * alpha.z + drift(gamma, m, c, s) / eps))
}

/// Whether some trial precision yields conditional power above 50%.
pub fn detectable_with_conditional_power(
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
) -> bool {
    let g = hist.gamma_hat;
    let bound = c.delta0 + (1.0 + s.lambda0) * g
        - (1.0 - c.f) * (1.0 + m.lambda1) * (g + m.u * alpha.z * hist.se);
    s.gamma_xp < bound
}

/// Whether some trial precision yields unconditional power of at least 1 − β.
pub fn detectable_with_unconditional_power(
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
    alpha: Alpha,
    beta: f64,
) -> Result<bool> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::invalid("beta", format!("{beta} is not in (0, 0.5)")));
    }
    let g = s.true_gamma_cph(hist);
    let z_beta = -quantile_unchecked(beta);
    let bound = c.delta0 + (1.0 + s.lambda0) * g
        - (1.0 - c.f) * ((1.0 + m.lambda1) * g + (m.u * alpha.z + z_beta) * tilde_v_cph(m, hist).sqrt());
    Ok(s.gamma_xp < bound)
}

/// Largest λ₁ for which unconditional type-I error stays below 50% for every
/// trial precision, given the true λ₀ and unifying parameter `u`.
pub fn lambda1_admissible_bound(hist: &HistoricalEvidence, u: f64, lambda0: f64, alpha: Alpha) -> Result<f64> {
    let shift = u * alpha.z * hist.se;
    let upper = hist.gamma_hat + shift;
    if upper.is_nan() || upper >= 0.0 {
        return Err(Error::precondition(format!(
            "historical control not demonstrably effective at u = {u}, alpha = {}: \
             gamma_hat + u*Z*se = {upper} is not negative",
            alpha.value
        )));
    }
    Ok(lambda0 - (1.0 + lambda0) * shift / upper)
}

/// Maps Snapinn's discounting statistic `T_{v,w}` into the framework.
///
/// The mapped `u` depends on the trial precision `v_xc`.
pub fn snapinn_to_framework(
    v: f64,
    w: f64,
    v_xc: f64,
    hist: &HistoricalEvidence,
) -> Result<(MethodSpec, SuccessCriterion)> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid("v", format!("{v} must be non-negative")));
    }
    if !(w.is_finite() && (0.0..1.0).contains(&w)) {
        return Err(Error::domain(format!("snapinn weight w must be in [0, 1), got {w}")));
    }
    if !(v_xc.is_finite() && v_xc > 0.0) {
        return Err(Error::invalid("v_xc", format!("{v_xc} must be positive")));
    }
    let u = (1.0 + 2.0 * v * v_xc.sqrt() / ((1.0 - w) * hist.se)).sqrt();
    let method = MethodSpec::new(format!("Snapinn v={v}, w={w}"), u, -w, MarginVariance::RandomMargin)?;
    Ok((method, SuccessCriterion::new(0.0, 0.0)?))
}
