use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scales::PreventionEfficacy;

/// Event-time assumptions shared by both arms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialModel {
    /// Placebo incidence per person-year.
    pub placebo_incidence: f64,
    /// Annual loss-to-follow-up proportion.
    pub ltfu_annual: f64,
    pub duration_years: f64,
    /// Experimental to control allocation.
    pub allocation_ratio: f64,
}

impl TrialModel {
    pub fn new(placebo_incidence: f64, ltfu_annual: f64, duration_years: f64, allocation_ratio: f64) -> Result<Self> {
        let positive = |v: f64, field: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("{v} must be finite and positive")))
            }
        };
        positive(placebo_incidence, "placebo_incidence_rate")?;
        positive(duration_years, "trial_duration")?;
        positive(allocation_ratio, "allocation_ratio")?;
        if !(ltfu_annual.is_finite() && (0.0..1.0).contains(&ltfu_annual)) {
            return Err(Error::invalid("loss_to_followup", format!("{ltfu_annual} is not in [0, 1)")));
        }
        Ok(Self { placebo_incidence, ltfu_annual, duration_years, allocation_ratio })
    }

    /// Annual event rate in an arm with the given PE versus placebo.
    pub fn arm_rate(&self, pe: PreventionEfficacy) -> f64 {
        self.placebo_incidence * (1.0 - pe.get())
    }

    /// Exponential censoring hazard −ln(1 − ltfu).
    pub fn censoring_hazard(&self) -> f64 {
        -(-self.ltfu_annual).ln_1p()
    }
}

impl Default for TrialModel {
    fn default() -> Self {
        Self { placebo_incidence: 0.03, ltfu_annual: 0.075, duration_years: 2.0, allocation_ratio: 1.0 }
    }
}

/// Probability that a participant is observed to have an event during the
/// trial, given an annual event rate.
pub trait EventModel: Send + Sync {
    fn name(&self) -> &str;
    fn event_probability(&self, rate: f64, model: &TrialModel) -> Result<f64>;
}

impl fmt::Debug for dyn EventModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("event rate must be finite and non-negative, got {rate}")))
    }
}

/// Exponential event times competing with exponential loss to follow-up,
/// administratively censored at the trial duration.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompetingExponential;

impl EventModel for CompetingExponential {
    fn name(&self) -> &str {
        "exponential"
    }

    fn event_probability(&self, rate: f64, model: &TrialModel) -> Result<f64> {
        event_probability(rate, model)
    }
}

/// Expected events per participant as incidence × duration, reduced by the
/// annual loss-to-follow-up proportion: `h·T·(1 − ltfu)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProratedLoss;

impl EventModel for ProratedLoss {
    fn name(&self) -> &str {
        "prorated-loss"
    }

    fn event_probability(&self, rate: f64, model: &TrialModel) -> Result<f64> {
        check_rate(rate)?;
        Ok((rate * model.duration_years * (1.0 - model.ltfu_annual)).min(1.0))
    }
}

/// `[h/(h+ℓ)]·(1 − exp(−(h+ℓ)T))` with `ℓ = −ln(1 − ltfu)`.
pub fn event_probability(rate: f64, model: &TrialModel) -> Result<f64> {
    check_rate(rate)?;
    let total = rate + model.censoring_hazard();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(rate / total * -(-total * model.duration_years).exp_m1())
}

pub struct EventModelRegistry {
    models: BTreeMap<String, Arc<dyn EventModel>>,
}

impl Default for EventModelRegistry {
    fn default() -> Self {
        let mut r = Self { models: BTreeMap::new() };
        r.register(Arc::new(ProratedLoss));
        r.register(Arc::new(CompetingExponential));
        r
    }
}

impl EventModelRegistry {
    pub const DEFAULT: &'static str = "prorated-loss";

    pub fn register(&mut self, model: Arc<dyn EventModel>) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn resolve(&self, name: &str) -> Result<Arc<dyn EventModel>> {
        self.models.get(name.trim()).cloned().ok_or_else(|| {
            let known: Vec<_> = self.models.keys().map(String::as_str).collect();
            Error::invalid("event_model", format!("unknown event model '{name}'; expected one of: {}", known.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub total: u64,
    pub exp: u64,
    pub ctr: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSize {
    pub total: u64,
    pub exp: u64,
    pub ctr: u64,
}

fn arm_probabilities(
    model: &TrialModel,
    pe_exp: PreventionEfficacy,
    pe_ctr: PreventionEfficacy,
    events: &dyn EventModel,
) -> Result<(f64, f64)> {
    let p_exp = events.event_probability(model.arm_rate(pe_exp), model)?;
    let p_ctr = events.event_probability(model.arm_rate(pe_ctr), model)?;
    if !(p_exp > 0.0 && p_ctr > 0.0) {
        return Err(Error::precondition(format!(
            "event probability is zero in at least one arm (exp {p_exp}, ctr {p_ctr})"
        )));
    }
    Ok((p_exp, p_ctr))
}

/// Events delivering precision `v_xc` under `V_XC = 1/d_X + 1/d_C`, with
/// `d_X : d_C` proportional to `r·P_X : P_C`. Each arm is rounded to the
/// nearest integer (at least one event).
pub fn events_from_variance(
    v_xc: f64,
    model: &TrialModel,
    pe_exp: PreventionEfficacy,
    pe_ctr: PreventionEfficacy,
    events: &dyn EventModel,
) -> Result<EventCounts> {
    if !(v_xc.is_finite() && v_xc > 0.0) {
        return Err(Error::invalid("v_xc", format!("{v_xc} must be positive")));
    }
    let (p_exp, p_ctr) = arm_probabilities(model, pe_exp, pe_ctr, events)?;
    let w_exp = model.allocation_ratio * p_exp;
    let w_ctr = p_ctr;
    let scale = (1.0 / w_exp + 1.0 / w_ctr) / v_xc;
    let exp = (scale * w_exp).round().max(1.0) as u64;
    let ctr = (scale * w_ctr).round().max(1.0) as u64;
    Ok(EventCounts { total: exp + ctr, exp, ctr })
}

/// Enrolment needed for the per-arm event counts: the control arm size is the
/// larger of the two arm requirements (rounded to nearest), and the
/// experimental arm follows the allocation ratio.
pub fn sample_size_from_events(
    ev: EventCounts,
    model: &TrialModel,
    pe_exp: PreventionEfficacy,
    pe_ctr: PreventionEfficacy,
    events: &dyn EventModel,
) -> Result<SampleSize> {
    let (p_exp, p_ctr) = arm_probabilities(model, pe_exp, pe_ctr, events)?;
    let r = model.allocation_ratio;
    let need = (ev.exp as f64 / (r * p_exp)).max(ev.ctr as f64 / p_ctr);
    let ctr = need.round().max(1.0);
    let exp = (r * ctr).round().max(1.0);
    Ok(SampleSize { total: (exp + ctr) as u64, exp: exp as u64, ctr: ctr as u64 })
}
