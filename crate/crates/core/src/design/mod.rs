//! Trial sizing: required precision, events, enrolment, and full design tables.

mod approach;
mod events;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use approach::{AdHocConditional, ApproachRegistry, DesignApproach, NovelUnconditional, TraditionalConditional};
pub use events::{
    event_probability, events_from_variance, sample_size_from_events, CompetingExponential, EventCounts,
    EventModel, EventModelRegistry, ProratedLoss, SampleSize, TrialModel,
};

use crate::error::{Error, Result};
use crate::framework::{
    controlled_non_constancy_pe, lambda0_min, max_unconditional_power, success_margin, unconditional_power, Alpha,
    HistoricalEvidence, MethodSpec, SuccessCriterion, TruthScenario,
};
use crate::scales::{LogHrEffect, PreventionEfficacy};

/// ln V_XC search interval; widened on demand.
const LOG_V_LO: f64 = -14.0;
const LOG_V_HI: f64 = 7.0;
const LOG_V_LIMIT: f64 = 60.0;

/// Formats a proportion as a percentage truncated to one decimal place, with
/// a trailing ".0" dropped: 0.9 → "90", 0.94752 → "94.7".
pub fn format_percent(p: f64) -> String {
    let tenths = (p * 1000.0 + 1e-6).floor() as i64;
    if tenths % 10 == 0 {
        format!("{}", tenths / 10)
    } else {
        format!("{}.{}", tenths / 10, (tenths % 10).abs())
    }
}

#[derive(Clone, Debug)]
pub struct DesignTarget {
    pub power: f64,
    pub alpha: Alpha,
    pub approach: Arc<dyn DesignApproach>,
}

impl DesignTarget {
    pub fn new(power: f64, alpha: Alpha, approach: Arc<dyn DesignApproach>) -> Result<Self> {
        if !(power > 0.5 && power < 1.0) {
            return Err(Error::invalid("power", format!("{power} is not in (0.5, 1)")));
        }
        Ok(Self { power, alpha, approach })
    }
}

/// Precision V_XC at which the approach's targeted power equals
/// `target.power`, found by bisection on ln V_XC.
pub fn solve_v_xc(
    target: &DesignTarget,
    hist: &HistoricalEvidence,
    m: &MethodSpec,
    c: &SuccessCriterion,
    s: &TruthScenario,
) -> Result<f64> {
    let approach = target.approach.as_ref();
    approach.check_feasible(hist, m, c, s, target.alpha, target.power)?;
    let excess = |log_v: f64| approach.power(log_v.exp(), hist, m, c, s, target.alpha) - target.power;

    let (mut lo, mut hi) = (LOG_V_LO, LOG_V_HI);
    while excess(lo) <= 0.0 {
        if lo <= -LOG_V_LIMIT {
            return Err(Error::Numerical(format!(
                "targeted power does not reach {} for V_XC down to exp({lo})",
                target.power
            )));
        }
        hi = lo;
        lo -= 7.0;
    }
    while excess(hi) >= 0.0 {
        if hi >= LOG_V_LIMIT {
            return Err(Error::Numerical(format!("targeted power stays above {} for V_XC up to exp({hi})", target.power)));
        }
        lo = hi;
        hi += 7.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * mid.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Everything except the method that determines a design row.
#[derive(Clone, Debug)]
pub struct DesignProblem {
    pub hist: HistoricalEvidence,
    pub criterion: SuccessCriterion,
    pub target: DesignTarget,
    pub trial: TrialModel,
    /// Experimental PE versus placebo under the design alternative.
    pub design_pe: PreventionEfficacy,
    /// λ₀ of the design scenario; U.power is reported here.
    pub lambda0: f64,
    /// λ₀ of the sensitivity scenario, if any.
    pub sens_lambda0: Option<f64>,
    pub event_model: Arc<dyn EventModel>,
}

impl DesignProblem {
    pub fn scenario(&self) -> Result<TruthScenario> {
        TruthScenario::new(self.lambda0, self.design_pe.to_loghr().get())
    }

    fn design_control_pe(&self, s: &TruthScenario) -> Result<PreventionEfficacy> {
        let s = self.target.approach.design_scenario(s);
        crate::scales::loghr_to_pe(LogHrEffect((1.0 + s.lambda0) * s.true_gamma_cph(&self.hist)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub method_name: String,
    pub u: f64,
    pub lambda1: f64,
    pub v_xc_solved: f64,
    pub margin_log_hr: f64,
    pub margin_hr: f64,
    pub rne_total: u64,
    pub rne_exp: u64,
    pub rne_ctr: u64,
    pub n_total: u64,
    pub n_exp: u64,
    pub n_ctr: u64,
    pub lambda0_min: f64,
    pub cnc_pe: f64,
    pub up0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_sens: Option<f64>,
    /// Control PE assumed when converting precision to events.
    pub control_pe_for_events: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DesignRow {
    Designed(DesignResult),
    Infeasible { method_name: String, reason: String },
}

impl DesignRow {
    pub fn method_name(&self) -> &str {
        match self {
            DesignRow::Designed(r) => &r.method_name,
            DesignRow::Infeasible { method_name, .. } => method_name,
        }
    }

    pub fn designed(&self) -> Option<&DesignResult> {
        match self {
            DesignRow::Designed(r) => Some(r),
            DesignRow::Infeasible { .. } => None,
        }
    }
}

pub fn design_method(problem: &DesignProblem, m: &MethodSpec) -> Result<DesignResult> {
    let hist = &problem.hist;
    let c = &problem.criterion;
    let alpha = problem.target.alpha;
    let s = problem.scenario()?;

    let v_xc = solve_v_xc(&problem.target, hist, m, c, &s)?;
    let pe_ctr = problem.design_control_pe(&s)?;
    let model = problem.event_model.as_ref();
    let ev = events_from_variance(v_xc, &problem.trial, problem.design_pe, pe_ctr, model)?;
    let n = sample_size_from_events(ev, &problem.trial, problem.design_pe, pe_ctr, model)?;
    let margin = success_margin(v_xc, hist, m, c, alpha);
    let l0min = lambda0_min(v_xc, hist, m, c, alpha)?;
    let cnc = controlled_non_constancy_pe(l0min, hist)?;
    let up0 = unconditional_power(v_xc, hist, m, c, &s, alpha).get();
    let up_sens = problem
        .sens_lambda0
        .map(|l0| unconditional_power(v_xc, hist, m, c, &s.with_lambda0(l0), alpha).get());

    Ok(DesignResult {
        method_name: m.name.clone(),
        u: m.u(),
        lambda1: m.lambda1(),
        v_xc_solved: v_xc,
        margin_log_hr: margin.get(),
        margin_hr: margin.hazard_ratio(),
        rne_total: ev.total,
        rne_exp: ev.exp,
        rne_ctr: ev.ctr,
        n_total: n.total,
        n_exp: n.exp,
        n_ctr: n.ctr,
        lambda0_min: l0min,
        cnc_pe: cnc.get(),
        up0,
        up_sens,
        control_pe_for_events: pe_ctr.get(),
    })
}

/// One row per method, in input order. Infeasible methods yield an
/// [`DesignRow::Infeasible`] row; other errors abort the table.
pub fn build_design_table(problem: &DesignProblem, methods: &[MethodSpec]) -> Result<Vec<DesignRow>> {
    methods
        .par_iter()
        .map(|m| match design_method(problem, m) {
            Ok(r) => Ok(DesignRow::Designed(r)),
            Err(e @ Error::Infeasible { .. }) => {
                Ok(DesignRow::Infeasible { method_name: m.name.clone(), reason: e.to_string() })
            }
            Err(e) => Err(e),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub pe: f64,
    pub method: String,
    pub f: f64,
    pub delta0: f64,
    pub max_up: f64,
}

/// Maximum unconditional power over a grid of design-alternative PEs, for every
/// (method, criterion) pair. Rows are grouped by criterion, then method, then PE.
pub fn max_power_curve(
    methods: &[MethodSpec],
    criteria: &[SuccessCriterion],
    hist: &HistoricalEvidence,
    pe_grid: &[PreventionEfficacy],
    lambda0: f64,
    alpha: Alpha,
) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(methods.len() * criteria.len() * pe_grid.len());
    for c in criteria {
        for m in methods {
            for pe in pe_grid {
                let s = TruthScenario::new(lambda0, pe.to_loghr().get())?;
                out.push(CurvePoint {
                    pe: pe.get(),
                    method: m.name.clone(),
                    f: c.f(),
                    delta0: c.delta0(),
                    max_up: max_unconditional_power(hist, m, c, &s, alpha).get(),
                });
            }
        }
    }
    Ok(out)
}
