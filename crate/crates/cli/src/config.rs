//! The JSON design document and its translation into library inputs.

use std::sync::Arc;

use nidesign::design::{
    ApproachRegistry, DesignApproach, DesignProblem, DesignTarget, EventModelRegistry,
    NovelUnconditional, TraditionalConditional, TrialModel,
};
use nidesign::mc::McLevel;
use nidesign::methods::recognise_pair;
use nidesign::{Alpha, HistoricalEvidence, MethodRegistry, MethodSpec, PreventionEfficacy, SuccessCriterion};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodEntry {
    Pair { u: f64, lambda1: f64 },
    Preset(String),
}

fn d_f_preserv() -> Option<f64> {
    Some(0.5)
}
fn d_null_pe() -> Option<f64> {
    Some(0.3)
}
fn d_zero() -> f64 {
    0.0
}
fn d_true() -> bool {
    true
}
fn d_one() -> f64 {
    1.0
}
fn d_power() -> f64 {
    0.9
}
fn d_alpha() -> f64 {
    0.025
}
fn d_incidence() -> f64 {
    0.03
}
fn d_ltfu() -> f64 {
    0.075
}
fn d_duration() -> f64 {
    2.0
}
fn d_event_model() -> String {
    EventModelRegistry::DEFAULT.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub methods: Vec<MethodEntry>,
    /// Preserved fraction for the preservation-of-effect table; `null` skips it.
    #[serde(default = "d_f_preserv")]
    pub f_preserv: Option<f64>,
    /// Null PE for the inferred-efficacy table; `null` skips it.
    #[serde(default = "d_null_pe")]
    pub null_pe: Option<f64>,
    pub design_alternative_pe: f64,
    pub hist_ac_pe: f64,
    pub hist_ac_effect_se: f64,
    #[serde(default = "d_zero")]
    pub lambda0_for_design: f64,
    #[serde(default = "d_true")]
    pub target_on_unconditional_power: bool,
    #[serde(default = "d_one")]
    pub allocation_ratio: f64,
    #[serde(default = "d_power")]
    pub power: f64,
    #[serde(default = "d_alpha")]
    pub sign_level: f64,
    #[serde(default)]
    pub lambda0_sens_analysis: Option<f64>,
    #[serde(default = "d_incidence")]
    pub placebo_incidence_rate: f64,
    #[serde(default = "d_ltfu")]
    pub loss_to_followup: f64,
    #[serde(default = "d_duration")]
    pub trial_duration: f64,
    /// Accepted for compatibility; `true` is rejected.
    #[serde(default)]
    pub correction: bool,
    /// Overrides `target_on_unconditional_power` when set, e.g. `"ad-hoc(0.12)"`.
    #[serde(default)]
    pub approach: Option<String>,
    #[serde(default = "d_event_model")]
    pub event_model: String,
    #[serde(default)]
    pub oc: Option<OcConfig>,
    #[serde(default)]
    pub power_curve: Option<CurveConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcConfig {
    pub v_xc: f64,
    pub lambda0_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default)]
    pub pe_grid: Option<Vec<f64>>,
    #[serde(default = "d_pe_from")]
    pub pe_from: f64,
    #[serde(default = "d_pe_to")]
    pub pe_to: f64,
    #[serde(default = "d_pe_step")]
    pub pe_step: f64,
}

fn d_pe_from() -> f64 {
    0.65
}
fn d_pe_to() -> f64 {
    0.98
}
fn d_pe_step() -> f64 {
    0.005
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { pe_grid: None, pe_from: d_pe_from(), pe_to: d_pe_to(), pe_step: d_pe_step() }
    }
}

impl CurveConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if let Some(g) = &self.pe_grid {
            if g.is_empty() {
                return Err(CliError::config("power_curve.pe_grid", "must not be empty"));
            }
            return Ok(g.clone());
        }
        if !(self.pe_step > 0.0 && self.pe_from <= self.pe_to) {
            return Err(CliError::config("power_curve", "need pe_from <= pe_to and pe_step > 0"));
        }
        let n = ((self.pe_to - self.pe_from) / self.pe_step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| round_grid(self.pe_from + i as f64 * self.pe_step)).collect())
    }
}

/// Removes accumulated floating error from grid points (to 1e-10).
fn round_grid(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimScenario {
    /// The design alternative.
    Design,
    /// The boundary of the scientific null at the design λ₀.
    NullBoundary,
}

fn d_reps() -> u64 {
    100_000
}
fn d_seed() -> u64 {
    20_240_601
}
fn d_level() -> McLevel {
    McLevel::EstimateLevel
}
fn d_scenario() -> SimScenario {
    SimScenario::Design
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "d_level")]
    pub level: McLevel,
    #[serde(default = "d_scenario")]
    pub scenario: SimScenario,
    #[serde(default = "d_reps")]
    pub replications: u64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Fixed precision for estimate-level runs; defaults to each solved design.
    #[serde(default)]
    pub v_xc: Option<f64>,
    /// λ₀ of the simulated truth; defaults to `lambda0_for_design`.
    #[serde(default)]
    pub lambda0: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            level: d_level(),
            scenario: d_scenario(),
            replications: d_reps(),
            seed: d_seed(),
            v_xc: None,
            lambda0: None,
        }
    }
}

/// Criterion with its report heading.
#[derive(Clone, Debug)]
pub struct LabelledCriterion {
    pub label: String,
    pub criterion: SuccessCriterion,
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: DesignConfig,
    pub hist: HistoricalEvidence,
    pub alpha: Alpha,
    pub methods: Vec<MethodSpec>,
    pub criteria: Vec<LabelledCriterion>,
    pub approach: Arc<dyn DesignApproach>,
    pub trial: TrialModel,
    pub design_pe: PreventionEfficacy,
}

impl DesignConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serialisable")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        if self.correction {
            return Err(CliError::config("correction", "interim-monitoring correction is not supported"));
        }
        if self.methods.is_empty() {
            return Err(CliError::config("methods", "at least one method is required"));
        }
        let hist_pe = PreventionEfficacy::new(self.hist_ac_pe).map_err(at("hist_ac_pe"))?;
        let hist = HistoricalEvidence::from_pe(hist_pe, self.hist_ac_effect_se).map_err(at("hist_ac_effect_se"))?;
        let alpha = Alpha::new(self.sign_level).map_err(at("sign_level"))?;
        let design_pe = PreventionEfficacy::new(self.design_alternative_pe).map_err(at("design_alternative_pe"))?;
        let trial = TrialModel::new(
            self.placebo_incidence_rate,
            self.loss_to_followup,
            self.trial_duration,
            self.allocation_ratio,
        )
        .map_err(CliError::from_core)?;

        let registry = MethodRegistry::default();
        let methods = self
            .methods
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                match entry {
                    MethodEntry::Pair { u, lambda1 } => recognise_pair(*u, *lambda1, &hist),
                    MethodEntry::Preset(name) => registry.resolve(name, &hist),
                }
                .map_err(|e| CliError::config_owned(format!("methods[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut criteria = Vec::new();
        if let Some(f) = self.f_preserv {
            criteria.push(LabelledCriterion {
                label: format!("Preserving {}% of the active control effect", nidesign::design::format_percent(f)),
                criterion: SuccessCriterion::preservation(f).map_err(|e| CliError::config("f_preserv", e.to_string()))?,
            });
        }
        if let Some(pe) = self.null_pe {
            let null = PreventionEfficacy::new(pe).map_err(|e| CliError::config("null_pe", e.to_string()))?;
            criteria.push(LabelledCriterion {
                label: format!("Inferred efficacy of {}%", nidesign::design::format_percent(pe)),
                criterion: SuccessCriterion::inferred_efficacy_pe(null)
                    .map_err(|e| CliError::config("null_pe", e.to_string()))?,
            });
        }
        if criteria.is_empty() {
            return Err(CliError::config("f_preserv", "f_preserv and null_pe are both null; nothing to report"));
        }

        let approach: Arc<dyn DesignApproach> = match &self.approach {
            Some(spec) => ApproachRegistry::default()
                .resolve(spec, &hist)
                .map_err(|e| CliError::config("approach", e.to_string()))?,
            None if self.target_on_unconditional_power => Arc::new(NovelUnconditional),
            None => Arc::new(TraditionalConditional),
        };
        DesignTarget::new(self.power, alpha, approach.clone()).map_err(at("power"))?;
        EventModelRegistry::default().resolve(&self.event_model).map_err(at("event_model"))?;
        if let Some(l0) = self.lambda0_sens_analysis {
            if l0.is_nan() || l0 <= -1.0 {
                return Err(CliError::config("lambda0_sens_analysis", format!("{l0} must be above -1")));
            }
        }
        if self.lambda0_for_design.is_nan() || self.lambda0_for_design <= -1.0 {
            return Err(CliError::config("lambda0_for_design", "must be above -1"));
        }

        Ok(Resolved { config: self.clone(), hist, alpha, methods, criteria, approach, trial, design_pe })
    }
}

impl Resolved {
    pub fn problem(&self, criterion: &SuccessCriterion) -> DesignProblem {
        DesignProblem {
            hist: self.hist,
            criterion: *criterion,
            target: DesignTarget::new(self.config.power, self.alpha, self.approach.clone()).expect("validated"),
            trial: self.trial,
            design_pe: self.design_pe,
            lambda0: self.config.lambda0_for_design,
            sens_lambda0: self.config.lambda0_sens_analysis,
            event_model: EventModelRegistry::default().resolve(&self.config.event_model).expect("validated"),
        }
    }

    /// Control PE assumed by the sensitivity scenario.
    pub fn sensitivity_pe(&self) -> Option<f64> {
        self.config
            .lambda0_sens_analysis
            .map(|l0| -((1.0 + l0) * self.hist.gamma_hat()).exp_m1())
    }
}

/// Attaches the config field name to a library error.
fn at(field: &'static str) -> impl Fn(nidesign::Error) -> CliError {
    move |e| CliError::config(field, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "methods": [{"u": 1, "lambda1": 0}, "95-95"],
        "design_alternative_pe": 0.95,
        "hist_ac_pe": 0.928,
        "hist_ac_effect_se": 0.61
    }"#;

    #[test]
    fn defaults_are_filled() {
        let c = DesignConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.f_preserv, Some(0.5));
        assert_eq!(c.null_pe, Some(0.3));
        assert!(c.target_on_unconditional_power);
        assert_eq!((c.power, c.sign_level), (0.9, 0.025));
        assert_eq!((c.placebo_incidence_rate, c.loss_to_followup, c.trial_duration), (0.03, 0.075, 2.0));
        assert_eq!(c.lambda0_sens_analysis, None);
        assert_eq!(c.event_model, "prorated-loss");
        let r = c.resolve().unwrap();
        assert_eq!(r.methods[0].name, "Traditional SM");
        assert_eq!(r.methods[1].name, "95-95 method");
        assert_eq!(r.criteria.len(), 2);
        assert_eq!(r.criteria[0].label, "Preserving 50% of the active control effect");
        assert_eq!(r.criteria[1].label, "Inferred efficacy of 30%");
    }

    #[test]
    fn round_trip_makes_defaults_explicit() {
        let c = DesignConfig::from_json(MINIMAL).unwrap();
        let json = c.to_json();
        assert!(json.contains("\"loss_to_followup\": 0.075"));
        assert_eq!(DesignConfig::from_json(&json).unwrap(), c);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let check = |patch: &str, field: &str| {
            let text = MINIMAL.replacen('{', &format!("{{ {patch},"), 1);
            let err = DesignConfig::from_json(&text).and_then(|c| c.resolve().map(|_| ())).unwrap_err();
            assert!(err.to_string().contains(field), "{err} should mention {field}");
        };
        check(r#""correction": true"#, "correction");
        check(r#""sign_level": 0.7"#, "alpha");
        check(r#""loss_to_followup": 1.0"#, "loss_to_followup");
        check(r#""approach": "sideways""#, "approach");
        check(r#""event_model": "weibull""#, "event_model");
        check(r#""unknown_knob": 1"#, "unknown_knob");
        let empty = MINIMAL.replace(r#"[{"u": 1, "lambda1": 0}, "95-95"]"#, "[]");
        let err = DesignConfig::from_json(&empty).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("methods"));
        let bad = MINIMAL.replace(r#""95-95""#, r#""ba-sm(0.3)""#);
        let err = DesignConfig::from_json(&bad).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("methods[1]"), "{err}");
    }

    #[test]
    fn grid_generation() {
        let g = CurveConfig::default().grid().unwrap();
        assert_eq!(g.len(), 67);
        assert_eq!(g[0], 0.65);
        assert_eq!(*g.last().unwrap(), 0.98);
        assert!(g.contains(&0.95) && g.contains(&0.9));
    }
}
