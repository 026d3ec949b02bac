use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result, ViolatedBound};
use crate::framework::{
    conditional_power, detectable_with_conditional_power, detectable_with_unconditional_power,
    unconditional_power, Alpha, HistoricalEvidence, MethodSpec, SuccessCriterion, TruthScenario,
};
use crate::scales::PreventionEfficacy;

/// How the required precision is chosen: which power formula is targeted and
/// under which assumed truth.
pub trait DesignApproach: Send + Sync {
    fn name(&self) -> String;

    /// Sentence fragment used in report headers, e.g.
    /// "Design approach targeting 90% conditional power".
    fn describe(&self, power: f64) -> String;

    /// The scenario under which the design is sized, derived from the
    /// caller's design scenario.
    fn design_scenario(&self, s: &TruthScenario) -> TruthScenario {
        *s
    }

    fn targets_unconditional(&self) -> bool;

    /// The targeted power at precision `v_xc`, under `design_scenario(s)`.
    fn power(
        &self,
        v_xc: f64,
        hist: &HistoricalEvidence,
        m: &MethodSpec,
        c: &SuccessCriterion,
        s: &TruthScenario,
        alpha: Alpha,
    ) -> f64 {
        let s = self.design_scenario(s);
        if self.targets_unconditional() {
            unconditional_power(v_xc, hist, m, c, &s, alpha).get()
        } else {
            conditional_power(v_xc, hist, m, c, &s, alpha).get()
        }
    }

    /// Errors with the violated bound when no precision reaches `power`.
    fn check_feasible(
        &self,
        hist: &HistoricalEvidence,
        m: &MethodSpec,
        c: &SuccessCriterion,
        s: &TruthScenario,
        alpha: Alpha,
        power: f64,
    ) -> Result<()> {
        let s = self.design_scenario(s);
        let (ok, bound) = if self.targets_unconditional() {
            (
                detectable_with_unconditional_power(hist, m, c, &s, alpha, 1.0 - power)?,
                ViolatedBound::UnconditionalDetectability,
            )
        } else {
            (detectable_with_conditional_power(hist, m, c, &s, alpha), ViolatedBound::ConditionalDetectability)
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Infeasible { bound })
        }
    }
}

impl fmt::Debug for dyn DesignApproach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn percent(p: f64) -> String {
    crate::design::format_percent(p)
}

/// Conditional power at the design scenario.
#[derive(Clone, Copy, Debug, Default)]
pub struct TraditionalConditional;

impl DesignApproach for TraditionalConditional {
    fn name(&self) -> String {
        "traditional".into()
    }

    fn describe(&self, power: f64) -> String {
        format!("Design approach targeting {}% conditional power", percent(power))
    }

    fn targets_unconditional(&self) -> bool {
        false
    }
}

/// Unconditional power at the design scenario.
#[derive(Clone, Copy, Debug, Default)]
pub struct NovelUnconditional;

impl DesignApproach for NovelUnconditional {
    fn name(&self) -> String {
        "novel".into()
    }

    fn describe(&self, power: f64) -> String {
        format!("Design approach targeting {}% unconditional power", percent(power))
    }

    fn targets_unconditional(&self) -> bool {
        true
    }
}

/// Conditional power under an assumed, discounted control effect: the
/// scenario's λ₀ is replaced by `assumed_lambda0`.
#[derive(Clone, Copy, Debug)]
pub struct AdHocConditional {
    pub assumed_lambda0: f64,
    /// Control PE implied by `assumed_lambda0`, for reporting.
    pub assumed_control_pe: f64,
}

impl AdHocConditional {
    pub fn from_lambda0(lambda0: f64, hist: &HistoricalEvidence) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > -1.0) {
            return Err(Error::invalid("adhoc_lambda0", format!("{lambda0} must be above -1")));
        }
        let pe = -((1.0 + lambda0) * hist.gamma_hat()).exp_m1();
        Ok(Self { assumed_lambda0: lambda0, assumed_control_pe: pe })
    }

    /// λ₀ chosen so that (1+λ₀)γ̂_CP,H equals the log HR of `pe`.
    pub fn from_control_pe(pe: PreventionEfficacy, hist: &HistoricalEvidence) -> Result<Self> {
        hist.require_efficacious()?;
        let lambda0 = TruthScenario::lambda0_for_control_pe(pe, hist.gamma_hat());
        Self::from_lambda0(lambda0, hist)
    }
}

impl DesignApproach for AdHocConditional {
    fn name(&self) -> String {
        format!("ad-hoc({})", self.assumed_lambda0)
    }

    fn describe(&self, power: f64) -> String {
        format!(
            "Design approach targeting {}% conditional power assuming an active control efficacy of {}%",
            percent(power),
            percent(self.assumed_control_pe)
        )
    }

    fn design_scenario(&self, s: &TruthScenario) -> TruthScenario {
        s.with_lambda0(self.assumed_lambda0)
    }

    fn targets_unconditional(&self) -> bool {
        false
    }
}

type ApproachFactory = Box<dyn Fn(&[f64], &HistoricalEvidence) -> Result<Arc<dyn DesignApproach>> + Send + Sync>;

/// Name-keyed design approaches. `"ad-hoc(λ₀)"` takes the assumed λ₀.
pub struct ApproachRegistry {
    factories: BTreeMap<String, ApproachFactory>,
}

impl Default for ApproachRegistry {
    fn default() -> Self {
        let mut r = Self { factories: BTreeMap::new() };
        r.register("traditional", |args, _| {
            no_args("traditional", args)?;
            Ok(Arc::new(TraditionalConditional))
        });
        r.register("novel", |args, _| {
            no_args("novel", args)?;
            Ok(Arc::new(NovelUnconditional))
        });
        r.register("ad-hoc", |args, hist| match args {
            [l0] => Ok(Arc::new(AdHocConditional::from_lambda0(*l0, hist)?)),
            _ => Err(Error::invalid("approach", "ad-hoc takes one argument: the assumed lambda0")),
        });
        r
    }
}

fn no_args(name: &str, args: &[f64]) -> Result<()> {
    if args.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid("approach", format!("{name} takes no arguments")))
    }
}

impl ApproachRegistry {
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&[f64], &HistoricalEvidence) -> Result<Arc<dyn DesignApproach>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn resolve(&self, spec: &str, hist: &HistoricalEvidence) -> Result<Arc<dyn DesignApproach>> {
        let (name, args) = crate::methods::parse_call(spec, "approach")?;
        let factory = self.factories.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::invalid("approach", format!("unknown approach '{name}'; expected one of: {}", known.join(", ")))
        })?;
        factory(&args, hist)
    }
}
