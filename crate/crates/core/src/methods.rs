//! Named points of the method family and a registry that resolves them from
//! strings such as `"ba-sm(-0.23)"` or `"fixed-margin(0.1)"`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framework::{HistoricalEvidence, MarginVariance, MethodSpec};
use crate::statdist::quantile_unchecked;

/// Relative tolerance used when recognising a raw `(u, λ₁)` pair as a preset.
const RECOGNITION_RTOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum PresetId {
    TraditionalSynthesis,
    BiasAdjustedSynthesis { lambda1: f64 },
    OdemDavis { lambda1: f64 },
    FixedMargin { theta: f64 },
    Custom { u: f64, lambda1: f64 },
}

impl PresetId {
    pub fn build(&self, hist: &HistoricalEvidence) -> Result<MethodSpec> {
        match *self {
            PresetId::TraditionalSynthesis => Ok(make_traditional_synthesis()),
            PresetId::BiasAdjustedSynthesis { lambda1 } => make_bias_adjusted_synthesis(lambda1),
            PresetId::OdemDavis { lambda1 } => make_odem_davis(lambda1),
            PresetId::FixedMargin { theta } => make_fixed_margin(theta, hist),
            PresetId::Custom { u, lambda1 } => make_custom(u, lambda1),
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PresetId::TraditionalSynthesis => write!(f, "traditional-sm"),
            PresetId::BiasAdjustedSynthesis { lambda1 } => write!(f, "ba-sm({lambda1})"),
            PresetId::OdemDavis { lambda1 } => write!(f, "odem-davis({lambda1})"),
            PresetId::FixedMargin { theta } if theta == 0.025 => write!(f, "95-95"),
            PresetId::FixedMargin { theta } if theta == 0.5 => write!(f, "0-95"),
            PresetId::FixedMargin { theta } => write!(f, "fixed-margin({theta})"),
            PresetId::Custom { u, lambda1 } => write!(f, "custom({u}, {lambda1})"),
        }
    }
}

fn percent_label(lambda1: f64) -> String {
    format!("{}", (lambda1 * 100.0).round() as i64)
}

pub fn make_traditional_synthesis() -> MethodSpec {
    MethodSpec::new("Traditional SM", 1.0, 0.0, MarginVariance::RandomMargin).expect("valid constants")
}

pub fn make_bias_adjusted_synthesis(lambda1: f64) -> Result<MethodSpec> {
    if !(lambda1 > -1.0 && lambda1 <= 0.0) {
        return Err(Error::domain(format!("bias-adjusted synthesis requires lambda1 in (-1, 0], got {lambda1}")));
    }
    let name = if lambda1 == 0.0 {
        "Traditional SM".to_string()
    } else {
        format!("BA-SM, lm1={}", percent_label(lambda1))
    };
    MethodSpec::new(name, 1.0, lambda1, MarginVariance::RandomMargin)
}

pub fn make_odem_davis(lambda1: f64) -> Result<MethodSpec> {
    if lambda1 == 0.0 {
        return Err(Error::domain("the Odem-Davis variant is only meaningful when lambda1 != 0"));
    }
    if !(lambda1 > -1.0 && lambda1 < 0.0) {
        return Err(Error::domain(format!("Odem-Davis requires lambda1 in (-1, 0), got {lambda1}")));
    }
    let name = format!("OD, lm1={}", percent_label(lambda1));
    MethodSpec::new(name, 1.0 / (1.0 + lambda1), lambda1, MarginVariance::RandomMargin)
}

/// Fixed-margin method built from the one-sided `1 − θ` historical
/// confidence bound: `λ₁ = Z_{1−θ}·se/γ̂`.
pub fn make_fixed_margin(theta: f64, hist: &HistoricalEvidence) -> Result<MethodSpec> {
    if !(theta > 0.0 && theta <= 0.5) {
        return Err(Error::domain(format!("fixed-margin theta must be in (0, 0.5], got {theta}")));
    }
    if hist.gamma_hat() == 0.0 {
        return Err(Error::domain("fixed-margin lambda1 is undefined when gamma_hat = 0"));
    }
    let z = if theta == 0.5 { 0.0 } else { -quantile_unchecked(theta) };
    let lambda1 = z * hist.se() / hist.gamma_hat();
    let name = if theta == 0.5 {
        "0-95 method".to_string()
    } else if theta == 0.025 {
        "95-95 method".to_string()
    } else {
        format!("Fixed margin, theta={theta}")
    };
    MethodSpec::new(name, 0.0, lambda1, MarginVariance::FixedMargin)
}

pub fn make_custom(u: f64, lambda1: f64) -> Result<MethodSpec> {
    MethodSpec::from_pair(format!("u={u}, lm1={lambda1}"), u, lambda1)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RECOGNITION_RTOL * a.abs().max(b.abs()).max(1e-300)
}

/// Builds a method from a raw `(u, λ₁)` pair, keeping the values as given and
/// naming it after the preset it matches, if any.
///
/// Fixed-margin pairs are recognised when `λ₁γ̂/se` is within a relative 1e-4
/// of `Z_{0.975}`, so the common shorthand `1.96·se/γ̂` is named "95-95 method".
pub fn recognise_pair(u: f64, lambda1: f64, hist: &HistoricalEvidence) -> Result<MethodSpec> {
    let name = if u == 0.0 {
        let z = lambda1 * hist.gamma_hat() / hist.se();
        if lambda1 == 0.0 {
            Some("0-95 method".to_string())
        } else if close(z, -quantile_unchecked(0.025)) {
            Some("95-95 method".to_string())
        } else {
            None
        }
    } else if u == 1.0 && lambda1 == 0.0 {
        Some("Traditional SM".to_string())
    } else if u == 1.0 && lambda1 > -1.0 && lambda1 < 0.0 {
        Some(format!("BA-SM, lm1={}", percent_label(lambda1)))
    } else if lambda1 > -1.0 && lambda1 < 0.0 && close(u, 1.0 / (1.0 + lambda1)) {
        Some(format!("OD, lm1={}", percent_label(lambda1)))
    } else {
        None
    };
    match name {
        Some(name) => MethodSpec::from_pair(name, u, lambda1),
        None => make_custom(u, lambda1),
    }
}

/// A family of methods addressable by name with numeric arguments.
pub trait MethodFamily: Send + Sync {
    fn name(&self) -> &str;
    fn usage(&self) -> &str;
    fn build(&self, args: &[f64], hist: &HistoricalEvidence) -> Result<MethodSpec>;
}

fn expect_args(family: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::invalid("method", format!("{family} takes {n} argument(s), got {}", args.len())))
    }
}

struct Preset<F> {
    name: &'static str,
    usage: &'static str,
    arity: usize,
    make: F,
}

impl<F> MethodFamily for Preset<F>
where
    F: Fn(&[f64]) -> PresetId + Send + Sync,
{
    fn name(&self) -> &str {
        self.name
    }

    fn usage(&self) -> &str {
        self.usage
    }

    fn build(&self, args: &[f64], hist: &HistoricalEvidence) -> Result<MethodSpec> {
        expect_args(self.name, args, self.arity)?;
        (self.make)(args).build(hist)
    }
}

/// Name-keyed collection of method families.
pub struct MethodRegistry {
    families: BTreeMap<String, Box<dyn MethodFamily>>,
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Preset {
            name: "traditional-sm",
            usage: "traditional-sm",
            arity: 0,
            make: |_: &[f64]| PresetId::TraditionalSynthesis,
        });
        r.register(Preset {
            name: "ba-sm",
            usage: "ba-sm(lambda1)",
            arity: 1,
            make: |a: &[f64]| PresetId::BiasAdjustedSynthesis { lambda1: a[0] },
        });
        r.register(Preset {
            name: "odem-davis",
            usage: "odem-davis(lambda1)",
            arity: 1,
            make: |a: &[f64]| PresetId::OdemDavis { lambda1: a[0] },
        });
        r.register(Preset {
            name: "fixed-margin",
            usage: "fixed-margin(theta)",
            arity: 1,
            make: |a: &[f64]| PresetId::FixedMargin { theta: a[0] },
        });
        r.register(Preset {
            name: "95-95",
            usage: "95-95",
            arity: 0,
            make: |_: &[f64]| PresetId::FixedMargin { theta: 0.025 },
        });
        r.register(Preset {
            name: "0-95",
            usage: "0-95",
            arity: 0,
            make: |_: &[f64]| PresetId::FixedMargin { theta: 0.5 },
        });
        r.register(Preset {
            name: "custom",
            usage: "custom(u, lambda1)",
            arity: 2,
            make: |a: &[f64]| PresetId::Custom { u: a[0], lambda1: a[1] },
        });
        r
    }
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self { families: BTreeMap::new() }
    }

    /// Adds a family, replacing any existing one with the same name.
    pub fn register(&mut self, family: impl MethodFamily + 'static) {
        self.families.insert(family.name().to_string(), Box::new(family));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.families.keys().map(String::as_str)
    }

    pub fn usages(&self) -> Vec<&str> {
        self.families.values().map(|f| f.usage()).collect()
    }

    /// Resolves `"name"` or `"name(a, b, ...)"`.
    pub fn resolve(&self, spec: &str, hist: &HistoricalEvidence) -> Result<MethodSpec> {
        let (name, args) = parse_call(spec, "method")?;
        let family = self.families.get(name).ok_or_else(|| {
            Error::invalid(
                "method",
                format!("unknown method '{name}'; expected one of: {}", self.usages().join(", ")),
            )
        })?;
        family.build(&args, hist)
    }
}

pub(crate) fn parse_call<'a>(spec: &'a str, field: &'static str) -> Result<(&'a str, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::invalid(field, format!("unbalanced parentheses in '{spec}'")))?;
    let args = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(field, format!("'{s}' is not a number in '{spec}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spec[..open].trim(), args))
}

/// The five methods compared throughout: traditional synthesis, bias-adjusted
/// and Odem-Davis synthesis at λ₁ = −0.23, and the 95-95 and 0-95 fixed-margin
/// methods.
pub fn standard_five(hist: &HistoricalEvidence) -> Result<Vec<MethodSpec>> {
    Ok(vec![
        make_traditional_synthesis(),
        make_bias_adjusted_synthesis(-0.23)?,
        make_odem_davis(-0.23)?,
        make_fixed_margin(0.025, hist)?,
        make_fixed_margin(0.5, hist)?,
    ])
}
