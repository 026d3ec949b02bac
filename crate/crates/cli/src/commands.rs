//! The four subcommands. Each returns the rendered report as a string.

use std::fmt::Write as _;

use nidesign::design::{build_design_table, design_method, max_power_curve, DesignRow};
use nidesign::framework::{
    conditional_power, conditional_t1e, lambda0_min, null_boundary_gamma_xp, success_margin, unconditional_power,
    unconditional_t1e,
};
use nidesign::mc::{simulate_estimate_level, simulate_trial_level, McConfig, McLevel, McResult};
use nidesign::{PreventionEfficacy, TruthScenario};
use serde::Serialize;

use crate::config::{CurveConfig, Resolved, SimScenario, SimulateConfig};
use crate::error::CliError;
use crate::render::{fixed, to_csv, to_json, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}'; expected text, markdown, csv or json")),
        }
    }
}

/// Agreement threshold for the simulation verdict, in MC standard errors.
pub const SIM_SIGMA: f64 = 3.0;

const DESIGN_HEADERS: [&str; 11] = [
    "Method",
    "NI margin",
    "RNE",
    "Exp",
    "Ctr",
    "Sample size",
    "Exp.arm",
    "Ctr.arm",
    "CNC",
    "U.power",
    "U.power (SA)",
];

#[derive(Serialize)]
struct DesignTableReport<'a> {
    criterion: &'a str,
    f: f64,
    delta0: f64,
    rows: Vec<DesignRow>,
}

#[derive(Serialize)]
struct DesignReport<'a> {
    approach: String,
    approach_description: String,
    event_model: &'a str,
    sensitivity_lambda0: Option<f64>,
    sensitivity_control_pe: Option<f64>,
    tables: Vec<DesignTableReport<'a>>,
}

#[derive(Serialize)]
struct DesignCsvRow<'a> {
    criterion: &'a str,
    method: &'a str,
    status: &'static str,
    u: Option<f64>,
    lambda1: Option<f64>,
    v_xc: Option<f64>,
    margin_log_hr: Option<f64>,
    margin_hr: Option<f64>,
    rne_total: Option<u64>,
    rne_exp: Option<u64>,
    rne_ctr: Option<u64>,
    n_total: Option<u64>,
    n_exp: Option<u64>,
    n_ctr: Option<u64>,
    lambda0_min: Option<f64>,
    cnc_pe: Option<f64>,
    up0: Option<f64>,
    up_sens: Option<f64>,
    control_pe_for_events: Option<f64>,
    reason: Option<&'a str>,
}

impl<'a> DesignCsvRow<'a> {
    fn new(criterion: &'a str, row: &'a DesignRow) -> Self {
        match row {
            DesignRow::Designed(r) => Self {
                criterion,
                method: &r.method_name,
                status: "designed",
                u: Some(r.u),
                lambda1: Some(r.lambda1),
                v_xc: Some(r.v_xc_solved),
                margin_log_hr: Some(r.margin_log_hr),
                margin_hr: Some(r.margin_hr),
                rne_total: Some(r.rne_total),
                rne_exp: Some(r.rne_exp),
                rne_ctr: Some(r.rne_ctr),
                n_total: Some(r.n_total),
                n_exp: Some(r.n_exp),
                n_ctr: Some(r.n_ctr),
                lambda0_min: Some(r.lambda0_min),
                cnc_pe: Some(r.cnc_pe),
                up0: Some(r.up0),
                up_sens: r.up_sens,
                control_pe_for_events: Some(r.control_pe_for_events),
                reason: None,
            },
            DesignRow::Infeasible { method_name, reason } => Self {
                criterion,
                method: method_name,
                status: "infeasible",
                u: None,
                lambda1: None,
                v_xc: None,
                margin_log_hr: None,
                margin_hr: None,
                rne_total: None,
                rne_exp: None,
                rne_ctr: None,
                n_total: None,
                n_exp: None,
                n_ctr: None,
                lambda0_min: None,
                cnc_pe: None,
                up0: None,
                up_sens: None,
                control_pe_for_events: None,
                reason: Some(reason),
            },
        }
    }
}

fn design_table(rows: &[DesignRow], with_sens: bool) -> Table {
    let headers = if with_sens { &DESIGN_HEADERS[..] } else { &DESIGN_HEADERS[..10] };
    let mut t = Table::new(headers.iter().copied());
    for row in rows {
        let mut cells = match row {
            DesignRow::Designed(r) => vec![
                r.method_name.clone(),
                fixed(r.margin_hr, 2),
                r.rne_total.to_string(),
                r.rne_exp.to_string(),
                r.rne_ctr.to_string(),
                r.n_total.to_string(),
                r.n_exp.to_string(),
                r.n_ctr.to_string(),
                fixed(r.cnc_pe, 3),
                fixed(r.up0, 2),
                r.up_sens.map_or_else(|| "-".into(), |p| fixed(p, 2)),
            ],
            DesignRow::Infeasible { method_name, .. } => {
                let mut v = vec![method_name.clone(), "infeasible".into()];
                v.resize(DESIGN_HEADERS.len(), "-".into());
                v
            }
        };
        cells.truncate(headers.len());
        t.push(cells);
    }
    t
}

pub fn design(r: &Resolved, format: Format) -> Result<String, CliError> {
    let mut tables = Vec::with_capacity(r.criteria.len());
    for lc in &r.criteria {
        let rows = build_design_table(&r.problem(&lc.criterion), &r.methods)?;
        tables.push(DesignTableReport { criterion: &lc.label, f: lc.criterion.f(), delta0: lc.criterion.delta0(), rows });
    }
    let description = r.approach.describe(r.config.power);
    let sens_line = r
        .sensitivity_pe()
        .map(|pe| format!("Sensitivity analysis (SA) assumes an active control efficacy of {}%", nidesign::design::format_percent(pe)));
    let with_sens = sens_line.is_some();

    Ok(match format {
        Format::Text => {
            let mut out = String::from("=== Summary of Non-Inferiority Trial Design ===\n\nDesign Specifications:\n");
            let _ = writeln!(out, " • Approach : {description}");
            if let Some(s) = &sens_line {
                let _ = writeln!(out, " • Sensitivity analysis : {s}");
            }
            for t in &tables {
                let _ = write!(out, "\n--- NI criterion: {} ---\n\n\n", t.criterion);
                out.push_str(&design_table(&t.rows, with_sens).to_pipe());
            }
            out
        }
        Format::Markdown => {
            let mut out = String::from("# Summary of Non-Inferiority Trial Design\n\n## Design Specifications\n\n");
            let _ = writeln!(out, "- **Approach**: {description}");
            if let Some(s) = &sens_line {
                let _ = writeln!(out, "- **Sensitivity analysis**: {s}");
            }
            for t in &tables {
                let _ = write!(out, "\n## NI criterion: {}\n\n", t.criterion);
                out.push_str(&design_table(&t.rows, with_sens).to_pipe());
            }
            out
        }
        Format::Csv => {
            let rows: Vec<_> =
                tables.iter().flat_map(|t| t.rows.iter().map(move |row| DesignCsvRow::new(t.criterion, row))).collect();
            to_csv(&rows)?
        }
        Format::Json => to_json(&DesignReport {
            approach: r.approach.name(),
            approach_description: description,
            event_model: &r.config.event_model,
            sensitivity_lambda0: r.config.lambda0_sens_analysis,
            sensitivity_control_pe: r.sensitivity_pe(),
            tables,
        }),
    })
}

#[derive(Serialize)]
struct OcRow<'a> {
    criterion: &'a str,
    method: &'a str,
    lambda0: f64,
    unconditional_power: f64,
    conditional_power: f64,
    unconditional_t1e: f64,
    conditional_t1e: f64,
    margin_log_hr: f64,
    margin_hr: f64,
    lambda0_min: f64,
}

pub fn oc(r: &Resolved, format: Format) -> Result<String, CliError> {
    let oc = r.config.oc.as_ref().ok_or_else(|| CliError::config("oc", "the oc command needs an \"oc\" block"))?;
    if !(oc.v_xc.is_finite() && oc.v_xc > 0.0) {
        return Err(CliError::config("oc.v_xc", format!("{} must be positive", oc.v_xc)));
    }
    if oc.lambda0_grid.is_empty() {
        return Err(CliError::config("oc.lambda0_grid", "must not be empty"));
    }
    let gamma_xp = r.design_pe.to_loghr().get();
    let mut rows = Vec::new();
    for lc in &r.criteria {
        for m in &r.methods {
            let margin = success_margin(oc.v_xc, &r.hist, m, &lc.criterion, r.alpha);
            let l0min = lambda0_min(oc.v_xc, &r.hist, m, &lc.criterion, r.alpha)?;
            for &l0 in &oc.lambda0_grid {
                let s = TruthScenario::new(l0, gamma_xp)
                    .map_err(|e| CliError::config("oc.lambda0_grid", e.to_string()))?;
                let c = &lc.criterion;
                rows.push(OcRow {
                    criterion: &lc.label,
                    method: &m.name,
                    lambda0: l0,
                    unconditional_power: unconditional_power(oc.v_xc, &r.hist, m, c, &s, r.alpha).get(),
                    conditional_power: conditional_power(oc.v_xc, &r.hist, m, c, &s, r.alpha).get(),
                    unconditional_t1e: unconditional_t1e(oc.v_xc, &r.hist, m, c, &s, r.alpha).get(),
                    conditional_t1e: conditional_t1e(oc.v_xc, &r.hist, m, c, &s, r.alpha).get(),
                    margin_log_hr: margin.get(),
                    margin_hr: margin.hazard_ratio(),
                    lambda0_min: l0min,
                });
            }
        }
    }
    Ok(match format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows),
        Format::Text | Format::Markdown => {
            let mut t = Table::new([
                "Criterion", "Method", "lambda0", "U.power", "C.power", "U.t1e", "C.t1e", "NI margin", "lambda0_min",
            ]);
            for o in &rows {
                t.push(vec![
                    o.criterion.to_string(),
                    o.method.to_string(),
                    fixed(o.lambda0, 3),
                    fixed(o.unconditional_power, 4),
                    fixed(o.conditional_power, 4),
                    fixed(o.unconditional_t1e, 4),
                    fixed(o.conditional_t1e, 4),
                    fixed(o.margin_hr, 2),
                    fixed(o.lambda0_min, 4),
                ]);
            }
            let title = format!("V_XC = {}", oc.v_xc);
            if format == Format::Markdown {
                format!("# Operating characteristics\n\n{title}\n\n{}", t.to_pipe())
            } else {
                format!("=== Operating characteristics ===\n\n{title}\n\n{}", t.to_pipe())
            }
        }
    })
}

#[derive(Serialize)]
struct CurveRow<'a> {
    criterion: &'a str,
    method: &'a str,
    pe: f64,
    max_unconditional_power: f64,
}

pub fn power_curve(r: &Resolved, format: Format) -> Result<String, CliError> {
    let default = CurveConfig::default();
    let cfg = r.config.power_curve.as_ref().unwrap_or(&default);
    let grid = cfg
        .grid()?
        .into_iter()
        .map(|p| PreventionEfficacy::new(p).map_err(|e| CliError::config("power_curve", e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for lc in &r.criteria {
        let points = max_power_curve(
            &r.methods,
            std::slice::from_ref(&lc.criterion),
            &r.hist,
            &grid,
            r.config.lambda0_for_design,
            r.alpha,
        )?;
        rows.extend(points.into_iter().map(|p| (lc.label.as_str(), p)));
    }
    let records: Vec<_> = rows
        .iter()
        .map(|(label, p)| CurveRow { criterion: label, method: &p.method, pe: p.pe, max_unconditional_power: p.max_up })
        .collect();
    Ok(match format {
        Format::Csv => to_csv(&records)?,
        Format::Json => to_json(&records),
        Format::Text | Format::Markdown => {
            let mut t = Table::new(["Criterion", "Method", "PE", "Max U.power"]);
            for c in &records {
                t.push(vec![
                    c.criterion.to_string(),
                    c.method.to_string(),
                    fixed(c.pe, 3),
                    fixed(c.max_unconditional_power, 4),
                ]);
            }
            if format == Format::Markdown {
                format!("# Maximum unconditional power\n\n{}", t.to_pipe())
            } else {
                format!("=== Maximum unconditional power ===\n\n{}", t.to_pipe())
            }
        }
    })
}

#[derive(Serialize)]
struct SimRow<'a> {
    criterion: &'a str,
    method: &'a str,
    level: McLevel,
    scenario: SimScenario,
    lambda0: f64,
    gamma_xp: f64,
    v_xc: Option<f64>,
    n_exp: Option<u64>,
    n_ctr: Option<u64>,
    seed: u64,
    #[serde(flatten)]
    result: McResult,
    z_score: Option<f64>,
    pass: bool,
}

/// Overrides from the command line.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimOverrides {
    pub seed: Option<u64>,
    pub reps: Option<u64>,
}

pub fn simulate(r: &Resolved, format: Format, overrides: SimOverrides) -> Result<String, CliError> {
    let mut sc: SimulateConfig = r.config.simulate.clone().unwrap_or_default();
    if let Some(s) = overrides.seed {
        sc.seed = s;
    }
    if let Some(n) = overrides.reps {
        sc.replications = n;
    }
    if sc.replications == 0 {
        return Err(CliError::config("replications", "must be at least 1"));
    }
    if sc.level == McLevel::TrialLevel && sc.v_xc.is_some() {
        return Err(CliError::config("simulate.v_xc", "trial-level runs simulate the designed sample size"));
    }
    let lambda0 = sc.lambda0.unwrap_or(r.config.lambda0_for_design);
    let gamma_true = r.hist.gamma_hat();

    let mut rows = Vec::new();
    let mut index = 0u64;
    for lc in &r.criteria {
        let problem = r.problem(&lc.criterion);
        for m in &r.methods {
            let seed = sc.seed.wrapping_add(index);
            index += 1;
            let cfg = McConfig::new(sc.replications, seed, sc.level)?;
            let gamma_xp = match sc.scenario {
                SimScenario::Design => r.design_pe.to_loghr().get(),
                SimScenario::NullBoundary => null_boundary_gamma_xp(gamma_true, &lc.criterion, lambda0),
            };
            let truth = TruthScenario::new(lambda0, gamma_xp)?;
            let (v_xc, n) = match (sc.level, sc.v_xc) {
                (McLevel::EstimateLevel, Some(v)) => (v, None),
                _ => match design_method(&problem, m) {
                    Ok(d) => (d.v_xc_solved, Some((d.n_exp, d.n_ctr))),
                    Err(nidesign::Error::Infeasible { .. }) => continue,
                    Err(e) => return Err(e.into()),
                },
            };
            let result = match sc.level {
                McLevel::EstimateLevel => simulate_estimate_level(
                    &cfg, &truth, gamma_true, v_xc, r.hist.se(), m, &lc.criterion, r.alpha,
                )?,
                McLevel::TrialLevel => {
                    let (n_exp, n_ctr) = n.expect("trial level always designs");
                    simulate_trial_level(
                        &cfg, &r.trial, n_exp, n_ctr, &truth, gamma_true, r.hist.se(), m, &lc.criterion, r.alpha,
                    )?
                }
            };
            rows.push(SimRow {
                criterion: &lc.label,
                method: &m.name,
                level: sc.level,
                scenario: sc.scenario,
                lambda0,
                gamma_xp,
                v_xc: (sc.level == McLevel::EstimateLevel).then_some(v_xc),
                n_exp: n.map(|n| n.0).filter(|_| sc.level == McLevel::TrialLevel),
                n_ctr: n.map(|n| n.1).filter(|_| sc.level == McLevel::TrialLevel),
                seed,
                z_score: result.z_score(),
                pass: result.agrees_within(SIM_SIGMA).unwrap_or(false),
                result,
            });
        }
    }
    Ok(match format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows),
        Format::Text | Format::Markdown => {
            let mut t = Table::new([
                "Criterion", "Method", "Design", "Empirical", "MC s.e.", "Closed form", "z", "Result",
            ]);
            for s in &rows {
                let design = match (s.v_xc, s.n_exp, s.n_ctr) {
                    (Some(v), _, _) => format!("V={v:.4}"),
                    (None, Some(a), Some(b)) => format!("n={a}:{b}"),
                    _ => "-".into(),
                };
                t.push(vec![
                    s.criterion.to_string(),
                    s.method.to_string(),
                    design,
                    fixed(s.result.rejection_rate, 5),
                    fixed(s.result.mc_stderr, 5),
                    s.result.closed_form_reference.map_or_else(|| "-".into(), |q| fixed(q, 5)),
                    s.z_score.map_or_else(|| "-".into(), |z| fixed(z, 2)),
                    if s.pass { "PASS" } else { "FAIL" }.into(),
                ]);
            }
            let level = match sc.level {
                McLevel::EstimateLevel => "estimate-level",
                McLevel::TrialLevel => "trial-level",
            };
            let scenario = match sc.scenario {
                SimScenario::Design => "design alternative",
                SimScenario::NullBoundary => "null boundary",
            };
            let head = format!(
                "{level} simulation, {scenario}, lambda0 = {lambda0}, R = {}, seed = {}; PASS within {SIM_SIGMA} MC s.e.",
                sc.replications, sc.seed
            );
            if format == Format::Markdown {
                format!("# Monte Carlo check\n\n{head}\n\n{}", t.to_pipe())
            } else {
                format!("=== Monte Carlo check ===\n\n{head}\n\n{}", t.to_pipe())
            }
        }
    })
}
