use std::sync::Arc;

use nidesign::design::{
    build_design_table, ApproachRegistry, DesignProblem, DesignResult, DesignRow, DesignTarget, ProratedLoss,
    TrialModel,
};
use nidesign::methods::recognise_pair;
use nidesign::{Alpha, HistoricalEvidence, MethodRegistry, MethodSpec, PreventionEfficacy, SuccessCriterion};

const TABLES: &str = include_str!("data/design_tables.csv");

struct Expected {
    criterion: String,
    approach: String,
    method: String,
    margin_hr: f64,
    rne: [u64; 3],
    n: [u64; 3],
    cnc: f64,
    up0: f64,
    up_sens: f64,
}

fn expected_rows() -> Vec<Expected> {
    TABLES
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            let n = |i: usize| c[i].parse::<u64>().unwrap();
            let x = |i: usize| c[i].parse::<f64>().unwrap();
            Expected {
                criterion: c[0].into(),
                approach: c[1].into(),
                method: c[2].into(),
                margin_hr: x(3),
                rne: [n(4), n(5), n(6)],
                n: [n(7), n(8), n(9)],
                cnc: x(10),
                up0: x(11),
                up_sens: x(12),
            }
        })
        .collect()
}

fn hist() -> HistoricalEvidence {
    HistoricalEvidence::new(0.072f64.ln(), 0.61).unwrap()
}

fn criterion(name: &str) -> SuccessCriterion {
    match name {
        "preservation" => SuccessCriterion::preservation(0.5).unwrap(),
        "inferred" => SuccessCriterion::inferred_efficacy_pe(PreventionEfficacy::new(0.3).unwrap()).unwrap(),
        other => panic!("unknown criterion {other}"),
    }
}

fn problem(criterion_name: &str, approach: &str) -> DesignProblem {
    let h = hist();
    let approach = match approach {
        "ad-hoc" => "ad-hoc(0.12)",
        other => other,
    };
    DesignProblem {
        hist: h,
        criterion: criterion(criterion_name),
        target: DesignTarget::new(
            0.9,
            Alpha::new(0.025).unwrap(),
            ApproachRegistry::default().resolve(approach, &h).unwrap(),
        )
        .unwrap(),
        trial: TrialModel::default(),
        design_pe: PreventionEfficacy::new(0.95).unwrap(),
        lambda0: 0.0,
        sens_lambda0: Some(0.12),
        event_model: Arc::new(ProratedLoss),
    }
}

fn round(x: f64, dp: i32) -> f64 {
    let s = 10f64.powi(dp);
    (x * s).round() / s
}

fn mismatches(e: &Expected, r: &DesignResult) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |what: &str, got: f64, want: f64, dp: i32| {
        if (round(got, dp) - want).abs() > 1e-9 {
            out.push(format!("{what}: got {got:.5}, want {want}"));
        }
    };
    check("margin", r.margin_hr, e.margin_hr, 2);
    check("cnc", r.cnc_pe, e.cnc, 3);
    check("up0", r.up0, e.up0, 2);
    check("up_sens", r.up_sens.unwrap(), e.up_sens, 2);
    if [r.rne_total, r.rne_exp, r.rne_ctr] != e.rne {
        out.push(format!("events: got {:?}, want {:?}", [r.rne_total, r.rne_exp, r.rne_ctr], e.rne));
    }
    if [r.n_total, r.n_exp, r.n_ctr] != e.n {
        out.push(format!("sample size: got {:?}, want {:?}", [r.n_total, r.n_exp, r.n_ctr], e.n));
    }
    out
}

fn run(methods_for: impl Fn(&str) -> MethodSpec) -> Vec<String> {
    let rows = expected_rows();
    assert_eq!(rows.len(), 30);
    let mut failures = Vec::new();
    for e in &rows {
        let p = problem(&e.criterion, &e.approach);
        let table = build_design_table(&p, &[methods_for(&e.method)]).unwrap();
        let DesignRow::Designed(r) = &table[0] else {
            failures.push(format!("{} / {} / {}: infeasible", e.criterion, e.approach, e.method));
            continue;
        };
        for m in mismatches(e, r) {
            failures.push(format!("{} / {} / {}: {m}", e.criterion, e.approach, e.method));
        }
    }
    failures
}

#[test]
fn all_thirty_rows_reproduce_exactly_with_presets() {
    let reg = MethodRegistry::default();
    let failures = run(|m| reg.resolve(m, &hist()).unwrap());
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn shorthand_pairs_reproduce_the_same_rounded_rows() {
    let h = hist();
    let failures = run(|m| {
        let (u, l1) = match m {
            "traditional-sm" => (1.0, 0.0),
            "ba-sm(-0.23)" => (1.0, -0.23),
            "odem-davis(-0.23)" => (1.0 / (1.0 - 0.23), -0.23),
            "95-95" => (0.0, 1.96 * 0.61 / (1.0f64 - 0.928).ln()),
            "0-95" => (0.0, 0.0),
            other => panic!("{other}"),
        };
        recognise_pair(u, l1, &h).unwrap()
    });
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
