use nidesign::framework::*;
use nidesign::methods::{make_bias_adjusted_synthesis, make_fixed_margin, make_odem_davis, make_traditional_synthesis};
use nidesign::{Alpha, HistoricalEvidence, MethodSpec, SuccessCriterion, TrialEstimates, TruthScenario};
use proptest::prelude::*;

fn alpha() -> Alpha {
    Alpha::new(0.025).unwrap()
}

fn hist_strategy() -> impl Strategy<Value = HistoricalEvidence> {
    (-4.0f64..-0.3, 0.05f64..1.5).prop_map(|(g, se)| HistoricalEvidence::new(g, se).unwrap())
}

/// Historical evidence whose upper 97.5% bound still shows a benefit.
fn effective_hist_strategy() -> impl Strategy<Value = HistoricalEvidence> {
    (-4.0f64..-0.3, 0.02f64..0.5).prop_map(|(g, frac)| HistoricalEvidence::new(g, -g * frac / 1.96).unwrap())
}

fn criterion_strategy() -> impl Strategy<Value = SuccessCriterion> {
    prop_oneof![
        (0.0f64..0.9).prop_map(|f| SuccessCriterion::preservation(f).unwrap()),
        (-1.0f64..=0.0).prop_map(|d| SuccessCriterion::new(0.0, d).unwrap()),
    ]
}

fn method_strategy() -> impl Strategy<Value = MethodSpec> {
    prop_oneof![
        (0.05f64..2.0, -0.9f64..0.5).prop_map(|(u, l)| MethodSpec::from_pair("random", u, l).unwrap()),
        (-0.9f64..0.5).prop_map(|l| MethodSpec::from_pair("fixed", 0.0, l).unwrap()),
    ]
}

fn log_v() -> impl Strategy<Value = f64> {
    (-7.0f64..2.5).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rejection_matches_margin(
        hist in hist_strategy(),
        c in criterion_strategy(),
        m in method_strategy(),
        v in log_v(),
        gxc in -5.0f64..5.0,
    ) {
        let a = alpha();
        let est = TrialEstimates { gamma_hat_xc: gxc, v_xc: v };
        let t = test_statistic(&est, &hist, &m, &c).unwrap();
        let lhs = gxc + a.z() * v.sqrt();
        let delta = success_margin(v, &hist, &m, &c, a).get();
        prop_assume!((lhs - delta).abs() > 1e-12);
        prop_assert_eq!(reject(t, a), lhs < delta);
    }

    #[test]
    fn boundary_consistency(
        hist in hist_strategy(),
        c in criterion_strategy(),
        m in method_strategy(),
        v in log_v(),
        lambda0 in -0.9f64..1.0,
    ) {
        let a = alpha();
        let g = hist.gamma_hat();
        let s = TruthScenario::new(lambda0, null_boundary_gamma_xp(g, &c, lambda0)).unwrap();
        let up = unconditional_power(v, &hist, &m, &c, &s, a).get();
        let t1e = unconditional_t1e(v, &hist, &m, &c, &s, a).get();
        prop_assert!((up - t1e).abs() < 1e-14, "{} vs {}", up, t1e);
        let cp = conditional_power(v, &hist, &m, &c, &s, a).get();
        let ct1e = conditional_t1e(v, &hist, &m, &c, &s, a).get();
        prop_assert!((cp - ct1e).abs() < 1e-14, "{} vs {}", cp, ct1e);
    }

    #[test]
    fn power_and_t1e_decrease_in_lambda0(
        hist in hist_strategy(),
        c in criterion_strategy(),
        m in method_strategy(),
        v in log_v(),
        l_lo in -0.9f64..0.9,
        step in 0.01f64..0.5,
        gxp in -4.0f64..0.0,
    ) {
        let a = alpha();
        let lo = TruthScenario::new(l_lo, gxp).unwrap();
        let hi = lo.with_lambda0(l_lo + step);
        let up_lo = unconditional_power(v, &hist, &m, &c, &lo, a).get();
        let up_hi = unconditional_power(v, &hist, &m, &c, &hi, a).get();
        let t_lo = unconditional_t1e(v, &hist, &m, &c, &lo, a).get();
        let t_hi = unconditional_t1e(v, &hist, &m, &c, &hi, a).get();
        // Strict once both values are away from the saturated tails.
        if up_lo < 1.0 - 1e-12 && up_hi > 1e-300 {
            prop_assert!(up_hi < up_lo, "power {} !< {}", up_hi, up_lo);
        }
        if t_lo < 1.0 - 1e-12 && t_hi > 1e-300 {
            prop_assert!(t_hi < t_lo, "t1e {} !< {}", t_hi, t_lo);
        }
    }

    #[test]
    fn conditional_power_exceeds_unconditional(
        hist in hist_strategy(),
        c in criterion_strategy(),
        m in method_strategy(),
        v in log_v(),
        lambda0 in -0.5f64..0.5,
        n in 1e-3f64..3.0,
    ) {
        let a = alpha();
        let g = hist.gamma_hat();
        let (f, l1) = (c.f(), m.lambda1());
        let k = m.u() * (1.0 - f) * (1.0 + l1);
        let sd = (v + k * k * hist.variance()).sqrt();
        // Place γ_XP so that the conditional-power numerator is n·√V_XC > 0.
        let gxp = c.delta0() + ((1.0 + lambda0) - (1.0 - f) * (1.0 + l1)) * g - a.z() * sd - n * v.sqrt();
        let s = TruthScenario::new(lambda0, gxp).unwrap();
        let cp = conditional_power(v, &hist, &m, &c, &s, a).get();
        let up = unconditional_power(v, &hist, &m, &c, &s, a).get();
        prop_assume!(cp < 1.0 - 1e-12);
        prop_assert!(cp > up, "cp {} up {}", cp, up);
    }

    #[test]
    fn conditional_t1e_below_unconditional(
        hist in hist_strategy(),
        c in criterion_strategy(),
        u in 0.0f64..2.0,
        v in log_v(),
        lambda0 in -0.5f64..0.5,
        below in 1e-3f64..0.5,
    ) {
        let a = alpha();
        let Ok(bound) = lambda1_admissible_bound(&hist, u, lambda0, a) else { return Ok(()); };
        let l1 = bound - below;
        prop_assume!(l1 > -1.0);
        let m = MethodSpec::from_pair("m", u, l1).unwrap();
        let s = TruthScenario::new(lambda0, 0.0).unwrap();
        let ct = conditional_t1e(v, &hist, &m, &c, &s, a).get();
        let ut = unconditional_t1e(v, &hist, &m, &c, &s, a).get();
        prop_assume!(ut > 1e-300);
        prop_assert!(ct < ut, "ct {} ut {}", ct, ut);
    }

    #[test]
    fn admissible_bound_keeps_t1e_below_half(
        hist in hist_strategy(),
        u in 0.0f64..2.0,
        lambda0 in -0.5f64..0.5,
        below in 1e-6f64..0.3,
        v in (-13.0f64..7.0).prop_map(f64::exp),
    ) {
        let a = alpha();
        let Ok(bound) = lambda1_admissible_bound(&hist, u, lambda0, a) else { return Ok(()); };
        let l1 = bound - below;
        prop_assume!(l1 > -1.0);
        let m = MethodSpec::from_pair("m", u, l1).unwrap();
        let c = SuccessCriterion::preservation(0.5).unwrap();
        let s = TruthScenario::new(lambda0, 0.0).unwrap();
        // At the bound the numerator vanishes as V_XC → 0; below it stays negative.
        prop_assert!(conditional_t1e(v, &hist, &m, &c, &s, a).get() < 0.5);
    }

    #[test]
    fn calibration_at_tolerable_non_constancy(
        hist in hist_strategy(),
        c in criterion_strategy(),
        m in method_strategy(),
        v in log_v(),
    ) {
        let a = alpha();
        let l0 = lambda0_min(v, &hist, &m, &c, a).unwrap();
        prop_assume!(l0 > -1.0);
        let s = TruthScenario::new(l0, 0.0).unwrap();
        let t1e = unconditional_t1e(v, &hist, &m, &c, &s, a).get();
        prop_assert!((t1e - 0.025).abs() < 1e-10, "{}", t1e);
    }

    #[test]
    fn lambda0_min_sign_pattern(
        hist in effective_hist_strategy(),
        c in criterion_strategy(),
        v in log_v(),
        l1 in -0.9f64..-0.01,
    ) {
        let a = alpha();
        let l0 = |m: &MethodSpec| lambda0_min(v, &hist, m, &c, a).unwrap();
        prop_assert!(l0(&make_traditional_synthesis()).abs() < 1e-15);
        prop_assert!((l0(&make_bias_adjusted_synthesis(l1).unwrap()) - l1).abs() < 1e-14);
        prop_assert!(l0(&make_odem_davis(l1).unwrap()) < l1);
        prop_assert!(l0(&make_fixed_margin(0.025, &hist).unwrap()) < 0.0);
        prop_assert!(l0(&make_fixed_margin(0.5, &hist).unwrap()) > 0.0);
    }

    #[test]
    fn unconditional_power_is_bounded_by_its_supremum(
        hist in effective_hist_strategy(),
        c in criterion_strategy(),
        m in method_strategy(),
        lambda0 in -0.5f64..0.5,
        gxp in -6.0f64..0.0,
    ) {
        let a = alpha();
        let s = TruthScenario::new(lambda0, gxp).unwrap();
        let cap = max_unconditional_power(&hist, &m, &c, &s, a).get();
        // The supremum is attained as V_XC → 0 only for detectable alternatives.
        prop_assume!(cap > 0.5);
        for k in 0..=120 {
            let v = 10f64.powf(-6.0 + 0.1 * k as f64);
            let up = unconditional_power(v, &hist, &m, &c, &s, a).get();
            prop_assert!(up <= cap + 1e-12, "v = {}: {} > {}", v, up, cap);
        }
    }

    #[test]
    fn vanishing_historical_uncertainty(
        g in -4.0f64..-0.3,
        c in criterion_strategy(),
        u in 0.0f64..2.0,
        l1 in -0.9f64..0.5,
        v in log_v(),
        lambda0 in -0.5f64..0.5,
        gxp in -6.0f64..0.0,
    ) {
        let a = alpha();
        let hist = HistoricalEvidence::new(g, 1e-6).unwrap();
        let m = MethodSpec::from_pair("m", u, l1).unwrap();
        let s = TruthScenario::new(lambda0, gxp).unwrap();
        let up = unconditional_power(v, &hist, &m, &c, &s, a).get();
        let cp = conditional_power(v, &hist, &m, &c, &s, a).get();
        let ut = unconditional_t1e(v, &hist, &m, &c, &s, a).get();
        let ct = conditional_t1e(v, &hist, &m, &c, &s, a).get();
        prop_assert!((up - cp).abs() < 1e-8, "{} vs {}", up, cp);
        prop_assert!((ut - ct).abs() < 1e-8, "{} vs {}", ut, ct);
    }
}

fn snapinn_statistic(gxc: f64, g: f64, v_xc: f64, v_cph: f64, v: f64, w: f64) -> f64 {
    (gxc + (1.0 - w) * g) / (v_xc + (1.0 - w).powi(2) * v_cph + 2.0 * v * (1.0 - w) * (v_xc * v_cph).sqrt()).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn snapinn_statistic_equivalence(
        v in 0.0f64..3.0,
        w in 0.0f64..0.99,
        v_xc in log_v(),
        g in -4.0f64..0.0,
        se in 0.01f64..2.0,
        gxc in -5.0f64..5.0,
    ) {
        let hist = HistoricalEvidence::new(g, se).unwrap();
        let (m, c) = snapinn_to_framework(v, w, v_xc, &hist).unwrap();
        let t = test_statistic(&TrialEstimates { gamma_hat_xc: gxc, v_xc }, &hist, &m, &c).unwrap();
        let direct = snapinn_statistic(gxc, g, v_xc, se * se, v, w);
        prop_assert!((t - direct).abs() <= 1e-12 * direct.abs().max(1.0), "{} vs {}", t, direct);
    }
}

#[test]
fn snapinn_fixed_margin_representative() {
    let hist = HistoricalEvidence::new(0.072f64.ln(), 0.61).unwrap();
    let (m, _) = snapinn_to_framework(1.0, 0.0, 0.2, &hist).unwrap();
    let want = (1.0 + 2.0 * 0.2f64.sqrt() / 0.61).sqrt();
    assert!((m.u() - want).abs() < 1e-15);
    assert_eq!(m.lambda1(), 0.0);
}

#[test]
fn admissible_bound_is_tight() {
    // Above the bound the type-I error exceeds one half for small V_XC.
    let a = alpha();
    let hist = HistoricalEvidence::new(0.072f64.ln(), 0.61).unwrap();
    let bound = lambda1_admissible_bound(&hist, 1.0, 0.0, a).unwrap();
    let c = SuccessCriterion::preservation(0.5).unwrap();
    let s = TruthScenario::new(0.0, 0.0).unwrap();
    let above = MethodSpec::from_pair("m", 1.0, bound + 0.05).unwrap();
    let below = MethodSpec::from_pair("m", 1.0, bound - 0.05).unwrap();
    let scan = |m: &MethodSpec| {
        (0..=90)
            .map(|k| 10f64.powf(-6.0 + 0.1 * k as f64))
            .map(|v| conditional_t1e(v, &hist, m, &c, &s, a).get())
            .fold(0.0f64, f64::max)
    };
    assert!(scan(&above) > 0.5);
    assert!(scan(&below) < 0.5);
}
