//! Seeded Monte Carlo checks of the closed-form operating characteristics.
//!
//! Replicate `r` draws from a ChaCha8 stream keyed by the master seed with
//! stream id `r`, so results are bit-identical however the work is split
//! across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{event_probability, TrialModel};
use crate::error::{Error, Result};
use crate::framework::{
    standardising_variance, statistic_from_parts, unconditional_power, Alpha, HistoricalEvidence, MethodSpec,
    SuccessCriterion, TruthScenario,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McLevel {
    EstimateLevel,
    TrialLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: u64,
    pub master_seed: u64,
    pub level: McLevel,
}

impl McConfig {
    pub fn new(replications: u64, master_seed: u64, level: McLevel) -> Result<Self> {
        if replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        Ok(Self { replications, master_seed, level })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub rejection_rate: f64,
    pub mc_stderr: f64,
    pub replications: u64,
    pub rejections: u64,
    /// Replicates with no events in some arm; counted as non-rejections.
    pub degenerate: u64,
    pub closed_form_reference: Option<f64>,
}

impl McResult {
    fn from_counts(replications: u64, rejections: u64, degenerate: u64, reference: Option<f64>) -> Self {
        let p = rejections as f64 / replications as f64;
        Self {
            rejection_rate: p,
            mc_stderr: (p * (1.0 - p) / replications as f64).sqrt(),
            replications,
            rejections,
            degenerate,
            closed_form_reference: reference,
        }
    }

    /// Standard error under the reference rate, which stays positive when the
    /// empirical rate is 0 or 1.
    pub fn reference_stderr(&self) -> Option<f64> {
        self.closed_form_reference
            .map(|q| (q * (1.0 - q) / self.replications as f64).sqrt())
    }

    /// (empirical − reference) / mc_stderr.
    pub fn z_score(&self) -> Option<f64> {
        let q = self.closed_form_reference?;
        let se = if self.mc_stderr > 0.0 { self.mc_stderr } else { self.reference_stderr()? };
        Some((self.rejection_rate - q) / se)
    }

    pub fn agrees_within(&self, k: f64) -> Option<bool> {
        self.z_score().map(|z| z.abs() <= k)
    }
}

/// The random stream for replicate `r`.
pub fn replicate_rng(master_seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(r);
    rng
}

fn count<F>(cfg: &McConfig, outcome: F) -> (u64, u64)
where
    F: Fn(&mut ChaCha8Rng) -> Outcome + Sync,
{
    (0..cfg.replications)
        .into_par_iter()
        .map(|r| match outcome(&mut replicate_rng(cfg.master_seed, r)) {
            Outcome::Reject => (1, 0),
            Outcome::Accept => (0, 0),
            Outcome::Degenerate => (0, 1),
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

enum Outcome {
    Reject,
    Accept,
    Degenerate,
}

/// Draws of the historical estimate and the matching margin component
/// `(1+λ₁)γ̂_CP,H`.
///
/// Fixed-margin methods recompute λ₁ from each drawn estimate, so their
/// margin component is `γ̂_CP,H + Z_{1−θ}·se`; the offset `Z_{1−θ}·se` is
/// recovered from the method as `λ₁·γ_CP,H` at the true control effect.
struct HistoricalDraw {
    true_gamma: f64,
    se: f64,
    lambda1: f64,
    fixed_offset: Option<f64>,
}

impl HistoricalDraw {
    fn new(true_gamma: f64, se: f64, m: &MethodSpec) -> Self {
        let fixed_offset = m.is_fixed_margin().then(|| m.lambda1() * true_gamma);
        Self { true_gamma, se, lambda1: m.lambda1(), fixed_offset }
    }

    #[inline]
    fn margin_component<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let g = self.true_gamma + self.se * z;
        match self.fixed_offset {
            Some(a) => g + a,
            None => (1.0 + self.lambda1) * g,
        }
    }
}

fn validate_common(true_gamma_cph: f64, hist_se: f64) -> Result<HistoricalEvidence> {
    HistoricalEvidence::new(true_gamma_cph, hist_se)
}

fn reference_power(
    v_xc: f64,
    hist: &HistoricalEvidence,
    truth: &TruthScenario,
    m: &MethodSpec,
    c: &SuccessCriterion,
    alpha: Alpha,
) -> f64 {
    let s = truth.with_true_control_effect(hist.gamma_hat());
    unconditional_power(v_xc, hist, m, c, &s, alpha).get()
}

/// Normal-theory simulation of `(γ̂_XC, γ̂_CP,H)` and the test decision.
///
/// The reference is the unconditional rejection probability at the true
/// control effect, which equals the type-I error when the truth lies on the
/// null boundary.
#[allow(clippy::too_many_arguments)]
pub fn simulate_estimate_level(
    cfg: &McConfig,
    truth: &TruthScenario,
    true_gamma_cph: f64,
    v_xc: f64,
    hist_se: f64,
    m: &MethodSpec,
    c: &SuccessCriterion,
    alpha: Alpha,
) -> Result<McResult> {
    if !(v_xc.is_finite() && v_xc > 0.0) {
        return Err(Error::invalid("v_xc", format!("{v_xc} must be positive")));
    }
    let hist = validate_common(true_gamma_cph, hist_se)?;
    let draw = HistoricalDraw::new(true_gamma_cph, hist_se, m);
    let mean_xc = truth.gamma_xp - (1.0 + truth.lambda0) * true_gamma_cph;
    let sd_xc = v_xc.sqrt();
    let var = standardising_variance(v_xc, &hist, m, c);
    let crit = -alpha.z();

    let (rejections, degenerate) = count(cfg, |rng| {
        let margin = draw.margin_component(rng);
        let z: f64 = rng.sample(StandardNormal);
        let t = statistic_from_parts(mean_xc + sd_xc * z, margin, c, var);
        if t < crit {
            Outcome::Reject
        } else {
            Outcome::Accept
        }
    });
    let reference = reference_power(v_xc, &hist, truth, m, c, alpha);
    Ok(McResult::from_counts(cfg.replications, rejections, degenerate, Some(reference)))
}

/// Total events and person-time in one arm of `n` participants with event
/// hazard `h`, exponential loss to follow-up at hazard `l`, and
/// administrative censoring at `duration`.
///
/// Sampled exactly but without per-participant loops over censored-at-end
/// participants: the number leaving early is binomial, their exit times are
/// exponential truncated to `[0, duration)`, and each exit is an event with
/// probability `h/(h+l)` independently of its time.
fn simulate_arm<R: Rng>(rng: &mut R, n: u64, h: f64, l: f64, duration: f64) -> (u64, f64) {
    let total = h + l;
    if total == 0.0 || n == 0 {
        return (0, n as f64 * duration);
    }
    let p_exit = -(-total * duration).exp_m1();
    let exits = Binomial::new(n, p_exit).map(|b| b.sample(rng)).unwrap_or(0);
    let mut person_time = (n - exits) as f64 * duration;
    let mut events = 0;
    let p_event = h / total;
    for _ in 0..exits {
        let u: f64 = rng.random();
        person_time += -(-u * p_exit).ln_1p() / total;
        if rng.random::<f64>() < p_event {
            events += 1;
        }
    }
    (events, person_time)
}

/// End-to-end simulation of a two-arm trial with exponential event times.
///
/// The log HR is estimated by the person-time rate ratio with variance
/// `1/d_X + 1/d_C`; replicates with no events in an arm never reject and are
/// tallied in `degenerate`. The reference is unconditional power at
/// `V_XC = 1/E[d_X] + 1/E[d_C]` under the simulated model.
#[allow(clippy::too_many_arguments)]
pub fn simulate_trial_level(
    cfg: &McConfig,
    model: &TrialModel,
    n_exp: u64,
    n_ctr: u64,
    truth: &TruthScenario,
    true_gamma_cph: f64,
    hist_se: f64,
    m: &MethodSpec,
    c: &SuccessCriterion,
    alpha: Alpha,
) -> Result<McResult> {
    if n_exp == 0 || n_ctr == 0 {
        return Err(Error::invalid("sample_size", "each arm needs at least one participant"));
    }
    let hist = validate_common(true_gamma_cph, hist_se)?;
    let draw = HistoricalDraw::new(true_gamma_cph, hist_se, m);
    let rate_exp = model.placebo_incidence * truth.gamma_xp.exp();
    let rate_ctr = model.placebo_incidence * ((1.0 + truth.lambda0) * true_gamma_cph).exp();
    let loss = model.censoring_hazard();
    let duration = model.duration_years;
    let (u, f, l1) = (m.u(), c.f(), m.lambda1());
    let hist_var_term = (u * (1.0 - f) * (1.0 + l1)).powi(2) * hist.variance();
    let crit = -alpha.z();

    let (rejections, degenerate) = count(cfg, |rng| {
        let (d_x, pt_x) = simulate_arm(rng, n_exp, rate_exp, loss, duration);
        let (d_c, pt_c) = simulate_arm(rng, n_ctr, rate_ctr, loss, duration);
        if d_x == 0 || d_c == 0 {
            return Outcome::Degenerate;
        }
        let gamma_xc = ((d_x as f64 / pt_x) / (d_c as f64 / pt_c)).ln();
        let v_xc = 1.0 / d_x as f64 + 1.0 / d_c as f64;
        let margin = draw.margin_component(rng);
        let t = statistic_from_parts(gamma_xc, margin, c, v_xc + hist_var_term);
        if t < crit {
            Outcome::Reject
        } else {
            Outcome::Accept
        }
    });

    let e_x = n_exp as f64 * event_probability(rate_exp, model)?;
    let e_c = n_ctr as f64 * event_probability(rate_ctr, model)?;
    let reference = (e_x > 0.0 && e_c > 0.0)
        .then(|| reference_power(1.0 / e_x + 1.0 / e_c, &hist, truth, m, c, alpha));
    Ok(McResult::from_counts(cfg.replications, rejections, degenerate, reference))
}
