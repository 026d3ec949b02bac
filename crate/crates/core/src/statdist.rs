//! Standard normal primitives.
//!
//! `norm_cdf` combines a positive-term power series near the origin with a
//! continued fraction for the Mills ratio in the tails; both keep the
//! absolute error below 1e-15 on the range used by design work. `norm_quantile`
//! starts from Acklam's rational approximation and polishes it with Halley
//! steps against `norm_cdf`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this |x| the series is used; beyond it, the tail continued fraction.
const SERIES_LIMIT: f64 = 3.0;

/// Quantile inputs are saturated to this range.
const P_MIN: f64 = 1e-300;
const P_MAX: f64 = 1.0 - 1e-16;

/// A probability in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid("probability", format!("{value} is not in [0, 1]")))
        }
    }

    /// Wraps a value already known to lie in `[0, 1]`.
    pub(crate) fn clamped(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ(x).
pub fn norm_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::invalid("x", format!("{x} is not finite")));
    }
    Ok(Probability::clamped(phi(x)))
}

/// Φ without the finiteness check; used on hot paths whose inputs are
/// finite by construction.
pub(crate) fn phi(x: f64) -> f64 {
    if x.abs() < SERIES_LIMIT {
        0.5 + norm_pdf(x) * odd_series(x)
    } else if x < 0.0 {
        lower_tail(-x)
    } else {
        1.0 - lower_tail(x)
    }
}

/// Σ x^(2n+1) / (2n+1)!!, so that Φ(x) = 1/2 + φ(x)·Σ. All terms share the
/// sign of x, so there is no cancellation inside the sum.
fn odd_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    loop {
        k += 2.0;
        term *= x2 / k;
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
    }
    sum
}

/// Φ(−t) for t ≥ SERIES_LIMIT via the Mills-ratio continued fraction
/// 1/(t + 1/(t + 2/(t + 3/(t + ...)))), evaluated with modified Lentz.
fn lower_tail(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for n in 1..500 {
        let an = n as f64;
        d = t + an * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    norm_pdf(t) / f
}

/// Standard normal quantile Φ⁻¹(p) for `0 < p < 1`.
///
/// Inputs below 1e-300 or above 1 − 1e-16 saturate at those bounds.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile requires 0 < p < 1, got {p}")));
    }
    Ok(quantile_unchecked(p))
}

pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    let p = p.clamp(P_MIN, P_MAX);
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam(p);
    // Halley refinement. For the upper half work on the mirrored lower tail so
    // the residual keeps full relative precision.
    let (target, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut z = sign * x;
    for _ in 0..3 {
        let e = phi(z) - target;
        let u = e * (2.0 * PI).sqrt() * (0.5 * z * z).exp();
        let step = u / (1.0 + 0.5 * z * u);
        z -= step;
        if step.abs() <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    sign * z
}

/// Acklam's rational approximation (relative error about 1.15e-9).
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        tail_ratio(q, &C, &D)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -tail_ratio(q, &C, &D)
    }
}

fn tail_ratio(q: f64, c: &[f64; 6], d: &[f64; 4]) -> f64 {
    (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
        / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
}

/// Upper quantile Z_{1−α}, i.e. Φ⁻¹(1 − α), computed from the lower tail so
/// that small α keeps full precision.
pub fn upper_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("upper quantile requires 0 < alpha < 1, got {alpha}")));
    }
    Ok(-quantile_unchecked(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with mpmath at 40 significant digits.
    const CDF_TABLE: &[(f64, f64)] = &[
        (-8.0, 6.220960574271784123515995e-16),
        (-6.0, 9.865876450376981407008641e-10),
        (-5.0, 2.866515718791939116737523e-7),
        (-3.5, 2.326290790355250363499259e-4),
        (-3.0, 1.349898031630094526651815e-3),
        (-2.5, 6.209665325776135166978105e-3),
        (-1.959963984540054, 0.02500000000000001087616802),
        (-1.0, 0.1586552539314570514147675),
        (-0.5, 0.3085375387259868963622954),
        (0.0, 0.5),
        (0.3, 0.6179114221889526330722736),
        (1.0, 0.8413447460685429485852325),
        (1.281551565544601, 0.9000000000000000996144421),
        (2.0, 0.9772498680518207927997174),
        (3.0, 0.9986501019683699054733482),
        (4.5, 0.9999966023268752699395983),
        (8.0, 0.9999999999999993779039426),
    ];

    const QUANTILE_TABLE: &[(f64, f64)] = &[
        (1e-300, -37.04709629936119923722),
        (1e-100, -21.27345356096532429512),
        (1e-10, -6.361340902404056204695),
        (1e-5, -4.264890793922824628499),
        (0.001, -3.09023230616781354154),
        (0.025, -1.959963984540054235525),
        (0.1, -1.281551565544600466965),
        (0.3, -0.5244005127080407840383),
        (0.5, 0.0),
        (0.75, 0.6744897501960817432022),
        (0.9, 1.281551565544600593487),
        (0.975, 1.959963984540053855604),
        (0.999999, 4.753424308817087765688),
    ];

    #[test]
    fn cdf_matches_reference_table() {
        for &(x, want) in CDF_TABLE {
            let got = norm_cdf(x).unwrap().get();
            assert!((got - want).abs() <= 1e-15, "Φ({x}) = {got}, want {want}");
            if want < 1e-2 {
                assert!(((got - want) / want).abs() < 1e-12, "relative error at {x}");
            }
        }
    }

    #[test]
    fn cdf_spot_values() {
        assert_eq!(norm_cdf(0.0).unwrap().get(), 0.5);
        assert!((norm_cdf(1.959964).unwrap().get() - 0.975).abs() < 1e-6);
        assert!((norm_cdf(-1.281552).unwrap().get() - 0.10).abs() < 1e-6);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(norm_cdf(f64::NAN).is_err());
        assert!(norm_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_matches_reference_table() {
        for &(p, want) in QUANTILE_TABLE {
            let got = norm_quantile(p).unwrap();
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "Φ⁻¹({p}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn quantile_domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(norm_quantile(p).is_err(), "p = {p}");
        }
    }

    #[test]
    fn quantile_spot_values() {
        assert_eq!(norm_quantile(0.5).unwrap(), 0.0);
        assert!((norm_quantile(0.975).unwrap() - 1.959964).abs() < 1e-6);
        assert!((norm_quantile(0.9).unwrap() - 1.281552).abs() < 1e-6);
        assert!((upper_quantile(0.025).unwrap() - 1.959963984540054).abs() < 1e-14);
    }

    #[test]
    fn cdf_of_quantile_is_identity() {
        let mut p = 1e-10;
        while p < 1.0 - 1e-10 {
            for q in [p, 1.0 - p] {
                let back = norm_cdf(norm_quantile(q).unwrap()).unwrap().get();
                assert!((back - q).abs() <= 1e-12, "p = {q}: {back}");
            }
            p *= 1.37;
            if p > 0.5 {
                break;
            }
        }
    }

    #[test]
    fn quantile_of_cdf_is_identity() {
        let n = 12_000;
        for i in 0..=n {
            let x = -6.0 + 12.0 * i as f64 / n as f64;
            let back = norm_quantile(norm_cdf(x).unwrap().get()).unwrap();
            // Φ(x) near 1 is quantised at f64::EPSILON, which bounds recoverable precision.
            let tol = 1e-12 * x.abs().max(1.0) + f64::EPSILON / norm_pdf(x);
            assert!((back - x).abs() <= tol, "x = {x}: {back}");
        }
    }

    #[test]
    fn symmetry_and_monotonicity() {
        let mut prev_cdf = 0.0;
        let mut prev_q = f64::NEG_INFINITY;
        for i in 0..=4000 {
            let x = -10.0 + 20.0 * i as f64 / 4000.0;
            let c = norm_cdf(x).unwrap().get();
            let sum = c + norm_cdf(-x).unwrap().get();
            assert!((sum - 1.0).abs() <= 1e-14, "x = {x}");
            assert!(c >= prev_cdf);
            prev_cdf = c;

            let p = (i as f64 + 0.5) / 4001.0;
            let q = norm_quantile(p).unwrap();
            assert!(q > prev_q);
            prev_q = q;
        }
    }

    #[test]
    fn probability_validation() {
        assert!(Probability::new(0.3).is_ok());
        assert!(Probability::new(1.2).is_err());
        assert!(Probability::new(f64::NAN).is_err());
    }
}
