//! Closed-form and quadrature evaluation of the scale variances and
//! covariances, the Bessel-form cumulant generating functions and tilted
//! moments, the scaling constants, and the tail bounds they feed.
//!
//! Prime sums come in two flavours: the exact enumeration over a
//! [`PrimeTable`], and the prime-number-theorem integral that replaces
//! `sum_p g(p)` by `int g(u) du / log u`. The integral form reaches scales
//! no sieve can.

mod bounds;
mod constants;
pub mod mc;

pub use bounds::{
    calibrate_constant, chernoff_tail_one, oscillation_bound, remark_max_bound, sup_interval_bound,
    two_point_bound, BoundParams, BoundValue,
};
pub use constants::{
    m_n, scaling_constants, scaling_constants_with_cutoff, ScalingConstants, MIN_DEPTH,
};

use crate::bessel;
use crate::error::{Error, Result};
use crate::primes::PrimeTable;
use crate::quad;
use crate::stats::KahanSum;
use serde::Serialize;
use std::ops::Range;

/// Largest scale the integral backend accepts (`2^k` must stay a
/// reasonable double).
pub const MAX_INTEGRAL_SCALE: usize = 60;

/// Where prime sums come from.
#[derive(Clone, Copy, Debug)]
pub enum Backend<'a> {
    /// Enumerate the primes of the scale.
    Exact(&'a PrimeTable),
    /// Replace the sum by `int du / (u log u)` over the scale.
    Integral,
}

impl Backend<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Exact(_) => "exact",
            Backend::Integral => "integral",
        }
    }
}

/// `sigma^2 = log(2) / 2`, the limiting per-scale variance.
pub fn sigma_sq() -> f64 {
    std::f64::consts::LN_2 / 2.0
}

fn check_dh(dh: f64) -> Result<()> {
    if !(dh >= 0.0 && dh.is_finite()) {
        return Err(Error::arg(
            "dh",
            format!("must be finite and >= 0, got {dh}"),
        ));
    }
    Ok(())
}

fn check_integral_scale(k: usize) -> Result<()> {
    if k > MAX_INTEGRAL_SCALE {
        return Err(Error::Capacity {
            what: "scale (integral backend)",
            value: k as f64,
            cap: MAX_INTEGRAL_SCALE as f64,
        });
    }
    Ok(())
}

/// Sum `g(index)` over the primes of scale `k`.
fn exact_sum(table: &PrimeTable, k: usize, g: impl Fn(usize) -> f64) -> Result<f64> {
    let r: Range<usize> = table.scale_range(k)?;
    Ok(r.map(g).collect::<KahanSum>().value())
}

/// `sigma_k^2 = Var Y_k(h) = sum_{scale k} 1/(2p)`.
pub fn variance_scale(k: usize, backend: Backend) -> Result<f64> {
    match backend {
        Backend::Exact(t) => {
            let p = t.primes();
            exact_sum(t, k, |j| 0.5 / p[j] as f64)
        }
        Backend::Integral => {
            check_integral_scale(k)?;
            // 1/2 int_{2^(k-1)}^{2^k} dv / v
            Ok(sigma_sq())
        }
    }
}

/// `rho_k(dh) = Cov(Y_k(h), Y_k(h + dh)) = sum_{scale k} cos(dh log p) / (2p)`.
pub fn covariance_scale(k: usize, dh: f64, backend: Backend) -> Result<f64> {
    check_dh(dh)?;
    match backend {
        Backend::Exact(t) => {
            let (p, lp) = (t.primes(), t.log_p());
            exact_sum(t, k, |j| 0.5 * (dh * lp[j]).cos() / p[j] as f64)
        }
        Backend::Integral => {
            check_integral_scale(k)?;
            let lo = (k as f64 - 1.0).exp2();
            let hi = (k as f64).exp2();
            if dh == 0.0 {
                return Ok(sigma_sq());
            }
            Ok(0.5 * cos_over_w_integral(dh * lo, dh * hi)?)
        }
    }
}

/// Above this argument the cosine integral is evaluated from its
/// integration-by-parts expansion.
const CI_ASYMPTOTIC: f64 = 50.0;

/// `Ci(x) = f(x) sin x - g(x) cos x` with the asymptotic auxiliary series,
/// for `x >= CI_ASYMPTOTIC`.
fn ci_asymptotic(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let (mut f, mut g) = (1.0, 1.0);
    let (mut tf, mut tg) = (1.0, 1.0);
    for m in 1..40 {
        let m2 = 2.0 * m as f64;
        tf *= -(m2 - 1.0) * m2 * inv2;
        tg *= -m2 * (m2 + 1.0) * inv2;
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 && tg.abs() < 1e-18 {
            break;
        }
    }
    (f / x) * x.sin() - (g * inv2) * x.cos()
}

/// `int_a^b cos(w) / w dw` for `0 < a <= b`.
fn cos_over_w_integral(a: f64, b: f64) -> Result<f64> {
    let quad_part = |lo: f64, hi: f64| -> Result<f64> {
        Ok(quad::integrate(|w| w.cos() / w, lo, hi, 1e-12, 1e-15)?.0)
    };
    if a >= CI_ASYMPTOTIC {
        Ok(ci_asymptotic(b) - ci_asymptotic(a))
    } else if b <= CI_ASYMPTOTIC {
        quad_part(a, b)
    } else {
        Ok(quad_part(a, CI_ASYMPTOTIC)? + ci_asymptotic(b) - ci_asymptotic(CI_ASYMPTOTIC))
    }
}

/// The branching point `floor(log2(1/dh))`; `None` (infinitely late) for
/// `dh = 0`.
pub fn branching_point(dh: f64) -> Result<Option<u32>> {
    check_dh(dh)?;
    if dh == 0.0 {
        return Ok(None);
    }
    if dh > 1.0 {
        return Err(Error::arg("dh", format!("must be <= 1, got {dh}")));
    }
    // largest l with 2^-l >= dh, compared exactly
    let mut l = (-dh.log2()).floor().max(0.0) as i32;
    while (-(l as f64)).exp2() < dh {
        l -= 1;
    }
    while (-(l as f64 + 1.0)).exp2() >= dh {
        l += 1;
    }
    Ok(Some(l as u32))
}

/// Per-scale variance plus access to the covariance as a function of `dh`.
#[derive(Clone, Copy, Debug)]
pub struct ScaleStatistics<'a> {
    pub k: usize,
    pub sigma_sq_k: f64,
    backend: Backend<'a>,
}

impl<'a> ScaleStatistics<'a> {
    pub fn new(k: usize, backend: Backend<'a>) -> Result<Self> {
        Ok(ScaleStatistics {
            k,
            sigma_sq_k: variance_scale(k, backend)?,
            backend,
        })
    }

    pub fn rho(&self, dh: f64) -> Result<f64> {
        covariance_scale(self.k, dh, self.backend)
    }

    pub fn backend(&self) -> &'static str {
        self.backend.name()
    }
}

/// `Cov(X_n(h), X_n(h + dh))` and the two predictors it is compared with.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CovarianceTotal {
    pub value: f64,
    /// `1/2 log(1/dh)`.
    pub log_predictor: f64,
    /// `n log(2) / 2`, reported when `dh < 2^-n`.
    pub saturation_predictor: Option<f64>,
}

/// `sum_{k=0}^{n} rho_k(dh)`.
pub fn covariance_total(dh: f64, n: usize, backend: Backend) -> Result<CovarianceTotal> {
    check_dh(dh)?;
    if dh == 0.0 {
        return Err(Error::arg(
            "dh",
            "the covariance at dh = 0 is the variance; use variance_scale",
        ));
    }
    if dh > 1.0 {
        return Err(Error::arg("dh", format!("must be <= 1, got {dh}")));
    }
    let value = (0..=n)
        .map(|k| covariance_scale(k, dh, backend))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect::<KahanSum>()
        .value();
    let n_f = n as f64;
    Ok(CovarianceTotal {
        value,
        log_predictor: 0.5 * (1.0 / dh).ln(),
        saturation_predictor: (dh < (-n_f).exp2()).then(|| n_f * sigma_sq()),
    })
}

/// An exact Bessel-form CGF next to its quadratic (Gaussian) approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CgfComparison {
    pub exact: f64,
    pub quadratic: f64,
    /// `exact - quadratic`.
    pub difference: f64,
}

impl CgfComparison {
    fn new(exact: f64, quadratic: f64) -> Self {
        CgfComparison {
            exact,
            quadratic,
            difference: exact - quadratic,
        }
    }
}

fn check_lambda(name: &'static str, lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::arg(
            name,
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    Ok(())
}

/// `psi_k(lambda) = log E exp(lambda Y_k) = sum_{scale k} log I0(lambda / sqrt p)`,
/// against `lambda^2 sigma_k^2 / 2`.
pub fn cgf_one(table: &PrimeTable, k: usize, lambda: f64) -> Result<CgfComparison> {
    check_lambda("lambda", lambda)?;
    let inv = table.inv_sqrt_p();
    let exact = exact_sum(table, k, |j| bessel::ln_i0(lambda * inv[j]))?;
    let var = variance_scale(k, Backend::Exact(table))?;
    Ok(CgfComparison::new(exact, 0.5 * lambda * lambda * var))
}

/// `lambda . M_p lambda` with `M_p = (1/2p) [[1, c], [c, 1]]`, `c = cos(dh log p)`.
#[inline]
fn quad_form(l: [f64; 2], inv_p: f64, c: f64) -> f64 {
    0.5 * inv_p * (l[0] * l[0] + 2.0 * c * l[0] * l[1] + l[1] * l[1])
}

/// `psi_k(l1, l2) = log E exp(l1 Y_k(h) + l2 Y_k(h + dh)) = sum f(lambda . M_p lambda)`,
/// against `lambda . Sigma_k lambda / 2`.
pub fn cgf_two(table: &PrimeTable, k: usize, lambdas: [f64; 2], dh: f64) -> Result<CgfComparison> {
    check_lambda("lambda1", lambdas[0])?;
    check_lambda("lambda2", lambdas[1])?;
    check_dh(dh)?;
    let (p, lp) = (table.primes(), table.log_p());
    let exact = exact_sum(table, k, |j| {
        let x = quad_form(lambdas, 1.0 / p[j] as f64, (dh * lp[j]).cos());
        bessel::f_raw(x)
    })?;
    let var = variance_scale(k, Backend::Exact(table))?;
    let rho = covariance_scale(k, dh, Backend::Exact(table))?;
    let [a, b] = lambdas;
    let quadratic = 0.5 * (a * a * var + 2.0 * a * b * rho + b * b * var);
    Ok(CgfComparison::new(exact, quadratic))
}

/// `log E exp(l1 X(h1) + l2 (X(h2) - X(h1)))` summed over scales
/// `k_lo..=k_hi`, where `X` is taken at `h1 = 0` after translation: the
/// per-prime argument of `log I0` is
/// `sqrt((l1 + (cos h2 L - cos h1 L) l2)^2 / p + ((sin h2 L - sin h1 L) l2)^2 / p)`.
pub fn cgf_pair_diff(
    table: &PrimeTable,
    scales: (usize, usize),
    lambda1: f64,
    lambda2: f64,
    h1: f64,
    h2: f64,
) -> Result<f64> {
    check_lambda("lambda1", lambda1)?;
    check_lambda("lambda2", lambda2)?;
    let (k_lo, k_hi) = scales;
    if k_lo > k_hi {
        return Err(Error::arg(
            "scales",
            format!("empty scale range {k_lo}..={k_hi}"),
        ));
    }
    let (inv, lp) = (table.inv_sqrt_p(), table.log_p());
    let r = table.scales_range(k_lo, k_hi)?;
    Ok(r.map(|j| {
        let (s1, c1) = (h1 * lp[j]).sin_cos();
        let (s2, c2) = (h2 * lp[j]).sin_cos();
        let a = lambda1 + (c2 - c1) * lambda2;
        let b = (s2 - s1) * lambda2;
        bessel::ln_i0(inv[j] * a.hypot(b))
    })
    .collect::<KahanSum>()
    .value())
}

/// Mean and variance of `Y_k` under the one-point tilt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TiltedMoments {
    pub mean: f64,
    pub variance: f64,
}

/// `(psi'(lambda), psi''(lambda))`: mean `sum p^-1/2 R(lambda p^-1/2)` and
/// variance `sum p^-1 R'(lambda p^-1/2)`, `R = I1/I0`.
pub fn tilted_moments_one(table: &PrimeTable, k: usize, lambda: f64) -> Result<TiltedMoments> {
    check_lambda("lambda", lambda)?;
    let inv = table.inv_sqrt_p();
    let mean = exact_sum(table, k, |j| inv[j] * bessel::ratio_i1_i0(lambda * inv[j]))?;
    let variance = exact_sum(table, k, |j| {
        inv[j] * inv[j] * bessel::ratio_derivative(lambda * inv[j])
    })?;
    Ok(TiltedMoments { mean, variance })
}

/// Mean vector and covariance matrix of `(Y_k(h), Y_k(h + dh))` under the
/// two-point tilt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TiltedMomentsTwo {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

/// Gradient and Hessian of `sum f(lambda . M_p lambda)`:
/// `2 M_p lambda f'` and `2 M_p f' + 4 (M_p lambda)(M_p lambda)^T f''`.
pub fn tilted_moments_two(
    table: &PrimeTable,
    k: usize,
    lambdas: [f64; 2],
    dh: f64,
) -> Result<TiltedMomentsTwo> {
    check_lambda("lambda1", lambdas[0])?;
    check_lambda("lambda2", lambdas[1])?;
    check_dh(dh)?;
    let (p, lp) = (table.primes(), table.log_p());
    let mut g = [KahanSum::default(), KahanSum::default()];
    let mut hs = [
        KahanSum::default(),
        KahanSum::default(),
        KahanSum::default(),
    ];
    for j in table.scale_range(k)? {
        let inv_p = 1.0 / p[j] as f64;
        let c = (dh * lp[j]).cos();
        let x = quad_form(lambdas, inv_p, c);
        let (f1, f2) = (bessel::f_prime_raw(x), bessel::f_second_raw(x));
        // M_p lambda
        let v = [
            0.5 * inv_p * (lambdas[0] + c * lambdas[1]),
            0.5 * inv_p * (c * lambdas[0] + lambdas[1]),
        ];
        g[0].add(2.0 * v[0] * f1);
        g[1].add(2.0 * v[1] * f1);
        hs[0].add(inv_p * f1 + 4.0 * v[0] * v[0] * f2);
        hs[1].add(inv_p * c * f1 + 4.0 * v[0] * v[1] * f2);
        hs[2].add(inv_p * f1 + 4.0 * v[1] * v[1] * f2);
    }
    let off = hs[1].value();
    Ok(TiltedMomentsTwo {
        mean: [g[0].value(), g[1].value()],
        covariance: [[hs[0].value(), off], [off, hs[2].value()]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primes::sieve;

    fn table() -> PrimeTable {
        sieve(16.0, 1 << 16).unwrap()
    }

    #[test]
    fn scale_one_variance_by_hand() {
        let t = table();
        let v = variance_scale(1, Backend::Exact(&t)).unwrap();
        assert!((v - (1.0 / 6.0 + 1.0 / 10.0 + 1.0 / 14.0)).abs() < 1e-15);
        assert!((v - 0.338_095_2).abs() < 1e-7);
    }

    #[test]
    fn scale_two_variance_twelve_primes() {
        let t = table();
        let ps = [11u32, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
        let hand: f64 = ps.iter().map(|&p| 0.5 / p as f64).sum();
        let v = variance_scale(2, Backend::Exact(&t)).unwrap();
        assert!((v - hand).abs() < 1e-15);
        assert!((v - 0.252_162).abs() < 1e-6);
    }

    #[test]
    fn integral_variance_is_half_log_two() {
        for k in [0, 3, 17, 40] {
            let v = variance_scale(k, Backend::Integral).unwrap();
            assert!((v - 0.346_573_59).abs() < 1e-8);
        }
        assert!((2.0 * sigma_sq() - std::f64::consts::LN_2).abs() < 1e-16);
        assert!(variance_scale(MAX_INTEGRAL_SCALE + 1, Backend::Integral)
            .unwrap_err()
            .is_capacity());
    }

    #[test]
    fn exact_variance_approaches_sigma_sq() {
        let t = table();
        let e = |k| (variance_scale(k, Backend::Exact(&t)).unwrap() - sigma_sq()).abs();
        assert!(e(4) < e(2));
    }

    #[test]
    fn exact_backend_capacity() {
        let t = sieve(8.0, 1 << 12).unwrap();
        assert!(variance_scale(4, Backend::Exact(&t))
            .unwrap_err()
            .is_capacity());
    }

    #[test]
    fn covariance_at_zero_is_variance() {
        let t = table();
        for k in 0..=4 {
            for b in [Backend::Exact(&t), Backend::Integral] {
                let v = variance_scale(k, b).unwrap();
                assert!((covariance_scale(k, 0.0, b).unwrap() - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integral_covariance_matches_quadrature_in_v() {
        // 1/2 int_{2^(k-1)}^{2^k} cos(dh v) / v dv directly in v
        for (k, dh) in [(1usize, 0.25), (4, 0.25), (7, 0.5), (9, 1.0)] {
            let lo = (k as f64 - 1.0).exp2();
            let hi = (k as f64).exp2();
            let (q, _) =
                quad::integrate(|v| 0.5 * (dh * v).cos() / v, lo, hi, 1e-13, 1e-16).unwrap();
            let c = covariance_scale(k, dh, Backend::Integral).unwrap();
            assert!((c - q).abs() < 1e-11, "k={k} dh={dh}: {c} vs {q}");
        }
    }

    #[test]
    fn cosine_integral_asymptotic_switch() {
        // Ci(60) - Ci(40) against quadrature
        let (q, _) = quad::integrate(|w| w.cos() / w, 40.0, 60.0, 1e-14, 1e-17).unwrap();
        assert!((cos_over_w_integral(40.0, 60.0).unwrap() - q).abs() < 1e-14);
        let (q, _) = quad::integrate(|w| w.cos() / w, 55.0, 80.0, 1e-14, 1e-17).unwrap();
        assert!((cos_over_w_integral(55.0, 80.0).unwrap() - q).abs() < 1e-14);
    }

    #[test]
    fn backends_agree_where_scales_hold_many_primes() {
        let t = table();
        for dh in [0.0, 0.1, 0.25, 1.0] {
            let e = covariance_scale(4, dh, Backend::Exact(&t)).unwrap();
            let i = covariance_scale(4, dh, Backend::Integral).unwrap();
            assert!((e - i).abs() < 0.01, "dh={dh}: {e} vs {i}");
        }
        // scales 1-3 hold 3, 12 and 413 primes; the integral is only their
        // average density and the gaps are recorded, not hidden
        let gap = |k| (variance_scale(k, Backend::Exact(&t)).unwrap() - sigma_sq()).abs();
        assert!(gap(1) < 0.01);
        assert!((gap(2) - 0.094_41).abs() < 1e-4);
        assert!((gap(3) - 0.014_97).abs() < 1e-4);
    }

    #[test]
    fn branching_points() {
        assert_eq!(branching_point(0.03125).unwrap(), Some(5));
        assert_eq!(branching_point(0.01).unwrap(), Some(6));
        assert_eq!(branching_point(1.0).unwrap(), Some(0));
        assert_eq!(branching_point(0.25).unwrap(), Some(2));
        assert_eq!(branching_point(0.0).unwrap(), None);
        assert!(branching_point(1.5).is_err());
        assert!(branching_point(-0.1).is_err());
    }

    #[test]
    fn covariance_total_predictors() {
        let t = table();
        let c = covariance_total(0.125, 4, Backend::Exact(&t)).unwrap();
        let target = 1.5 * std::f64::consts::LN_2;
        assert!((c.log_predictor - target).abs() < 1e-15);
        assert!((c.value - target).abs() < 0.25 * target, "{}", c.value);
        assert!(c.saturation_predictor.is_none());

        let c = covariance_total(1.0, 4, Backend::Exact(&t)).unwrap();
        assert!(c.value.abs() <= 1.0);

        let c = covariance_total(2f64.powi(-6), 4, Backend::Exact(&t)).unwrap();
        let sat = c.saturation_predictor.unwrap();
        assert!((sat - 4.0 * sigma_sq()).abs() < 1e-15);
        assert!((c.value - sat).abs() < 0.15 * sat, "{}", c.value);

        assert!(covariance_total(0.0, 4, Backend::Integral).is_err());
    }

    #[test]
    fn cgf_one_values() {
        let t = table();
        assert_eq!(cgf_one(&t, 2, 0.0).unwrap().exact, 0.0);
        let c = cgf_one(&t, 1, 1.0).unwrap();
        let hand: f64 = [3.0f64, 5.0, 7.0]
            .iter()
            .map(|p| bessel::log_i0(p.powf(-0.5)).unwrap())
            .sum();
        assert!((c.exact - hand).abs() < 1e-15);
        // 0.081650 + 0.049385 + 0.035413
        assert!((c.exact - 0.166_448).abs() < 1e-6);
        let c = cgf_one(&t, 3, 1.0).unwrap();
        assert!(c.difference.abs() <= 0.01);
        assert!(cgf_one(&t, 1, -1.0).is_err());
    }

    #[test]
    fn cgf_one_is_convex() {
        let t = table();
        let step = 0.05;
        let vals: Vec<f64> = (0..=60)
            .map(|i| cgf_one(&t, 2, i as f64 * step).unwrap().exact)
            .collect();
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-10);
        }
    }

    #[test]
    fn cgf_two_identities() {
        let t = table();
        for k in 1..=3 {
            for lam in [0.3, 1.0, 2.5] {
                let coupled = cgf_two(&t, k, [lam, lam], 0.0).unwrap();
                let one = cgf_one(&t, k, 2.0 * lam).unwrap();
                assert!((coupled.exact - one.exact).abs() < 1e-12);
                let marginal = cgf_two(&t, k, [lam, 0.0], 0.37).unwrap();
                let one = cgf_one(&t, k, lam).unwrap();
                assert!((marginal.exact - one.exact).abs() < 1e-12);
            }
        }
        let c = cgf_two(&t, 3, [1.0, 1.0], 0.25).unwrap();
        assert!(c.difference.abs() <= 0.02, "{}", c.difference);
    }

    #[test]
    fn pair_diff_reduces_to_one_point() {
        let t = table();
        let one: f64 = (1..=3).map(|k| cgf_one(&t, k, 1.3).unwrap().exact).sum();
        let a = cgf_pair_diff(&t, (1, 3), 1.3, 0.0, 0.0, 0.2).unwrap();
        let b = cgf_pair_diff(&t, (1, 3), 1.3, 5.0, 0.2, 0.2).unwrap();
        assert!((a - one).abs() < 1e-12);
        assert!((b - one).abs() < 1e-12);
    }

    #[test]
    fn tilted_moments_at_zero() {
        let t = table();
        for k in 1..=4 {
            let m = tilted_moments_one(&t, k, 0.0).unwrap();
            let v = variance_scale(k, Backend::Exact(&t)).unwrap();
            assert_eq!(m.mean, 0.0);
            assert!((m.variance - v).abs() < 1e-14);
        }
        let m = tilted_moments_one(&t, 3, 1.0).unwrap();
        let v3 = variance_scale(3, Backend::Exact(&t)).unwrap();
        assert!((m.mean - v3).abs() < 0.01);
    }

    #[test]
    fn tilted_moments_match_finite_differences() {
        let t = table();
        let h = 1e-5;
        for k in 1..=4 {
            for lam in [0.5, 1.0, 2.0] {
                let psi = |l: f64| cgf_one(&t, k, l).unwrap().exact;
                let m = tilted_moments_one(&t, k, lam).unwrap();
                let fd1 = (psi(lam + h) - psi(lam - h)) / (2.0 * h);
                let fd2 = (psi(lam + h) - 2.0 * psi(lam) + psi(lam - h)) / (h * h);
                assert!((m.mean - fd1).abs() < 1e-6, "k={k} lam={lam}");
                assert!((m.variance - fd2).abs() < 1e-4, "k={k} lam={lam}");
                // second difference of the mean is the sharper check
                let mp = |l: f64| tilted_moments_one(&t, k, l).unwrap().mean;
                let fdm = (mp(lam + h) - mp(lam - h)) / (2.0 * h);
                assert!((m.variance - fdm).abs() < 1e-6, "k={k} lam={lam}");
            }
        }
    }

    #[test]
    fn two_point_moments() {
        let t = table();
        let z = tilted_moments_two(&t, 3, [0.0, 0.0], 0.25).unwrap();
        let v = variance_scale(3, Backend::Exact(&t)).unwrap();
        let r = covariance_scale(3, 0.25, Backend::Exact(&t)).unwrap();
        assert_eq!(z.mean, [0.0, 0.0]);
        assert!((z.covariance[0][0] - v).abs() < 1e-14);
        assert!((z.covariance[0][1] - r).abs() < 1e-14);

        let c = tilted_moments_two(&t, 3, [0.8, 0.8], 0.0).unwrap();
        let one = tilted_moments_one(&t, 3, 1.6).unwrap();
        assert!((c.mean[0] - one.mean).abs() < 1e-12);
        assert!((c.mean[1] - one.mean).abs() < 1e-12);

        let m = tilted_moments_two(&t, 3, [1.0, 1.0], 0.25).unwrap();
        for i in 0..2 {
            assert!((m.mean[i] - (v + r)).abs() < 0.02);
        }

        // gradient and Hessian against finite differences of cgf_two
        let lam = [0.7, 1.9];
        let dh = 0.31;
        let psi = |a: f64, b: f64| cgf_two(&t, 4, [a, b], dh).unwrap().exact;
        let m = tilted_moments_two(&t, 4, lam, dh).unwrap();
        let h = 1e-5;
        let g0 = (psi(lam[0] + h, lam[1]) - psi(lam[0] - h, lam[1])) / (2.0 * h);
        let g1 = (psi(lam[0], lam[1] + h) - psi(lam[0], lam[1] - h)) / (2.0 * h);
        assert!((m.mean[0] - g0).abs() < 1e-6);
        assert!((m.mean[1] - g1).abs() < 1e-6);
        let mean_at = |a: f64, b: f64| tilted_moments_two(&t, 4, [a, b], dh).unwrap().mean;
        let d1 = (mean_at(lam[0], lam[1] + h)[0] - mean_at(lam[0], lam[1] - h)[0]) / (2.0 * h);
        let d0 = (mean_at(lam[0] + h, lam[1])[0] - mean_at(lam[0] - h, lam[1])[0]) / (2.0 * h);
        assert!((m.covariance[0][1] - d1).abs() < 1e-6);
        assert!((m.covariance[0][0] - d0).abs() < 1e-6);
    }

    #[test]
    fn covariance_matrix_eigenvalues_nonnegative() {
        let t = table();
        for k in 0..=4 {
            let v = variance_scale(k, Backend::Exact(&t)).unwrap();
            for i in 0..=40 {
                let r = covariance_scale(k, i as f64 * 0.05, Backend::Exact(&t)).unwrap();
                assert!(v - r >= -1e-15 && v + r >= -1e-15);
            }
        }
    }
}
