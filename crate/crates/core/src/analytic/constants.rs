use super::sigma_sq;
use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::LN_2;

/// `m_n(eps) = n log 2 - (3/4) log n + eps log n`.
pub fn m_n(n: f64, eps: f64) -> f64 {
    let ln = n.ln();
    n * LN_2 - 0.75 * ln + eps * ln
}

/// Bookkeeping for the upper- and lower-bound arguments at depth `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingConstants {
    pub n: usize,
    pub eps: f64,
    /// `floor((log log n)^2)`.
    pub r: usize,
    /// `r / 100`.
    pub delta: f64,
    pub m_n: f64,
    /// `m_{n-r}(eps)`.
    pub m_n_minus_r: f64,
    /// `m_{n-r}(eps) / (n - r)`, the per-scale barrier slope.
    pub mu: f64,
    /// `mu^2 / (2 sigma^2)`.
    pub mu_sq_over_2sigma_sq: f64,
    /// `log 2 - (3/2 - 2 eps) log(n-r) / (n-r)`.
    pub mu_sq_expansion: f64,
    /// `mu_sq_over_2sigma_sq - mu_sq_expansion`, of order `(log n / n)^2`.
    pub expansion_difference: f64,
    /// `(log n)^2`, the intercept of the upper barrier.
    pub barrier_intercept: f64,
    /// `floor(log n)^2`, the first scale of the upper barrier.
    pub barrier_start: usize,
}

/// Smallest `n` for which `r >= 1`.
pub const MIN_DEPTH: usize = 16;

pub fn scaling_constants(n: usize, eps: f64) -> Result<ScalingConstants> {
    if n < MIN_DEPTH {
        return Err(Error::arg(
            "n",
            format!("must be >= {MIN_DEPTH} so that r = floor((log log n)^2) >= 1, got {n}"),
        ));
    }
    let r = (n as f64).ln().ln().powi(2).floor() as usize;
    scaling_constants_with_cutoff(n, eps, r)
}

/// The same bookkeeping with an explicit cutoff `r < n`, for depths where
/// `floor((log log n)^2)` is degenerate (the exact prime model has `n <= 4`).
pub fn scaling_constants_with_cutoff(n: usize, eps: f64, r: usize) -> Result<ScalingConstants> {
    if r >= n {
        return Err(Error::arg("r", format!("need r < n, got r = {r}, n = {n}")));
    }
    if !eps.is_finite() {
        return Err(Error::arg("eps", format!("must be finite, got {eps}")));
    }
    let n_f = n as f64;
    let nr = (n - r) as f64;
    let m_nr = m_n(nr, eps);
    let mu = m_nr / nr;
    let mu_sq = mu * mu / (2.0 * sigma_sq());
    let expansion = LN_2 - (1.5 - 2.0 * eps) * nr.ln() / nr;
    Ok(ScalingConstants {
        n,
        eps,
        r,
        delta: r as f64 / 100.0,
        m_n: m_n(n_f, eps),
        m_n_minus_r: m_nr,
        mu,
        mu_sq_over_2sigma_sq: mu_sq,
        mu_sq_expansion: expansion,
        expansion_difference: mu_sq - expansion,
        barrier_intercept: n_f.ln().powi(2),
        barrier_start: (n_f.ln().floor() as usize).pow(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_sixteen() {
        let s = scaling_constants(16, 0.0).unwrap();
        assert!((s.m_n - 9.010_91).abs() < 1e-5);
        assert!((s.m_n - (16.0 * LN_2 - 0.75 * 16f64.ln())).abs() < 1e-14);
        // log log 16 = 1.0197, squared 1.0399
        assert_eq!(s.r, 1);
        assert!(s.r < s.n);
        assert!((s.delta - 0.01).abs() < 1e-15);
    }

    #[test]
    fn r_at_a_million() {
        assert_eq!(scaling_constants(1_000_000, 0.0).unwrap().r, 6);
    }

    #[test]
    fn eps_shift_is_exact() {
        let a = scaling_constants(64, 0.0).unwrap();
        let b = scaling_constants(64, 0.1).unwrap();
        assert!((b.m_n - a.m_n - 0.1 * 64f64.ln()).abs() < 1e-13);
        assert!(b.m_n > a.m_n);
    }

    #[test]
    fn expansion_error_shrinks() {
        let small = scaling_constants(64, 0.1)
            .unwrap()
            .expansion_difference
            .abs();
        let large = scaling_constants(1 << 16, 0.1)
            .unwrap()
            .expansion_difference
            .abs();
        assert!(large < small);
        assert!(large < 1e-6);
    }

    #[test]
    fn explicit_cutoff_matches_default() {
        let a = scaling_constants(64, 0.1).unwrap();
        let b = scaling_constants_with_cutoff(64, 0.1, a.r).unwrap();
        assert_eq!(a, b);
        let small = scaling_constants_with_cutoff(3, -0.1, 0).unwrap();
        // m_3(-0.1) = 3 log 2 - 0.85 log 3
        assert!((small.m_n_minus_r - (3.0 * LN_2 - 0.85 * 3f64.ln())).abs() < 1e-14);
        assert!((small.mu - small.m_n_minus_r / 3.0).abs() < 1e-15);
        assert!(scaling_constants_with_cutoff(3, 0.0, 3).is_err());
    }

    #[test]
    fn small_depth_rejected() {
        assert!(matches!(
            scaling_constants(15, 0.0),
            Err(Error::Argument { name: "n", .. })
        ));
    }
}
