use super::{sigma_sq, ScalingConstants};
use crate::error::{Error, Result};
use serde::Serialize;

/// The unspecified absolute constants of the tail bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    /// Prefactor `c`.
    pub c: f64,
    /// Coefficient of `a^(3/2)` in the oscillation bound.
    pub c_exp: f64,
    /// The `C` of the regime `x <= C (k - r)`.
    pub regime_cap: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            c: 1.0,
            c_exp: 1.0,
            regime_cap: 10.0,
        }
    }
}

/// A bound evaluated with prefactor `c`, its `c = 1` shape, and whether the
/// arguments are inside the regime where the bound is claimed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    /// The bound without the prefactor.
    pub shape: f64,
    /// Optimizing tilt, where one exists.
    pub lambda: Option<f64>,
    /// `None` when in regime, otherwise which hypothesis fails.
    pub regime_violation: Option<String>,
}

impl BoundValue {
    pub fn in_regime(&self) -> bool {
        self.regime_violation.is_none()
    }
}

fn span(k: usize, r: usize) -> Result<f64> {
    if r >= k {
        return Err(Error::arg("r", format!("need r < k, got r = {r}, k = {k}")));
    }
    Ok((k - r) as f64)
}

fn gaussian_exponent(x: f64, span: f64) -> f64 {
    x * x / (2.0 * span * sigma_sq())
}

/// `exp(-x^2 / (2 (k-r) sigma^2))` with the optimizing `lambda = x / ((k-r) sigma^2)`.
pub fn chernoff_tail_one(x: f64, k: usize, r: usize, params: &BoundParams) -> Result<BoundValue> {
    let s = span(k, r)?;
    let shape = (-gaussian_exponent(x, s)).exp();
    let violation = if !(x > 0.0) {
        Some(format!("x = {x} must be > 0"))
    } else if x > params.regime_cap * s {
        Some(format!(
            "x = {x} exceeds C (k - r) = {}",
            params.regime_cap * s
        ))
    } else {
        None
    };
    Ok(BoundValue {
        value: params.c * shape,
        shape,
        lambda: Some(x / (s * sigma_sq())),
        regime_violation: violation,
    })
}

/// `c exp(-x^2 / (2 (k-r) sigma^2) - c_exp a^(3/2))`, bounding
/// `P[max_{|h'-h| <= 2^(-k-1)} X_{r,k}(h') > x + a, X_{r,k}(h) <= x]`.
pub fn oscillation_bound(
    x: f64,
    a: f64,
    k: usize,
    r: usize,
    params: &BoundParams,
) -> Result<BoundValue> {
    let s = span(k, r)?;
    let shape = (-gaussian_exponent(x, s) - params.c_exp * a.powf(1.5)).exp();
    let a_cap = (2.0 * k as f64).exp2() - x;
    let violation = if !(x >= 0.0) || x > params.regime_cap * s {
        Some(format!("x = {x} outside [0, C (k - r)]"))
    } else if !(a >= 2.0) || a > a_cap {
        Some(format!("a = {a} outside [2, 2^(2k) - x = {a_cap}]"))
    } else {
        None
    };
    Ok(BoundValue {
        value: params.c * shape,
        shape,
        lambda: None,
        regime_violation: violation,
    })
}

/// `c exp(-x^2 / (2 (k-r) sigma^2))`, bounding the tail of the maximum of
/// `X_{r,k}` over an interval of length `2^-k`.
pub fn sup_interval_bound(x: f64, k: usize, r: usize, params: &BoundParams) -> Result<BoundValue> {
    let s = span(k, r)?;
    let shape = (-gaussian_exponent(x, s)).exp();
    let violation = (!(x >= 0.0) || x > params.regime_cap * s)
        .then(|| format!("x = {x} outside [0, C (k - r)]"));
    Ok(BoundValue {
        value: params.c * shape,
        shape,
        lambda: None,
        regime_violation: violation,
    })
}

/// `c 2^(-n delta)`, bounding `P[max_h X_n(h) >= (1 + delta) n log 2]`.
pub fn remark_max_bound(n: usize, delta: f64, params: &BoundParams) -> Result<BoundValue> {
    if !(delta > 0.0) {
        return Err(Error::arg("delta", format!("must be > 0, got {delta}")));
    }
    let shape = (-(n as f64) * delta).exp2();
    Ok(BoundValue {
        value: (params.c * shape).min(f64::MAX),
        shape,
        lambda: None,
        regime_violation: None,
    })
}

/// The two-point bound for branching point `l` with `r + Delta < l <= n - Delta`:
///
/// `c 2^-(2n-l) 2^(19 Delta + r) (n-r)^((3/2 + 2 eps)(2 - (l + 3 Delta - r)/(n-r)))
///  / ((n - l - Delta)^3 (l - Delta - r)^(3/2))`.
///
/// Outside the regime a denominator can vanish; the value is then infinite.
pub fn two_point_bound(sc: &ScalingConstants, l: usize, params: &BoundParams) -> BoundValue {
    let (n, r, d, eps) = (sc.n as f64, sc.r as f64, sc.delta, sc.eps);
    let l_f = l as f64;
    let nr = n - r;
    let power = (1.5 + 2.0 * eps) * (2.0 - (l_f + 3.0 * d - r) / nr);
    let a = n - l_f - d;
    let b = l_f - d - r;
    let violation = (!(r + d < l_f && l_f <= n - d)).then(|| {
        format!(
            "l = {l} outside (r + Delta, n - Delta] = ({}, {}]",
            r + d,
            n - d
        )
    });
    let shape = if a > 0.0 && b > 0.0 {
        let log2_val =
            -(2.0 * n - l_f) + 19.0 * d + r + power * nr.log2() - 3.0 * a.log2() - 1.5 * b.log2();
        log2_val.exp2()
    } else {
        f64::INFINITY
    };
    BoundValue {
        value: params.c * shape,
        shape,
        lambda: None,
        regime_violation: violation,
    }
}

/// Smallest prefactor `c` with `empirical <= c * shape` for every pair
/// `(empirical, shape)`. Pairs with zero empirical frequency impose nothing.
pub fn calibrate_constant(pairs: &[(f64, f64)]) -> f64 {
    pairs
        .iter()
        .filter(|(e, _)| *e > 0.0)
        .map(|&(e, s)| if s > 0.0 { e / s } else { f64::INFINITY })
        .fold(0.0, f64::max)
}
