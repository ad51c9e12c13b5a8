//! Modified Bessel function I0 on the log scale, the ratio I1/I0, and the
//! function `f(x) = log I0(sqrt(2x))` with its first two derivatives.
//!
//! Small arguments (`s < 15`) use the power series, which has only positive
//! terms. Larger arguments use the exponentially scaled asymptotic series for
//! `log I0` and a continued fraction for `I1/I0`.

use crate::error::{Error, Result};
use std::f64::consts::TAU;

/// Argument at which evaluation switches from power series to asymptotics.
pub const SERIES_SWITCH: f64 = 15.0;

const SERIES_EPS: f64 = 1e-17;
const MAX_TERMS: usize = 500;

/// Sums `sum_k t^k / (k! (k+m)!)` for m = 0 and m = 1, and the t-derivatives.
/// Returns (B, A, B', A') with B = sum t^k/(k!)^2, A = sum t^k/(k!(k+1)!).
fn series_parts(t: f64) -> (f64, f64, f64, f64) {
    let mut b = 1.0;
    let mut a = 1.0;
    let mut db = 0.0;
    let mut da = 0.0;
    let mut tb = 1.0; // t^k/(k!)^2
    let mut ta = 1.0; // t^k/(k!(k+1)!)
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        // derivative terms use the previous power: k t^{k-1}/...
        let dtb = tb / kf; // k * t^{k-1}/(k!)^2 = t^{k-1}/((k-1)! k!)
        let dta = ta / (kf + 1.0); // k * t^{k-1}/(k!(k+1)!) = t^{k-1}/((k-1)!(k+1)!)
        db += dtb;
        da += dta;
        tb *= t / (kf * kf);
        ta *= t / (kf * (kf + 1.0));
        b += tb;
        a += ta;
        if tb < SERIES_EPS * b && dtb < SERIES_EPS * db.max(1e-300) {
            break;
        }
    }
    (b, a, db, da)
}

pub(crate) fn ln_i0(s: f64) -> f64 {
    let s = s.abs();
    if s < SERIES_SWITCH {
        // sum of the terms after the leading 1, so tiny arguments keep
        // full relative precision through ln_1p
        let t = 0.25 * s * s;
        let mut tail = 0.0;
        let mut term = 1.0;
        for k in 1..MAX_TERMS {
            let kf = k as f64;
            term *= t / (kf * kf);
            tail += term;
            if term < SERIES_EPS * tail {
                break;
            }
        }
        tail.ln_1p()
    } else {
        // e^{-s} sqrt(2 pi s) I0(s) ~ sum_k prod_{j<=k} (2j-1)^2 / (8 s j)
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 1..MAX_TERMS {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * s * kf);
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term < SERIES_EPS * sum {
                break;
            }
        }
        s - 0.5 * (TAU * s).ln() + sum.ln()
    }
}

/// `I1(s) / I0(s)` for s >= 0.
pub(crate) fn ratio_i1_i0(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    if s < SERIES_SWITCH {
        let (b, a, _, _) = series_parts(0.25 * s * s);
        0.5 * s * a / b
    } else {
        // I1/I0 = 1/(2/s + 1/(4/s + 1/(6/s + ...))), modified Lentz.
        let tiny = 1e-300;
        let mut f = tiny;
        let mut c = f;
        let mut d = 0.0;
        for j in 1..10_000 {
            let bj = 2.0 * j as f64 / s;
            let aj = 1.0;
            d = bj + aj * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = bj + aj / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        f
    }
}

/// Derivative of `I1/I0`: `1 - R/s - R^2`, with the limit 1/2 at s = 0.
pub(crate) fn ratio_derivative(s: f64) -> f64 {
    if s < 1e-4 {
        return 0.5 - 3.0 * s * s / 16.0;
    }
    let r = ratio_i1_i0(s);
    1.0 - r / s - r * r
}

fn check_nonneg(name: &'static str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "{name} requires a non-negative argument, got {x}"
        )));
    }
    Ok(())
}

/// `log I0(x)`, relative error about 1e-15 (series) or 1e-13 (asymptotic).
pub fn log_i0(x: f64) -> Result<f64> {
    check_nonneg("log_i0", x)?;
    Ok(ln_i0(x))
}

/// `I1(x) / I0(x)`, the derivative of `log I0`.
pub fn i1_over_i0(x: f64) -> Result<f64> {
    check_nonneg("i1_over_i0", x)?;
    Ok(ratio_i1_i0(x))
}

/// `f(x) = log I0(sqrt(2x))`.
pub fn f(x: f64) -> Result<f64> {
    check_nonneg("f", x)?;
    Ok(f_raw(x))
}

/// `f'(x)`; equals 1/2 at the origin.
pub fn f_prime(x: f64) -> Result<f64> {
    check_nonneg("f_prime", x)?;
    Ok(f_prime_raw(x))
}

/// `f''(x)`; equals -1/8 at the origin.
pub fn f_second(x: f64) -> Result<f64> {
    check_nonneg("f_second", x)?;
    Ok(f_second_raw(x))
}

#[inline]
pub(crate) fn f_raw(x: f64) -> f64 {
    if x < 1e-8 {
        // x/2 - x^2/16 + x^3/72
        return x * (0.5 - x * (1.0 / 16.0 - x / 72.0));
    }
    ln_i0((2.0 * x).sqrt())
}

#[inline]
pub(crate) fn f_prime_raw(x: f64) -> f64 {
    let s = (2.0 * x).sqrt();
    if s < SERIES_SWITCH {
        let (b, a, _, _) = series_parts(0.5 * x);
        0.5 * a / b
    } else {
        ratio_i1_i0(s) / s
    }
}

#[inline]
pub(crate) fn f_second_raw(x: f64) -> f64 {
    let s = (2.0 * x).sqrt();
    if s < SERIES_SWITCH {
        let (b, a, db, da) = series_parts(0.5 * x);
        (da * b - a * db) / (4.0 * b * b)
    } else {
        let r = ratio_i1_i0(s);
        (s - 2.0 * r - s * r * r) / (s * s * s)
    }
}
