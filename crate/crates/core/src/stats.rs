//! Sample statistics used by the Monte Carlo checks.

use crate::error::{Error, Result};
use serde::Serialize;
use statrs::function::erf;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation for large x.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of the upper tail: the x with `1 - Phi(x) = q`.
pub fn normal_isf(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * q)
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Mean, variance and standard error of the mean of a sample.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = xs.iter().copied().collect::<KahanSum>().value() / n as f64;
        let variance = if n > 1 {
            xs.iter()
                .map(|x| (x - mean) * (x - mean))
                .collect::<KahanSum>()
                .value()
                / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            count: n,
            mean,
            variance,
            se: (variance / n as f64).sqrt(),
        }
    }
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_se(xs: &[f64]) -> f64 {
    let s = Summary::of(xs);
    let n = xs.len() as f64;
    let m4 = xs.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / n;
    ((m4 - s.variance * s.variance) / n).max(0.0).sqrt()
}

/// Sample quantile with linear interpolation between order statistics
/// (type 7). `xs` need not be sorted.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    v[lo] * (1.0 - w) + v[hi] * w
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Median standard error from the order statistics bracketing the median:
/// `(q(1/2 + 1/(2 sqrt R)) - q(1/2 - 1/(2 sqrt R))) / 2 ~ 1 / (2 f(m) sqrt R)`.
pub fn median_se_sorted(sorted: &[f64]) -> f64 {
    let d = 0.5 / (sorted.len() as f64).sqrt();
    0.5 * (quantile_sorted(sorted, 0.5 + d) - quantile_sorted(sorted, 0.5 - d))
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `xs` and
/// `N(mean, variance)`.
pub fn ks_distance_normal(xs: &[f64], mean: f64, variance: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let sd = variance.sqrt();
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal_cdf((x - mean) / sd);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Pearson correlation with its large-sample standard error `(1 - r^2)/sqrt(n)`.
pub fn correlation(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sx = Summary::of(xs);
    let sy = Summary::of(ys);
    let n = xs.len();
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - sx.mean) * (y - sy.mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let r = cov / (sx.variance * sy.variance).sqrt();
    (r, (1.0 - r * r) / (n as f64).sqrt())
}

/// Delete-one jackknife standard error of a statistic given as a function of
/// per-replicate sums. `stat` receives (sum over kept replicates, kept count).
pub fn jackknife_se<const D: usize>(
    rows: &[[f64; D]],
    stat: impl Fn(&[f64; D], f64) -> f64,
) -> f64 {
    let n = rows.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut total = [0.0; D];
    for r in rows {
        for d in 0..D {
            total[d] += r[d];
        }
    }
    let loo: Vec<f64> = rows
        .iter()
        .map(|r| {
            let mut s = total;
            for d in 0..D {
                s[d] -= r[d];
            }
            stat(&s, (n - 1) as f64)
        })
        .collect();
    let m = loo.iter().sum::<f64>() / n as f64;
    let ss = loo.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    ((n - 1) as f64 / n as f64 * ss).sqrt()
}

/// Ordinary least squares `y ~ X beta`; returns beta.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let rows = design.len();
    if rows == 0 || rows != y.len() {
        return Err(Error::arg("design", "row count must match observations"));
    }
    let cols = design[0].len();
    if rows < cols {
        return Err(Error::Degenerate(format!(
            "{rows} observations cannot determine {cols} coefficients"
        )));
    }
    let x = nalgebra::DMatrix::from_fn(rows, cols, |i, j| design[i][j]);
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    let beta = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}
