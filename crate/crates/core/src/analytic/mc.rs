//! Monte Carlo oracles for the analytic formulas: direct sampling of scale
//! sums under the uniform or tilted phase law.
//!
//! Sample `s` uses replicate index `s`, and prime `j` uses item index `j`, so
//! every sample agrees with the corresponding full phase assignment from
//! [`crate::model`].

use crate::error::{Error, Result};
use crate::model::vonmises;
use crate::primes::PrimeTable;
use crate::rng::{uniform_angle, CounterRng};
use crate::stats::{variance_se, KahanSum, Summary};
use rayon::prelude::*;
use serde::Serialize;
use std::ops::Range;

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Whether `value` lies within `z` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, z: f64) -> bool {
        (self.estimate - value).abs() <= z * self.se
    }
}

/// Phase law for the primes being summed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseLaw {
    Uniform,
    /// One-point tilt `exp(lambda W_p(h))` on every prime summed.
    Tilted {
        lambda: f64,
        h: f64,
    },
}

const MIN_SAMPLES: usize = 2;

/// Field sums `sum_{j in range} cos(theta_j - h log p_j) / sqrt(p_j)` at each
/// `h` in `hs`, for `samples` independent replicates. Row-major:
/// entry `s * hs.len() + i` is sample `s` at `hs[i]`.
pub fn field_samples(
    table: &PrimeTable,
    range: Range<usize>,
    hs: &[f64],
    law: PhaseLaw,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples < MIN_SAMPLES {
        return Err(Error::SampleShortfall {
            got: samples,
            need: MIN_SAMPLES,
        });
    }
    if range.end > table.len() {
        return Err(Error::Range(format!(
            "prime indices {range:?} beyond table of {}",
            table.len()
        )));
    }
    if let PhaseLaw::Tilted { lambda, .. } = law {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::arg(
                "lambda",
                format!("must be finite and >= 0, got {lambda}"),
            ));
        }
    }
    let log_p = &table.log_p()[range.clone()];
    let inv = &table.inv_sqrt_p()[range.clone()];
    let width = hs.len();
    let rows: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![KahanSum::default(); width];
            for (off, (&lp, &w)) in log_p.iter().zip(inv).enumerate() {
                let j = (range.start + off) as u64;
                let theta = match law {
                    PhaseLaw::Uniform => uniform_angle(seed, s, j),
                    PhaseLaw::Tilted { lambda, h } => {
                        let mut rng = CounterRng::new(seed, s, j);
                        vonmises::sample(h * lp, lambda * w, &mut rng)
                    }
                };
                for (a, &h) in acc.iter_mut().zip(hs) {
                    a.add(w * (theta - h * lp).cos());
                }
            }
            acc.iter().map(KahanSum::value).collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Samples of `Y_k(h)`, or `X_{k_lo - 1, k_hi}(h)` for a scale range.
pub fn scale_samples(
    table: &PrimeTable,
    scales: (usize, usize),
    h: f64,
    law: PhaseLaw,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let r = table.scales_range(scales.0, scales.1)?;
    field_samples(table, r, &[h], law, samples, seed)
}

fn mean_estimate(xs: &[f64]) -> McEstimate {
    let s = Summary::of(xs);
    McEstimate {
        estimate: s.mean,
        se: s.se,
        samples: s.count,
    }
}

/// `log mean exp(lambda y)` with a delta-method standard error.
pub fn log_mgf(ys: &[f64], lambda: f64) -> McEstimate {
    let e: Vec<f64> = ys.iter().map(|y| (lambda * y).exp()).collect();
    let m = mean_estimate(&e);
    McEstimate {
        estimate: m.estimate.ln(),
        se: m.se / m.estimate,
        samples: m.samples,
    }
}

/// `log E exp(lambda Y_k)` under uniform phases.
pub fn mc_cgf_one(
    table: &PrimeTable,
    k: usize,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let ys = scale_samples(table, (k, k), 0.0, PhaseLaw::Uniform, samples, seed)?;
    Ok(log_mgf(&ys, lambda))
}

/// Mean and variance of `Y_k(h)` under the one-point tilt, with standard
/// errors.
pub fn mc_tilted_moments(
    table: &PrimeTable,
    k: usize,
    lambda: f64,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    let ys = scale_samples(
        table,
        (k, k),
        h,
        PhaseLaw::Tilted { lambda, h },
        samples,
        seed,
    )?;
    Ok(moments(&ys))
}

/// Sample mean and sample variance, each with a standard error.
pub fn moments(ys: &[f64]) -> (McEstimate, McEstimate) {
    let s = Summary::of(ys);
    (
        mean_estimate(ys),
        McEstimate {
            estimate: s.variance,
            se: variance_se(ys),
            samples: s.count,
        },
    )
}

/// Sample covariance of paired samples, with the standard error of the
/// mean of centred products.
pub fn covariance(xs: &[f64], ys: &[f64]) -> McEstimate {
    let sx = Summary::of(xs);
    let sy = Summary::of(ys);
    let prods: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - sx.mean) * (y - sy.mean))
        .collect();
    let p = Summary::of(&prods);
    let n = p.count as f64;
    McEstimate {
        estimate: p.mean * n / (n - 1.0),
        se: p.se,
        samples: p.count,
    }
}

/// Paired samples `(Y_k(0), Y_k(dh))` under uniform phases.
pub fn paired_scale_samples(
    table: &PrimeTable,
    k: usize,
    dh: f64,
    samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = table.scale_range(k)?;
    let flat = field_samples(table, r, &[0.0, dh], PhaseLaw::Uniform, samples, seed)?;
    Ok((
        flat.iter().step_by(2).copied().collect(),
        flat.iter().skip(1).step_by(2).copied().collect(),
    ))
}

/// `Cov(Y_k(0), Y_k(dh))`.
pub fn mc_covariance(
    table: &PrimeTable,
    k: usize,
    dh: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (x, y) = paired_scale_samples(table, k, dh, samples, seed)?;
    Ok(covariance(&x, &y))
}

/// `log E exp(l1 X(0) + l2 (X(h2) - X(h1)))` for `X` summed over
/// `scales`.
pub fn mc_cgf_pair_diff(
    table: &PrimeTable,
    scales: (usize, usize),
    lambdas: (f64, f64),
    hs: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let r = table.scales_range(scales.0, scales.1)?;
    let flat = field_samples(
        table,
        r,
        &[0.0, hs.0, hs.1],
        PhaseLaw::Uniform,
        samples,
        seed,
    )?;
    let z: Vec<f64> = flat
        .chunks_exact(3)
        .map(|c| lambdas.0 * c[0] + lambdas.1 * (c[2] - c[1]))
        .collect();
    Ok(log_mgf(&z, 1.0))
}

/// `P[X > x]` for `X` summed over `scales`, at `h = 0`.
pub fn mc_tail(
    table: &PrimeTable,
    scales: (usize, usize),
    x: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let ys = scale_samples(table, scales, 0.0, PhaseLaw::Uniform, samples, seed)?;
    Ok(proportion(ys.iter().filter(|&&y| y > x).count(), ys.len()))
}

/// A binomial proportion with standard error `sqrt(p (1 - p) / n)`.
pub fn proportion(hits: usize, n: usize) -> McEstimate {
    let p = hits as f64 / n as f64;
    McEstimate {
        estimate: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
        samples: n,
    }
}
