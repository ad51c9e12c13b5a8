use crate::analytic::m_n;
use crate::error::{Error, Result};
use crate::model::{dyadic_grid, eval_field_grid, sample_phases, GridBackend};
use crate::primes::{sieve, PrimeTable, DEFAULT_SEGMENT, MAX_LOG_LIMIT};
use crate::stats::{median_se_sorted, quantile_sorted, Summary};
use crate::walks::{brw_max_samples, BrwParams};
use rayon::prelude::*;
use serde::Serialize;

/// Source of per-replicate maxima.
#[derive(Clone, Copy, Debug)]
pub enum MaxModel<'a> {
    /// `max_{h in H_g} X_n(h)` for the prime field.
    Prime {
        table: &'a PrimeTable,
        n: usize,
        g: u32,
        backend: GridBackend,
    },
    /// Maximum over the leaves of a planted tree.
    Brw(BrwParams),
}

impl MaxModel<'_> {
    pub fn depth(&self) -> usize {
        match self {
            MaxModel::Prime { n, .. } => *n,
            MaxModel::Brw(p) => p.depth,
        }
    }
}

/// Quantiles of the maxima and their position relative to `m_n(0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxSummary {
    pub replicates: usize,
    pub mean: f64,
    pub sd: f64,
    /// `(q, quantile)` for `q` in 0.1, 0.25, 0.5, 0.75, 0.9.
    pub quantiles: Vec<(f64, f64)>,
    pub median: f64,
    pub median_se: f64,
    /// `m_n(0) = n log 2 - (3/4) log n`; `NaN` for `n = 0`.
    pub m_n: f64,
    pub recentered_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxDistribution {
    pub samples: Vec<f64>,
    pub summary: MaxSummary,
}

const QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Prime table covering scales `0..=n`, i.e. primes up to `e^(2^n)`.
pub fn prime_table_for(n: usize) -> Result<PrimeTable> {
    let log_limit = (n as f64).exp2();
    if log_limit > MAX_LOG_LIMIT {
        return Err(Error::Capacity {
            what: "depth n (primes up to e^(2^n))",
            value: n as f64,
            cap: MAX_LOG_LIMIT.log2().floor(),
        });
    }
    sieve(log_limit, DEFAULT_SEGMENT)
}

fn summarize(samples: &[f64], n: usize) -> MaxSummary {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let s = Summary::of(samples);
    let median = quantile_sorted(&sorted, 0.5);
    let center = if n == 0 { f64::NAN } else { m_n(n as f64, 0.0) };
    MaxSummary {
        replicates: samples.len(),
        mean: s.mean,
        sd: s.variance.sqrt(),
        quantiles: QUANTILES
            .iter()
            .map(|&q| (q, quantile_sorted(&sorted, q)))
            .collect(),
        median,
        median_se: median_se_sorted(&sorted),
        m_n: center,
        recentered_median: median - center,
    }
}

/// Per-replicate maxima with a summary. Replicate `i` uses replicate index
/// `i` of `seed`.
pub fn empirical_max_distribution(
    model: MaxModel,
    replicates: usize,
    seed: u64,
) -> Result<MaxDistribution> {
    if replicates < 2 {
        return Err(Error::SampleShortfall {
            got: replicates,
            need: 2,
        });
    }
    let samples = match model {
        MaxModel::Prime {
            table,
            n,
            g,
            backend,
        } => {
            table.scale_range(n)?;
            let grid = dyadic_grid(g)?;
            (0..replicates as u64)
                .into_par_iter()
                .map(|rep| {
                    let ph = sample_phases(table, seed, rep);
                    let v = eval_field_grid(&ph, table, &grid, None, n, backend)?;
                    Ok(v.into_iter().fold(f64::NEG_INFINITY, f64::max))
                })
                .collect::<Result<Vec<f64>>>()?
        }
        MaxModel::Brw(params) => brw_max_samples(&params, replicates, seed),
    };
    Ok(MaxDistribution {
        summary: summarize(&samples, model.depth()),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::median;
    use std::f64::consts::LN_2;

    #[test]
    fn table_for_depth() {
        let t = prime_table_for(2).unwrap();
        assert_eq!(t.primes().last(), Some(&53));
        assert!(matches!(prime_table_for(5), Err(Error::Capacity { .. })));
    }

    #[test]
    fn prime_maxima_in_pilot_band() {
        let t = prime_table_for(2).unwrap();
        let m = MaxModel::Prime {
            table: &t,
            n: 2,
            g: 8,
            backend: GridBackend::Recurrence,
        };
        let d = empirical_max_distribution(m, 500, 11).unwrap();
        assert!(d.samples.iter().all(|x| x.is_finite()));
        let med = d.summary.median;
        assert!((0.6 * LN_2..=4.0 * LN_2).contains(&med), "{med}");
        assert_eq!(d.summary.quantiles[2].1, med);
    }

    #[test]
    fn median_variance_halves_when_replicates_double() {
        // variance of the median over independent batches
        let p = BrwParams::new(8).unwrap();
        let batches = 400;
        let spread = |size: usize, seed: u64| {
            let meds: Vec<f64> = (0..batches)
                .map(|b| {
                    let d = empirical_max_distribution(MaxModel::Brw(p), size, seed + b).unwrap();
                    d.summary.median
                })
                .collect();
            Summary::of(&meds).variance
        };
        let ratio = spread(200, 10_000) / spread(100, 20_000);
        assert!((ratio - 0.5).abs() <= 0.3 * 0.5, "{ratio}");
    }

    #[test]
    fn brw_summary_recenters() {
        let d =
            empirical_max_distribution(MaxModel::Brw(BrwParams::new(10).unwrap()), 200, 4).unwrap();
        assert_eq!(d.summary.median, median(&d.samples));
        assert!((d.summary.recentered_median - (d.summary.median - m_n(10.0, 0.0))).abs() < 1e-15);
        assert!(d.summary.median_se > 0.0);
    }
}
