use super::{ExceedanceConfig, ScalePaths};
use crate::analytic::branching_point;
use crate::analytic::mc::McEstimate;
use crate::error::{Error, Result};
use crate::model::{dyadic_grid, eval_increments_grid, sample_phases, GridBackend};
use crate::primes::PrimeTable;
use crate::stats::{jackknife_se, Summary};
use crate::walks::{brw_exceedances, BrwParams};
use rayon::prelude::*;
use serde::Serialize;

/// Fewest replicates accepted by [`estimate_moments`].
pub const MIN_REPLICATES: usize = 100;

/// Which field the grid values come from.
#[derive(Clone, Copy, Debug)]
pub enum FieldModel<'a> {
    /// The prime field on `H_g`; the table must cover scale `n`.
    Prime {
        table: &'a PrimeTable,
        backend: GridBackend,
    },
    /// The planted branching random walk of depth `n`, whose `2^n` leaves
    /// play the grid points (`g` must equal `n`). Supports a level and a
    /// strict barrier only.
    Brw { variance: f64 },
}

/// Counts from one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicateCounts {
    pub replicate: u64,
    /// Points meeting the level, ignoring barrier and window.
    pub z: u64,
    /// Points meeting the full configured event.
    pub z_tilde: u64,
    pub max: f64,
}

/// First and second moments of a count and the probability it is positive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub replicates: usize,
    pub first: McEstimate,
    pub second: McEstimate,
    pub hit: McEstimate,
    /// `E[Z]^2 / E[Z^2]`, 0 when `E[Z^2] = 0`.
    pub pz: f64,
    pub pz_se: f64,
    /// Jackknife SE of `E[Z] - P(Z >= 1)`.
    pub markov_gap_se: f64,
    /// Jackknife SE of `P(Z >= 1) - E[Z]^2 / E[Z^2]`.
    pub pz_gap_se: f64,
    /// Set when the count is constant across replicates.
    pub degenerate: Option<String>,
}

impl MomentReport {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::SampleShortfall {
                got: counts.len(),
                need: 2,
            });
        }
        let rows: Vec<[f64; 3]> = counts
            .iter()
            .map(|&c| {
                let z = c as f64;
                [z, z * z, if c >= 1 { 1.0 } else { 0.0 }]
            })
            .collect();
        let col = |d: usize| -> McEstimate {
            let xs: Vec<f64> = rows.iter().map(|r| r[d]).collect();
            let s = Summary::of(&xs);
            McEstimate {
                estimate: s.mean,
                se: jackknife_se(&rows, |t, n| t[d] / n),
                samples: s.count,
            }
        };
        let ratio = |t: &[f64; 3], n: f64| {
            let e2 = t[1] / n;
            if e2 > 0.0 {
                (t[0] / n).powi(2) / e2
            } else {
                0.0
            }
        };
        let first = col(0);
        let second = col(1);
        let n = counts.len() as f64;
        let total = rows.iter().fold([0.0; 3], |mut a, r| {
            (0..3).for_each(|d| a[d] += r[d]);
            a
        });
        let degenerate = counts
            .iter()
            .all(|&c| c == counts[0])
            .then(|| format!("count is {} on every replicate", counts[0]));
        Ok(MomentReport {
            replicates: counts.len(),
            first,
            second,
            hit: col(2),
            pz: ratio(&total, n),
            pz_se: jackknife_se(&rows, ratio),
            markov_gap_se: jackknife_se(&rows, |t, n| (t[0] - t[2]) / n),
            pz_gap_se: jackknife_se(&rows, |t, n| t[2] / n - ratio(t, n)),
            degenerate,
        })
    }

    /// `P(Z >= 1) <= E[Z] + z SE`.
    pub fn markov_holds(&self, z: f64) -> bool {
        self.hit.estimate <= self.first.estimate + z * self.markov_gap_se
    }

    /// `P(Z >= 1) >= E[Z]^2 / E[Z^2] - z SE`.
    pub fn pz_holds(&self, z: f64) -> bool {
        self.hit.estimate >= self.pz - z * self.pz_gap_se
    }
}

/// The off-diagonal part of `E[Z^2]` split by the branching point
/// `l = floor(log2 1/|h1 - h2|)` of each ordered pair of distinct points:
/// `E[Z^2] = diagonal + sum_l mean[l]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairBins {
    /// `E[Z]`, the pairs with `h1 = h2`.
    pub diagonal: f64,
    /// Index `l = 0..=g`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Per-replicate counts plus moment reports for the plain and configured
/// counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRun {
    pub config: ExceedanceConfig,
    pub seed: u64,
    pub rows: Vec<ReplicateCounts>,
    pub z: MomentReport,
    pub z_tilde: MomentReport,
    /// Two-point decomposition of `E[Z_tilde^2]` (prime model only).
    pub bins: Option<PairBins>,
}

fn pair_bins_of(hits: &[usize], g: u32) -> Vec<f64> {
    let mut bins = vec![0.0; g as usize + 1];
    let spacing = (-(g as f64)).exp2();
    for (a, &i) in hits.iter().enumerate() {
        for &j in &hits[a + 1..] {
            // dh in (0, 1) so the branching point exists
            let l = branching_point((j - i) as f64 * spacing)
                .ok()
                .flatten()
                .unwrap_or(0) as usize;
            bins[l.min(g as usize)] += 2.0;
        }
    }
    bins
}

fn prime_replicate(
    table: &PrimeTable,
    backend: GridBackend,
    config: &ExceedanceConfig,
    seed: u64,
    rep: u64,
) -> Result<(ReplicateCounts, Vec<f64>)> {
    let grid = dyadic_grid(config.g)?;
    let first = config.first_scale();
    let phases = sample_phases(table, seed, rep);
    let rows = eval_increments_grid(&phases, table, &grid, first, config.n, backend)?;
    let paths = ScalePaths::new(first, rows)?;
    let values = paths.terminal_values(config)?;
    let mut counts = ReplicateCounts {
        replicate: rep,
        z: 0,
        z_tilde: 0,
        max: f64::NEG_INFINITY,
    };
    let mut hits = Vec::new();
    for (j, &(x, ok)) in values.iter().enumerate() {
        counts.max = counts.max.max(x);
        if x >= config.level {
            counts.z += 1;
        }
        if ok && config.terminal_ok(x) {
            counts.z_tilde += 1;
            hits.push(j);
        }
    }
    Ok((counts, pair_bins_of(&hits, config.g)))
}

fn brw_replicate(
    params: &BrwParams,
    config: &ExceedanceConfig,
    seed: u64,
    rep: u64,
) -> Result<ReplicateCounts> {
    let ceilings: Vec<f64> = (0..=config.n)
        .map(|k| config.barrier.map_or(f64::INFINITY, |b| b.ceiling(k)))
        .collect();
    let e = brw_exceedances(params, &ceilings, config.level, seed, rep)?;
    Ok(ReplicateCounts {
        replicate: rep,
        z: e.count,
        z_tilde: e.count_with_barrier,
        max: e.max,
    })
}

fn check_brw(config: &ExceedanceConfig) -> Result<()> {
    if config.g as usize != config.n {
        return Err(Error::arg(
            "g",
            format!(
                "the tree has 2^n leaves: need g = n = {}, got {}",
                config.n, config.g
            ),
        ));
    }
    if config.cutoff.is_some() || config.window.is_some() {
        return Err(Error::arg(
            "config",
            "the tree model supports a level and a barrier only",
        ));
    }
    if config.barrier.is_some_and(|b| b.inclusive) {
        return Err(Error::arg("barrier", "the tree model uses strict ceilings"));
    }
    Ok(())
}

/// Monte Carlo moments of `Z` and of the configured count over
/// `replicates` independent fields.
pub fn estimate_moments(
    model: FieldModel,
    config: &ExceedanceConfig,
    replicates: usize,
    seed: u64,
) -> Result<MomentRun> {
    config.validate()?;
    if replicates < MIN_REPLICATES {
        return Err(Error::SampleShortfall {
            got: replicates,
            need: MIN_REPLICATES,
        });
    }
    let (rows, bins): (Vec<ReplicateCounts>, Option<Vec<Vec<f64>>>) = match model {
        FieldModel::Prime { table, backend } => {
            table.scale_range(config.n)?;
            let out: Vec<(ReplicateCounts, Vec<f64>)> = (0..replicates as u64)
                .into_par_iter()
                .map(|rep| prime_replicate(table, backend, config, seed, rep))
                .collect::<Result<_>>()?;
            let (rows, bins) = out.into_iter().unzip();
            (rows, Some(bins))
        }
        FieldModel::Brw { variance } => {
            check_brw(config)?;
            let params = BrwParams::with_law(config.n, 0.0, variance)?;
            let rows = (0..replicates as u64)
                .into_par_iter()
                .map(|rep| brw_replicate(&params, config, seed, rep))
                .collect::<Result<_>>()?;
            (rows, None)
        }
    };
    let z: Vec<u64> = rows.iter().map(|r| r.z).collect();
    let zt: Vec<u64> = rows.iter().map(|r| r.z_tilde).collect();
    let z_tilde = MomentReport::from_counts(&zt)?;
    let bins = bins.map(|b| {
        let width = config.g as usize + 1;
        let per_bin: Vec<Summary> = (0..width)
            .map(|l| Summary::of(&b.iter().map(|r| r[l]).collect::<Vec<_>>()))
            .collect();
        PairBins {
            diagonal: z_tilde.first.estimate,
            mean: per_bin.iter().map(|s| s.mean).collect(),
            se: per_bin.iter().map(|s| s.se).collect(),
        }
    });
    Ok(MomentRun {
        config: config.clone(),
        seed,
        z: MomentReport::from_counts(&z)?,
        z_tilde,
        rows,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exceed::ScaleBarrier;
    use crate::primes::sieve;

    #[test]
    fn report_of_known_counts() {
        let r = MomentReport::from_counts(&[0, 2, 0, 2]).unwrap();
        assert_eq!(r.first.estimate, 1.0);
        assert_eq!(r.second.estimate, 2.0);
        assert_eq!(r.hit.estimate, 0.5);
        assert_eq!(r.pz, 0.5);
        assert!(r.markov_holds(0.0) && r.pz_holds(0.0));
        assert!(r.degenerate.is_none());
        let d = MomentReport::from_counts(&[0; 5]).unwrap();
        assert_eq!(
            (d.first.estimate, d.second.estimate, d.hit.estimate),
            (0.0, 0.0, 0.0)
        );
        assert!(d.degenerate.is_some());
    }

    #[test]
    fn pair_bins_by_branching_point() {
        // g = 3: |0 - 1| = 1/8 gives l = 3; |0 - 4| = 1/2 and |1 - 4| = 3/8
        // give l = 1
        let b = pair_bins_of(&[0, 1, 4], 3);
        assert_eq!(b, vec![0.0, 4.0, 0.0, 2.0]);
    }

    fn small_table() -> PrimeTable {
        sieve(8.0, 1 << 12).unwrap()
    }

    #[test]
    fn huge_level_gives_zero() {
        let t = small_table();
        let c = ExceedanceConfig::new(3, 5, 1e6).unwrap();
        let m = FieldModel::Prime {
            table: &t,
            backend: GridBackend::Recurrence,
        };
        let run = estimate_moments(m, &c, 100, 1).unwrap();
        assert_eq!(run.z.first.estimate, 0.0);
        assert_eq!(run.z.second.estimate, 0.0);
        assert_eq!(run.z.hit.estimate, 0.0);
        assert!(run.z.degenerate.is_some());
    }

    #[test]
    fn second_moment_splits_into_bins() {
        let t = small_table();
        let c = ExceedanceConfig::new(3, 6, 1.5)
            .unwrap()
            .with_barrier(ScaleBarrier::tree(1.0));
        let m = FieldModel::Prime {
            table: &t,
            backend: GridBackend::Recurrence,
        };
        let run = estimate_moments(m, &c, 200, 5).unwrap();
        let b = run.bins.as_ref().unwrap();
        let total = b.diagonal + b.mean.iter().sum::<f64>();
        assert!((total - run.z_tilde.second.estimate).abs() < 1e-9);
        for r in &run.rows {
            assert!(r.z_tilde <= r.z);
        }
        assert!(run.z.markov_holds(3.0) && run.z.pz_holds(3.0));
        assert!(run.z_tilde.markov_holds(3.0) && run.z_tilde.pz_holds(3.0));
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let t = small_table();
        let c = ExceedanceConfig::new(3, 6, 1.0).unwrap();
        let m = FieldModel::Prime {
            table: &t,
            backend: GridBackend::Recurrence,
        };
        let a = estimate_moments(m, &c, 100, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| estimate_moments(m, &c, 100, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn tree_model_checks_config() {
        let m = FieldModel::Brw { variance: 0.5 };
        let c = ExceedanceConfig::new(6, 5, 3.0).unwrap();
        assert!(estimate_moments(m, &c, 100, 1).is_err());
        let c = ExceedanceConfig::new(6, 6, 3.0)
            .unwrap()
            .with_cutoff(1)
            .unwrap();
        assert!(estimate_moments(m, &c, 100, 1).is_err());
        let c = ExceedanceConfig::new(6, 6, 3.0)
            .unwrap()
            .with_barrier(ScaleBarrier::tree(1.0));
        let run = estimate_moments(m, &c, 100, 1).unwrap();
        assert!(run.rows.iter().all(|r| r.z_tilde <= r.z));
        assert!(run.bins.is_none());
        assert!(estimate_moments(m, &c, 99, 1).is_err());
    }
}
