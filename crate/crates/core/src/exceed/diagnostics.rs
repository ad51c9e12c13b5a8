use super::ExceedanceConfig;
use crate::analytic::mc::{proportion, McEstimate};
use crate::analytic::{
    branching_point, covariance_scale, two_point_bound, variance_scale, Backend, BoundParams,
    BoundValue, ScalingConstants,
};
use crate::error::{Error, Result};
use crate::model::{eval_field_grid, eval_increments, sample_phases, DyadicGrid, GridBackend};
use crate::primes::PrimeTable;
use crate::stats::{correlation, ks_distance_normal};
use rayon::prelude::*;
use serde::Serialize;

/// Fewest paired samples accepted by [`gaussian_comparison`].
pub const MIN_COMPARISON_SAMPLES: usize = 10_000;

/// Distances between sampled `(Y_k(h1), Y_k(h2))` and the Gaussian with the
/// same covariance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianReport {
    pub k: usize,
    pub dh: f64,
    pub samples: usize,
    pub sigma_sq_k: f64,
    pub rho_k: f64,
    /// KS distance of each coordinate to `N(0, sigma_k^2)`.
    pub ks_first: f64,
    pub ks_second: f64,
    pub correlation: f64,
    pub correlation_se: f64,
    /// `rho_k / sigma_k^2`.
    pub correlation_analytic: f64,
    /// KS distance of the sum to `N(0, 2 (sigma_k^2 + rho_k))`; `NaN` when
    /// that variance vanishes.
    pub ks_sum: f64,
    pub backend: &'static str,
}

impl GaussianReport {
    /// Whether the sampled correlation is within `z` SE of the analytic one.
    pub fn correlation_agrees(&self, z: f64) -> bool {
        (self.correlation - self.correlation_analytic).abs() <= z * self.correlation_se
    }
}

pub fn gaussian_comparison(
    first: &[f64],
    second: &[f64],
    k: usize,
    dh: f64,
    backend: Backend,
) -> Result<GaussianReport> {
    if first.len() != second.len() {
        return Err(Error::arg("samples", "coordinates must be paired"));
    }
    if first.len() < MIN_COMPARISON_SAMPLES {
        return Err(Error::SampleShortfall {
            got: first.len(),
            need: MIN_COMPARISON_SAMPLES,
        });
    }
    let var = variance_scale(k, backend)?;
    let rho = covariance_scale(k, dh, backend)?;
    let (r, r_se) = if first == second {
        (1.0, 0.0)
    } else {
        correlation(first, second)
    };
    let sum: Vec<f64> = first.iter().zip(second).map(|(a, b)| a + b).collect();
    let sum_var = 2.0 * (var + rho);
    Ok(GaussianReport {
        k,
        dh,
        samples: first.len(),
        sigma_sq_k: var,
        rho_k: rho,
        ks_first: ks_distance_normal(first, 0.0, var),
        ks_second: ks_distance_normal(second, 0.0, var),
        correlation: r,
        correlation_se: r_se,
        correlation_analytic: rho / var,
        ks_sum: if sum_var > 0.0 {
            ks_distance_normal(&sum, 0.0, sum_var)
        } else {
            f64::NAN
        },
        backend: backend.name(),
    })
}

/// `max_{|h' - h| <= 2^(-k-1)} v(h') - v(h)` for values `v` on `grid`; the
/// grid must resolve `2^(-k-4)` and contain `center`.
pub fn oscillation_stat(values: &[f64], grid: &DyadicGrid, center: f64, k: usize) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::arg("values", "need one value per grid point"));
    }
    if (grid.g() as usize) < k + 4 {
        return Err(Error::Range(format!(
            "grid exponent {} below the required k + 4 = {}",
            grid.g(),
            k + 4
        )));
    }
    let step = grid.spacing();
    let radius = (-(k as f64) - 1.0).exp2();
    let mut c = None;
    let mut best = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        let d = (grid.point(j) - center) / step;
        if d.abs() < 1e-9 {
            c = Some(v);
        }
        if (grid.point(j) - center).abs() <= radius + 1e-12 * step {
            best = best.max(v);
        }
    }
    c.map(|c| best - c)
        .ok_or_else(|| Error::arg("center", format!("{center} is not a grid point")))
}

/// One replicate of `X_{r,k}` around a center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillationSample {
    pub replicate: u64,
    /// `X_{r,k}(center)`.
    pub center: f64,
    /// Maximum over the window `|h' - center| <= 2^(-k-1)`.
    pub max: f64,
}

impl OscillationSample {
    pub fn oscillation(&self) -> f64 {
        self.max - self.center
    }
}

/// `X_{r,k}` on the points of `H_g` within `2^(-k-1)` of `center`, one
/// replicate per index.
#[allow(clippy::too_many_arguments)]
pub fn oscillation_samples(
    table: &PrimeTable,
    k: usize,
    r: usize,
    g: u32,
    center: f64,
    replicates: usize,
    seed: u64,
    backend: GridBackend,
) -> Result<Vec<OscillationSample>> {
    if r >= k {
        return Err(Error::arg("r", format!("need r < k, got r = {r}, k = {k}")));
    }
    let grid = DyadicGrid::window(g, center, (-(k as f64) - 1.0).exp2())?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let ph = sample_phases(table, seed, rep);
            let v = eval_field_grid(&ph, table, &grid, Some(r), k, backend)?;
            let osc = oscillation_stat(&v, &grid, center, k)?;
            let c = v[grid.len() / 2];
            Ok(OscillationSample {
                replicate: rep,
                center: c,
                max: c + osc,
            })
        })
        .collect()
}

/// Monte Carlo `P[J(h1) and J(h2)]` beside the two-point bound at the
/// branching point of the pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointEstimate {
    pub h1: f64,
    pub h2: f64,
    /// Branching point; `None` when `h1 = h2`.
    pub l: Option<u32>,
    pub joint: McEstimate,
    /// `P[J(h1)]`.
    pub single: McEstimate,
    /// Bound value at `l`; `None` when `h1 = h2`.
    pub bound: Option<BoundValue>,
}

/// Joint probabilities of the configured point event for several pairs, all
/// from the same phase samples.
pub fn joint_j_minus(
    table: &PrimeTable,
    config: &ExceedanceConfig,
    constants: &ScalingConstants,
    params: &BoundParams,
    pairs: &[(f64, f64)],
    replicates: usize,
    seed: u64,
) -> Result<Vec<JointEstimate>> {
    config.validate()?;
    if replicates < 2 {
        return Err(Error::SampleShortfall {
            got: replicates,
            need: 2,
        });
    }
    table.scale_range(config.n)?;
    let mut hs: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    hs.sort_by(|a, b| a.total_cmp(b));
    hs.dedup();
    let index = |h: f64| hs.iter().position(|&x| x == h).unwrap();
    let first = config.first_scale();
    // indicator of the event at every distinct point, per replicate
    let hits: Vec<Vec<bool>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let ph = sample_phases(table, seed, rep);
            hs.iter()
                .map(|&h| {
                    let y = eval_increments(&ph, table, h, config.n)?;
                    let mut s = 0.0;
                    let mut ok = true;
                    for (k, &yk) in y.iter().enumerate().skip(first) {
                        s += yk;
                        if let Some(b) = &config.barrier {
                            ok &= b.respects(k, s);
                        }
                    }
                    Ok(ok && config.terminal_ok(s))
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    pairs
        .iter()
        .map(|&(h1, h2)| {
            let (i, j) = (index(h1), index(h2));
            let both = hits.iter().filter(|r| r[i] && r[j]).count();
            let one = hits.iter().filter(|r| r[i]).count();
            let l = branching_point((h1 - h2).abs())?;
            Ok(JointEstimate {
                h1,
                h2,
                l,
                joint: proportion(both, replicates),
                single: proportion(one, replicates),
                bound: l.map(|l| two_point_bound(constants, l as usize, params)),
            })
        })
        .collect()
}

/// [`joint_j_minus`] for a single pair.
#[allow(clippy::too_many_arguments)]
pub fn two_point_joint_prob(
    table: &PrimeTable,
    h1: f64,
    h2: f64,
    config: &ExceedanceConfig,
    constants: &ScalingConstants,
    params: &BoundParams,
    replicates: usize,
    seed: u64,
) -> Result<JointEstimate> {
    let mut v = joint_j_minus(
        table,
        config,
        constants,
        params,
        &[(h1, h2)],
        replicates,
        seed,
    )?;
    Ok(v.remove(0))
}

/// Mean of an indicator with its binomial SE.
pub fn frequency(flags: impl IntoIterator<Item = bool>) -> McEstimate {
    let (mut hits, mut n) = (0, 0);
    for f in flags {
        n += 1;
        hits += usize::from(f);
    }
    proportion(hits, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::mc::paired_scale_samples;
    use crate::analytic::scaling_constants_with_cutoff;
    use crate::model::dyadic_grid;
    use crate::primes::sieve;

    #[test]
    fn identical_coordinates_correlate_exactly() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let (a, _) = paired_scale_samples(&t, 3, 0.25, 10_000, 3).unwrap();
        let r = gaussian_comparison(&a, &a, 3, 0.0, Backend::Exact(&t)).unwrap();
        assert_eq!(r.correlation, 1.0);
        assert_eq!(r.correlation_analytic, 1.0);
        assert_eq!(r.ks_first, r.ks_second);
    }

    #[test]
    fn comparison_needs_enough_samples() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let x = vec![0.0; 100];
        assert!(matches!(
            gaussian_comparison(&x, &x, 3, 0.0, Backend::Exact(&t)),
            Err(Error::SampleShortfall { .. })
        ));
    }

    #[test]
    fn oscillation_of_constant_field_is_zero() {
        let grid = dyadic_grid(8).unwrap();
        let v = vec![1.5; grid.len()];
        assert_eq!(oscillation_stat(&v, &grid, 0.5, 3).unwrap(), 0.0);
        let single = DyadicGrid::window(8, 0.5, 0.0).unwrap();
        assert_eq!(oscillation_stat(&[2.0], &single, 0.5, 3).unwrap(), 0.0);
    }

    #[test]
    fn oscillation_window_and_resolution() {
        let grid = dyadic_grid(8).unwrap();
        // a spike just inside and one just outside the window of radius 1/16
        let mut v = vec![0.0; grid.len()];
        v[128 + 16] = 3.0;
        v[128 - 17] = 9.0;
        assert_eq!(oscillation_stat(&v, &grid, 0.5, 3).unwrap(), 3.0);
        assert!(matches!(
            oscillation_stat(&v, &grid, 0.5, 5),
            Err(Error::Range(_))
        ));
        assert!(oscillation_stat(&v, &grid, 0.5 + 1e-3, 3).is_err());
    }

    #[test]
    fn oscillation_samples_match_direct_windows() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let s = oscillation_samples(&t, 3, 0, 8, 0.0, 3, 4, GridBackend::Direct).unwrap();
        let grid = dyadic_grid(8).unwrap();
        for o in &s {
            let ph = sample_phases(&t, 4, o.replicate);
            let v = eval_field_grid(&ph, &t, &grid, Some(0), 3, GridBackend::Direct).unwrap();
            // the window also reaches below 0, outside H_8 ∩ [0, 1)
            assert!((v[0] - o.center).abs() < 1e-12);
            assert!(v[..=16].iter().all(|&x| x <= o.max + 1e-12));
            assert!(o.oscillation() >= 0.0);
        }
    }

    fn j_minus_small() -> (ExceedanceConfig, ScalingConstants) {
        let sc = scaling_constants_with_cutoff(3, -0.1, 0).unwrap();
        (ExceedanceConfig::j_minus(&sc, 3, 1.0).unwrap(), sc)
    }

    #[test]
    fn coincident_points_reduce_to_single() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let (c, sc) = j_minus_small();
        let e =
            two_point_joint_prob(&t, 0.25, 0.25, &c, &sc, &BoundParams::default(), 400, 2).unwrap();
        assert_eq!(e.joint, e.single);
        assert!(e.l.is_none() && e.bound.is_none());
        assert!(e.single.estimate > 0.0);
    }

    #[test]
    fn impossible_window_gives_zero() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let (mut c, sc) = j_minus_small();
        // window entirely above the final ceiling
        let top = c.barrier.unwrap().ceiling(3);
        c.level = top + 0.5;
        let e =
            two_point_joint_prob(&t, 0.0, 0.5, &c, &sc, &BoundParams::default(), 300, 2).unwrap();
        assert_eq!(e.joint.estimate, 0.0);
        assert_eq!(e.l, Some(1));
        assert!(e.bound.is_some());
    }

    #[test]
    fn frequency_counts_flags() {
        let f = frequency([true, false, true, true]);
        assert_eq!(f.estimate, 0.75);
    }
}
