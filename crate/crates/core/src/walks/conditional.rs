//! Conditional Monte Carlo for tree maxima: sample the top `t` levels of
//! each tree and integrate the remaining `n - t` levels exactly through the
//! law `F_(n-t)` of a subtree maximum. Given the level-`t` node values `S_v`,
//! `P[M_n <= x | S] = prod_v F_(n-t)(x - S_v)`, and the average of this over
//! replicates is an unbiased, lower-variance estimate of the CDF of `M_n`.
//! Every depth of a sweep conditions on the same sampled levels.

use super::brw::{
    fit_subleading, level_rng, subtree_max_laws, BrwParams, ExactMaxLaw, SubleadingFit, SweepSide,
    JACKKNIFE_GROUPS,
};
use crate::analytic::m_n;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Spacing of the grid on which `F_j` is tabulated.
const LAW_SPACING: f64 = 0.002;
/// Evaluation grid for each depth: `m_n(0) + (i - HALF) * STEP`.
const STEP: f64 = 0.01;
const HALF: usize = 150;

/// Medians of the planted-tree maximum over a depth sweep from conditional
/// Monte Carlo, with the subleading fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalSweep {
    pub depths: Vec<usize>,
    pub replicates: usize,
    /// Levels below the root sampled per tree.
    pub sampled_levels: usize,
    pub side: SweepSide,
}

/// Node values of the planted tree at each level in `levels` (ascending),
/// drawn exactly as in [`super::brw_level_maxima`], so they belong to the
/// same trees as the plain Monte Carlo ones.
fn tree_levels(params: &BrwParams, levels: &[usize], seed: u64, rep: u64) -> Vec<Vec<f64>> {
    let sd = params.variance.sqrt();
    let draw = |rng: &mut CounterRng| {
        let z: f64 = StandardNormal.sample(rng);
        params.mean + sd * z
    };
    let top = *levels.last().unwrap();
    let mut out = Vec::with_capacity(levels.len());
    let mut cur = vec![draw(&mut level_rng(seed, rep, 0))];
    if levels[0] == 0 {
        out.push(cur.clone());
    }
    let mut next = Vec::with_capacity(1 << top);
    for d in 1..=top {
        let mut rng = level_rng(seed, rep, d);
        next.clear();
        for &v in &cur {
            for _ in 0..2 {
                next.push(v + draw(&mut rng));
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if levels.contains(&d) {
            out.push(cur.clone());
        }
    }
    out
}

/// `prod_v F(x_i - S_v)` on the evaluation grid `xs`.
fn conditional_cdf(law: &ExactMaxLaw, saturation: f64, nodes: &[f64], xs: &[f64]) -> Vec<f64> {
    let mut g = vec![1.0; xs.len()];
    let x0 = xs[0];
    for &s in nodes {
        // F(x - s) = 1 on the whole grid
        if x0 - s >= saturation {
            continue;
        }
        for (gi, &x) in g.iter_mut().zip(xs) {
            *gi *= law.cdf_at(x - s);
        }
    }
    g
}

/// Crossing of 1/2 by an increasing sequence on the grid `xs`.
fn crossing(xs: &[f64], g: &[f64]) -> Result<f64> {
    let j = g.partition_point(|&v| v < 0.5);
    if j == 0 || j == g.len() {
        return Err(Error::Degenerate(format!(
            "median outside the evaluation window [{}, {}]",
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    let w = (0.5 - g[j - 1]) / (g[j] - g[j - 1]);
    Ok(xs[j - 1] + w * (xs[j] - xs[j - 1]))
}

/// Conditional Monte Carlo depth sweep. Replicate `rep` samples levels
/// `0..=sampled_levels` of tree `rep`; standard errors come from a grouped
/// jackknife over replicates.
pub fn brw_conditional_sweep(
    depths: &[usize],
    replicates: usize,
    variance: f64,
    sampled_levels: usize,
    seed: u64,
) -> Result<ConditionalSweep> {
    if depths.len() < 3 {
        return Err(Error::arg(
            "depths",
            "need at least three depths to fit three coefficients",
        ));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("depths", "must be strictly increasing"));
    }
    if depths[0] < sampled_levels {
        return Err(Error::arg(
            "sampled_levels",
            format!("{sampled_levels} exceeds the smallest depth {}", depths[0]),
        ));
    }
    if replicates < JACKKNIFE_GROUPS {
        return Err(Error::SampleShortfall {
            got: replicates,
            need: JACKKNIFE_GROUPS,
        });
    }
    let params = BrwParams::with_law(sampled_levels, 0.0, variance)?;
    let tails: Vec<usize> = depths.iter().map(|d| d - sampled_levels).collect();
    BrwParams::with_law(*tails.last().unwrap(), 0.0, variance)?;
    let laws = subtree_max_laws(0.0, variance, &tails, LAW_SPACING)?;
    let saturation: Vec<f64> = laws.iter().map(ExactMaxLaw::saturation).collect();
    let grids: Vec<Vec<f64>> = depths
        .iter()
        .map(|&d| {
            let c = m_n(d as f64, 0.0);
            (0..=2 * HALF)
                .map(|i| c + (i as f64 - HALF as f64) * STEP)
                .collect()
        })
        .collect();
    // per jackknife group, per depth, the summed conditional CDFs
    let groups: Vec<Vec<Vec<f64>>> = (0..JACKKNIFE_GROUPS)
        .into_par_iter()
        .map(|grp| {
            let mut acc = vec![vec![0.0; 2 * HALF + 1]; depths.len()];
            for rep in (grp..replicates).step_by(JACKKNIFE_GROUPS) {
                let nodes = tree_levels(&params, &[sampled_levels], seed, rep as u64);
                for (i, (a, xs)) in acc.iter_mut().zip(&grids).enumerate() {
                    let g = conditional_cdf(&laws[i], saturation[i], &nodes[0], xs);
                    a.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                }
            }
            acc
        })
        .collect();
    let counts: Vec<usize> = (0..JACKKNIFE_GROUPS)
        .map(|g| (g..replicates).step_by(JACKKNIFE_GROUPS).count())
        .collect();
    let medians_without = |skip: Option<usize>| -> Result<Vec<f64>> {
        let n: usize = (0..JACKKNIFE_GROUPS)
            .filter(|&g| Some(g) != skip)
            .map(|g| counts[g])
            .sum();
        (0..depths.len())
            .map(|i| {
                let mut avg = vec![0.0; 2 * HALF + 1];
                for (g, grp) in groups.iter().enumerate() {
                    if Some(g) != skip {
                        avg.iter_mut().zip(&grp[i]).for_each(|(a, v)| *a += v);
                    }
                }
                avg.iter_mut().for_each(|a| *a /= n as f64);
                crossing(&grids[i], &avg)
            })
            .collect()
    };
    let medians = medians_without(None)?;
    let (alpha, beta, gamma) = fit_subleading(depths, &medians)?;
    let loo: Vec<(Vec<f64>, (f64, f64, f64))> = (0..JACKKNIFE_GROUPS)
        .map(|g| {
            let m = medians_without(Some(g))?;
            let f = fit_subleading(depths, &m)?;
            Ok((m, f))
        })
        .collect::<Result<_>>()?;
    let jk = |vals: Vec<f64>| {
        let k = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / k;
        ((k - 1.0) / k * vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sqrt()
    };
    let median_se = (0..depths.len())
        .map(|i| jk(loo.iter().map(|(m, _)| m[i]).collect()))
        .collect();
    Ok(ConditionalSweep {
        depths: depths.to_vec(),
        replicates,
        sampled_levels,
        side: SweepSide {
            medians,
            median_se,
            fit: SubleadingFit {
                alpha,
                beta,
                gamma,
                alpha_se: jk(loo.iter().map(|(_, f)| f.0).collect()),
                beta_se: jk(loo.iter().map(|(_, f)| f.1).collect()),
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::sigma_sq;
    use crate::walks::{brw_exact_max_laws, brw_level_maxima};

    #[test]
    fn sampled_levels_are_the_plain_trees() {
        let p = BrwParams::new(6).unwrap();
        let nodes = tree_levels(&p, &[2, 6], 5, 3);
        let maxima = brw_level_maxima(&p, 5, 3);
        let top = |v: &Vec<f64>| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(nodes[0].len(), 4);
        assert_eq!(top(&nodes[0]), maxima[2]);
        assert_eq!(top(&nodes[1]), maxima[6]);
    }

    #[test]
    fn zero_tail_is_plain_empirical_cdf() {
        // with nothing integrated, F_0 is the unit step and each replicate
        // contributes the indicator of its own maximum
        let law = &subtree_max_laws(0.0, sigma_sq(), &[0], LAW_SPACING).unwrap()[0];
        let xs = [-0.5, 0.5, 1.5];
        let g = conditional_cdf(law, law.saturation(), &[0.2, 0.7], &xs);
        assert_eq!(g, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn subtree_law_plus_root_is_planted_law() {
        let planted = &brw_exact_max_laws(0.0, sigma_sq(), &[5], 0.002).unwrap()[0];
        let sub = &subtree_max_laws(0.0, sigma_sq(), &[5], 0.002).unwrap()[0];
        // P[root + M <= x] by quadrature over the root
        let sd = sigma_sq().sqrt();
        let x = planted.median();
        let n = 4000;
        let h = 16.0 * sd / n as f64;
        let p: f64 = (0..n)
            .map(|i| {
                let z = -8.0 * sd + (i as f64 + 0.5) * h;
                let dens =
                    (-0.5 * (z / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
                dens * sub.cdf_at(x - z) * h
            })
            .sum();
        assert!((p - 0.5).abs() < 1e-4, "{p}");
    }

    #[test]
    fn medians_match_exact_law() {
        let depths = [6, 8, 10];
        let s = brw_conditional_sweep(&depths, 2000, sigma_sq(), 4, 13).unwrap();
        let laws = brw_exact_max_laws(0.0, sigma_sq(), &depths, 0.002).unwrap();
        for ((m, se), law) in s.side.medians.iter().zip(&s.side.median_se).zip(&laws) {
            assert!(
                (m - law.median()).abs() < 4.0 * se + 2e-3,
                "{m} vs {}",
                law.median()
            );
        }
    }

    #[test]
    fn argument_checks() {
        assert!(brw_conditional_sweep(&[4, 6], 100, 0.3, 2, 1).is_err());
        assert!(brw_conditional_sweep(&[4, 6, 8], 100, 0.3, 5, 1).is_err());
        assert!(brw_conditional_sweep(&[4, 6, 8], 10, 0.3, 2, 1).is_err());
        assert!(brw_conditional_sweep(&[6, 4, 8], 100, 0.3, 2, 1).is_err());
    }
}
