use crate::analytic::sigma_sq;
use crate::error::{Error, Result};
use crate::rng::{unit_f64, CounterRng};
use crate::stats::{
    least_squares, median, median_se_sorted, normal_cdf, normal_isf, quantile_sorted,
};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Deepest tree sampled: `2^(MAX_DEPTH + 1)` nodes per replicate.
pub const MAX_DEPTH: usize = 24;

// Item indices reserved for tree levels and the i.i.d. control, disjoint
// from prime indices.
const LEVEL_ITEM: u64 = 1 << 40;
const IID_ITEM: u64 = 2 << 40;

/// A planted binary tree of depth `n`: the root and every node below it
/// carry an independent `N(mean, variance)` increment, so each of the `2^n`
/// leaves sums `n + 1` increments (the root plays the role of the scale
/// shared by all points).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BrwParams {
    pub depth: usize,
    pub mean: f64,
    pub variance: f64,
}

impl BrwParams {
    /// Mean zero, variance `log(2)/2`.
    pub fn new(depth: usize) -> Result<Self> {
        Self::with_law(depth, 0.0, sigma_sq())
    }

    pub fn with_law(depth: usize, mean: f64, variance: f64) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::Capacity {
                what: "tree depth",
                value: depth as f64,
                cap: MAX_DEPTH as f64,
            });
        }
        if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
            return Err(Error::arg(
                "variance",
                format!("need finite mean and variance > 0, got ({mean}, {variance})"),
            ));
        }
        Ok(BrwParams {
            depth,
            mean,
            variance,
        })
    }
}

/// Level `d` of replicate `rep` draws its `2^d` increments, in node order,
/// from one stream.
pub(super) fn level_rng(seed: u64, rep: u64, d: usize) -> CounterRng {
    CounterRng::new(seed, rep, LEVEL_ITEM + d as u64)
}

/// Maximum over the nodes of each level `0..=depth` of the root-to-node sums.
/// Only the current and next level are held in memory.
pub fn brw_level_maxima(params: &BrwParams, seed: u64, rep: u64) -> Vec<f64> {
    let sd = params.variance.sqrt();
    let draw = |rng: &mut CounterRng| {
        let z: f64 = StandardNormal.sample(rng);
        params.mean + sd * z
    };
    let mut maxima = Vec::with_capacity(params.depth + 1);
    let root = draw(&mut level_rng(seed, rep, 0));
    maxima.push(root);
    let mut cur = vec![root];
    let mut next = Vec::with_capacity(1 << params.depth);
    for d in 1..=params.depth {
        let mut rng = level_rng(seed, rep, d);
        next.clear();
        let mut m = f64::NEG_INFINITY;
        for &v in &cur {
            for _ in 0..2 {
                let x = v + draw(&mut rng);
                m = m.max(x);
                next.push(x);
            }
        }
        maxima.push(m);
        std::mem::swap(&mut cur, &mut next);
    }
    maxima
}

/// Maximum over the `2^depth` leaves.
pub fn sample_brw_max(params: &BrwParams, seed: u64, rep: u64) -> f64 {
    *brw_level_maxima(params, seed, rep).last().unwrap()
}

/// Leaf counts of one tree with and without a ceiling on every partial sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BrwExceedance {
    pub max: f64,
    /// Leaves with final value `>= level`.
    pub count: u64,
    /// Leaves with final value `>= level` whose path stays strictly below
    /// `ceilings[d]` at every level `d`.
    pub count_with_barrier: u64,
}

/// Exceedance counts for one tree. `ceilings` has one entry per level
/// `0..=depth`; use `f64::INFINITY` where no ceiling applies.
pub fn brw_exceedances(
    params: &BrwParams,
    ceilings: &[f64],
    level: f64,
    seed: u64,
    rep: u64,
) -> Result<BrwExceedance> {
    if ceilings.len() != params.depth + 1 {
        return Err(Error::arg(
            "ceilings",
            format!("need {} entries, got {}", params.depth + 1, ceilings.len()),
        ));
    }
    let sd = params.variance.sqrt();
    let draw = |rng: &mut CounterRng| {
        let z: f64 = StandardNormal.sample(rng);
        params.mean + sd * z
    };
    let root = draw(&mut level_rng(seed, rep, 0));
    // alive = path so far stays below the ceilings
    let mut cur = vec![(root, root < ceilings[0])];
    let mut next = Vec::with_capacity(1 << params.depth);
    for (d, &ceil) in ceilings.iter().enumerate().skip(1) {
        let mut rng = level_rng(seed, rep, d);
        next.clear();
        for &(v, alive) in &cur {
            for _ in 0..2 {
                let x = v + draw(&mut rng);
                next.push((x, alive && x < ceil));
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut out = BrwExceedance {
        max: f64::NEG_INFINITY,
        count: 0,
        count_with_barrier: 0,
    };
    for &(v, alive) in &cur {
        out.max = out.max.max(v);
        if v >= level {
            out.count += 1;
            if alive {
                out.count_with_barrier += 1;
            }
        }
    }
    Ok(out)
}

/// Maximum of `2^depth` i.i.d. `N(0, depth * variance)` values, drawn from
/// its exact law: `sqrt(depth var) * Phi^-1(U^(2^-depth))` with one uniform
/// `U` per replicate shared across depths.
pub fn iid_max(depth: usize, variance: f64, seed: u64, rep: u64) -> f64 {
    let mut rng = CounterRng::new(seed, rep, IID_ITEM);
    // U in (0, 1]
    let u = 1.0 - unit_f64(rng.next_u64());
    iid_max_quantile(depth, variance, u)
}

/// The `u`-quantile of the maximum of `2^depth` i.i.d. `N(0, depth var)`.
pub fn iid_max_quantile(depth: usize, variance: f64, u: f64) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    // 1 - u^(2^-n) without cancellation
    let tail = -(u.ln() / (depth as f64).exp2()).exp_m1();
    (depth as f64 * variance).sqrt() * normal_isf(tail)
}

/// CDF of a tree maximum on a uniform grid, from the recursion
/// `F_n = (F_(n-1) * phi)^2` for the unplanted tree, followed by one more
/// convolution for the root when planted.
#[derive(Clone, Debug)]
pub struct ExactMaxLaw {
    pub depth: usize,
    pub lo: f64,
    pub spacing: f64,
    pub cdf: Vec<f64>,
}

impl ExactMaxLaw {
    /// Smallest grid point with `F >= q`, linearly interpolated.
    pub fn quantile(&self, q: f64) -> f64 {
        let j = self.cdf.partition_point(|&f| f < q);
        if j == 0 {
            return self.lo;
        }
        if j >= self.cdf.len() {
            return self.lo + self.spacing * (self.cdf.len() - 1) as f64;
        }
        let (f0, f1) = (self.cdf[j - 1], self.cdf[j]);
        let w = if f1 > f0 { (q - f0) / (f1 - f0) } else { 0.0 };
        self.lo + self.spacing * ((j - 1) as f64 + w)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// `F(x)`, linearly interpolated; 0 below the grid and 1 above it.
    #[inline]
    pub fn cdf_at(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.spacing;
        if u <= 0.0 {
            return if u == 0.0 { self.cdf[0] } else { 0.0 };
        }
        let i = u as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let w = u - i as f64;
        self.cdf[i] * (1.0 - w) + self.cdf[i + 1] * w
    }

    /// Smallest grid point beyond which `F` is 1 in floating point.
    pub fn saturation(&self) -> f64 {
        let j = self.cdf.iter().rposition(|&f| f < 1.0).map_or(0, |j| j + 1);
        self.lo + self.spacing * j as f64
    }
}

/// `E[F(x - G)]` for `G ~ N(mean, var)`, on the grid, with `F = 0` below and
/// `1` above it.
fn convolve_gaussian(cdf: &[f64], spacing: f64, mean: f64, var: f64) -> Vec<f64> {
    let sd = var.sqrt();
    let half = (9.0 * sd / spacing).ceil() as i64;
    let shift = mean / spacing;
    // weights for G at offsets d * spacing around the mean, as CDF
    // differences of cells centred on the offsets
    let weights: Vec<f64> = (-half..=half)
        .map(|d| {
            let lo = (d as f64 - 0.5) * spacing;
            let hi = (d as f64 + 0.5) * spacing;
            normal_cdf(hi / sd) - normal_cdf(lo / sd)
        })
        .collect();
    let n = cdf.len() as i64;
    let at = |i: i64| -> f64 {
        if i < 0 {
            0.0
        } else if i >= n {
            1.0
        } else {
            cdf[i as usize]
        }
    };
    let s_floor = shift.floor();
    let frac = shift - s_floor;
    let s = s_floor as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (w, d) in weights.iter().zip(-half..=half) {
                // F(x_i - mean - d h), linear interpolation for the
                // fractional part of the mean shift
                let j = i - s - d;
                let v = at(j) * (1.0 - frac) + at(j - 1) * frac;
                acc += w * v;
            }
            acc
        })
        .collect()
}

/// Runs `F_d = (F_(d-1) * phi)^2` from the unplanted depth-0 law (a unit
/// step at 0, which sits on the grid with value 1/2) up to depth `top`,
/// handing each `F_d` to `visit`. Returns the grid origin.
fn unplanted_recursion(
    mean: f64,
    variance: f64,
    top: usize,
    spacing: f64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<f64> {
    BrwParams::with_law(top, mean, variance)?;
    if !(spacing > 0.0) {
        return Err(Error::arg("spacing", format!("must be > 0, got {spacing}")));
    }
    let sd = variance.sqrt();
    let lo_raw = (mean.min(0.0) - 12.0 * sd) * (top as f64 + 1.0).sqrt() - 1.0;
    let lo = (lo_raw / spacing).floor() * spacing;
    let hi = (mean.max(0.0) + 1.2 * sd) * (top as f64 + 1.0) + 12.0 * sd + 1.0;
    let len = ((hi - lo) / spacing).ceil() as usize + 1;
    let mut f: Vec<f64> = (0..len)
        .map(|i| {
            let x = (lo / spacing).round() + i as f64;
            if x > 0.0 {
                1.0
            } else if x == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .collect();
    for d in 0..=top {
        if d > 0 {
            f = convolve_gaussian(&f, spacing, mean, variance)
                .into_iter()
                .map(|x| x * x)
                .collect();
        }
        visit(d, &f);
    }
    Ok(lo)
}

/// Exact laws of the planted-tree maximum for each depth in `depths` (all
/// `<= MAX_DEPTH`), on a grid of the given spacing.
pub fn brw_exact_max_laws(
    mean: f64,
    variance: f64,
    depths: &[usize],
    spacing: f64,
) -> Result<Vec<ExactMaxLaw>> {
    let top = depths.iter().copied().max().unwrap_or(0);
    let mut cdfs = Vec::new();
    let lo = unplanted_recursion(mean, variance, top, spacing, |d, f| {
        if depths.contains(&d) {
            // one more increment for the root
            cdfs.push((d, convolve_gaussian(f, spacing, mean, variance)));
        }
    })?;
    let mut out: Vec<ExactMaxLaw> = cdfs
        .into_iter()
        .map(|(depth, cdf)| ExactMaxLaw {
            depth,
            lo,
            spacing,
            cdf,
        })
        .collect();
    out.sort_by_key(|l| depths.iter().position(|&x| x == l.depth));
    Ok(out)
}

/// Laws of the maximum over the `2^d` leaves of an unplanted tree, whose
/// leaves each sum `d` increments (no root increment), for each `d` in
/// `depths`.
pub fn subtree_max_laws(
    mean: f64,
    variance: f64,
    depths: &[usize],
    spacing: f64,
) -> Result<Vec<ExactMaxLaw>> {
    let top = depths.iter().copied().max().unwrap_or(0);
    let mut cdfs = Vec::new();
    let lo = unplanted_recursion(mean, variance, top, spacing, |d, f| {
        if depths.contains(&d) {
            cdfs.push((d, f.to_vec()));
        }
    })?;
    Ok(depths
        .iter()
        .map(|&d| {
            let cdf = cdfs.iter().find(|(e, _)| *e == d).unwrap().1.clone();
            ExactMaxLaw {
                depth: d,
                lo,
                spacing,
                cdf,
            }
        })
        .collect())
}

/// `median = alpha n - beta log n + gamma` fitted over a depth sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubleadingFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
}

/// One side of a depth sweep: per-depth medians with standard errors and
/// the fitted law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSide {
    pub medians: Vec<f64>,
    pub median_se: Vec<f64>,
    pub fit: SubleadingFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthSweep {
    pub depths: Vec<usize>,
    pub replicates: usize,
    pub brw: SweepSide,
    pub iid: SweepSide,
}

/// Least-squares `(alpha, beta, gamma)` for `y = alpha n - beta log n + gamma`.
pub fn fit_subleading(depths: &[usize], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let design: Vec<Vec<f64>> = depths
        .iter()
        .map(|&n| vec![n as f64, -(n as f64).ln(), 1.0])
        .collect();
    let b = least_squares(&design, ys)?;
    Ok((b[0], b[1], b[2]))
}

pub(super) const JACKKNIFE_GROUPS: usize = 20;

/// Fit on per-depth medians with a grouped jackknife over replicates for
/// the coefficient standard errors. `rows[rep][i]` is replicate `rep` at
/// `depths[i]`.
fn sweep_side(depths: &[usize], rows: &[Vec<f64>]) -> Result<SweepSide> {
    let r = rows.len();
    let column = |i: usize, keep: &dyn Fn(usize) -> bool| -> Vec<f64> {
        let mut c: Vec<f64> = (0..r).filter(|&j| keep(j)).map(|j| rows[j][i]).collect();
        c.sort_by(|a, b| a.total_cmp(b));
        c
    };
    let cols: Vec<Vec<f64>> = (0..depths.len()).map(|i| column(i, &|_| true)).collect();
    let medians: Vec<f64> = cols.iter().map(|c| quantile_sorted(c, 0.5)).collect();
    let median_se: Vec<f64> = cols.iter().map(|c| median_se_sorted(c)).collect();
    let (alpha, beta, gamma) = fit_subleading(depths, &medians)?;
    let groups = JACKKNIFE_GROUPS.min(r);
    let mut loo = Vec::with_capacity(groups);
    for g in 0..groups {
        let keep = |j: usize| j % groups != g;
        let meds: Vec<f64> = (0..depths.len())
            .map(|i| quantile_sorted(&column(i, &keep), 0.5))
            .collect();
        loo.push(fit_subleading(depths, &meds)?);
    }
    let jk = |sel: fn(&(f64, f64, f64)) -> f64| {
        let vals: Vec<f64> = loo.iter().map(sel).collect();
        let m = vals.iter().sum::<f64>() / groups as f64;
        let ss: f64 = vals.iter().map(|v| (v - m) * (v - m)).sum();
        ((groups as f64 - 1.0) / groups as f64 * ss).sqrt()
    };
    Ok(SweepSide {
        medians,
        median_se,
        fit: SubleadingFit {
            alpha,
            beta,
            gamma,
            alpha_se: jk(|t| t.0),
            beta_se: jk(|t| t.1),
        },
    })
}

/// Medians of the tree maximum and of the i.i.d. control over `depths`,
/// with the subleading fit for each. One deepest tree per replicate serves
/// every depth (its level maxima), and one uniform per replicate drives the
/// control at every depth.
pub fn brw_depth_sweep(
    depths: &[usize],
    replicates: usize,
    variance: f64,
    seed: u64,
) -> Result<DepthSweep> {
    if depths.len() < 3 {
        return Err(Error::arg(
            "depths",
            "need at least three depths to fit three coefficients",
        ));
    }
    if replicates < JACKKNIFE_GROUPS {
        return Err(Error::SampleShortfall {
            got: replicates,
            need: JACKKNIFE_GROUPS,
        });
    }
    let top = *depths.iter().max().unwrap();
    let params = BrwParams::with_law(top, 0.0, variance)?;
    let brw_rows: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let m = brw_level_maxima(&params, seed, rep);
            depths.iter().map(|&d| m[d]).collect()
        })
        .collect();
    let iid_rows: Vec<Vec<f64>> = (0..replicates as u64)
        .map(|rep| {
            depths
                .iter()
                .map(|&d| iid_max(d, variance, seed, rep))
                .collect()
        })
        .collect();
    Ok(DepthSweep {
        depths: depths.to_vec(),
        replicates,
        brw: sweep_side(depths, &brw_rows)?,
        iid: sweep_side(depths, &iid_rows)?,
    })
}

/// Per-replicate maxima of trees of the given depth.
pub fn brw_max_samples(params: &BrwParams, replicates: usize, seed: u64) -> Vec<f64> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|rep| sample_brw_max(params, seed, rep))
        .collect()
}

/// Median of a sample of maxima.
pub fn sample_median(xs: &[f64]) -> f64 {
    median(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::m_n;

    #[test]
    fn depth_zero_is_one_gaussian() {
        let p = BrwParams::new(0).unwrap();
        let x = sample_brw_max(&p, 3, 9);
        let z: f64 = StandardNormal.sample(&mut level_rng(3, 9, 0));
        assert_eq!(x, sigma_sq().sqrt() * z);
    }

    #[test]
    fn depth_one_by_hand() {
        let p = BrwParams::new(1).unwrap();
        let sd = sigma_sq().sqrt();
        let root: f64 = StandardNormal.sample(&mut level_rng(4, 2, 0));
        let mut l1 = level_rng(4, 2, 1);
        let a: f64 = StandardNormal.sample(&mut l1);
        let b: f64 = StandardNormal.sample(&mut l1);
        let expect = (sd * root + sd * a).max(sd * root + sd * b);
        assert_eq!(sample_brw_max(&p, 4, 2), expect);
    }

    #[test]
    fn level_maxima_are_prefixes() {
        let deep = BrwParams::new(8).unwrap();
        let shallow = BrwParams::new(5).unwrap();
        let m = brw_level_maxima(&deep, 1, 1);
        assert_eq!(m[5], sample_brw_max(&shallow, 1, 1));
        assert_eq!(m.len(), 9);
    }

    #[test]
    fn budget_and_variance_checked() {
        assert!(BrwParams::new(MAX_DEPTH + 1).unwrap_err().is_capacity());
        assert!(BrwParams::with_law(4, 0.0, 0.0).is_err());
    }

    #[test]
    fn barrier_count_at_infinity_is_plain_count() {
        let p = BrwParams::new(6).unwrap();
        let inf = vec![f64::INFINITY; 7];
        let tight: Vec<f64> = (0..7).map(|k| 0.3 * k as f64 + 0.5).collect();
        for rep in 0..20 {
            let a = brw_exceedances(&p, &inf, 1.0, 5, rep).unwrap();
            assert_eq!(a.count, a.count_with_barrier);
            let b = brw_exceedances(&p, &tight, 1.0, 5, rep).unwrap();
            assert_eq!(a.count, b.count);
            assert!(b.count_with_barrier <= b.count);
            assert_eq!(a.max, sample_brw_max(&p, 5, rep));
        }
    }

    #[test]
    fn exact_law_of_depth_zero_and_one() {
        let s2 = sigma_sq();
        let laws = brw_exact_max_laws(0.0, s2, &[0, 1], 0.002).unwrap();
        // depth 0: N(0, s2)
        assert!(laws[0].median().abs() < 1e-3);
        assert!((laws[0].quantile(normal_cdf(1.0)) - s2.sqrt()).abs() < 2e-3);
        // depth 1: root + max of two, P[max <= x] = E[Phi((x - G)/sd)^2]
        let x = 0.4;
        let sd = s2.sqrt();
        let (q, _) = crate::quad::integrate(
            |g| {
                let phi = (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
                phi * normal_cdf((x - sd * g) / sd).powi(2)
            },
            -12.0,
            12.0,
            1e-12,
            1e-15,
        )
        .unwrap();
        let l = &laws[1];
        let i = ((x - l.lo) / l.spacing).round() as usize;
        assert!((l.cdf[i] - q).abs() < 1e-4, "{} vs {q}", l.cdf[i]);
    }

    #[test]
    fn exact_law_matches_monte_carlo_median() {
        let laws = brw_exact_max_laws(0.0, sigma_sq(), &[10], 0.005).unwrap();
        let xs = brw_max_samples(&BrwParams::new(10).unwrap(), 4000, 77);
        let mut s = xs.clone();
        s.sort_by(|a, b| a.total_cmp(b));
        let se = median_se_sorted(&s);
        assert!((median(&xs) - laws[0].median()).abs() < 4.0 * se);
    }

    #[test]
    fn depth_sixteen_median_near_m_n() {
        let xs = brw_max_samples(&BrwParams::new(16).unwrap(), 400, 2024);
        assert!((median(&xs) - m_n(16.0, 0.0)).abs() < 2.0);
    }

    #[test]
    fn iid_quantiles() {
        // two points: P[max <= 0] = 1/4
        let q = iid_max_quantile(1, 1.0, 0.25);
        assert!(q.abs() < 1e-12);
        assert!(iid_max_quantile(12, sigma_sq(), 0.9) > iid_max_quantile(12, sigma_sq(), 0.5));
    }

    #[test]
    fn fit_recovers_known_law() {
        let depths = [12, 14, 16, 18, 20];
        let ys: Vec<f64> = depths
            .iter()
            .map(|&n| 0.69 * n as f64 - 0.75 * (n as f64).ln() + 0.3)
            .collect();
        let (a, b, g) = fit_subleading(&depths, &ys).unwrap();
        assert!((a - 0.69).abs() < 1e-9 && (b - 0.75).abs() < 1e-8 && (g - 0.3).abs() < 1e-8);
    }
}
