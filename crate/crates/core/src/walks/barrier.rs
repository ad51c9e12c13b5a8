use crate::analytic::mc::{proportion, McEstimate};
use crate::analytic::sigma_sq;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats::{normal_cdf, normal_sf};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

const WALK_ITEM: u64 = 3 << 40;

/// A mean-zero Gaussian walk `S_0 = 0, S_k = S_(k-1) + N(0, variance)`
/// constrained by `S_k <= ceilings[k - 1]` for `k = 1..=steps` and
/// `S_steps in (lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierSpec {
    /// One ceiling per step; `f64::INFINITY` where none applies.
    pub ceilings: Vec<f64>,
    pub window: (f64, f64),
    pub variance: f64,
}

impl BarrierSpec {
    pub fn new(ceilings: Vec<f64>, window: (f64, f64), variance: f64) -> Result<Self> {
        if ceilings.is_empty() {
            return Err(Error::arg("steps", "need at least one step"));
        }
        if ceilings
            .iter()
            .any(|c| c.is_nan() || *c == f64::NEG_INFINITY)
        {
            return Err(Error::arg("ceilings", "ceilings must be real or +infinity"));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(Error::arg(
                "window",
                format!("need a finite, nonempty window, got {window:?}"),
            ));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::arg(
                "variance",
                format!("must be > 0, got {variance}"),
            ));
        }
        Ok(BarrierSpec {
            ceilings,
            window,
            variance,
        })
    }

    /// The same ceiling `a` at every step.
    pub fn constant(steps: usize, a: f64, window: (f64, f64), variance: f64) -> Result<Self> {
        Self::new(vec![a; steps], window, variance)
    }

    /// Ceiling `slope * (k - start + 1) + intercept` at steps `k >= start`
    /// and none before.
    pub fn linear(
        steps: usize,
        start: usize,
        slope: f64,
        intercept: f64,
        window: (f64, f64),
        variance: f64,
    ) -> Result<Self> {
        let ceilings = (1..=steps)
            .map(|k| {
                if k >= start {
                    slope * (k + 1 - start) as f64 + intercept
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Self::new(ceilings, window, variance)
    }

    pub fn steps(&self) -> usize {
        self.ceilings.len()
    }
}

/// The ballot event: ceiling `a` at every step, terminal window `(b, b + delta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallotQuery {
    pub steps: usize,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub variance: f64,
}

impl BallotQuery {
    /// Increment variance `log(2)/2`.
    pub fn new(steps: usize, a: f64, b: f64, delta: f64) -> Self {
        BallotQuery {
            steps,
            a,
            b,
            delta,
            variance: sigma_sq(),
        }
    }

    pub fn to_barrier(&self) -> Result<BarrierSpec> {
        if !(self.delta > 0.0) {
            return Err(Error::arg(
                "delta",
                format!("must be > 0, got {}", self.delta),
            ));
        }
        BarrierSpec::constant(
            self.steps,
            self.a,
            (self.b, self.b + self.delta),
            self.variance,
        )
    }
}

/// Discretization settings for the value-grid dynamic program.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DpOptions {
    /// Cell width.
    pub mesh: f64,
    /// The grid extends `range_factor * sigma * sqrt(steps)` below 0.
    pub range_factor: f64,
    /// Largest acceptable error estimate.
    pub tolerance: f64,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            mesh: 0.01,
            range_factor: 8.0,
            tolerance: 1e-3,
        }
    }
}

/// A dynamic-programming probability with its error budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DpResult {
    pub probability: f64,
    /// `|p(mesh) - p(2 mesh)|`.
    pub richardson_error: f64,
    /// Mass that left the grid other than through a ceiling.
    pub truncation_mass: f64,
    /// `richardson_error + truncation_mass`.
    pub error_estimate: f64,
    pub mesh: f64,
    pub cells: usize,
}

/// One pass of the dynamic program at a fixed mesh. Returns the probability,
/// the untracked mass, and the cell count.
fn dp_pass(spec: &BarrierSpec, mesh: f64, range_factor: f64) -> (f64, f64, usize) {
    let n = spec.steps();
    let sd = spec.variance.sqrt();
    let (w_lo, w_hi) = spec.window;
    let finite_max = spec
        .ceilings
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let unbounded = spec.ceilings[..n - 1].iter().any(|c| c.is_infinite());
    let spread = range_factor * sd * (n as f64).sqrt();
    // the top edge sits on the largest ceiling so a constant ceiling is a
    // cell edge
    let top = if unbounded || finite_max == f64::NEG_INFINITY {
        finite_max.max(w_hi).max(0.0) + spread
    } else {
        finite_max
    };
    let bottom = (-spread).min(w_lo - range_factor * sd);
    let final_ceiling = spec.ceilings[n - 1];
    let hi_eff = w_hi.min(final_ceiling);
    if n == 1 {
        let p = if hi_eff > w_lo {
            normal_cdf(hi_eff / sd) - normal_cdf(w_lo / sd)
        } else {
            0.0
        };
        return (p, 0.0, 0);
    }
    if top <= bottom {
        return (0.0, 0.0, 0);
    }
    let cells = ((top - bottom) / mesh).ceil() as usize;
    let base = top - cells as f64 * mesh;
    let edge = |j: usize| base + j as f64 * mesh;
    let center = |j: usize| base + (j as f64 + 0.5) * mesh;

    let kernel_half = (range_factor * sd / mesh).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * kernel_half)
        .map(|i| {
            let d = i as f64 - kernel_half as f64;
            normal_cdf((d + 0.5) * mesh / sd) - normal_cdf((d - 0.5) * mesh / sd)
        })
        .collect();
    // mass that jumps from cell j past the bottom or the top of the grid
    let below: Vec<f64> = (0..cells)
        .map(|j| normal_cdf((base - center(j)) / sd))
        .collect();
    let above: Vec<f64> = (0..cells)
        .map(|j| normal_sf((top - center(j)) / sd))
        .collect();

    let apply_ceiling = |mass: &mut [f64], ceil: f64| {
        if ceil >= top {
            return;
        }
        for (j, m) in mass.iter_mut().enumerate() {
            let keep = ((ceil - edge(j)) / mesh).clamp(0.0, 1.0);
            *m *= keep;
        }
    };

    // step 1 from the exact start at 0
    let mut mass: Vec<f64> = (0..cells)
        .map(|j| normal_cdf(edge(j + 1) / sd) - normal_cdf(edge(j) / sd))
        .collect();
    let mut lost = normal_cdf(base / sd);
    if spec.ceilings[0] > top {
        lost += normal_sf(top / sd);
    }
    apply_ceiling(&mut mass, spec.ceilings[0]);

    let mut next = vec![0.0; cells];
    for k in 1..n - 1 {
        next.iter_mut().for_each(|x| *x = 0.0);
        let ceil = spec.ceilings[k];
        for (j, &m) in mass.iter().enumerate() {
            if m < 1e-300 {
                continue;
            }
            lost += m * below[j];
            if ceil > top {
                lost += m * above[j];
            }
            let lo = j.saturating_sub(kernel_half);
            let hi = (j + kernel_half).min(cells - 1);
            let k0 = lo + kernel_half - j;
            for (t, w) in next[lo..=hi].iter_mut().zip(&kernel[k0..]) {
                *t += m * w;
            }
        }
        apply_ceiling(&mut next, ceil);
        std::mem::swap(&mut mass, &mut next);
    }

    // last step straight into the window, capped by the final ceiling
    let p = if hi_eff > w_lo {
        mass.iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(j, &m)| {
                let c = center(j);
                m * (normal_cdf((hi_eff - c) / sd) - normal_cdf((w_lo - c) / sd))
            })
            .sum()
    } else {
        0.0
    };
    (p, lost, cells)
}

/// `P[S_k <= ceiling_k for k = 1..=n, S_n in window]` by dynamic programming
/// on cells of width `mesh` spanning `[-range_factor sigma sqrt(n), top]`,
/// with Gaussian CDF-difference transition weights. The error estimate is
/// the change from doubling the mesh plus all mass that left the grid.
pub fn barrier_dp(spec: &BarrierSpec, opts: &DpOptions) -> Result<DpResult> {
    if !(opts.mesh > 0.0) || !(opts.range_factor > 0.0) {
        return Err(Error::arg(
            "mesh",
            format!("mesh and range factor must be > 0, got {opts:?}"),
        ));
    }
    let (p, lost, cells) = dp_pass(spec, opts.mesh, opts.range_factor);
    let (p2, _, _) = dp_pass(spec, 2.0 * opts.mesh, opts.range_factor);
    let richardson = (p - p2).abs();
    let result = DpResult {
        probability: p,
        richardson_error: richardson,
        truncation_mass: lost,
        error_estimate: richardson + lost,
        mesh: opts.mesh,
        cells,
    };
    if result.error_estimate > opts.tolerance {
        return Err(Error::Accuracy {
            estimate: result.error_estimate,
            tolerance: opts.tolerance,
        });
    }
    Ok(result)
}

/// The ballot probability by dynamic programming.
pub fn ballot_dp(query: &BallotQuery, opts: &DpOptions) -> Result<DpResult> {
    barrier_dp(&query.to_barrier()?, opts)
}

/// Monte Carlo estimate of the barrier event over `paths` independent walks.
/// Path `i` draws its increments from the stream of replicate `i`.
pub fn barrier_mc(spec: &BarrierSpec, paths: usize, seed: u64) -> Result<McEstimate> {
    if paths < 2 {
        return Err(Error::SampleShortfall {
            got: paths,
            need: 2,
        });
    }
    let sd = spec.variance.sqrt();
    let (lo, hi) = spec.window;
    let hits: usize = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(seed, i, WALK_ITEM);
            let mut s = 0.0;
            for &c in &spec.ceilings {
                let z: f64 = StandardNormal.sample(&mut rng);
                s += sd * z;
                if s > c {
                    return 0;
                }
            }
            usize::from(s > lo && s < hi)
        })
        .sum();
    Ok(proportion(hits, paths))
}

pub fn ballot_mc(query: &BallotQuery, paths: usize, seed: u64) -> Result<McEstimate> {
    barrier_mc(&query.to_barrier()?, paths, seed)
}

/// Either method, for callers choosing at run time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Dp(DpOptions),
    Mc { paths: usize, seed: u64 },
}

/// An estimate with either a DP error bound or an MC standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WalkEstimate {
    pub estimate: f64,
    pub se_or_error: f64,
    pub method: &'static str,
}

pub fn barrier_walk_prob(spec: &BarrierSpec, method: Method) -> Result<WalkEstimate> {
    Ok(match method {
        Method::Dp(opts) => {
            let r = barrier_dp(spec, &opts)?;
            WalkEstimate {
                estimate: r.probability,
                se_or_error: r.error_estimate,
                method: "dp",
            }
        }
        Method::Mc { paths, seed } => {
            let r = barrier_mc(spec, paths, seed)?;
            WalkEstimate {
                estimate: r.estimate,
                se_or_error: r.se,
                method: "mc",
            }
        }
    })
}

/// The two sides of the ballot estimate with prefactor `c`:
/// `1 / (c n^(3/2)) <= P <= c (1 + a)(1 + a - b) / n^(3/2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallotBounds {
    pub lower: f64,
    pub upper: f64,
    /// `None` when `b <= a - delta`.
    pub upper_regime_violation: Option<String>,
    /// `None` when `delta < 1`, the window is `(0, delta)` and `a = 1`.
    pub lower_regime_violation: Option<String>,
}

pub fn ballot_bounds(query: &BallotQuery, c: f64) -> Result<BallotBounds> {
    if !(c > 0.0) {
        return Err(Error::arg("c", format!("must be > 0, got {c}")));
    }
    let BallotQuery {
        steps, a, b, delta, ..
    } = *query;
    let n32 = (steps as f64).powf(1.5);
    let upper_v = (b > a - delta).then(|| format!("b = {b} > a - delta = {}", a - delta));
    let lower_v = if !(delta < 1.0) {
        Some(format!("delta = {delta} must be < 1"))
    } else if b != 0.0 || a != 1.0 {
        Some(format!(
            "needs window (0, delta) and a = 1, got b = {b}, a = {a}"
        ))
    } else {
        None
    };
    Ok(BallotBounds {
        lower: 1.0 / (c * n32),
        upper: c * (1.0 + a) * (1.0 + a - b) / n32,
        upper_regime_violation: upper_v,
        lower_regime_violation: lower_v,
    })
}

/// Smallest `c` with `1/(c n^(3/2)) <= p <= c (1+a)(1+a-b)/n^(3/2)` for every
/// `(query, p)` pair.
pub fn calibrate_ballot(points: &[(BallotQuery, f64)]) -> f64 {
    points
        .iter()
        .map(|(q, p)| {
            let n32 = (q.steps as f64).powf(1.5);
            let up = p * n32 / ((1.0 + q.a) * (1.0 + q.a - q.b));
            let low = 1.0 / (p * n32);
            up.max(low)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_is_gaussian_window() {
        let q = BallotQuery::new(1, 1.0, 0.0, 1.0);
        let r = ballot_dp(&q, &DpOptions::default()).unwrap();
        let expect = normal_cdf(1.0 / sigma_sq().sqrt()) - 0.5;
        assert!((r.probability - expect).abs() < 1e-12);
        assert!((r.probability - 0.4553).abs() < 1e-3);
    }

    #[test]
    fn window_above_ceiling_is_impossible() {
        let q = BallotQuery::new(10, 1.0, 1.0, 0.5);
        assert_eq!(
            ballot_dp(&q, &DpOptions::default()).unwrap().probability,
            0.0
        );
        let q = BallotQuery::new(1, 1.0, 1.5, 0.5);
        assert_eq!(
            ballot_dp(&q, &DpOptions::default()).unwrap().probability,
            0.0
        );
    }

    #[test]
    fn no_ceiling_gives_plain_window() {
        let n = 50;
        let spec = BarrierSpec::new(vec![f64::INFINITY; n], (0.0, 1.0), sigma_sq()).unwrap();
        let r = barrier_dp(&spec, &DpOptions::default()).unwrap();
        let sd = (n as f64 * sigma_sq()).sqrt();
        let expect = normal_cdf(1.0 / sd) - 0.5;
        let err = (r.probability - expect).abs();
        assert!(
            err < r.error_estimate && err < 1e-5,
            "{} vs {expect}",
            r.probability
        );
    }

    #[test]
    fn constant_barrier_is_ballot() {
        let q = BallotQuery::new(40, 1.0, 0.0, 1.0);
        let a = ballot_dp(&q, &DpOptions::default()).unwrap();
        let spec = BarrierSpec::linear(40, 1, 0.0, 1.0, (0.0, 1.0), sigma_sq()).unwrap();
        let b = barrier_dp(&spec, &DpOptions::default()).unwrap();
        assert!((a.probability - b.probability).abs() < 1e-9);
    }

    #[test]
    fn mesh_halving_within_error_estimate() {
        let q = BallotQuery::new(64, 1.0, 0.0, 1.0);
        let opts = DpOptions {
            mesh: 0.02,
            ..DpOptions::default()
        };
        let coarse = ballot_dp(&q, &opts).unwrap();
        let fine = ballot_dp(&q, &DpOptions { mesh: 0.01, ..opts }).unwrap();
        assert!((coarse.probability - fine.probability).abs() < coarse.error_estimate);
    }

    #[test]
    fn coarse_mesh_is_an_accuracy_error() {
        let q = BallotQuery::new(64, 1.0, 0.0, 1.0);
        let opts = DpOptions {
            mesh: 0.5,
            range_factor: 8.0,
            tolerance: 1e-7,
        };
        assert!(matches!(ballot_dp(&q, &opts), Err(Error::Accuracy { .. })));
    }

    #[test]
    fn dp_and_mc_agree() {
        let q = BallotQuery::new(32, 1.0, 0.0, 1.0);
        let dp = ballot_dp(&q, &DpOptions::default()).unwrap();
        let mc = ballot_mc(&q, 200_000, 12).unwrap();
        assert!(mc.agrees_with(dp.probability, 4.0), "{mc:?} vs {dp:?}");
    }

    #[test]
    fn bounds_formula() {
        let q = BallotQuery::new(100, 1.0, 0.0, 1.0);
        let b = ballot_bounds(&q, 1.0).unwrap();
        assert!((b.upper - 0.004).abs() < 1e-15);
        assert!(b.upper_regime_violation.is_none());
        assert!(b.lower_regime_violation.is_some());
        let q2 = BallotQuery::new(200, 1.0, 0.0, 1.0);
        let b2 = ballot_bounds(&q2, 1.0).unwrap();
        assert!((b2.upper / b.upper - 2f64.powf(-1.5)).abs() < 1e-14);
        let inside = ballot_bounds(&BallotQuery::new(100, 1.0, 0.0, 0.5), 2.0).unwrap();
        assert!(inside.lower_regime_violation.is_none());
    }

    #[test]
    fn calibration_covers_every_point() {
        let pts: Vec<(BallotQuery, f64)> = [64usize, 128]
            .iter()
            .map(|&n| {
                let q = BallotQuery::new(n, 1.0, 0.0, 1.0);
                (q, ballot_dp(&q, &DpOptions::default()).unwrap().probability)
            })
            .collect();
        let c = calibrate_ballot(&pts);
        for (q, p) in &pts {
            let b = ballot_bounds(q, c).unwrap();
            assert!(b.lower <= p * (1.0 + 1e-12) && *p <= b.upper * (1.0 + 1e-12));
        }
    }
}
