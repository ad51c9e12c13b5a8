//! Exceedance counts `Z(m)` and barrier-modified counts, their first and
//! second moments, and the diagnostics built on simulated fields: maxima,
//! Gaussian comparison, oscillation and two-point joint probabilities.

mod diagnostics;
mod maxima;
mod moments;

pub use diagnostics::{
    frequency, gaussian_comparison, joint_j_minus, oscillation_samples, oscillation_stat,
    two_point_joint_prob, GaussianReport, JointEstimate, OscillationSample, MIN_COMPARISON_SAMPLES,
};
pub use maxima::{
    empirical_max_distribution, prime_table_for, MaxDistribution, MaxModel, MaxSummary,
};
pub use moments::{
    estimate_moments, FieldModel, MomentReport, MomentRun, PairBins, ReplicateCounts,
    MIN_REPLICATES,
};

use crate::analytic::ScalingConstants;
use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::LN_2;

/// Linear ceiling `slope (k - origin) + intercept` on the partial sum at every
/// scale `k >= start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleBarrier {
    pub start: usize,
    pub origin: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Whether a partial sum equal to the ceiling still respects it.
    pub inclusive: bool,
}

impl ScaleBarrier {
    /// `X_k < k log 2 + b` for every `k`.
    pub fn tree(b: f64) -> Self {
        ScaleBarrier {
            start: 0,
            origin: 0.0,
            slope: LN_2,
            intercept: b,
            inclusive: false,
        }
    }

    /// Ceiling at scale `k`; `+inf` before the start scale.
    pub fn ceiling(&self, k: usize) -> f64 {
        if k < self.start {
            f64::INFINITY
        } else {
            self.slope * (k as f64 - self.origin) + self.intercept
        }
    }

    pub fn respects(&self, k: usize, partial_sum: f64) -> bool {
        let c = self.ceiling(k);
        if self.inclusive {
            partial_sum <= c
        } else {
            partial_sum < c
        }
    }
}

/// What counts as an exceedance at a grid point of `H_g`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceedanceConfig {
    /// Top scale `n`.
    pub n: usize,
    pub g: u32,
    pub level: f64,
    /// Partial sums run over scales `r+1..=k`; `None` includes scale 0.
    pub cutoff: Option<usize>,
    pub barrier: Option<ScaleBarrier>,
    /// Terminal window `[level, level + delta]`; `None` means `>= level`.
    pub window: Option<f64>,
}

impl ExceedanceConfig {
    /// `Z(m)`: the full field at `H_g`, no barrier.
    pub fn new(n: usize, g: u32, level: f64) -> Result<Self> {
        let c = ExceedanceConfig {
            n,
            g,
            level,
            cutoff: None,
            barrier: None,
            window: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_barrier(mut self, barrier: ScaleBarrier) -> Self {
        self.barrier = Some(barrier);
        self
    }

    pub fn with_cutoff(mut self, r: usize) -> Result<Self> {
        self.cutoff = Some(r);
        self.validate()?;
        Ok(self)
    }

    pub fn with_window(mut self, delta: f64) -> Result<Self> {
        self.window = Some(delta);
        self.validate()?;
        Ok(self)
    }

    /// `J+`: `X_{r,n} >= m_{n-r}(eps)` and `X_{r,k} <= (k-r) mu(eps) + (log n)^2`
    /// for `k >= start`. The natural start `floor(log n)^2` exceeds `n` for
    /// small `n`, hence the parameter.
    pub fn j_plus(sc: &ScalingConstants, g: u32, start: usize) -> Result<Self> {
        let barrier = ScaleBarrier {
            start,
            origin: sc.r as f64,
            slope: sc.mu,
            intercept: sc.barrier_intercept,
            inclusive: true,
        };
        Ok(Self::new(sc.n, g, sc.m_n_minus_r)?
            .with_cutoff(sc.r)?
            .with_barrier(barrier))
    }

    /// `J-`: `X_{r,n}` in `[m_{n-r}(-eps), m_{n-r}(-eps) + delta]` and
    /// `X_{r,k} <= (k-r) mu(-eps) + 1` for `k = r+1..=n`. Pass constants
    /// evaluated at `-eps`.
    pub fn j_minus(sc: &ScalingConstants, g: u32, delta: f64) -> Result<Self> {
        let barrier = ScaleBarrier {
            start: sc.r + 1,
            origin: sc.r as f64,
            slope: sc.mu,
            intercept: 1.0,
            inclusive: true,
        };
        Self::new(sc.n, g, sc.m_n_minus_r)?
            .with_cutoff(sc.r)?
            .with_window(delta)
            .map(|c| c.with_barrier(barrier))
    }

    pub fn validate(&self) -> Result<()> {
        if self.g < 1 {
            return Err(Error::arg("g", "grid exponent must be >= 1"));
        }
        if let Some(r) = self.cutoff {
            if r >= self.n {
                return Err(Error::arg(
                    "r",
                    format!("cutoff {r} must be below the top scale {}", self.n),
                ));
            }
        }
        if let Some(d) = self.window {
            if !(d > 0.0) {
                return Err(Error::arg(
                    "delta",
                    format!("window width must be > 0, got {d}"),
                ));
            }
        }
        if self.level.is_nan() {
            return Err(Error::arg("level", "must not be NaN"));
        }
        Ok(())
    }

    /// First scale of the partial sums.
    pub fn first_scale(&self) -> usize {
        self.cutoff.map_or(0, |r| r + 1)
    }

    /// Whether a terminal value satisfies the level or window condition.
    pub fn terminal_ok(&self, x: f64) -> bool {
        match self.window {
            None => x >= self.level,
            Some(d) => x >= self.level && x <= self.level + d,
        }
    }
}

/// `Z(m)`: the number of values `>= m`.
pub fn count_exceedances(values: &[f64], m: f64) -> usize {
    values.iter().filter(|&&v| v >= m).count()
}

/// Increments `Y_k` at each grid point: `rows[i][j]` is scale `k_lo + i` at
/// point `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalePaths {
    pub k_lo: usize,
    pub rows: Vec<Vec<f64>>,
}

impl ScalePaths {
    pub fn new(k_lo: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::arg("rows", "every scale needs one value per point"));
            }
        }
        Ok(ScalePaths { k_lo, rows })
    }

    pub fn points(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Last scale held, or `None` when empty.
    pub fn k_hi(&self) -> Option<usize> {
        (!self.rows.is_empty()).then(|| self.k_lo + self.rows.len() - 1)
    }

    fn check(&self, config: &ExceedanceConfig) -> Result<()> {
        let first = config.first_scale();
        match self.k_hi() {
            Some(hi) if self.k_lo <= first && hi >= config.n => Ok(()),
            _ => Err(Error::arg(
                "paths",
                format!(
                    "need scales {first}..={}, have {}..={}",
                    config.n,
                    self.k_lo,
                    self.k_hi().map_or("none".into(), |h| h.to_string())
                ),
            )),
        }
    }

    /// Per point: terminal value, and whether the path respects the barrier.
    pub fn terminal_values(&self, config: &ExceedanceConfig) -> Result<Vec<(f64, bool)>> {
        self.check(config)?;
        let first = config.first_scale();
        let mut out = vec![(0.0, true); self.points()];
        for k in first..=config.n {
            let row = &self.rows[k - self.k_lo];
            for (o, &y) in out.iter_mut().zip(row) {
                o.0 += y;
                if let Some(b) = &config.barrier {
                    o.1 &= b.respects(k, o.0);
                }
            }
        }
        Ok(out)
    }
}

/// Number of points meeting the terminal condition whose partial sums
/// respect every ceiling of the configured barrier.
pub fn count_with_barrier(paths: &ScalePaths, config: &ExceedanceConfig) -> Result<usize> {
    Ok(paths
        .terminal_values(config)?
        .iter()
        .filter(|(x, ok)| *ok && config.terminal_ok(*x))
        .count())
}

/// Paley–Zygmund lower bound `e1^2 / e2`, clipped to `[0, 1]`.
pub fn pz_bound(e1: f64, e2: f64) -> Result<f64> {
    if !(e2 > 0.0) {
        return Err(Error::arg(
            "e2",
            format!("second moment must be > 0, got {e2}"),
        ));
    }
    Ok((e1 * e1 / e2).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::scaling_constants;

    #[test]
    fn plain_counts() {
        let v = [1.2, 3.4, 0.9];
        assert_eq!(count_exceedances(&v, 1.0), 2);
        assert_eq!(count_exceedances(&v, f64::NEG_INFINITY), 3);
        assert_eq!(count_exceedances(&v, 3.5), 0);
        assert_eq!(count_exceedances(&v, 3.4), 1);
    }

    fn two_points() -> ScalePaths {
        // point 0 climbs to 2.5 after crossing 1.6 at scale 1; point 1 ends at 2.2
        ScalePaths::new(0, vec![vec![0.5, 0.2], vec![1.1, 0.5], vec![0.9, 1.5]]).unwrap()
    }

    #[test]
    fn infinite_barrier_is_plain_count() {
        let p = two_points();
        let c = ExceedanceConfig::new(2, 1, 2.0)
            .unwrap()
            .with_barrier(ScaleBarrier::tree(f64::INFINITY));
        assert_eq!(count_with_barrier(&p, &c).unwrap(), 2);
    }

    #[test]
    fn one_violation_excludes_point() {
        let p = two_points();
        let b = ScaleBarrier {
            start: 0,
            origin: 0.0,
            slope: 0.0,
            intercept: 1.5,
            inclusive: false,
        };
        let c = ExceedanceConfig::new(2, 1, 2.0).unwrap().with_barrier(b);
        // point 0 reaches 1.6 at scale 1; point 1 stays at 0.7 until scale 2
        // where it ends at 2.2 > 1.5, so it too is excluded
        assert_eq!(count_with_barrier(&p, &c).unwrap(), 0);
        let b = ScaleBarrier {
            start: 2,
            intercept: 3.0,
            ..b
        };
        let late = ExceedanceConfig::new(2, 1, 2.0).unwrap().with_barrier(b);
        assert_eq!(count_with_barrier(&p, &late).unwrap(), 2);
    }

    #[test]
    fn inclusive_ceiling_admits_equality() {
        let p = ScalePaths::new(0, vec![vec![1.0], vec![1.0]]).unwrap();
        let mut b = ScaleBarrier {
            start: 0,
            origin: 0.0,
            slope: 1.0,
            intercept: 1.0,
            inclusive: true,
        };
        let c = ExceedanceConfig::new(1, 1, 2.0).unwrap().with_barrier(b);
        assert_eq!(count_with_barrier(&p, &c).unwrap(), 1);
        b.inclusive = false;
        assert_eq!(count_with_barrier(&p, &c.with_barrier(b)).unwrap(), 0);
    }

    #[test]
    fn cutoff_and_window() {
        let p = two_points();
        let c = ExceedanceConfig::new(2, 1, 1.5)
            .unwrap()
            .with_cutoff(0)
            .unwrap();
        // X_{0,2} = (2.0, 2.0)
        assert_eq!(count_with_barrier(&p, &c).unwrap(), 2);
        let w = c.clone().with_window(0.4).unwrap();
        assert_eq!(count_with_barrier(&p, &w).unwrap(), 0);
        let w = c.with_window(0.6).unwrap();
        assert_eq!(count_with_barrier(&p, &w).unwrap(), 2);
    }

    #[test]
    fn missing_scales_rejected() {
        let p = ScalePaths::new(1, vec![vec![0.0]; 2]).unwrap();
        let c = ExceedanceConfig::new(2, 1, 0.0).unwrap();
        assert!(matches!(
            count_with_barrier(&p, &c),
            Err(Error::Argument { name: "paths", .. })
        ));
        let c = c.with_cutoff(0).unwrap();
        assert_eq!(count_with_barrier(&p, &c).unwrap(), 1);
        let short = ExceedanceConfig::new(3, 1, 0.0)
            .unwrap()
            .with_cutoff(0)
            .unwrap();
        assert!(count_with_barrier(&p, &short).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ExceedanceConfig::new(3, 0, 1.0).is_err());
        assert!(ExceedanceConfig::new(3, 4, 1.0)
            .unwrap()
            .with_window(0.0)
            .is_err());
        assert!(ExceedanceConfig::new(3, 4, 1.0)
            .unwrap()
            .with_cutoff(3)
            .is_err());
    }

    #[test]
    fn j_events_follow_constants() {
        let sc = scaling_constants(64, 0.1).unwrap();
        let up = ExceedanceConfig::j_plus(&sc, 6, sc.barrier_start).unwrap();
        let b = up.barrier.unwrap();
        assert_eq!(up.cutoff, Some(sc.r));
        assert_eq!(up.level, sc.m_n_minus_r);
        assert!(
            (b.ceiling(20) - ((20 - sc.r) as f64 * sc.mu + sc.barrier_intercept)).abs() < 1e-12
        );
        assert_eq!(b.ceiling(sc.barrier_start - 1), f64::INFINITY);
        let lo_sc = scaling_constants(64, -0.1).unwrap();
        let down = ExceedanceConfig::j_minus(&lo_sc, 6, 0.5).unwrap();
        let b = down.barrier.unwrap();
        assert_eq!(b.start, lo_sc.r + 1);
        assert!((b.ceiling(lo_sc.r + 1) - (lo_sc.mu + 1.0)).abs() < 1e-12);
        assert!(down.terminal_ok(lo_sc.m_n_minus_r + 0.25));
        assert!(!down.terminal_ok(lo_sc.m_n_minus_r + 0.75));
    }

    #[test]
    fn pz_examples() {
        assert_eq!(pz_bound(2.0, 8.0).unwrap(), 0.5);
        assert_eq!(pz_bound(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(pz_bound(3.0, 9.0).unwrap(), 1.0);
        assert!(pz_bound(1.0, 0.0).is_err());
    }
}
