//! The random field `X_n(h) = sum_p Re(U_p p^{-ih}) / sqrt(p)` with uniform
//! (or exponentially tilted) phases, its scale increments `Y_k(h)`, and the
//! cut-off sums `X_{r,k}(h)`.

mod field;
mod grid;
pub mod vonmises;

pub use field::{
    eval_field, eval_field_grid, eval_increments, eval_increments_grid, GridBackend,
    RENORM_INTERVAL,
};
pub use grid::{dyadic_grid, DyadicGrid};

use crate::error::{Error, Result};
use crate::primes::PrimeTable;
use crate::rng::{mix64, uniform_angle, CounterRng};
use serde::Serialize;

/// Which law the phases were drawn from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Base,
    /// Tilt by `exp(lambda * Y_k(h))` on scales `k_lo..=k_hi`.
    TiltedOne {
        lambda: f64,
        h: f64,
        k_lo: usize,
        k_hi: usize,
    },
    /// Tilt by `exp(l1 Y_k(h1) + l2 Y_k(h2))` on scales `k_lo..=k_hi`.
    TiltedTwo {
        lambdas: [f64; 2],
        hs: [f64; 2],
        k_lo: usize,
        k_hi: usize,
    },
}

/// One angle per prime of a table, in `[0, 2pi)`.
#[derive(Clone, Debug)]
pub struct PhaseAssignment {
    angles: Vec<f64>,
    measure: Measure,
    seed: u64,
    replicate: u64,
    table_fingerprint: u64,
}

impl PhaseAssignment {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn table_fingerprint(&self) -> u64 {
        self.table_fingerprint
    }

    pub(crate) fn check_table(&self, table: &PrimeTable) -> Result<()> {
        if self.angles.len() != table.len() || self.table_fingerprint != fingerprint(table) {
            return Err(Error::arg(
                "phases",
                "phase assignment was sampled for a different prime table",
            ));
        }
        Ok(())
    }

    /// Build directly from angles, e.g. for deterministic checks.
    pub fn from_angles(table: &PrimeTable, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != table.len() {
            return Err(Error::arg(
                "angles",
                format!("expected {} angles, got {}", table.len(), angles.len()),
            ));
        }
        Ok(PhaseAssignment {
            angles: angles
                .into_iter()
                .map(|a| a.rem_euclid(std::f64::consts::TAU))
                .collect(),
            measure: Measure::Base,
            seed: 0,
            replicate: 0,
            table_fingerprint: fingerprint(table),
        })
    }
}

/// Stable identifier of a prime table: count, limit and the largest prime.
pub fn fingerprint(table: &PrimeTable) -> u64 {
    let last = table.primes().last().copied().unwrap_or(0);
    mix64(mix64(table.len() as u64) ^ mix64(table.limit()).rotate_left(17) ^ last)
}

/// I.i.d. uniform phases. Angle `j` is a pure function of `(seed, replicate, j)`.
pub fn sample_phases(table: &PrimeTable, seed: u64, replicate: u64) -> PhaseAssignment {
    let angles = (0..table.len() as u64)
        .map(|j| uniform_angle(seed, replicate, j))
        .collect();
    PhaseAssignment {
        angles,
        measure: Measure::Base,
        seed,
        replicate,
        table_fingerprint: fingerprint(table),
    }
}

fn check_lambda(name: &'static str, lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::arg(name, format!("tilt must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Phases under the one-point tilt `Q_lambda`: on scales `k_lo..=k_hi` each
/// angle has density proportional to `exp(kappa_p cos(theta - h log p))`
/// with `kappa_p = lambda / sqrt(p)`; other primes stay uniform.
pub fn sample_phases_tilted_one(
    table: &PrimeTable,
    lambda: f64,
    h: f64,
    scales: (usize, usize),
    seed: u64,
    replicate: u64,
) -> Result<PhaseAssignment> {
    check_lambda("lambda", lambda)?;
    let (k_lo, k_hi) = scales;
    let tilted = table.scales_range(k_lo, k_hi)?;
    let log_p = table.log_p();
    let inv_sqrt = table.inv_sqrt_p();
    let angles = (0..table.len())
        .map(|j| {
            if tilted.contains(&j) {
                let mut rng = CounterRng::new(seed, replicate, j as u64);
                vonmises::sample(h * log_p[j], lambda * inv_sqrt[j], &mut rng)
            } else {
                uniform_angle(seed, replicate, j as u64)
            }
        })
        .collect();
    Ok(PhaseAssignment {
        angles,
        measure: Measure::TiltedOne {
            lambda,
            h,
            k_lo,
            k_hi,
        },
        seed,
        replicate,
        table_fingerprint: fingerprint(table),
    })
}

/// Phases under the two-point tilt `Q_(l1, l2)`. Per prime,
/// `l1 W_p(h1) + l2 W_p(h2) = a cos(theta) + b sin(theta)`, so each tilted
/// angle is von Mises with mean `atan2(b, a)` and concentration `hypot(a, b)`.
pub fn sample_phases_tilted_two(
    table: &PrimeTable,
    lambdas: [f64; 2],
    hs: [f64; 2],
    scales: (usize, usize),
    seed: u64,
    replicate: u64,
) -> Result<PhaseAssignment> {
    check_lambda("lambda1", lambdas[0])?;
    check_lambda("lambda2", lambdas[1])?;
    let (k_lo, k_hi) = scales;
    let tilted = table.scales_range(k_lo, k_hi)?;
    let log_p = table.log_p();
    let inv_sqrt = table.inv_sqrt_p();
    let angles = (0..table.len())
        .map(|j| {
            if tilted.contains(&j) {
                let (s1, c1) = (hs[0] * log_p[j]).sin_cos();
                let (s2, c2) = (hs[1] * log_p[j]).sin_cos();
                let a = inv_sqrt[j] * (lambdas[0] * c1 + lambdas[1] * c2);
                let b = inv_sqrt[j] * (lambdas[0] * s1 + lambdas[1] * s2);
                let mut rng = CounterRng::new(seed, replicate, j as u64);
                vonmises::sample(b.atan2(a), a.hypot(b), &mut rng)
            } else {
                uniform_angle(seed, replicate, j as u64)
            }
        })
        .collect();
    Ok(PhaseAssignment {
        angles,
        measure: Measure::TiltedTwo {
            lambdas,
            hs,
            k_lo,
            k_hi,
        },
        seed,
        replicate,
        table_fingerprint: fingerprint(table),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primes::sieve;

    #[test]
    fn sampling_is_reproducible() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let a = sample_phases(&t, 42, 7);
        let b = sample_phases(&t, 42, 7);
        assert_eq!(a.angles(), b.angles());
        assert!(a
            .angles()
            .iter()
            .all(|&x| (0.0..std::f64::consts::TAU).contains(&x)));
        assert_ne!(a.angles(), sample_phases(&t, 42, 8).angles());
    }

    #[test]
    fn zero_tilt_reproduces_base_draw() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let base = sample_phases(&t, 3, 1);
        let tilted = sample_phases_tilted_one(&t, 0.0, 0.3, (1, 3), 3, 1).unwrap();
        assert_eq!(base.angles(), tilted.angles());
    }

    #[test]
    fn one_sided_two_point_tilt_is_one_point_tilt() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let one = sample_phases_tilted_one(&t, 1.2, 0.25, (1, 3), 9, 2).unwrap();
        let two = sample_phases_tilted_two(&t, [1.2, 0.0], [0.25, 0.9], (1, 3), 9, 2).unwrap();
        for (a, b) in one.angles().iter().zip(two.angles()) {
            let d = (a - b).rem_euclid(std::f64::consts::TAU);
            assert!(!(1e-9..=std::f64::consts::TAU - 1e-9).contains(&d));
        }
    }

    #[test]
    fn coupled_two_point_tilt_doubles_lambda() {
        let t = sieve(8.0, 1 << 12).unwrap();
        let one = sample_phases_tilted_one(&t, 2.0, 0.4, (1, 3), 4, 0).unwrap();
        let two = sample_phases_tilted_two(&t, [1.0, 1.0], [0.4, 0.4], (1, 3), 4, 0).unwrap();
        for (a, b) in one.angles().iter().zip(two.angles()) {
            let d = (a - b).rem_euclid(std::f64::consts::TAU);
            assert!(!(1e-9..=std::f64::consts::TAU - 1e-9).contains(&d));
        }
    }

    #[test]
    fn negative_tilt_rejected() {
        let t = sieve(4.0, 64).unwrap();
        assert!(sample_phases_tilted_one(&t, -0.1, 0.0, (1, 2), 0, 0).is_err());
        assert!(sample_phases_tilted_two(&t, [1.0, -1.0], [0.0, 0.1], (1, 2), 0, 0).is_err());
    }

    #[test]
    fn phases_check_their_table() {
        let small = sieve(4.0, 64).unwrap();
        let big = sieve(8.0, 1 << 12).unwrap();
        let ph = sample_phases(&small, 1, 1);
        assert!(ph.check_table(&small).is_ok());
        assert!(ph.check_table(&big).is_err());
    }
}
