//! Prime tables partitioned into dyadic log-scales, and the prime sums the
//! analytic formulas are built from.
//!
//! Scale `k` holds the primes with `2^(k-1) < log p <= 2^k`. Scale 0 is
//! `{2}`, the only prime with `1/2 < log p <= 1`. Membership is decided by
//! exact comparison of the double-precision `log p` against the powers of two;
//! no prime sits within 1e-12 of a boundary for the tables we can build.

mod cache;
mod sieve;

use crate::error::{Error, Result};
use crate::quad;
use crate::stats::KahanSum;
use std::ops::Range;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};

/// Largest `log p` the exact backend will enumerate.
pub const MAX_LOG_LIMIT: f64 = 20.0;

/// Slack when comparing a requested bound against `exp(log_limit)`.
const LIMIT_SLACK: f64 = 1e-9;

pub const DEFAULT_SEGMENT: usize = 1 << 18;

/// Sieved primes with cached logs and inverse square roots.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    log_limit: f64,
    limit: u64,
    primes: Vec<u64>,
    log_p: Vec<f64>,
    inv_sqrt_p: Vec<f64>,
    /// Scale `k` occupies `scale_offsets[k]..scale_offsets[k + 1]`.
    scale_offsets: Vec<usize>,
}

/// Scale index of a prime with natural log `log_p`.
pub fn scale_of(log_p: f64) -> usize {
    let mut k = 0;
    let mut upper = 1.0;
    while log_p > upper {
        upper *= 2.0;
        k += 1;
    }
    k
}

/// Sieve all primes `<= floor(exp(log_limit))`.
pub fn sieve(log_limit: f64, segment_size: usize) -> Result<PrimeTable> {
    if !(1.0..=MAX_LOG_LIMIT).contains(&log_limit) {
        return Err(Error::Capacity {
            what: "log_limit",
            value: log_limit,
            cap: MAX_LOG_LIMIT,
        });
    }
    let limit = log_limit.exp().floor() as u64;
    let primes = sieve::segmented_sieve(limit, segment_size);
    Ok(PrimeTable::from_primes(log_limit, primes))
}

impl PrimeTable {
    /// Build from an ascending list of primes, all `<= exp(log_limit)`.
    pub(crate) fn from_primes(log_limit: f64, primes: Vec<u64>) -> PrimeTable {
        let limit = log_limit.exp().floor() as u64;
        let log_p: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
        let inv_sqrt_p: Vec<f64> = primes.iter().map(|&p| 1.0 / (p as f64).sqrt()).collect();
        let mut scale_offsets = vec![0];
        let mut k = 0;
        for (i, &lp) in log_p.iter().enumerate() {
            let s = scale_of(lp);
            while k < s {
                scale_offsets.push(i);
                k += 1;
            }
        }
        // close the last populated scale, then any complete-but-empty ones
        scale_offsets.push(primes.len());
        let complete = Self::complete_scales_for(log_limit);
        while scale_offsets.len() < complete + 2 {
            scale_offsets.push(primes.len());
        }
        PrimeTable {
            log_limit,
            limit,
            primes,
            log_p,
            inv_sqrt_p,
            scale_offsets,
        }
    }

    fn complete_scales_for(log_limit: f64) -> usize {
        // largest k with 2^k <= log_limit (+ slack)
        let mut k = 0;
        while 2f64.powi(k as i32 + 1) <= log_limit + LIMIT_SLACK {
            k += 1;
        }
        k
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn log_limit(&self) -> f64 {
        self.log_limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn log_p(&self) -> &[f64] {
        &self.log_p
    }

    pub fn inv_sqrt_p(&self) -> &[f64] {
        &self.inv_sqrt_p
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Largest scale whose prime range is fully contained in the table.
    pub fn max_scale(&self) -> usize {
        Self::complete_scales_for(self.log_limit)
    }

    /// Number of scale ranges stored (including a partial top scale).
    pub fn scale_count(&self) -> usize {
        self.scale_offsets.len() - 1
    }

    /// Index ranges of every stored scale, the last possibly partial.
    pub fn stored_scales(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.scale_offsets.windows(2).map(|w| w[0]..w[1])
    }

    /// Index range of the primes in scale `k`.
    pub fn scale_range(&self, k: usize) -> Result<Range<usize>> {
        if k > self.max_scale() {
            return Err(Error::Range(format!(
                "scale {k} needs primes up to exp(2^{k}) but the table stops at exp({})",
                self.log_limit
            )));
        }
        Ok(self.scale_offsets[k]..self.scale_offsets[k + 1])
    }

    /// Index range for scales `k_lo..=k_hi`.
    pub fn scales_range(&self, k_lo: usize, k_hi: usize) -> Result<Range<usize>> {
        if k_lo > k_hi {
            return Ok(0..0);
        }
        let lo = self.scale_range(k_lo)?;
        let hi = self.scale_range(k_hi)?;
        Ok(lo.start..hi.end)
    }

    /// The primes with `2^(k-1) < log p <= 2^k`.
    pub fn primes_in_scale(&self, k: usize) -> Result<&[u64]> {
        Ok(&self.primes[self.scale_range(k)?])
    }

    /// Index range of primes with `lo < p <= hi` for real bounds.
    fn index_range(&self, lo: f64, hi: f64) -> Result<Range<usize>> {
        if lo.is_nan() || lo < 2.0 {
            return Err(Error::arg("P", format!("must be >= 2, got {lo}")));
        }
        if lo > hi {
            return Err(Error::arg("P", format!("P = {lo} exceeds Q = {hi}")));
        }
        if hi.ln() > self.log_limit + LIMIT_SLACK {
            return Err(Error::Range(format!(
                "Q = {hi} beyond table limit exp({})",
                self.log_limit
            )));
        }
        let start = self.primes.partition_point(|&p| (p as f64) <= lo);
        let end = self.primes.partition_point(|&p| (p as f64) <= hi);
        Ok(start..end.max(start))
    }

    /// `sum_{P < p <= Q} 1/p`.
    pub fn mertens_sum(&self, lo: f64, hi: f64) -> Result<f64> {
        let r = self.index_range(lo, hi)?;
        Ok(self.primes[r]
            .iter()
            .map(|&p| 1.0 / p as f64)
            .collect::<KahanSum>()
            .value())
    }

    /// `sum_{P < p <= Q} (log p)^m / p` for `m <= 4`.
    pub fn weighted_prime_sum(&self, lo: f64, hi: f64, m: u32) -> Result<WeightedSum> {
        if m > 4 {
            return Err(Error::arg("m", format!("power must be <= 4, got {m}")));
        }
        let r = self.index_range(lo, hi)?;
        let value = self.primes[r.clone()]
            .iter()
            .zip(&self.log_p[r])
            .map(|(&p, &lp)| lp.powi(m as i32) / p as f64)
            .collect::<KahanSum>()
            .value();
        let scale = hi.ln().powi(m as i32);
        Ok(WeightedSum {
            value,
            order_constant: if scale > 0.0 { value / scale } else { f64::NAN },
        })
    }
}

/// A weighted prime sum and the ratio `value / (log Q)^m`, which stays
/// bounded as Q grows.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct WeightedSum {
    pub value: f64,
    pub order_constant: f64,
}

/// Logarithmic integral `int_2^x du / log u`, relative error 1e-10.
pub fn prime_count_estimate(x: f64) -> Result<f64> {
    if x.is_nan() || x < 2.0 {
        return Err(Error::arg("x", format!("must be >= 2, got {x}")));
    }
    // u = e^v: int_{log 2}^{log x} e^v / v dv
    let (v, _) = quad::integrate(|v| v.exp() / v, 2f64.ln(), x.ln(), 1e-12, 0.0)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_e4_has_sixteen_primes() {
        let t = sieve(4.0, 64).unwrap();
        assert_eq!(t.len(), 16);
        assert_eq!(t.primes()[0], 2);
        assert_eq!(*t.primes().last().unwrap(), 53);
        assert_eq!(t.limit(), 54);
    }

    #[test]
    fn sieve_e1_is_two() {
        let t = sieve(1.0, 64).unwrap();
        assert_eq!(t.primes(), &[2]);
        assert_eq!(t.primes_in_scale(0).unwrap(), &[2]);
    }

    #[test]
    fn capacity_error_names_cap() {
        let err = sieve(21.0, 1024).unwrap_err();
        assert!(err.to_string().contains("20"));
        assert!(sieve(0.5, 1024).is_err());
    }

    #[test]
    fn hand_checked_scales() {
        let t = sieve(4.0, 64).unwrap();
        assert_eq!(t.primes_in_scale(0).unwrap(), &[2]);
        assert_eq!(t.primes_in_scale(1).unwrap(), &[3, 5, 7]);
        assert_eq!(
            t.primes_in_scale(2).unwrap(),
            &[11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]
        );
        assert!(t.primes_in_scale(3).is_err());
    }

    #[test]
    fn boundaries_at_small_scales() {
        let t = sieve(16.0, 1 << 16).unwrap();
        for k in 0..=4 {
            let ps = t.primes_in_scale(k).unwrap();
            let lo = if k == 0 { 0.5 } else { 2f64.powi(k as i32 - 1) };
            let hi = 2f64.powi(k as i32);
            assert!(ps
                .iter()
                .all(|&p| (p as f64).ln() > lo && (p as f64).ln() <= hi));
        }
        // e^8 = 2980.96: 2971 is the last prime of scale 3, 2999 the first of scale 4
        assert_eq!(*t.primes_in_scale(3).unwrap().last().unwrap(), 2971);
        assert_eq!(t.primes_in_scale(4).unwrap()[0], 2999);
    }

    #[test]
    fn mertens_small_range() {
        let t = sieve(4.0, 64).unwrap();
        let e = std::f64::consts::E;
        let v = t.mertens_sum(e, e * e).unwrap();
        assert!((v - (1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0)).abs() < 1e-15);
        assert!((v - 0.676_190_47).abs() < 1e-8);
        assert_eq!(t.mertens_sum(10.0, 10.0).unwrap(), 0.0);
        assert!(t.mertens_sum(3.0, 60.0).is_err());
        assert!(t.mertens_sum(1.0, 10.0).is_err());
    }

    #[test]
    fn weighted_sum_small_range() {
        let t = sieve(4.0, 64).unwrap();
        let e = std::f64::consts::E;
        let w0 = t.weighted_prime_sum(e, e * e, 0).unwrap();
        assert_eq!(w0.value, t.mertens_sum(e, e * e).unwrap());
        let w1 = t.weighted_prime_sum(e, e * e, 1).unwrap();
        let hand = 3f64.ln() / 3.0 + 5f64.ln() / 5.0 + 7f64.ln() / 7.0;
        assert!((w1.value - hand).abs() < 1e-15);
        assert!((w1.value - 0.966_079).abs() < 1e-6);
        assert!(t.weighted_prime_sum(e, e * e, 5).is_err());
    }

    #[test]
    fn li_small_values() {
        assert_eq!(prime_count_estimate(2.0).unwrap(), 0.0);
        // li(e^4) - li(2) = 19.63..; pi(e^4) = 16
        let v = prime_count_estimate(4f64.exp()).unwrap();
        assert!((v - 16.0).abs() <= 4.0, "{v}");
        assert!(prime_count_estimate(1.0).is_err());
    }
}
