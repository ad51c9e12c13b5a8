use rayon::prelude::*;

/// All primes `<= n` by the plain sieve of Eratosthenes.
pub(crate) fn simple_sieve(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Integer square root, exact for all u64.
pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Primes in `[lo, hi)` using the base primes (which must cover `sqrt(hi)`).
fn sieve_segment(lo: u64, hi: u64, base: &[u64]) -> Vec<u64> {
    let len = (hi - lo) as usize;
    let mut composite = vec![false; len];
    for &p in base {
        if p * p >= hi {
            break;
        }
        let mut start = p * p;
        if start < lo {
            start = lo.div_ceil(p) * p;
        }
        let mut j = start;
        while j < hi {
            composite[(j - lo) as usize] = true;
            j += p;
        }
    }
    composite
        .iter()
        .enumerate()
        .filter(|(i, &c)| !c && lo + *i as u64 >= 2)
        .map(|(i, _)| lo + i as u64)
        .collect()
}

/// Segmented sieve of all primes `<= limit`. Segments are sieved in parallel
/// and concatenated in ascending order, so the output does not depend on the
/// segment size or the thread count.
pub(crate) fn segmented_sieve(limit: u64, segment_size: usize) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let segment = segment_size.max(64) as u64;
    let base = simple_sieve(isqrt(limit));
    let end = limit + 1;
    let count = end.div_ceil(segment);
    let parts: Vec<Vec<u64>> = (0..count)
        .into_par_iter()
        .map(|s| {
            let lo = s * segment;
            let hi = (lo + segment).min(end);
            sieve_segment(lo, hi, &base)
        })
        .collect();
    let total = parts.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    for p in parts {
        out.extend(p);
    }
    out
}
