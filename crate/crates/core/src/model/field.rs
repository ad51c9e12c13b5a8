use super::{DyadicGrid, PhaseAssignment};
use crate::error::{Error, Result};
use crate::primes::PrimeTable;
use crate::stats::KahanSum;
use rayon::prelude::*;
use std::ops::Range;

/// How grid values are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridBackend {
    /// One cosine per (prime, point).
    Direct,
    /// Rotate each prime's unit vector by `exp(-i 2^-g log p)` from point to
    /// point, recomputing it exactly every [`RENORM_INTERVAL`] steps.
    #[default]
    Recurrence,
}

/// Steps between exact recomputations in the rotation recurrence.
pub const RENORM_INTERVAL: usize = 64;

const GRID_CHUNK: usize = 256;

/// `(Y_0(h), ..., Y_{k_max}(h))`, each a compensated sum over its scale.
pub fn eval_increments(
    phases: &PhaseAssignment,
    table: &PrimeTable,
    h: f64,
    k_max: usize,
) -> Result<Vec<f64>> {
    phases.check_table(table)?;
    (0..=k_max)
        .map(|k| {
            let r = table.scale_range(k)?;
            Ok(point_sum(phases.angles(), table, r, h))
        })
        .collect()
}

fn point_sum(angles: &[f64], table: &PrimeTable, r: Range<usize>, h: f64) -> f64 {
    let log_p = &table.log_p()[r.clone()];
    let inv = &table.inv_sqrt_p()[r.clone()];
    let th = &angles[r];
    let mut s = KahanSum::default();
    for ((&t, &lp), &w) in th.iter().zip(log_p).zip(inv) {
        s.add(w * (t - h * lp).cos());
    }
    s.value()
}

/// Prime index range for `X_{r,k}`: scales `r+1..=k_hi`, or `0..=k_hi` when
/// `cutoff` is `None`.
fn cut_range(table: &PrimeTable, cutoff: Option<usize>, k_hi: usize) -> Result<Range<usize>> {
    match cutoff {
        None => table.scales_range(0, k_hi),
        Some(r) if r > k_hi => Err(Error::Range(format!(
            "cutoff scale {r} above top scale {k_hi}"
        ))),
        Some(r) if r == k_hi => {
            table.scale_range(k_hi)?;
            Ok(0..0)
        }
        Some(r) => table.scales_range(r + 1, k_hi),
    }
}

/// `X_{r,k}(h) = sum_{l=r+1}^{k} Y_l(h)`; `cutoff = None` gives the full
/// `X_k(h)` including scale 0.
pub fn eval_field(
    phases: &PhaseAssignment,
    table: &PrimeTable,
    h: f64,
    cutoff: Option<usize>,
    k_hi: usize,
) -> Result<f64> {
    phases.check_table(table)?;
    let lo = cutoff.map_or(0, |r| r + 1);
    if cut_range(table, cutoff, k_hi)?.is_empty() {
        return Ok(0.0);
    }
    // sum of per-scale compensated sums, matching eval_increments
    let mut s = KahanSum::default();
    for k in lo..=k_hi {
        s.add(point_sum(phases.angles(), table, table.scale_range(k)?, h));
    }
    Ok(s.value())
}

fn accumulate(
    angles: &[f64],
    table: &PrimeTable,
    r: Range<usize>,
    grid: &DyadicGrid,
    backend: GridBackend,
    out: &mut [f64],
) {
    let step = grid.spacing();
    let h0 = grid.point(0);
    let log_p = &table.log_p()[r.clone()];
    let inv = &table.inv_sqrt_p()[r.clone()];
    let th = &angles[r];
    match backend {
        GridBackend::Direct => {
            for ((&t, &lp), &w) in th.iter().zip(log_p).zip(inv) {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += w * (t - grid.point(j) * lp).cos();
                }
            }
        }
        GridBackend::Recurrence => {
            for ((&t, &lp), &w) in th.iter().zip(log_p).zip(inv) {
                let (rs, rc) = (-step * lp).sin_cos();
                let mut re = 0.0;
                let mut im = 0.0;
                for (j, o) in out.iter_mut().enumerate() {
                    if j % RENORM_INTERVAL == 0 {
                        let phase = t - (h0 + j as f64 * step) * lp;
                        let (s, c) = phase.sin_cos();
                        re = c;
                        im = s;
                    } else {
                        let nre = re * rc - im * rs;
                        im = re * rs + im * rc;
                        re = nre;
                    }
                    *o += w * re;
                }
            }
        }
    }
}

fn grid_sum(
    angles: &[f64],
    table: &PrimeTable,
    r: Range<usize>,
    grid: &DyadicGrid,
    backend: GridBackend,
) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    if r.is_empty() {
        return out;
    }
    if grid.len() <= GRID_CHUNK {
        accumulate(angles, table, r, grid, backend, &mut out);
    } else {
        out.par_chunks_mut(GRID_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let sub = grid.slice(c * GRID_CHUNK, chunk.len());
                accumulate(angles, table, r.clone(), &sub, backend, chunk);
            });
    }
    out
}

/// `X_{r,k}` at every point of `grid`. Per point, primes are added in table
/// order regardless of chunking, so the result does not depend on threads.
pub fn eval_field_grid(
    phases: &PhaseAssignment,
    table: &PrimeTable,
    grid: &DyadicGrid,
    cutoff: Option<usize>,
    k_hi: usize,
    backend: GridBackend,
) -> Result<Vec<f64>> {
    phases.check_table(table)?;
    let r = cut_range(table, cutoff, k_hi)?;
    Ok(grid_sum(phases.angles(), table, r, grid, backend))
}

/// Increments `Y_k` on the grid for each scale `k_lo..=k_hi`; row `i` holds
/// scale `k_lo + i`.
pub fn eval_increments_grid(
    phases: &PhaseAssignment,
    table: &PrimeTable,
    grid: &DyadicGrid,
    k_lo: usize,
    k_hi: usize,
    backend: GridBackend,
) -> Result<Vec<Vec<f64>>> {
    phases.check_table(table)?;
    (k_lo..=k_hi)
        .map(|k| {
            let r = table.scale_range(k)?;
            Ok(grid_sum(phases.angles(), table, r, grid, backend))
        })
        .collect()
}
