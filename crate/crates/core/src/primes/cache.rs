//! Binary prime cache: `PRIM`, u32 version, u64 count, then the primes as
//! u64, all little-endian. Logs and inverse roots are recomputed on load.

use super::PrimeTable;
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub const CACHE_MAGIC: &[u8; 4] = b"PRIM";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache<W: Write>(table: &PrimeTable, mut out: W) -> Result<()> {
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&(table.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(table.len() * 8);
    for &p in table.primes() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

/// Read a cache written for a table with the given `log_limit`.
pub fn read_cache<R: Read>(mut input: R, log_limit: f64) -> Result<PrimeTable> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CACHE_VERSION {
        return Err(Error::Format(format!(
            "unsupported cache version {version}"
        )));
    }
    let mut long = [0u8; 8];
    input.read_exact(&mut long)?;
    let count = u64::from_le_bytes(long) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {count} primes ({} bytes), found {} bytes",
            count * 8,
            bytes.len()
        )));
    }
    let primes: Vec<u64> = bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let limit = log_limit.exp().floor() as u64;
    if primes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Format("primes not strictly increasing".into()));
    }
    if primes.first().is_some_and(|&p| p != 2) || primes.last().is_some_and(|&p| p > limit) {
        return Err(Error::Format(format!(
            "cache content does not match log_limit {log_limit}"
        )));
    }
    Ok(PrimeTable::from_primes(log_limit, primes))
}
