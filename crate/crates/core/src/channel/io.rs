//! Binary channel-ensemble files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "SIMCHAN1"          8 bytes
//! version                   u32 (= 1)
//! N, K, ensemble_count      u32 each
//! per ensemble:
//!   placement_id            u64
//!   realization_id          u64
//!   beta                    K x f64
//!   H                       N*K x (re f64, im f64), row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::ChannelEnsemble;
use crate::{CMatrix, Error, Result};

pub const CHANNEL_MAGIC: &[u8; 8] = b"SIMCHAN1";
pub const CHANNEL_VERSION: u32 = 1;

const HEADER_LEN: u64 = 8 + 4 * 4;

fn ensemble_len(n: u64, k: u64) -> u64 {
    16 + 8 * k + 16 * n * k
}

pub fn write_channels<W: Write>(mut w: W, ensembles: &[ChannelEnsemble]) -> Result<()> {
    let (n, k) = ensembles.first().map(|e| e.h.shape()).unwrap_or((0, 0));
    for e in ensembles {
        if e.h.nrows() != n {
            return Err(Error::DimensionMismatch { what: "ensemble rows (N)", expected: n, found: e.h.nrows() });
        }
        if e.h.ncols() != k || e.beta.len() != k {
            return Err(Error::DimensionMismatch { what: "ensemble users (K)", expected: k, found: e.h.ncols() });
        }
    }
    let as_u32 = |v: usize, what: &'static str| {
        u32::try_from(v).map_err(|_| Error::DimensionMismatch { what, expected: u32::MAX as usize, found: v })
    };
    w.write_all(CHANNEL_MAGIC)?;
    w.write_all(&CHANNEL_VERSION.to_le_bytes())?;
    w.write_all(&as_u32(n, "N")?.to_le_bytes())?;
    w.write_all(&as_u32(k, "K")?.to_le_bytes())?;
    w.write_all(&as_u32(ensembles.len(), "ensemble count")?.to_le_bytes())?;
    for e in ensembles {
        w.write_all(&e.placement_id.to_le_bytes())?;
        w.write_all(&e.realization_id.to_le_bytes())?;
        for b in &e.beta {
            w.write_all(&b.to_le_bytes())?;
        }
        for row in 0..n {
            for col in 0..k {
                let z = e.h[(row, col)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_channels(ensembles: &[ChannelEnsemble], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_channels(BufWriter::new(file), ensembles)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: u64,
}

impl<'a> Cursor<'a> {
    fn take<const W: usize>(&mut self) -> Result<[u8; W]> {
        let start = self.offset as usize;
        let chunk = self.bytes.get(start..start + W).ok_or_else(|| Error::ChannelFormat {
            offset: self.offset,
            reason: format!("truncated file: need {W} more bytes, {} available", self.bytes.len().saturating_sub(start)),
        })?;
        self.offset += W as u64;
        Ok(chunk.try_into().expect("slice length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

/// Parses a whole channel file held in memory.
pub fn read_channels<R: Read>(mut r: R) -> Result<Vec<ChannelEnsemble>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, offset: 0 };

    let magic = cur.take::<8>()?;
    if &magic != CHANNEL_MAGIC {
        let offset = magic.iter().zip(CHANNEL_MAGIC).position(|(a, b)| a != b).unwrap_or(0) as u64;
        return Err(Error::ChannelFormat {
            offset,
            reason: format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&magic), "SIMCHAN1"),
        });
    }
    let version_offset = cur.offset;
    let version = cur.u32()?;
    if version != CHANNEL_VERSION {
        return Err(Error::ChannelFormat {
            offset: version_offset,
            reason: format!("unsupported version {version}"),
        });
    }
    let n = cur.u32()? as u64;
    let k = cur.u32()? as u64;
    let count = cur.u32()? as u64;
    let expected = ensemble_len(n, k)
        .checked_mul(count)
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::ChannelFormat { offset: 12, reason: "declared sizes overflow".into() })?;
    let actual = bytes.len() as u64;
    if actual != expected {
        return Err(Error::ChannelFormat {
            offset: actual.min(expected),
            reason: format!(
                "file holds {actual} bytes but header declares N={n}, K={k}, {count} ensembles ({expected} bytes)"
            ),
        });
    }

    let (n, k) = (n as usize, k as usize);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let placement_id = cur.u64()?;
        let realization_id = cur.u64()?;
        let beta = (0..k).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let mut h = CMatrix::zeros(n, k);
        for row in 0..n {
            for col in 0..k {
                let re = cur.f64()?;
                let im = cur.f64()?;
                h[(row, col)] = Complex64::new(re, im);
            }
        }
        out.push(ChannelEnsemble {
            h,
            beta,
            user_positions: Vec::new(),
            placement_id,
            realization_id,
        });
    }
    Ok(out)
}

/// Reads a channel file, optionally checking `(N, K)` against the caller's
/// configuration.
pub fn import_channels(path: impl AsRef<Path>, expected: Option<(usize, usize)>) -> Result<Vec<ChannelEnsemble>> {
    let file = File::open(path)?;
    let ensembles = read_channels(BufReader::new(file))?;
    if let (Some((n, k)), Some(first)) = (expected, ensembles.first()) {
        if first.h.nrows() != n {
            return Err(Error::ChannelFormat {
                offset: 12,
                reason: format!("file has N={} rows, configuration expects {n}", first.h.nrows()),
            });
        }
        if first.h.ncols() != k {
            return Err(Error::ChannelFormat {
                offset: 16,
                reason: format!("file has K={} users, configuration expects {k}", first.h.ncols()),
            });
        }
    }
    Ok(ensembles)
}
