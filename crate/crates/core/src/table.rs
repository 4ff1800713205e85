//! Trace tables: build in parallel, persist in a checksummed binary format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "LTTB" | version u8 = 1 | label_len u16 | label (UTF-8)
//! a i64 | b i64 | x_max u64 | count u64
//! count * (p u64, a_p i32)
//! crc32 u32 over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::curve::RationalCurve;
use crate::error::{Error, Result};
use crate::sieve::sieve_primes;
use crate::trace::{frobenius_trace, hasse_check, TraceRecord};

pub const MAGIC: &[u8; 4] = b"LTTB";
pub const VERSION: u8 = 1;

/// Primes per work unit handed to the pool.
const CHUNK_PRIMES: usize = 4096;

const RECORD_BYTES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceTable {
    pub curve_label: String,
    pub a: i64,
    pub b: i64,
    pub x_max: u64,
    /// Sorted by `p`, one per good prime `5 <= p <= x_max`.
    pub records: Vec<TraceRecord>,
    /// 2, 3 and the primes `<= x_max` dividing the model discriminant.
    pub bad_primes: Vec<u64>,
}

impl TraceTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn curve(&self) -> Result<RationalCurve> {
        RationalCurve::new(self.curve_label.clone(), self.a, self.b)
    }

    /// Records with `p <= x`, as a prefix slice.
    pub fn up_to(&self, x: u64) -> &[TraceRecord] {
        let end = self.records.partition_point(|r| r.p <= x);
        &self.records[..end]
    }

    /// Serialized bytes, including the trailing checksum.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let label = self.curve_label.as_bytes();
        let label_len = u16::try_from(label.len())
            .map_err(|_| Error::pre("save_table", "label longer than 65535 bytes"))?;
        let mut buf =
            Vec::with_capacity(4 + 1 + 2 + label.len() + 32 + self.records.len() * RECORD_BYTES + 4);
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.extend_from_slice(&label_len.to_le_bytes());
        buf.extend_from_slice(label);
        buf.extend_from_slice(&self.a.to_le_bytes());
        buf.extend_from_slice(&self.b.to_le_bytes());
        buf.extend_from_slice(&self.x_max.to_le_bytes());
        buf.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for rec in &self.records {
            let a = i32::try_from(rec.a)
                .map_err(|_| Error::pre("save_table", format!("trace {} at p = {} exceeds i32", rec.a, rec.p)))?;
            buf.extend_from_slice(&rec.p.to_le_bytes());
            buf.extend_from_slice(&a.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MAGIC {
            return Err(Error::CorruptFile("bad magic".into()));
        }
        let version = rd.take(1)?[0];
        if version != VERSION {
            return Err(Error::CorruptFile(format!("unsupported version {version}")));
        }
        let label_len = u16::from_le_bytes(rd.array()?) as usize;
        let label = std::str::from_utf8(rd.take(label_len)?)
            .map_err(|_| Error::CorruptFile("label is not UTF-8".into()))?
            .to_owned();
        let a = i64::from_le_bytes(rd.array()?);
        let b = i64::from_le_bytes(rd.array()?);
        let x_max = u64::from_le_bytes(rd.array()?);
        let count = u64::from_le_bytes(rd.array()?) as usize;
        let needed = count
            .checked_mul(RECORD_BYTES)
            .and_then(|n| n.checked_add(rd.pos + 4))
            .ok_or_else(|| Error::CorruptFile(format!("record count {count} overflows")))?;
        if bytes.len() < needed {
            return Err(Error::TruncatedFile {
                needed,
                found: bytes.len(),
            });
        }
        if bytes.len() > needed {
            return Err(Error::CorruptFile(format!(
                "{} trailing bytes after checksum",
                bytes.len() - needed
            )));
        }
        let body = &bytes[..needed - 4];
        let stored = u32::from_le_bytes(bytes[needed - 4..].try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::CorruptFile("checksum mismatch".into()));
        }

        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let p = u64::from_le_bytes(rd.array()?);
            let ap = i32::from_le_bytes(rd.array()?) as i64;
            records.push(TraceRecord { p, a: ap });
        }
        let curve = RationalCurve::new(label.clone(), a, b)
            .map_err(|e| Error::CorruptFile(format!("stored curve invalid: {e}")))?;
        let table = TraceTable {
            curve_label: label,
            a,
            b,
            x_max,
            records,
            bad_primes: bad_primes_up_to(&curve, &sieve_primes(x_max)),
        };
        table.validate().map_err(Error::CorruptFile)?;
        Ok(table)
    }

    /// Ordering, Hasse bound and completeness against the primes up to `x_max`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for w in self.records.windows(2) {
            if w[0].p >= w[1].p {
                return Err(format!("records not strictly increasing at p = {}", w[1].p));
            }
        }
        if let Some(bad) = self.records.iter().find(|r| !hasse_check(**r)) {
            return Err(format!("Hasse bound violated: a = {} at p = {}", bad.a, bad.p));
        }
        let good: Vec<u64> = sieve_primes(self.x_max)
            .into_iter()
            .filter(|p| self.bad_primes.binary_search(p).is_err())
            .collect();
        if good.len() != self.records.len() || good.iter().zip(&self.records).any(|(p, r)| *p != r.p) {
            return Err(format!(
                "expected {} good primes up to {}, found {} records",
                good.len(),
                self.x_max,
                self.records.len()
            ));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedFile {
                needed: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

fn bad_primes_up_to(curve: &RationalCurve, primes: &[u64]) -> Vec<u64> {
    primes.iter().copied().filter(|&p| curve.is_bad_prime(p)).collect()
}

/// `a_E(p)` for every good prime `5 <= p <= x`, computed on `workers` threads.
///
/// Chunks write into slots indexed by prime rank, so the result does not
/// depend on the worker count.
pub fn build_table(curve: &RationalCurve, x: u64, workers: usize) -> Result<TraceTable> {
    if x < 5 {
        return Err(Error::pre("build_table", format!("x = {x} < 5")));
    }
    if workers == 0 {
        return Err(Error::pre("build_table", "workers must be >= 1"));
    }
    let primes = sieve_primes(x);
    let bad_primes = bad_primes_up_to(curve, &primes);
    let good: Vec<u64> = primes.into_iter().filter(|&p| !curve.is_bad_prime(p)).collect();
    let mut slots = vec![TraceRecord { p: 0, a: 0 }; good.len()];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::pre("build_table", e.to_string()))?;
    pool.install(|| {
        slots
            .par_chunks_mut(CHUNK_PRIMES)
            .zip(good.par_chunks(CHUNK_PRIMES))
            .try_for_each(|(out, ps)| -> Result<()> {
                for (slot, &p) in out.iter_mut().zip(ps) {
                    let reduced = curve.reduce(p)?;
                    *slot = TraceRecord {
                        p,
                        a: frobenius_trace(&reduced)?,
                    };
                }
                Ok(())
            })
    })?;

    Ok(TraceTable {
        curve_label: curve.label.clone(),
        a: curve.a,
        b: curve.b,
        x_max: x,
        records: slots,
        bad_primes,
    })
}

/// Writes via a temporary file in the same directory, then renames.
pub fn save_table(table: &TraceTable, path: &Path) -> Result<()> {
    let bytes = table.to_bytes()?;
    write_atomic(path, &bytes)
}

pub fn load_table(path: &Path) -> Result<TraceTable> {
    TraceTable::from_bytes(&fs::read(path)?)
}

/// Writes via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::pre("write", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
