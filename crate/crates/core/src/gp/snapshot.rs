//! Binary field snapshots.
//!
//! Layout, all little-endian: 8-byte magic, `f64` time, `u64` sample count,
//! then one `(x̃, Re ψ, Im ψ)` triple of `f64` per sample.

use num_complex::Complex64;

use super::{CondensateField, Grid};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"BECPSI01";
const HEADER: usize = 8 + 8 + 8;
const RECORD: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub x: Vec<f64>,
    pub psi: Vec<Complex64>,
}

impl Snapshot {
    pub fn from_field(time: f64, grid: &Grid, field: &CondensateField) -> Self {
        Snapshot {
            time,
            x: grid.positions().to_vec(),
            psi: field.psi.clone(),
        }
    }
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + RECORD * s.x.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&s.time.to_le_bytes());
    out.extend_from_slice(&(s.x.len() as u64).to_le_bytes());
    for (x, c) in s.x.iter().zip(s.psi.iter()) {
        out.extend_from_slice(&x.to_le_bytes());
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

fn read_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8-byte slice"))
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "snapshot",
        reason: reason.into(),
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < HEADER {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let time = read_f64(&bytes[8..16]);
    let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8-byte slice"));
    let body = &bytes[HEADER..];
    let expected = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(RECORD))
        .ok_or_else(|| bad(format!("sample count {n} overflows")))?;
    if body.len() != expected {
        return Err(bad(format!(
            "header declares {n} samples but body holds {} bytes",
            body.len()
        )));
    }
    let mut x = Vec::with_capacity(n as usize);
    let mut psi = Vec::with_capacity(n as usize);
    for rec in body.chunks_exact(RECORD) {
        x.push(read_f64(&rec[0..8]));
        psi.push(Complex64::new(read_f64(&rec[8..16]), read_f64(&rec[16..24])));
    }
    Ok(Snapshot { time, x, psi })
}
