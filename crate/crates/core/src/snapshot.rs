//! Binary particle snapshots.
//!
//! One ASCII header line `vpme-snap v1 d=<d> N=<N> t=<time>\n`, then
//! little-endian `f64` positions (`N d`), velocities (`N d`) and weights (`N`).

use std::path::Path;

use crate::diagnostics::write_atomic;
use crate::error::{Result, VpmeError};
use crate::particles::ParticleEnsemble;

const MAGIC: &str = "vpme-snap v1";

/// Serializes an ensemble at time `t`. The time is written in shortest
/// round-trip form.
pub fn encode(ensemble: &ParticleEnsemble, t: f64) -> Vec<u8> {
    let header = format!("{MAGIC} d={} N={} t={t:?}\n", ensemble.dim(), ensemble.len());
    let floats = 2 * ensemble.positions().len() + ensemble.len();
    let mut out = Vec::with_capacity(header.len() + 8 * floats);
    out.extend_from_slice(header.as_bytes());
    for v in ensemble
        .positions()
        .iter()
        .chain(ensemble.velocities())
        .chain(ensemble.weights())
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(ParticleEnsemble, f64)> {
    let err = |msg: String| VpmeError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let newline = bytes
        .iter()
        .take(256)
        .position(|&b| b == b'\n')
        .ok_or_else(|| err("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| err("header is not ASCII".into()))?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| err(format!("bad magic in header '{header}'")))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let [d, n, t] = fields.as_slice() else {
        return Err(err(format!("header '{header}' needs d=, N= and t=")));
    };
    let field = |s: &str, key: &str| -> Result<String> {
        s.strip_prefix(key)
            .map(str::to_string)
            .ok_or_else(|| err(format!("expected '{key}' in header, got '{s}'")))
    };
    let dim: usize = field(d, "d=")?.parse().map_err(|_| err(format!("bad dimension '{d}'")))?;
    let n: usize = field(n, "N=")?.parse().map_err(|_| err(format!("bad particle count '{n}'")))?;
    let t: f64 = field(t, "t=")?.parse().map_err(|_| err(format!("bad time '{t}'")))?;
    if !(1..=3).contains(&dim) {
        return Err(err(format!("dimension {dim} not in 1..=3")));
    }
    let body = &bytes[newline + 1..];
    let floats = n
        .checked_mul(2 * dim + 1)
        .ok_or_else(|| err(format!("particle count {n} too large")))?;
    if body.len() != 8 * floats {
        return Err(err(format!(
            "payload has {} bytes, expected {} for N={n}, d={dim}",
            body.len(),
            8 * floats
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8 bytes")));
    let positions: Vec<f64> = values.by_ref().take(n * dim).collect();
    let velocities: Vec<f64> = values.by_ref().take(n * dim).collect();
    let weights: Vec<f64> = values.collect();
    let ens = ParticleEnsemble::new(dim, positions, velocities, weights).map_err(|e| err(e.to_string()))?;
    Ok((ens, t))
}

pub fn write(path: &Path, ensemble: &ParticleEnsemble, t: f64) -> Result<()> {
    write_atomic(path, &encode(ensemble, t))
}

pub fn read(path: &Path) -> Result<(ParticleEnsemble, f64)> {
    let bytes = std::fs::read(path)?;
    decode(&bytes, path)
}
