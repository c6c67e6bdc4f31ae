//! Binary parameter files: magic `XGNN`, format version (u32 LE), SHA-256
//! digest of the architecture, parameter count (u64 LE), then the
//! parameters as little-endian f64.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::network::{NetworkParams, NetworkSpec};
use super::{NnError, Result};

pub const MAGIC: [u8; 4] = *b"XGNN";
pub const FORMAT_VERSION: u32 = 1;

pub fn spec_digest(spec: &NetworkSpec) -> [u8; 32] {
    Sha256::digest(spec.canonical().as_bytes()).into()
}

pub fn save_params<W: Write>(mut w: W, spec: &NetworkSpec, params: &NetworkParams) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&spec_digest(spec))?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in &params.0 {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_params<R: Read>(mut r: R, spec: &NetworkSpec) -> Result<NetworkParams> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    if digest != spec_digest(spec) {
        return Err(NnError::Format("architecture digest mismatch".into()));
    }
    let mut count = [0u8; 8];
    r.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NnError::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(NetworkParams(values))
}
