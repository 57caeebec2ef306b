//! Versioned binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "UAVQOSCK"
//! version  u32
//! fingerprint 32 bytes (scenario digest, zeros if none)
//! state_dim u64, n_hidden u64, hidden[n_hidden] u64
//! action_scale f64
//! n_theta u64, theta[n], adam_m[n], adam_v[n] f64
//! adam_step u64, updates u64
//! return_count f64, return_mean f64, return_m2 f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::policy::{AdamState, NetLayout, PolicyParameters, ReturnStats};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"UAVQOSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub type Fingerprint = [u8; 32];

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(policy: &PolicyParameters, fingerprint: &Fingerprint) -> Vec<u8> {
    let n = policy.theta.len();
    let mut out = Vec::with_capacity(128 + 24 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(fingerprint);
    put_u64(&mut out, policy.layout.state_dim as u64);
    put_u64(&mut out, policy.layout.hidden.len() as u64);
    for &h in &policy.layout.hidden {
        put_u64(&mut out, h as u64);
    }
    put_f64s(&mut out, &[policy.action_scale]);
    put_u64(&mut out, n as u64);
    put_f64s(&mut out, &policy.theta);
    put_f64s(&mut out, &policy.adam.m);
    put_f64s(&mut out, &policy.adam.v);
    put_u64(&mut out, policy.adam.step);
    put_u64(&mut out, policy.updates);
    put_f64s(&mut out, &[policy.returns.count, policy.returns.mean, policy.returns.m2]);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn count(&mut self, what: &str, limit: u64) -> Result<usize> {
        let v = self.u64()?;
        if v > limit {
            return Err(Error::Checkpoint(format!("implausible {what} {v}")));
        }
        Ok(v as usize)
    }
}

/// Decodes a checkpoint and returns it with its stored fingerprint.
pub fn decode(bytes: &[u8]) -> Result<(PolicyParameters, Fingerprint)> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let fingerprint: Fingerprint = r.take(32)?.try_into().expect("32 bytes");
    let state_dim = r.count("state dimension", 1 << 20)?;
    let n_hidden = r.count("hidden layer count", 64)?;
    let hidden = (0..n_hidden)
        .map(|_| r.count("layer width", 1 << 16))
        .collect::<Result<Vec<_>>>()?;
    if state_dim == 0 || hidden.contains(&0) {
        return Err(Error::Checkpoint("zero-sized layer".into()));
    }
    let layout = NetLayout::new(state_dim, hidden);
    let action_scale = r.f64()?;
    let n = r.count("parameter count", 1 << 32)?;
    if n != layout.total_len() {
        return Err(Error::Checkpoint(format!(
            "parameter count {n} does not match layer shapes ({})",
            layout.total_len()
        )));
    }
    let theta = r.f64s(n)?;
    let m = r.f64s(n)?;
    let v = r.f64s(n)?;
    let step = r.u64()?;
    let updates = r.u64()?;
    let returns = ReturnStats {
        count: r.f64()?,
        mean: r.f64()?,
        m2: r.f64()?,
    };
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.buf.len())));
    }
    let policy = PolicyParameters {
        layout,
        action_scale,
        theta,
        adam: AdamState { m, v, step },
        returns,
        updates,
    };
    Ok((policy, fingerprint))
}

pub fn save(path: &Path, policy: &PolicyParameters, fingerprint: &Fingerprint) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(policy, fingerprint))?;
    Ok(())
}

/// Loads a checkpoint, rejecting it if `expected` is given and differs from
/// the stored fingerprint.
pub fn load(path: &Path, expected: Option<&Fingerprint>) -> Result<PolicyParameters> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (policy, stored) = decode(&bytes)?;
    if let Some(fp) = expected {
        if fp != &stored {
            return Err(Error::Checkpoint("trained for a different scenario (fingerprint mismatch)".into()));
        }
    }
    Ok(policy)
}
