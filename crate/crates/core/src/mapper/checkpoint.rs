//! Identity checkpoint:
//!
//! ```text
//! magic "CELBID01" | version u16 | p u32 | basis fingerprint u64 | label_len u16 | label utf-8
//! payload: 2p x binary16 (a1 then a2)
//! crc32 u32 over everything above
//! ```
//! Little-endian throughout.

use std::path::Path;

use half::f16;
use nalgebra::DVector;

use crate::basis::IdentityCoefficients;
use crate::error::{Error, Result};
use crate::io::{read_file, verify_crc_trailer, write_atomic, Reader};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CELBID01";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Worst-case rounding error of binary16 for values in `[-1, 1]`
/// (half the spacing just below 1.0).
pub const HALF_QUANTIZATION_BOUND: f64 = 1.0 / 4096.0;

/// Tolerance on group norms after half-precision quantization.
const UNIT_NORM_TOLERANCE: f64 = 1e-3;

pub fn checkpoint_len(p: usize, label: &str) -> usize {
    8 + 2 + 4 + 8 + 2 + label.len() + 2 * p * 2 + 4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FingerprintPolicy {
    Error,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheckpoint {
    pub coefficients: IdentityCoefficients,
    pub basis_fingerprint: u64,
    pub label: String,
}

fn quantize(v: f64) -> f64 {
    f16::from_f64(v).to_f64()
}

impl IdentityCheckpoint {
    /// Coefficients are rounded to half precision on construction, so the
    /// in-memory value equals what a reload produces.
    pub fn new(
        coefficients: &IdentityCoefficients,
        basis_fingerprint: u64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        if label.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument("checkpoint label too long".into()));
        }
        if coefficients.unit_norm_error() > UNIT_NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "coefficient groups must be unit norm (off by {:.3e})",
                coefficients.unit_norm_error()
            )));
        }
        let coefficients = IdentityCoefficients::new(
            coefficients.a1.map(quantize),
            coefficients.a2.map(quantize),
        )?;
        Ok(IdentityCheckpoint {
            coefficients,
            basis_fingerprint,
            label,
        })
    }

    pub fn p(&self) -> usize {
        self.coefficients.p()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.p();
        let mut out = Vec::with_capacity(checkpoint_len(p, &self.label));
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(p as u32).to_le_bytes());
        out.extend_from_slice(&self.basis_fingerprint.to_le_bytes());
        out.extend_from_slice(&(self.label.len() as u16).to_le_bytes());
        out.extend_from_slice(self.label.as_bytes());
        for v in self.coefficients.to_vec() {
            out.extend_from_slice(&f16::from_f64(v).to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic, not an identity checkpoint".into()));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let p = r.u32()? as usize;
        let _fingerprint = r.u64()?;
        let label_len = r.u16()? as usize;
        let expected = 8 + 2 + 4 + 8 + 2 + label_len + 4 * p + 4;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "checkpoint is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let body = verify_crc_trailer(bytes)?;
        let mut r = Reader::new(body);
        r.take(8 + 2 + 4)?;
        let basis_fingerprint = r.u64()?;
        r.u16()?;
        let label = String::from_utf8(r.take(label_len)?.to_vec())
            .map_err(|_| Error::Format("checkpoint label is not UTF-8".into()))?;
        let mut values = Vec::with_capacity(2 * p);
        for _ in 0..2 * p {
            let raw = r.u16()?;
            values.push(f16::from_bits(raw).to_f64());
        }
        let coefficients = IdentityCoefficients::new(
            DVector::from_column_slice(&values[..p]),
            DVector::from_column_slice(&values[p..]),
        )?;
        if coefficients.unit_norm_error() > UNIT_NORM_TOLERANCE {
            return Err(Error::Format(
                "checkpoint coefficient groups are not unit norm".into(),
            ));
        }
        Ok(IdentityCheckpoint {
            coefficients,
            basis_fingerprint,
            label,
        })
    }

    /// Check the recorded basis fingerprint against `expected`.
    pub fn verify_basis(&self, expected: u64, policy: FingerprintPolicy) -> Result<()> {
        if self.basis_fingerprint == expected {
            return Ok(());
        }
        let err = Error::FingerprintMismatch {
            expected,
            found: self.basis_fingerprint,
        };
        match policy {
            FingerprintPolicy::Error => Err(err),
            FingerprintPolicy::Warn => {
                log::warn!("{err}");
                Ok(())
            }
        }
    }
}

pub fn save_identity(checkpoint: &IdentityCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &checkpoint.to_bytes())
}

/// Load a checkpoint; when `expected_basis` is given the fingerprint is
/// checked under `policy`.
pub fn load_identity(
    path: impl AsRef<Path>,
    expected_basis: Option<u64>,
    policy: FingerprintPolicy,
) -> Result<IdentityCheckpoint> {
    let ckpt = IdentityCheckpoint::from_bytes(&read_file(path.as_ref())?)?;
    if let Some(expected) = expected_basis {
        ckpt.verify_basis(expected, policy)?;
    }
    Ok(ckpt)
}
