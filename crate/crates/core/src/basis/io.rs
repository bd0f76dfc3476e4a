//! Basis container:
//!
//! ```text
//! magic "CELBBAS1" | version u16 | d u32 | p u32 | rows_first u32 | rows_second u32 | build_seed u64
//! per component (first, then second):
//!     mean d*f32 | directions p*d*f32 (row-major) | explained_variance p*f32
//! crc32 u32 over everything above
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{BasisComponent, CelebBasis, Provenance};
use crate::error::{Error, Result};
use crate::io::{read_file, verify_crc_trailer, write_atomic, Reader};

pub const BASIS_MAGIC: &[u8; 8] = b"CELBBAS1";
pub const BASIS_VERSION: u16 = 1;
pub const BASIS_HEADER_LEN: usize = 8 + 2 + 4 * 4 + 8;

/// Exact file size for a basis with embedding dimension `d` and `p` directions.
pub fn basis_file_len(d: usize, p: usize) -> usize {
    BASIS_HEADER_LEN + 2 * (d + p * d + p) * 4 + 4
}

fn put_f32s(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub(super) fn encode(basis: &CelebBasis) -> Vec<u8> {
    let (d, p) = (basis.dim(), basis.p());
    let mut out = Vec::with_capacity(basis_file_len(d, p));
    out.extend_from_slice(BASIS_MAGIC);
    out.extend_from_slice(&BASIS_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&basis.provenance.first_rows.to_le_bytes());
    out.extend_from_slice(&basis.provenance.second_rows.to_le_bytes());
    out.extend_from_slice(&basis.provenance.build_seed.to_le_bytes());
    for comp in [&basis.first, &basis.second] {
        put_f32s(&mut out, comp.mean.iter().copied());
        put_f32s(
            &mut out,
            comp.directions.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()),
        );
        put_f32s(&mut out, comp.explained_variance.iter().copied());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_component(r: &mut Reader<'_>, d: usize, p: usize) -> Result<BasisComponent> {
    let mut f32s = |n: usize| -> Result<Vec<f64>> {
        (0..n).map(|_| r.f32().map(f64::from)).collect()
    };
    let mean = DVector::from_vec(f32s(d)?);
    let directions = DMatrix::from_row_slice(p, d, &f32s(p * d)?);
    let explained = DVector::from_vec(f32s(p)?);
    BasisComponent::new(mean, directions, explained)
}

pub(super) fn decode(bytes: &[u8]) -> Result<CelebBasis> {
    if bytes.len() < BASIS_HEADER_LEN {
        return Err(Error::Format(format!(
            "basis file is {} bytes, shorter than its header",
            bytes.len()
        )));
    }
    let mut header = Reader::new(bytes);
    if header.take(8)? != BASIS_MAGIC {
        return Err(Error::Format("bad magic, not a basis file".into()));
    }
    let version = header.u16()?;
    if version != BASIS_VERSION {
        return Err(Error::Format(format!(
            "unsupported basis version {version} (expected {BASIS_VERSION})"
        )));
    }
    let d = header.u32()? as usize;
    let p = header.u32()? as usize;
    let expected = basis_file_len(d, p);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "basis file is {} bytes, header (d={d}, p={p}) implies {expected}",
            bytes.len()
        )));
    }
    let body = verify_crc_trailer(bytes)?;
    let mut r = Reader::new(&body[8 + 2 + 8..]);
    let first_rows = r.u32()?;
    let second_rows = r.u32()?;
    let build_seed = r.u64()?;
    let first = read_component(&mut r, d, p)?;
    let second = read_component(&mut r, d, p)?;
    debug_assert_eq!(r.remaining(), 0);
    CelebBasis::from_components(
        first,
        second,
        Provenance {
            first_rows,
            second_rows,
            build_seed,
        },
    )
}

pub fn save_basis(basis: &CelebBasis, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &basis.to_bytes())
}

pub fn load_basis(path: impl AsRef<Path>) -> Result<CelebBasis> {
    decode(&read_file(path.as_ref())?)
}
