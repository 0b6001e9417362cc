//! Binary field files.
//!
//! Layout: a 64-byte little-endian header, `count` f64 node values in
//! row-major order, then `meta_len` bytes of JSON.
//!
//! | offset | type    | content            |
//! |--------|---------|--------------------|
//! | 0      | [u8; 8] | `NLCFIELD`         |
//! | 8      | u32     | version (1)        |
//! | 12     | u32     | dimension          |
//! | 16     | u32     | nx                 |
//! | 20     | u32     | ny (1 in 1D)       |
//! | 24     | u64     | value count        |
//! | 32     | f64     | h                  |
//! | 40     | f64     | origin x           |
//! | 48     | f64     | origin y (0 in 1D) |
//! | 56     | u64     | metadata length    |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, GridHeader};

pub const MAGIC: &[u8; 8] = b"NLCFIELD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedField {
    pub header: GridHeader,
    pub values: Vec<f64>,
    pub metadata: serde_json::Value,
}

impl LoadedField {
    /// Attaches the values to a grid, which must have the same lattice.
    pub fn into_field(self, grid: &Grid) -> Result<Field> {
        if self.header != grid.header() {
            return Err(Error::GridMismatch);
        }
        Field::from_values(grid, self.values)
    }
}

pub fn encode(grid: &Grid, u: &Field, metadata: &serde_json::Value) -> Result<Vec<u8>> {
    if u.fingerprint() != grid.fingerprint() {
        return Err(Error::GridMismatch);
    }
    let hd = grid.header();
    let meta = serde_json::to_vec(metadata)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * u.values().len() + meta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(hd.dim as u32).to_le_bytes());
    out.extend_from_slice(&(hd.shape[0] as u32).to_le_bytes());
    out.extend_from_slice(&(hd.shape.get(1).copied().unwrap_or(1) as u32).to_le_bytes());
    out.extend_from_slice(&(u.values().len() as u64).to_le_bytes());
    out.extend_from_slice(&hd.h.to_le_bytes());
    out.extend_from_slice(&hd.origin[0].to_le_bytes());
    out.extend_from_slice(&hd.origin.get(1).copied().unwrap_or(0.0).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&meta);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.buf.len() as u64,
                reason: format!("file ends inside {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn bad(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        reason: reason.into(),
    }
}

pub fn decode(buf: &[u8]) -> Result<LoadedField> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8, "header")? != MAGIC {
        return Err(bad(0, "bad magic"));
    }
    let version = r.u32("header")?;
    if version != VERSION {
        return Err(bad(8, format!("unsupported version {version}")));
    }
    let dim = r.u32("header")? as usize;
    if !(1..=2).contains(&dim) {
        return Err(bad(12, format!("unsupported dimension {dim}")));
    }
    let nx = r.u32("header")? as usize;
    let ny = r.u32("header")? as usize;
    let count = r.u64("header")?;
    let expected = nx as u64 * if dim == 2 { ny as u64 } else { 1 };
    if count != expected {
        return Err(bad(24, format!("count {count} does not match shape")));
    }
    let h = r.f64("header")?;
    let ox = r.f64("header")?;
    let oy = r.f64("header")?;
    let meta_len = r.u64("header")?;
    let body = count
        .checked_mul(8)
        .filter(|&b| b <= (buf.len() - HEADER_LEN) as u64);
    let Some(body) = body else {
        return Err(bad(buf.len(), "file ends inside values"));
    };
    let values: Vec<f64> = r
        .take(body as usize, "values")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let meta_start = r.pos;
    if meta_len > (buf.len() - meta_start) as u64 {
        return Err(bad(buf.len(), "file ends inside metadata"));
    }
    let meta_bytes = r.take(meta_len as usize, "metadata")?;
    let metadata = serde_json::from_slice(meta_bytes)
        .map_err(|e| bad(meta_start, format!("metadata: {e}")))?;
    if r.pos != buf.len() {
        return Err(bad(r.pos, "trailing bytes"));
    }
    let (shape, origin) = if dim == 1 {
        (vec![nx], vec![ox])
    } else {
        (vec![nx, ny], vec![ox, oy])
    };
    Ok(LoadedField {
        header: GridHeader {
            dim,
            h,
            shape,
            origin,
        },
        values,
        metadata,
    })
}

/// Writes to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn save_field(path: &Path, grid: &Grid, u: &Field, metadata: &serde_json::Value) -> Result<()> {
    write_atomic(path, &encode(grid, u, metadata)?)
}

pub fn load_field(path: &Path) -> Result<LoadedField> {
    decode(&fs::read(path)?)
}
