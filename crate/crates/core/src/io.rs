//! MFPC1 point-cloud files.
//!
//! Layout, all integers little-endian:
//! magic `MFPC1`, u32 coordinate count n, u32 provenance column count k,
//! u64 row count N, n + k column names (u32 byte length + UTF-8), then N rows
//! of n + k f64 values.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{MfError, Result};

pub const MAGIC: &[u8; 5] = b"MFPC1";

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudFile {
    /// Coordinate columns; the remaining columns are provenance.
    pub dims: usize,
    pub columns: Vec<String>,
    pub rows: PointCloud,
}

impl PointCloudFile {
    /// Coordinates only, columns x0.. x{n-1}.
    pub fn from_cloud(cloud: PointCloud) -> Self {
        let columns = (0..cloud.dim()).map(|i| format!("x{i}")).collect();
        PointCloudFile { dims: cloud.dim(), columns, rows: cloud }
    }

    pub fn with_columns(dims: usize, columns: Vec<String>, rows: PointCloud) -> Result<Self> {
        if columns.len() != rows.dim() || dims > rows.dim() {
            return Err(MfError::invalid(format!(
                "{} column names for rows of width {} with {dims} coordinates",
                columns.len(),
                rows.dim()
            )));
        }
        Ok(PointCloudFile { dims, columns, rows })
    }

    pub fn provenance_columns(&self) -> usize {
        self.rows.dim() - self.dims
    }

    /// The coordinate part of every row.
    pub fn coordinates(&self) -> PointCloud {
        if self.provenance_columns() == 0 {
            return self.rows.clone();
        }
        let mut out = PointCloud::with_capacity(self.dims, self.rows.len());
        for r in self.rows.rows() {
            out.push(&r[..self.dims]);
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let width = self.rows.dim();
        let mut buf = Vec::with_capacity(32 + 8 * width * self.rows.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.dims as u32).to_le_bytes());
        buf.extend_from_slice(&((width - self.dims) as u32).to_le_bytes());
        buf.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for c in &self.columns {
            buf.extend_from_slice(&(c.len() as u32).to_le_bytes());
            buf.extend_from_slice(c.as_bytes());
        }
        for x in self.rows.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(5)? != MAGIC {
            return Err(MfError::Format("bad magic: not an MFPC1 point-cloud file".into()));
        }
        let n = cur.u32()? as usize;
        let k = cur.u32()? as usize;
        let count = cur.u64()?;
        let width = n + k;
        if width == 0 {
            return Err(MfError::Format("point-cloud file declares zero columns".into()));
        }
        let mut columns = Vec::with_capacity(width);
        for _ in 0..width {
            let len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| MfError::Format("column name is not UTF-8".into()))?;
            columns.push(name.to_string());
        }
        let expected = (count as u128) * (width as u128) * 8;
        let rest = (bytes.len() - cur.pos) as u128;
        if rest != expected {
            return Err(MfError::Format(format!(
                "header declares {count} rows of {width} values ({expected} bytes) but {rest} bytes follow"
            )));
        }
        let data: Vec<f64> = bytes[cur.pos..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(PointCloudFile { dims: n, columns, rows: PointCloud::from_flat(width, data)? })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(MfError::Format("truncated point-cloud header".into())),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_cloud(path: &Path, file: &PointCloudFile) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&file.encode())?;
    Ok(())
}

pub fn read_cloud(path: &Path) -> Result<PointCloudFile> {
    PointCloudFile::decode(&fs::read(path)?)
}
