//! Matrix exports: CSV, raw little-endian binary and 8-bit graymap images.
//!
//! Raw binary layout (all integers and floats little-endian):
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 4 | magic `MFMX` |
//! | 4 | 4 | u32 format version (1) |
//! | 8 | 4 | u32 rows |
//! | 12 | 4 | u32 cols |
//! | 16 | 4 | u32 flags, bit 0 set when the payload is in dB |
//! | 20 | 64 | ASCII hex config digest |
//! | 84 | var | five strings, each u32 byte length then UTF-8: name, row label, row unit, column label, column unit |
//! | | 4·rows | f32 row coordinates |
//! | | 4·cols | f32 column coordinates |
//! | | 4·rows·cols | f32 payload, row-major |

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"MFMX";
pub const VERSION: u32 = 1;
/// Added before taking the logarithm so silence maps to -100 dB.
pub const DB_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// Coordinates are stored as f32, so they are rounded here once.
    pub fn new(label: &str, unit: &str, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            unit: unit.into(),
            values: values.into_iter().map(|v| v as f32 as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixArtifact {
    pub name: String,
    pub rows: Axis,
    pub cols: Axis,
    pub db: bool,
    pub payload: Vec<f32>,
    pub config_digest: String,
}

pub fn to_db(v: f64) -> f64 {
    10.0 * (v.abs() + DB_FLOOR).log10()
}

impl MatrixArtifact {
    pub fn new(name: &str, rows: Axis, cols: Axis, db: bool, payload: Vec<f32>, config_digest: &str) -> CliResult<Self> {
        if payload.len() != rows.values.len() * cols.values.len() {
            return Err(CliError::Config(format!(
                "{name}: payload of {} values for a {} x {} matrix",
                payload.len(),
                rows.values.len(),
                cols.values.len()
            )));
        }
        if rows.unit.is_empty() || cols.unit.is_empty() {
            return Err(CliError::Config(format!("{name}: axis units are required")));
        }
        if config_digest.len() > 64 || !config_digest.is_ascii() {
            return Err(CliError::Config(format!("{name}: digest must be at most 64 ASCII characters")));
        }
        Ok(Self {
            name: name.into(),
            rows,
            cols,
            db,
            payload,
            config_digest: config_digest.into(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.values.len(), self.cols.values.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (r, c) = self.shape();
        let mut out = Vec::with_capacity(128 + 4 * (r + c + r * c));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(r as u32).to_le_bytes());
        out.extend_from_slice(&(c as u32).to_le_bytes());
        out.extend_from_slice(&(self.db as u32).to_le_bytes());
        let mut digest = [0u8; 64];
        digest[..self.config_digest.len()].copy_from_slice(self.config_digest.as_bytes());
        out.extend_from_slice(&digest);
        for s in [&self.name, &self.rows.label, &self.rows.unit, &self.cols.label, &self.cols.unit] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for v in self.rows.values.iter().chain(&self.cols.values) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(CliError::Io("not a matrix artifact (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(CliError::Io(format!("unsupported matrix artifact version {version}")));
        }
        let r = cur.u32()? as usize;
        let c = cur.u32()? as usize;
        let db = cur.u32()? & 1 == 1;
        let digest = String::from_utf8(cur.take(64)?.iter().copied().take_while(|&b| b != 0).collect())
            .map_err(|_| CliError::Io("digest is not ASCII".into()))?;
        let mut strings = Vec::with_capacity(5);
        for _ in 0..5 {
            let n = cur.u32()? as usize;
            strings.push(
                String::from_utf8(cur.take(n)?.to_vec()).map_err(|_| CliError::Io("string is not UTF-8".into()))?,
            );
        }
        let rows = cur.f32s(r)?.into_iter().map(f64::from).collect();
        let cols = cur.f32s(c)?.into_iter().map(f64::from).collect();
        let payload = cur.f32s(r * c)?;
        if cur.pos != bytes.len() {
            return Err(CliError::Io("trailing bytes after matrix payload".into()));
        }
        Self::new(
            &strings[0],
            Axis::new(&strings[1], &strings[2], rows),
            Axis::new(&strings[3], &strings[4], cols),
            db,
            payload,
            &digest,
        )
    }

    /// One comment line with the metadata, a header of column coordinates,
    /// then one line per row starting with its coordinate.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# name={}; config_digest={}; rows={} [{}]; cols={} [{}]; db={}\n",
            self.name, self.config_digest, self.rows.label, self.rows.unit, self.cols.label, self.cols.unit, self.db
        );
        out.push_str(&format!("{}_{}", self.rows.label, self.rows.unit));
        for v in &self.cols.values {
            out.push_str(&format!(",{}", *v as f32));
        }
        out.push('\n');
        let c = self.cols.values.len();
        for (i, rv) in self.rows.values.iter().enumerate() {
            out.push_str(&format!("{}", *rv as f32));
            for v in &self.payload[i * c..(i + 1) * c] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Binary graymap of the dB-scaled matrix. Each matrix is normalized
    /// over its own dB range; the first row is drawn at the bottom.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (r, c) = self.shape();
        let db: Vec<f64> = self
            .payload
            .iter()
            .map(|&v| if self.db { v as f64 } else { to_db(v as f64) })
            .collect();
        let lo = db.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = format!(
            "P5\n# {}\n# config_digest {}\n# dB = 10*log10(|v| + 1e-10)\n# per-matrix normalization: 0 = {lo:.3} dB, 255 = {hi:.3} dB\n# rows: {} [{}] increasing upward; cols: {} [{}]\n{c} {r}\n255\n",
            self.name, self.config_digest, self.rows.label, self.rows.unit, self.cols.label, self.cols.unit
        )
        .into_bytes();
        for i in (0..r).rev() {
            for &v in &db[i * c..(i + 1) * c] {
                let level = if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() } else { 0.0 };
                out.push(level as u8);
            }
        }
        out
    }

    /// Writes `<stem>.csv`, `<stem>.bin` and `<stem>.pgm` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> CliResult<()> {
        write_file(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())?;
        write_file(&dir.join(format!("{stem}.bin")), &self.to_bytes())?;
        write_file(&dir.join(format!("{stem}.pgm")), &self.to_pgm())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Io(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> CliResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize) -> CliResult<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| CliError::Io("size overflow".into()))?)?;
        Ok(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
    }

    pub fn f64s(&mut self, n: usize) -> CliResult<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| CliError::Io("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    }
}
