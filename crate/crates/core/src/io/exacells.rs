//! `.exacells`: a little-endian, column-oriented cell list.
//!
//! ```text
//! "EXAC"            4 bytes
//! version           u32      (1)
//! field count       u32
//! field names       u32 length + UTF-8 bytes, per field
//! cell count        u64
//! i[], j[], k[]     i32 each
//! level[]           u8
//! value[]           f32, one array per field
//! ```

use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use crate::error::Error;
use crate::model::{CellSet, LevelCoord};

pub const MAGIC: &[u8; 4] = b"EXAC";
pub const VERSION: u32 = 1;
/// Coarsest level a file may declare; keeps `2^level` well inside `i32`.
pub const MAX_LEVEL: u8 = 30;

/// Parse failure with the byte offset at which it was detected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic at byte 0 (expected \"EXAC\")")]
    BadMagic,
    #[error("unsupported version {0} at byte 4")]
    BadVersion(u32),
    #[error("truncated {what} at byte {offset}: need {needed} bytes, {available} available")]
    Truncated { what: String, offset: u64, needed: u64, available: u64 },
    #[error("invalid {what} at byte {offset}: {message}")]
    Invalid { what: String, offset: u64, message: String },
    #[error("{extra} unexpected trailing bytes at byte {offset}")]
    TrailingBytes { offset: u64, extra: u64 },
}

impl FormatError {
    pub fn offset(&self) -> u64 {
        match self {
            FormatError::BadMagic => 0,
            FormatError::BadVersion(_) => 4,
            FormatError::Truncated { offset, .. }
            | FormatError::Invalid { offset, .. }
            | FormatError::TrailingBytes { offset, .. } => *offset,
        }
    }
}

pub fn write_cells<W: Write>(mut w: W, cells: &CellSet) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(cells.fields.len() as u32)?;
    for name in &cells.fields {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
    }
    w.write_u64::<LittleEndian>(cells.len() as u64)?;
    let mut buf = Vec::with_capacity(cells.len() * 4);
    for get in [|c: &LevelCoord| c.i, |c: &LevelCoord| c.j, |c: &LevelCoord| c.k] {
        buf.clear();
        buf.extend(cells.coords.iter().flat_map(|c| get(c).to_le_bytes()));
        w.write_all(&buf)?;
    }
    buf.clear();
    buf.extend(cells.coords.iter().map(|c| c.level));
    w.write_all(&buf)?;
    for col in &cells.values {
        buf.clear();
        buf.extend(col.iter().flat_map(|v| v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn save_cells(path: impl AsRef<Path>, cells: &CellSet) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_cells(&mut w, cells)?;
    w.flush()?;
    Ok(())
}

pub fn load_cells(path: impl AsRef<Path>) -> Result<CellSet, Error> {
    let bytes = std::fs::read(path)?;
    Ok(parse_cells(&bytes)?)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: u64, what: &str) -> Result<&'a [u8], FormatError> {
        let available = (self.data.len() - self.pos) as u64;
        if n > available {
            return Err(FormatError::Truncated {
                what: what.to_string(),
                offset: self.pos as u64,
                needed: n,
                available,
            });
        }
        let s = &self.data[self.pos..self.pos + n as usize];
        self.pos += n as usize;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, FormatError> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64, FormatError> {
        Ok(LittleEndian::read_u64(self.take(8, what)?))
    }

    /// Array of `count` elements of `size` bytes; fails before allocating if
    /// the file is too short.
    fn array(&mut self, count: u64, size: u64, what: &str) -> Result<&'a [u8], FormatError> {
        let n = count.checked_mul(size).ok_or_else(|| FormatError::Invalid {
            what: "cell count".into(),
            offset: self.pos as u64,
            message: format!("{count} cells overflow the address space"),
        })?;
        self.take(n, what)
    }
}

/// Parses a complete in-memory file. Nothing is returned unless every array
/// is present and no bytes are left over.
pub fn parse_cells(data: &[u8]) -> Result<CellSet, FormatError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4, "magic").map_err(|_| FormatError::BadMagic)? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let nfields = r.u32("field count")?;
    let mut fields = Vec::new();
    for f in 0..nfields {
        let len = r.u32(&format!("field name length #{f}"))?;
        let at = r.pos as u64;
        let raw = r.take(len as u64, &format!("field name #{f}"))?;
        let name = std::str::from_utf8(raw).map_err(|e| FormatError::Invalid {
            what: format!("field name #{f}"),
            offset: at,
            message: e.to_string(),
        })?;
        fields.push(name.to_string());
    }
    let count = r.u64("cell count")?;
    let columns: Vec<&[u8]> = ["i", "j", "k"]
        .iter()
        .map(|axis| r.array(count, 4, &format!("{axis}[] array")))
        .collect::<Result<_, _>>()?;
    let level_at = r.pos;
    let levels = r.array(count, 1, "level[] array")?;
    if let Some(bad) = levels.iter().position(|&l| l > MAX_LEVEL) {
        return Err(FormatError::Invalid {
            what: "level[] array".into(),
            offset: (level_at + bad) as u64,
            message: format!("level {} exceeds {MAX_LEVEL}", levels[bad]),
        });
    }
    let mut values = Vec::with_capacity(fields.len());
    for name in &fields {
        let raw = r.array(count, 4, &format!("value[] array for field '{name}'"))?;
        values.push(raw.chunks_exact(4).map(LittleEndian::read_f32).collect::<Vec<f32>>());
    }
    if r.pos != data.len() {
        return Err(FormatError::TrailingBytes {
            offset: r.pos as u64,
            extra: (data.len() - r.pos) as u64,
        });
    }
    let ints = |col: &[u8]| col.chunks_exact(4).map(LittleEndian::read_i32).collect::<Vec<i32>>();
    let (is, js, ks) = (ints(columns[0]), ints(columns[1]), ints(columns[2]));
    let coords = (0..count as usize)
        .map(|n| LevelCoord::new(is[n], js[n], ks[n], levels[n]))
        .collect();
    Ok(CellSet { fields, coords, values })
}
