//! Instance feature files.
//!
//! Binary layout (little-endian): `GAIAFEAT`, version `u32`, dimension
//! `u32`, record count `u64`, then per record a `u16`-prefixed UTF-8 image
//! id, a `u16`-prefixed dataset id, the unified category `u32` and `d`
//! `f32` values. Text files are read as CSV rows
//! `image,dataset,category,v1,...,vd` with an optional header.

use std::io::{self, Write};
use std::path::Path;

use super::{InstanceFeature, SelectError};

pub const MAGIC: &[u8; 8] = b"GAIAFEAT";
pub const VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    record: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SelectError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            SelectError::BadRecord {
                line: self.record,
                reason: "truncated".into(),
            }
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, SelectError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, SelectError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, SelectError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, SelectError> {
        let n = self.u16()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| SelectError::BadRecord {
            line: self.record,
            reason: "id is not UTF-8".into(),
        })
    }
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<InstanceFeature>, SelectError> {
    let mut c = Cursor {
        bytes,
        pos: MAGIC.len(),
        record: 0,
    };
    let version = c.u32()?;
    if version != VERSION {
        return Err(SelectError::BadRecord {
            line: 0,
            reason: format!("unsupported version {version}"),
        });
    }
    let dim = c.u32()? as usize;
    let count = c.u64()?;
    let mut out = Vec::new();
    for r in 0..count {
        c.record = r as usize + 1;
        let image = c.string()?;
        let dataset = c.string()?;
        let category = c.u32()?;
        let raw = c.take(dim * 4)?;
        let vector = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        out.push(InstanceFeature {
            image,
            dataset,
            category,
            vector,
        });
    }
    if c.pos != bytes.len() {
        return Err(SelectError::BadRecord {
            line: count as usize,
            reason: "trailing bytes".into(),
        });
    }
    Ok(out)
}

fn parse_csv(text: &str) -> Result<Vec<InstanceFeature>, SelectError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out: Vec<InstanceFeature> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| SelectError::BadRecord {
            line,
            reason: e.to_string(),
        })?;
        if i == 0 && rec.get(0) == Some("image") {
            continue;
        }
        if rec.len() < 4 {
            return Err(SelectError::BadRecord {
                line,
                reason: format!("{} fields, need image,dataset,category and at least one value", rec.len()),
            });
        }
        let bad = |what: &str| SelectError::BadRecord {
            line,
            reason: format!("bad {what}"),
        };
        let category = rec[2].parse().map_err(|_| bad("category"))?;
        let vector = rec
            .iter()
            .skip(3)
            .map(|v| v.parse::<f32>().map_err(|_| bad("value")))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = out.first() {
            if first.vector.len() != vector.len() {
                return Err(SelectError::DimensionMismatch {
                    record: out.len() + 1,
                    expected: first.vector.len(),
                    found: vector.len(),
                });
            }
        }
        out.push(InstanceFeature {
            image: rec[0].to_string(),
            dataset: rec[1].to_string(),
            category,
            vector,
        });
    }
    Ok(out)
}

/// Parses either format, choosing by the magic bytes.
pub fn parse_features(bytes: &[u8]) -> Result<Vec<InstanceFeature>, SelectError> {
    if bytes.starts_with(MAGIC) {
        return parse_binary(bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| SelectError::BadRecord {
        line: 0,
        reason: "neither GAIAFEAT nor UTF-8 text".into(),
    })?;
    parse_csv(text)
}

pub fn load_features(path: &Path) -> Result<Vec<InstanceFeature>, SelectError> {
    parse_features(&std::fs::read(path)?)
}

/// Writes the binary format. All records must share one dimension.
pub fn write_features<W: Write>(features: &[InstanceFeature], mut w: W) -> Result<(), SelectError> {
    let dim = features.first().map_or(0, |f| f.vector.len());
    if let Some((i, f)) = features.iter().enumerate().find(|(_, f)| f.vector.len() != dim) {
        return Err(SelectError::DimensionMismatch {
            record: i + 1,
            expected: dim,
            found: f.vector.len(),
        });
    }
    let id = |w: &mut W, s: &str| -> io::Result<()> {
        let len = u16::try_from(s.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "id too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(s.as_bytes())
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(features.len() as u64).to_le_bytes())?;
    for f in features {
        id(&mut w, &f.image)?;
        id(&mut w, &f.dataset)?;
        w.write_all(&f.category.to_le_bytes())?;
        for v in &f.vector {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
