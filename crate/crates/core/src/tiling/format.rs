//! Binary table files.
//!
//! Little-endian layout:
//!
//! ```text
//! "TILE"  u16 version  f64 a  f64 b  u32 level  f64 H  f64 integral  u64 n_tiles
//! n_tiles x (u32 col, u32 row | interior << 31)
//! u32 CRC32 of everything before it
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{Tile, TilingTable};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TILE";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 4 + 2 + 8 + 8 + 4 + 8 + 8 + 8;
pub const RECORD_BYTES: usize = 8;
const CRC_BYTES: usize = 4;

impl TilingTable {
    /// Exact size of the serialized table.
    pub fn serialized_len(&self) -> usize {
        HEADER_BYTES + self.n_tiles() * RECORD_BYTES + CRC_BYTES
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.support.0.to_le_bytes());
        out.extend_from_slice(&self.support.1.to_le_bytes());
        out.extend_from_slice(&self.level.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.total_integral.to_le_bytes());
        out.extend_from_slice(&(self.tiles.len() as u64).to_le_bytes());
        for t in &self.tiles {
            out.extend_from_slice(&t.col().to_le_bytes());
            out.extend_from_slice(&t.raw_row().to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES + CRC_BYTES {
            return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, not a tile table".into()));
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = u16::from_le_bytes(r.take());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let a = f64::from_le_bytes(r.take());
        let b = f64::from_le_bytes(r.take());
        let level = u32::from_le_bytes(r.take());
        let height = f64::from_le_bytes(r.take());
        let total_integral = f64::from_le_bytes(r.take());
        let n = u64::from_le_bytes(r.take());
        let expected = (n as u128) * RECORD_BYTES as u128 + (HEADER_BYTES + CRC_BYTES) as u128;
        if expected != bytes.len() as u128 {
            return Err(Error::Format(format!("{n} tiles need {expected} bytes, file has {}", bytes.len())));
        }
        let body = bytes.len() - CRC_BYTES;
        let stored = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
        if crc32fast::hash(&bytes[..body]) != stored {
            return Err(Error::Format("checksum mismatch".into()));
        }
        let mut tiles = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let col = u32::from_le_bytes(r.take());
            let row = u32::from_le_bytes(r.take());
            tiles.push(Tile::from_raw(col, row));
        }
        let table = TilingTable { support: (a, b), level, height, total_integral, tiles };
        table.validate().map_err(Error::Format)?;
        Ok(table)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref()).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::Format(format!("{}: no such file", path.as_ref().display())),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }
}
