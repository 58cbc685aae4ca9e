//! Field snapshot files.
//!
//! Binary layout (all little-endian):
//!
//! | bytes | content                      |
//! |-------|------------------------------|
//! | 8     | magic `PFCHSNP1`             |
//! | 8     | edge length `L` (f64)        |
//! | 8     | points per edge `N` (u64)    |
//! | 8     | grid origin (f64)            |
//! | 8     | time `t` (f64)               |
//! | 8N^2  | values, row-major, f64       |
//!
//! The CSV export has header `x,y,value` and one line per node, `x` varying
//! slowest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Grid2D, PeriodicField};

pub const MAGIC: &[u8; 8] = b"PFCHSNP1";
const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: PeriodicField,
}

impl Snapshot {
    pub fn new(time: f64, field: PeriodicField) -> Self {
        Self { time, field }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let grid = self.field.grid();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&grid.length().to_le_bytes());
        out.extend_from_slice(&(grid.n() as u64).to_le_bytes());
        out.extend_from_slice(&grid.origin().to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in self.field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(Error::Format("missing PFCHSNP1 header".into()));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let length = f64_at(8);
        let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let origin = f64_at(24);
        let time = f64_at(32);
        let grid = Grid2D::new(length, n, origin)?;
        let expected = HEADER_LEN + 8 * grid.len();
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} bytes for N = {n}, found {}",
                bytes.len()
            )));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            time,
            field: PeriodicField::from_values(grid, values)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let grid = self.field.grid();
        writeln!(w, "x,y,value")?;
        for m1 in 0..grid.n() {
            for m2 in 0..grid.n() {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    grid.coord(m1),
                    grid.coord(m2),
                    self.field.get(m1, m2)
                )?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
