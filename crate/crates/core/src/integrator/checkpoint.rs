//! Checkpoint files: one line of JSON header, then the physical grid samples
//! as little-endian `f64` in row-major `[i1][i2][i3]` order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Observer, ObserverAction};
use crate::error::{Error, Result};
use crate::spectral::{SpectralField3, TorusGeometry};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub geometry: TorusGeometry,
    pub time: f64,
    pub dt: f64,
    /// `adv_diff`, `kse` or `keller_segel`.
    pub problem: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub field: SpectralField3,
}

pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, field: &SpectralField3) -> Result<()> {
    header.geometry.ensure_same(field.geometry())?;
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for v in field.real_values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(Error::InvalidInput(format!("unsupported checkpoint version {}", header.format_version)));
    }
    let n = header.geometry.len();
    let mut bytes = Vec::with_capacity(n * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::InvalidInput(format!("checkpoint payload has {} bytes, expected {}", bytes.len(), n * 8)));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let field = SpectralField3::from_real(header.geometry, &values)?;
    Ok(Checkpoint { header, field })
}

/// Writes `checkpoint_NNNNN.bin` into `dir` every `every` outputs.
pub struct CheckpointWriter {
    pub dir: PathBuf,
    pub every: usize,
    pub dt: f64,
    pub problem: String,
    seen: usize,
    pub written: Vec<PathBuf>,
}

impl CheckpointWriter {
    pub fn new(dir: impl Into<PathBuf>, every: usize, dt: f64, problem: &str) -> Self {
        Self { dir: dir.into(), every: every.max(1), dt, problem: problem.to_string(), seen: 0, written: Vec::new() }
    }
}

impl Observer for CheckpointWriter {
    fn observe(&mut self, t: f64, state: &SpectralField3) -> Result<ObserverAction> {
        if self.seen % self.every == 0 {
            let path = self.dir.join(format!("checkpoint_{:05}.bin", self.written.len()));
            let header = CheckpointHeader {
                format_version: CHECKPOINT_VERSION,
                geometry: *state.geometry(),
                time: t,
                dt: self.dt,
                problem: self.problem.clone(),
            };
            write_checkpoint(&path, &header, state)?;
            self.written.push(path);
        }
        self.seen += 1;
        Ok(ObserverAction::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = TorusGeometry::new([1.0, 2.0, 3.0], [4, 6, 8]).unwrap();
        let f = SpectralField3::from_fn(g, |x, z, y| x + 2.0 * z - y * y);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let header = CheckpointHeader { format_version: 1, geometry: g, time: 1.5, dt: 0.01, problem: "kse".into() };
        write_checkpoint(&path, &header, &f).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.header, header);
        assert_eq!(back.field.real_values(), f.real_values());
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        let header_len = serde_json::to_string(&header).unwrap().len() + 1;
        assert_eq!(len, header_len + 8 * g.len());
    }
}
