//! Flat little-endian snapshot files with a JSON sidecar manifest.
//!
//! Layout: `b"CNSSNAP\0"`, `u32` version, `u32` nx, `u32` ny, then `f64`
//! length_x, gamma, eps, beta, time, then `rho` row-major followed by the
//! momentum as interleaved `(rho u, rho v)` pairs, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FluidField;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CNSSNAP\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub nx: u32,
    pub ny: u32,
    pub length_x: f64,
    pub gamma: f64,
    pub eps: f64,
    pub beta: f64,
    pub time: f64,
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::Snapshot {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, state: &FluidField) -> Result<()> {
    let n = header.nx as usize * header.ny as usize;
    if state.cells() != n {
        return Err(bad(
            path,
            format!("state has {} cells, header {n}", state.cells()),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [VERSION, header.nx, header.ny] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [
        header.length_x,
        header.gamma,
        header.eps,
        header.beta,
        header.time,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &state.rho {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in 0..n {
        w.write_all(&state.mx[c].to_le_bytes())?;
        w.write_all(&state.my[c].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, FluidField)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad(path, "bad magic"));
    }
    let mut u32s = [0u32; 3];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    if u32s[0] != VERSION {
        return Err(bad(path, format!("unsupported version {}", u32s[0])));
    }
    let mut read_f64 = || -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let header = SnapshotHeader {
        nx: u32s[1],
        ny: u32s[2],
        length_x: read_f64()?,
        gamma: read_f64()?,
        eps: read_f64()?,
        beta: read_f64()?,
        time: read_f64()?,
    };
    let n = header.nx as usize * header.ny as usize;
    let mut rho = vec![0.0; n];
    for v in &mut rho {
        *v = read_f64()?;
    }
    let (mut mx, mut my) = (vec![0.0; n], vec![0.0; n]);
    for c in 0..n {
        mx[c] = read_f64()?;
        my[c] = read_f64()?;
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad(path, format!("{} trailing bytes", rest.len())));
    }
    Ok((header, FluidField { rho, mx, my }))
}

/// One entry of the sidecar manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub header: SnapshotHeader,
    pub snapshots: Vec<ManifestEntry>,
}

/// Writes snapshots into a directory and keeps the manifest current.
pub struct SnapshotWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl SnapshotWriter {
    pub fn new(dir: &Path, header: SnapshotHeader) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                format: "CNSSNAP".into(),
                version: VERSION,
                header,
                snapshots: Vec::new(),
            },
        })
    }

    pub fn write(&mut self, step: usize, time: f64, state: &FluidField) -> Result<PathBuf> {
        let file = format!("snap_{step:08}.bin");
        let path = self.dir.join(&file);
        let header = SnapshotHeader {
            time,
            ..self.manifest.header
        };
        write_snapshot(&path, &header, state)?;
        self.manifest
            .snapshots
            .push(ManifestEntry { file, step, time });
        let f = File::create(self.dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &self.manifest)?;
        Ok(path)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let header = SnapshotHeader {
            nx: 2,
            ny: 3,
            length_x: 2.0,
            gamma: 5.0 / 3.0,
            eps: 1e-3,
            beta: 0.03,
            time: 0.25,
        };
        let s = FluidField {
            rho: (0..6).map(|k| 1.0 + k as f64).collect(),
            mx: (0..6).map(|k| -(k as f64)).collect(),
            my: (0..6).map(|k| 0.5 * k as f64).collect(),
        };
        let p = dir.path().join("a.bin");
        write_snapshot(&p, &header, &s).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 8 + 12 + 40 + 18 * 8);
        assert_eq!(&bytes[..8], MAGIC);
        let (h, t) = read_snapshot(&p).unwrap();
        assert_eq!(h, header);
        assert_eq!(t, s);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        std::fs::write(&p, b"NOTASNAPxxxxxxxxxxxx").unwrap();
        assert!(matches!(read_snapshot(&p), Err(Error::Snapshot { .. })));
    }

    #[test]
    fn manifest_tracks_files() {
        let dir = tempfile::tempdir().unwrap();
        let header = SnapshotHeader {
            nx: 1,
            ny: 1,
            length_x: 1.0,
            gamma: 2.0,
            eps: 1.0,
            beta: 0.0,
            time: 0.0,
        };
        let s = FluidField {
            rho: vec![1.0],
            mx: vec![0.0],
            my: vec![0.0],
        };
        let mut w = SnapshotWriter::new(dir.path(), header).unwrap();
        w.write(0, 0.0, &s).unwrap();
        w.write(10, 0.5, &s).unwrap();
        let m: Manifest =
            serde_json::from_reader(File::open(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.snapshots.len(), 2);
        assert_eq!(m.snapshots[1].time, 0.5);
    }
}
