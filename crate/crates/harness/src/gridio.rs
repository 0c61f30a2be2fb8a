//! Binary grid files and the CSV/JSON writers.
//!
//! Grid layout, little endian: the 8-byte magic `NVGRID01`, `u32` cells per
//! side, `u32` channel count, `f64` side length, `f64` origin `x1`, `x2`, then
//! each channel as `n²` `f64` values in row-major order (row index along `x2`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use navier_core::estimator::PointComparison;
use navier_core::lseq::MeasurementSet;
use navier_core::SourceGrid;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

const MAGIC: &[u8; 8] = b"NVGRID01";

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub n: usize,
    pub side: f64,
    pub origin: [f64; 2],
    pub channels: Vec<Vec<f64>>,
}

impl GridFile {
    pub fn new(grid: &SourceGrid, channels: Vec<Vec<f64>>) -> Self {
        Self {
            n: grid.n(),
            side: grid.side(),
            origin: grid.origin(),
            channels,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.n * self.n * self.channels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels.len() as u32).to_le_bytes());
        for v in [self.side, self.origin[0], self.origin[1]] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for ch in &self.channels {
            for v in ch {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, HarnessError> {
        let bad = |detail: String| HarnessError::Format {
            path: path.to_path_buf(),
            detail,
        };
        if bytes.len() < 40 || &bytes[..8] != MAGIC {
            return Err(bad("not a grid file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (n, nc) = (u32_at(8), u32_at(12));
        let need = 40 + 8 * n * n * nc;
        if bytes.len() != need {
            return Err(bad(format!(
                "expected {need} bytes for n = {n}, {nc} channels, found {}",
                bytes.len()
            )));
        }
        let channels = (0..nc)
            .map(|c| {
                (0..n * n)
                    .map(|k| f64_at(40 + 8 * (c * n * n + k)))
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            side: f64_at(16),
            origin: [f64_at(24), f64_at(32)],
            channels,
        })
    }

    /// Checks that the file was written for `grid` with `channels` channels.
    pub fn expect_shape(
        &self,
        grid: &SourceGrid,
        channels: usize,
        path: &Path,
    ) -> Result<(), HarnessError> {
        if self.n != grid.n()
            || self.side != grid.side()
            || self.origin != grid.origin()
            || self.channels.len() != channels
        {
            return Err(HarnessError::Format {
                path: path.to_path_buf(),
                detail: format!(
                    "holds n = {}, side = {}, {} channel(s); the run needs n = {}, side = {}, {channels}",
                    self.n,
                    self.side,
                    self.channels.len(),
                    grid.n(),
                    grid.side()
                ),
            });
        }
        Ok(())
    }
}

pub fn read_grid(path: &Path) -> Result<GridFile, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    GridFile::from_bytes(&bytes, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Collects output files; everything is written through [`Writer::put`].
#[derive(Debug)]
pub struct Writer {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
        self.written.retain(|(n, _)| n != name);
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.put(name, s.as_bytes())
    }

    /// `(file name, sha256)` in write order.
    pub fn written(&self) -> &[(String, String)] {
        &self.written
    }
}

/// `point_index,lhs_avg,rhs_riesz,rel_err`
pub fn comparison_csv(rows: &[PointComparison]) -> String {
    let mut s = String::from("point_index,lhs_avg,rhs_riesz,rel_err\n");
    for r in rows {
        let _ = writeln!(s, "{},{:e},{:e},{:e}", r.index, r.lhs, r.rhs, r.rel_err);
    }
    s
}

/// `omega,point_index,x1,x2,re_u1,im_u1,re_u2,im_u2`
pub fn fields_csv(
    omegas: &[f64],
    points: &MeasurementSet,
    values: &[Vec<[num_complex::Complex64; 2]>],
) -> String {
    let mut s = String::from("omega,point_index,x1,x2,re_u1,im_u1,re_u2,im_u2\n");
    for (w, row) in omegas.iter().zip(values) {
        for (p, (x, u)) in points.points().iter().zip(row).enumerate() {
            let _ = writeln!(
                s,
                "{w:e},{p},{:e},{:e},{:e},{:e},{:e},{:e}",
                x[0], x[1], u[0].re, u[0].im, u[1].re, u[1].im
            );
        }
    }
    s
}
