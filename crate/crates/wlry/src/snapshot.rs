//! Binary field snapshots.
//!
//! Layout, little-endian: `b"WLRY"`, version `u32`, `n` as three `u32`,
//! half-width `f64`, rank `u8`, time `f64`, then the payload in row-major
//! node order with the components of each node stored together.

use crate::error::{io, Error, Result};
use std::path::Path;
use wlry_core::{GridSpec, ScalarField, TensorField, VectorField};

pub const MAGIC: &[u8; 4] = b"WLRY";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 8 + 1 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub time: f64,
    /// 0 scalar, 1 vector, 2 tensor.
    pub rank: u8,
    /// Node-major, components innermost.
    pub values: Vec<f64>,
}

fn components(rank: u8) -> Option<usize> {
    match rank {
        0 => Some(1),
        1 => Some(3),
        2 => Some(9),
        _ => None,
    }
}

impl Snapshot {
    pub fn from_scalar(f: &ScalarField, time: f64) -> Self {
        Self { grid: f.grid, time, rank: 0, values: f.data.clone() }
    }

    pub fn from_vector(f: &VectorField, time: f64) -> Self {
        let mut values = Vec::with_capacity(3 * f.grid.len());
        for idx in 0..f.grid.len() {
            values.extend(f.at(idx));
        }
        Self { grid: f.grid, time, rank: 1, values }
    }

    pub fn from_tensor(f: &TensorField, time: f64) -> Self {
        let mut values = Vec::with_capacity(9 * f.grid.len());
        for idx in 0..f.grid.len() {
            for row in &f.comps {
                for c in row {
                    values.push(c[idx]);
                }
            }
        }
        Self { grid: f.grid, time, rank: 2, values }
    }

    pub fn to_vector(&self) -> Result<VectorField> {
        if self.rank != 1 {
            return Err(Error::Snapshot(format!("rank {} is not a vector field", self.rank)));
        }
        let mut u = VectorField::zeros(self.grid);
        for idx in 0..self.grid.len() {
            for c in 0..3 {
                u.comps[c][idx] = self.values[3 * idx + c];
            }
        }
        Ok(u)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.grid.n() as u32;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for _ in 0..3 {
            out.extend_from_slice(&n.to_le_bytes());
        }
        out.extend_from_slice(&self.grid.half_width().to_le_bytes());
        out.push(self.rank);
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Snapshot("missing WLRY header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let dims = [u32_at(8), u32_at(12), u32_at(16)];
        if dims[0] != dims[1] || dims[1] != dims[2] {
            return Err(Error::Snapshot("only cubic grids are supported".into()));
        }
        let half_width = f64_at(20);
        let rank = bytes[28];
        let time = f64_at(29);
        let comps = components(rank).ok_or_else(|| Error::Snapshot(format!("bad rank {rank}")))?;
        let grid = GridSpec::new(dims[0] as usize, half_width)?;
        let expected = comps * grid.len() * 8;
        if bytes.len() - HEADER_LEN != expected {
            return Err(Error::Snapshot(format!("payload is {} bytes, expected {expected}", bytes.len() - HEADER_LEN)));
        }
        let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { grid, time, rank, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// One-line description for `info`.
    pub fn describe(&self) -> String {
        let kind = ["scalar", "vector", "tensor"][self.rank as usize];
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        format!("{kind} field, n = {}, half_width = {}, t = {}, max |component| = {}", self.grid.n(), self.grid.half_width(), self.time, max)
    }
}
