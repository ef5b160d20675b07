//! Row-major storage for design points in `[0,1]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A list of `len` points of common dimension `dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be >= 1".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    /// One-dimensional points.
    pub fn from_scalars(xs: Vec<f64>) -> Self {
        Self { dim: 1, coords: xs }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Gathers the points at `indices` in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.get(i));
        }
        Self { dim: self.dim, coords }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Uniform grid of `per_axis^dim` cell midpoints, last coordinate fastest.
    pub fn midpoint_grid(dim: usize, per_axis: usize) -> Self {
        let total = per_axis.pow(dim as u32);
        let mut coords = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            coords.extend(idx.iter().map(|&i| (i as f64 + 0.5) / per_axis as f64));
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self { dim, coords }
    }
}
