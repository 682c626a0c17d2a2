use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every particle's position on a coarse time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStore {
    n: usize,
    dim: usize,
    times: Vec<f64>,
    data: Vec<f64>,
}

impl PathStore {
    pub fn new(n: usize, dim: usize) -> Self {
        Self {
            n,
            dim,
            times: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Appends a frame; `positions` holds `n * dim` coordinates.
    pub fn push(&mut self, time: f64, positions: &[f64]) {
        assert_eq!(positions.len(), self.n * self.dim);
        debug_assert!(self.times.last().is_none_or(|&s| s < time));
        self.times.push(time);
        self.data.extend_from_slice(positions);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let w = self.n * self.dim;
        &self.data[k * w..(k + 1) * w]
    }

    pub fn position(&self, k: usize, particle: usize) -> &[f64] {
        let base = (k * self.n + particle) * self.dim;
        &self.data[base..base + self.dim]
    }

    /// Number of frames with time `<= t` (relative slack 1e-9).
    pub fn frames_until(&self, t: f64) -> usize {
        let slack = 1e-9 * t.abs().max(1.0);
        self.times.partition_point(|&s| s <= t + slack)
    }

    pub fn check_particle(&self, particle: usize) -> Result<()> {
        if particle >= self.n {
            return Err(Error::IndexOutOfRange {
                index: particle,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Applies `f` to every stored coordinate.
    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}
