//! Uniform spatial grids for tabulating the invariant law and estimators.

use alloc::format;
use alloc::vec::Vec;

use crate::error::Error;

/// Default number of grid nodes. A power of two plus one so that repeated
/// halving keeps nodes aligned in refinement checks.
pub const DEFAULT_NODES: usize = 16_385;

/// Minimum admissible node count.
pub const MIN_NODES: usize = 512;

/// Tolerance on invariant mass left outside the grid.
pub const MASS_TOL: f64 = 1e-10;

/// Relative quadrature tolerance for tabulated quantities.
pub const QUAD_TOL: f64 = 1e-6;

/// Tolerance on |F0(median) - 1/2|.
pub const ROOT_TOL: f64 = 1e-10;

/// Controls how the law builder chooses its grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridPolicy {
    /// Number of nodes of the final grid.
    pub nodes: usize,
    /// Half-width of the grid in preliminary standard deviations.
    pub span_sds: f64,
    /// Invariant mass allowed outside the grid.
    pub mass_tol: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, span_sds: 15.0, mass_tol: MASS_TOL }
    }
}

impl GridPolicy {
    pub fn validate(&self) -> Result<(), Error> {
        if self.nodes < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "{} nodes requested, minimum is {MIN_NODES}",
                self.nodes
            )));
        }
        if !(self.span_sds.is_finite() && self.span_sds > 0.0) {
            return Err(Error::InvalidGrid(format!("bad span_sds {}", self.span_sds)));
        }
        if !(self.mass_tol > 0.0 && self.mass_tol < 1e-2) {
            return Err(Error::InvalidGrid(format!("bad mass_tol {}", self.mass_tol)));
        }
        Ok(())
    }

    /// Same policy with twice as many panels (nodes `2n-1`), used by
    /// refinement checks.
    pub fn refined(&self) -> Self {
        Self { nodes: self.nodes * 2 - 1, ..self.clone() }
    }
}

/// A strictly increasing uniform grid on `[lower, upper]`.
///
/// Nodes are implicit: `node(i) = lower + i * step`. Uniformity gives O(1)
/// bucketing of path samples into grid cells, which the estimators rely on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialGrid {
    lower: f64,
    step: f64,
    len: usize,
}

impl SpatialGrid {
    pub fn new(lower: f64, upper: f64, len: usize) -> Result<Self, Error> {
        if len < MIN_NODES {
            return Err(Error::InvalidGrid(format!("{len} nodes, minimum is {MIN_NODES}")));
        }
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::InvalidGrid(format!("bad bounds [{lower}, {upper}]")));
        }
        let step = (upper - lower) / (len - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("degenerate step {step}")));
        }
        Ok(Self { lower, step, len })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Left truncation bound (first node).
    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Right truncation bound (last node).
    #[inline]
    pub fn upper(&self) -> f64 {
        self.node(self.len - 1)
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.lower + self.step * i as f64
    }

    #[inline]
    pub fn midpoint(&self, panel: usize) -> f64 {
        self.lower + self.step * (panel as f64 + 0.5)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.node(i))
    }

    pub fn nodes_vec(&self) -> Vec<f64> {
        self.nodes().collect()
    }

    /// Whether `x` lies within the grid bounds.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper()
    }

    /// Index of the panel containing `x`, clamped to valid panels.
    #[inline]
    pub fn panel_of(&self, x: f64) -> usize {
        let raw = (x - self.lower) / self.step;
        if raw <= 0.0 {
            return 0;
        }
        let idx = raw as usize;
        idx.min(self.len - 2)
    }

    /// Index of the first node `>= x`, clamped into the grid.
    pub fn first_node_at_or_above(&self, x: f64) -> usize {
        if x <= self.lower {
            return 0;
        }
        let raw = (x - self.lower) / self.step;
        let idx = raw as usize;
        let idx = if self.node(idx) >= x { idx } else { idx + 1 };
        idx.min(self.len - 1)
    }

    /// Linear interpolation of a tabulated function at `x` (clamped at the
    /// grid edges).
    pub fn interp(&self, table: &[f64], x: f64) -> f64 {
        debug_assert_eq!(table.len(), self.len);
        if x <= self.lower {
            return table[0];
        }
        if x >= self.upper() {
            return table[self.len - 1];
        }
        let p = self.panel_of(x);
        let t = (x - self.node(p)) / self.step;
        table[p] * (1.0 - t) + table[p + 1] * t
    }
}
