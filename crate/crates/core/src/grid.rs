//! Regular lattices over a bounding box of a domain.
//!
//! Nodes sit at `x = k h` for integer multi-indices `k`, so grids built with
//! the same spacing are aligned with each other. Each node owns the cell
//! `x + [-h/2, h/2]^N`; the bounding box is the union of these cells.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};

/// Node count above which grid construction is refused.
pub const MAX_NODES: usize = 1 << 22;

#[derive(Clone, Debug)]
pub struct Grid {
    spec: DomainSpec,
    h: f64,
    k_lo: Vec<i64>,
    shape: Vec<usize>,
    interior_mask: Vec<bool>,
    interior: Vec<usize>,
    fingerprint: u64,
}

/// Compact description of a grid, stored alongside persisted fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dim: usize,
    pub h: f64,
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
}

impl Grid {
    pub fn build(spec: &DomainSpec, h: f64) -> Result<Self> {
        spec.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spacing h = {h} must be positive"
            )));
        }
        let (lo, hi) = spec.bounds();
        let mut k_lo = Vec::with_capacity(lo.len());
        let mut shape = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(&hi) {
            let k0 = (a / h).floor() as i64 - 2;
            let k1 = (b / h).ceil() as i64 + 2;
            k_lo.push(k0);
            shape.push((k1 - k0 + 1) as usize);
        }
        let total: usize = shape.iter().product();
        if total > MAX_NODES {
            return Err(Error::InvalidParameter(format!(
                "grid would have {total} nodes (limit {MAX_NODES})"
            )));
        }
        let mut grid = Grid {
            spec: spec.clone(),
            h,
            k_lo,
            shape,
            interior_mask: vec![false; total],
            interior: Vec::new(),
            fingerprint: 0,
        };
        let mut x = vec![0.0; grid.dim()];
        for i in 0..total {
            grid.point_into(i, &mut x);
            if spec.contains(&x) {
                grid.interior_mask[i] = true;
                grid.interior.push(i);
            }
        }
        if grid.interior.len() < 3 {
            if grid.interior.is_empty() && !spec_has_points(spec) {
                return Err(Error::DegenerateDomain);
            }
            return Err(Error::TooCoarse {
                interior: grid.interior.len(),
            });
        }
        grid.fingerprint = grid.compute_fingerprint();
        Ok(grid)
    }

    fn compute_fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.h.to_bits().hash(&mut hasher);
        self.k_lo.hash(&mut hasher);
        self.shape.hash(&mut hasher);
        self.interior_mask.hash(&mut hasher);
        hasher.finish()
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn k_lo(&self) -> &[i64] {
        &self.k_lo
    }

    pub fn n_nodes(&self) -> usize {
        self.interior_mask.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Indices of interior nodes in increasing (row-major) order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior_mask[i]
    }

    /// `|Ω_h| = n_interior · h^N`.
    pub fn measure(&self) -> f64 {
        self.n_interior() as f64 * self.cell_volume()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Lattice multi-index of node `i`; the last index varies fastest.
    pub fn lattice_index(&self, i: usize) -> Vec<i64> {
        let mut k = vec![0; self.dim()];
        let mut rem = i;
        for d in (0..self.dim()).rev() {
            k[d] = self.k_lo[d] + (rem % self.shape[d]) as i64;
            rem /= self.shape[d];
        }
        k
    }

    /// Row-major position of node `i` in the array layout.
    pub fn position(&self, i: usize) -> Vec<usize> {
        let mut a = vec![0; self.dim()];
        let mut rem = i;
        for d in (0..self.dim()).rev() {
            a[d] = rem % self.shape[d];
            rem /= self.shape[d];
        }
        a
    }

    pub fn node_of_lattice(&self, k: &[i64]) -> Option<usize> {
        let mut i = 0usize;
        for d in 0..self.dim() {
            let a = k[d] - self.k_lo[d];
            if a < 0 || a >= self.shape[d] as i64 {
                return None;
            }
            i = i * self.shape[d] + a as usize;
        }
        Some(i)
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.point_into(i, &mut x);
        x
    }

    pub fn point_into(&self, i: usize, x: &mut [f64]) {
        let mut rem = i;
        for d in (0..self.dim()).rev() {
            x[d] = (self.k_lo[d] + (rem % self.shape[d]) as i64) as f64 * self.h;
            rem /= self.shape[d];
        }
    }

    /// First node coordinates.
    pub fn origin(&self) -> Vec<f64> {
        self.k_lo.iter().map(|&k| k as f64 * self.h).collect()
    }

    /// Region covered by the node cells, `(lo, hi)` per axis.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self
            .k_lo
            .iter()
            .map(|&k| (k as f64 - 0.5) * self.h)
            .collect();
        let hi = self
            .k_lo
            .iter()
            .zip(&self.shape)
            .map(|(&k, &n)| ((k + n as i64 - 1) as f64 + 0.5) * self.h)
            .collect();
        (lo, hi)
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            dim: self.dim(),
            h: self.h,
            shape: self.shape.clone(),
            origin: self.origin(),
        }
    }

    /// Node obtained by a lattice symmetry acting on multi-indices, if it lies on the grid.
    ///
    /// `map` receives and returns lattice multi-indices.
    pub fn permutation<F>(&self, map: F) -> Option<Vec<usize>>
    where
        F: Fn(&[i64]) -> Vec<i64>,
    {
        (0..self.n_nodes())
            .map(|i| self.node_of_lattice(&map(&self.lattice_index(i))))
            .collect()
    }

    /// Node permutation for a quarter turn `(k1, k2) -> (-k2, k1)` in 2D.
    pub fn quarter_turn(&self) -> Option<Vec<usize>> {
        if self.dim() != 2 {
            return None;
        }
        self.permutation(|k| vec![-k[1], k[0]])
    }

    /// Node permutation for the reflection `k -> -k` in the first axis.
    pub fn reflection(&self) -> Option<Vec<usize>> {
        self.permutation(|k| {
            let mut r = k.to_vec();
            r[0] = -r[0];
            r
        })
    }

    /// Nearest node to `x` (clamped to the lattice).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let k: Vec<i64> = x
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let k = (v / self.h).round() as i64;
                k.clamp(self.k_lo[d], self.k_lo[d] + self.shape[d] as i64 - 1)
            })
            .collect();
        self.node_of_lattice(&k)
            .expect("clamped index is on the grid")
    }
}

/// Whether the open set has any points, probed on a fine lattice.
fn spec_has_points(spec: &DomainSpec) -> bool {
    let (lo, hi) = spec.bounds();
    let steps = if lo.len() == 1 { 4096 } else { 256 };
    let axis = |d: usize, k: usize| lo[d] + (hi[d] - lo[d]) * (k as f64 + 0.5) / steps as f64;
    if lo.len() == 1 {
        (0..steps).any(|a| spec.contains(&[axis(0, a)]))
    } else {
        (0..steps).any(|a| (0..steps).any(|b| spec.contains(&[axis(0, a), axis(1, b)])))
    }
}
