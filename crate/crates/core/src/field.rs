//! Grid functions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Values on every grid node, zero on exterior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    fingerprint: u64,
    values: Vec<f64>,
}

/// Nonnegative per-node densities; unlike [`Field`] these may charge exterior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMeasure {
    fingerprint: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            fingerprint: grid.fingerprint(),
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at node {i}"
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| !grid.is_interior(i) && values[i] != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nonzero value at exterior node {i}"
            )));
        }
        Ok(Field {
            fingerprint: grid.fingerprint(),
            values,
        })
    }

    /// Samples `f` at interior nodes; exterior nodes are set to zero.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        let mut values = vec![0.0; grid.n_nodes()];
        let mut x = vec![0.0; grid.dim()];
        for &i in grid.interior() {
            grid.point_into(i, &mut x);
            values[i] = f(&x);
        }
        Field {
            fingerprint: grid.fingerprint(),
            values,
        }
    }

    /// Field with the given values at the interior nodes, in row-major order.
    pub fn from_interior(grid: &Grid, interior_values: &[f64]) -> Result<Self> {
        if interior_values.len() != grid.n_interior() {
            return Err(Error::GridMismatch);
        }
        let mut values = vec![0.0; grid.n_nodes()];
        for (&i, &v) in grid.interior().iter().zip(interior_values) {
            values[i] = v;
        }
        Self::from_values(grid, values)
    }

    /// Independent uniform values in `[lo, hi)` on interior nodes.
    pub fn random<R: Rng>(grid: &Grid, rng: &mut R, lo: f64, hi: f64) -> Self {
        let mut values = vec![0.0; grid.n_nodes()];
        for &i in grid.interior() {
            values[i] = rng.gen_range(lo..hi);
        }
        Field {
            fingerprint: grid.fingerprint(),
            values,
        }
    }

    pub(crate) fn from_raw(fingerprint: u64, values: Vec<f64>) -> Self {
        Field {
            fingerprint,
            values,
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, t: f64) -> Self {
        Field {
            fingerprint: self.fingerprint,
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Self> {
        if self.fingerprint != other.fingerprint {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            fingerprint: self.fingerprint,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Applies a node permutation: `out[perm[i]] = self[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (i, &j) in perm.iter().enumerate() {
            values[j] = self.values[i];
        }
        Field {
            fingerprint: self.fingerprint,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl NodeMeasure {
    pub(crate) fn from_raw(fingerprint: u64, values: Vec<f64>) -> Self {
        NodeMeasure {
            fingerprint,
            values,
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (i, &j) in perm.iter().enumerate() {
            values[j] = self.values[i];
        }
        NodeMeasure {
            fingerprint: self.fingerprint,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    #[test]
    fn exterior_values_rejected() {
        let g = Grid::build(&DomainSpec::ball(&[0.0], 1.0), 0.25).unwrap();
        let mut v = vec![0.0; g.n_nodes()];
        v[0] = 1.0;
        assert!(Field::from_values(&g, v).is_err());
        let mut v = vec![0.0; g.n_nodes()];
        v[g.interior()[0]] = f64::NAN;
        assert!(Field::from_values(&g, v).is_err());
        let f = Field::from_fn(&g, |_| 1.0);
        assert_eq!(f.values().iter().sum::<f64>(), g.n_interior() as f64);
    }
}
