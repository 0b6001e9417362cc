//! Functions that can be evaluated at arbitrary points.

use crate::domain::dist;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

pub trait Profile: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Wraps a closure as a profile.
pub struct FnProfile<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnProfile<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnProfile { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Profile for FnProfile<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl<P: Profile + ?Sized> Profile for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

/// Samples a profile at the interior nodes of a grid.
pub fn sample<P: Profile + ?Sized>(profile: &P, grid: &Grid) -> Field {
    Field::from_fn(grid, |x| profile.eval(x))
}

/// Multilinear interpolation of nodal values; zero outside the lattice.
pub struct FieldInterpolant {
    h: f64,
    k_lo: Vec<i64>,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl FieldInterpolant {
    pub fn new(grid: &Grid, u: &Field) -> Result<Self> {
        if u.fingerprint() != grid.fingerprint() {
            return Err(Error::GridMismatch);
        }
        Ok(FieldInterpolant {
            h: grid.h(),
            k_lo: grid.k_lo().to_vec(),
            shape: grid.shape().to_vec(),
            values: u.values().to_vec(),
        })
    }

    fn at(&self, a: &[i64]) -> f64 {
        let mut i = 0usize;
        for d in 0..a.len() {
            if a[d] < 0 || a[d] >= self.shape[d] as i64 {
                return 0.0;
            }
            i = i * self.shape[d] + a[d] as usize;
        }
        self.values[i]
    }
}

impl Profile for FieldInterpolant {
    fn dim(&self) -> usize {
        self.shape.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let n = self.shape.len();
        let mut base = vec![0i64; n];
        let mut frac = vec![0.0; n];
        for d in 0..n {
            let t = x[d] / self.h - self.k_lo[d] as f64;
            let f = t.floor();
            base[d] = f as i64;
            frac[d] = t - f;
        }
        let mut acc = 0.0;
        let mut corner = vec![0i64; n];
        for mask in 0..(1usize << n) {
            let mut wgt = 1.0;
            for d in 0..n {
                let up = (mask >> d) & 1 == 1;
                corner[d] = base[d] + up as i64;
                wgt *= if up { frac[d] } else { 1.0 - frac[d] };
            }
            if wgt != 0.0 {
                acc += wgt * self.at(&corner);
            }
        }
        acc
    }
}

/// `u*(x) = |x - z|^{2s-N} u(z + (x - z)/|x - z|²)`.
pub struct KelvinTransform<P> {
    inner: P,
    z: Vec<f64>,
    s: f64,
}

impl<P: Profile> KelvinTransform<P> {
    pub fn new(inner: P, z: &[f64], s: f64, p: f64) -> Result<Self> {
        let n = inner.dim();
        if p != 2.0 {
            return Err(Error::InvalidParameter(format!(
                "the Kelvin transform is defined for p = 2 only, got p = {p}"
            )));
        }
        if n as f64 <= 2.0 * s {
            return Err(Error::CriticalDimension { n, ps: 2.0 * s });
        }
        if z.len() != n {
            return Err(Error::InvalidParameter(
                "pole has the wrong dimension".into(),
            ));
        }
        Ok(KelvinTransform {
            inner,
            z: z.to_vec(),
            s,
        })
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let r = dist(x, &self.z);
        if r == 0.0 {
            return Err(Error::PoleEvaluation);
        }
        let image: Vec<f64> = x
            .iter()
            .zip(&self.z)
            .map(|(xi, zi)| zi + (xi - zi) / (r * r))
            .collect();
        Ok(r.powf(2.0 * self.s - self.z.len() as f64) * self.inner.eval(&image))
    }

    /// Samples the transform at interior nodes, failing if a node hits the pole.
    pub fn resample(&self, grid: &Grid) -> Result<Field> {
        let mut values = vec![0.0; grid.n_nodes()];
        for &i in grid.interior() {
            values[i] = self.try_eval(&grid.point(i))?;
        }
        Field::from_values(grid, values)
    }
}

impl<P: Profile> Profile for KelvinTransform<P> {
    fn dim(&self) -> usize {
        self.z.len()
    }

    /// NaN at the pole; use [`KelvinTransform::try_eval`] to get an error instead.
    fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}
