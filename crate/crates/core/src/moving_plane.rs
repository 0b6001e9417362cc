//! Ray monotonicity of Kelvin-weighted profiles on annuli.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::profile::{FieldInterpolant, Profile};

pub const RAYS: usize = 32;

/// `M = 2 / (1 + 1/R)`.
pub fn reflection_limit(outer_ratio: f64) -> f64 {
    2.0 / (1.0 + 1.0 / outer_ratio)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayViolation {
    pub angle: f64,
    /// Largest fall of `t^{N-2s} u(t x0)` below its running max over `[1, M]`,
    /// relative to its max.
    pub inner: f64,
    /// Same for `(t+1)^{N-2s} u((R-t) x0)` over `[0, M]`.
    pub outer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovingPlaneReport {
    /// `r2 / r1`.
    pub outer_ratio: f64,
    pub m: f64,
    pub samples_per_ray: usize,
    pub rays: Vec<RayViolation>,
    pub max_inner: f64,
    pub max_outer: f64,
    pub tol: f64,
    pub inner_ok: bool,
    pub outer_ok: bool,
}

fn relative_drop(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut running = f64::NEG_INFINITY;
    let mut deficit = 0.0f64;
    for &v in values {
        running = running.max(v);
        deficit = deficit.max(running - v);
    }
    deficit / scale
}

/// Checks monotonicity along 32 rays, working in coordinates where the annulus
/// is `B_R \ B_1`. Profiles are sampled at spacing `h/4` (in original units).
pub fn moving_plane_monotonicity(
    u: &Field,
    grid: &Grid,
    s: f64,
    tol: f64,
) -> Result<MovingPlaneReport> {
    let DomainSpec::Annulus { center, r1, r2 } = grid.spec() else {
        return Err(Error::NotAnnulus);
    };
    if grid.dim() != 2 {
        return Err(Error::NotAnnulus);
    }
    let interp = FieldInterpolant::new(grid, u)?;
    let big_r = r2 / r1;
    let m = reflection_limit(big_r);
    let a = grid.dim() as f64 - 2.0 * s;
    let samples = ((m * r1 / (0.25 * grid.h())).ceil() as usize).max(8) + 1;
    let at = |dir: [f64; 2], rho: f64| {
        interp.eval(&[center[0] + r1 * rho * dir[0], center[1] + r1 * rho * dir[1]])
    };

    let rays: Vec<RayViolation> = (0..RAYS)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / RAYS as f64;
            let dir = [angle.cos(), angle.sin()];
            let inner: Vec<f64> = (0..samples)
                .map(|j| {
                    let t = 1.0 + (m - 1.0) * j as f64 / (samples - 1) as f64;
                    t.powf(a) * at(dir, t)
                })
                .collect();
            let outer: Vec<f64> = (0..samples)
                .map(|j| {
                    let t = m * j as f64 / (samples - 1) as f64;
                    (t + 1.0).powf(a) * at(dir, big_r - t)
                })
                .collect();
            RayViolation {
                angle,
                inner: relative_drop(&inner),
                outer: relative_drop(&outer),
            }
        })
        .collect();
    let max_inner = rays.iter().map(|r| r.inner).fold(0.0, f64::max);
    let max_outer = rays.iter().map(|r| r.outer).fold(0.0, f64::max);
    Ok(MovingPlaneReport {
        outer_ratio: big_r,
        m,
        samples_per_ray: samples,
        rays,
        max_inner,
        max_outer,
        tol,
        inner_ok: max_inner < tol,
        outer_ok: max_outer < tol,
    })
}
