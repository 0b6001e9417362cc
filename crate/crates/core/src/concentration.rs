//! Concentration measures and the diagnostics built on them.

use serde::{Deserialize, Serialize};

use crate::domain::{dist, DomainSpec};
use crate::error::{Error, Result};
use crate::field::{Field, NodeMeasure};
use crate::functionals;
use crate::grid::Grid;
use crate::nonlocal;
use crate::reduce;
use crate::weights::PairWeights;

/// `μ = |D^s u|^p` and `ν = |u|^{p*}` as nodal densities.
#[derive(Clone, Debug)]
pub struct MeasurePair {
    pub mu: NodeMeasure,
    pub nu: NodeMeasure,
    pub mu_total: f64,
    pub nu_total: f64,
    pub p: f64,
    pub crit: f64,
}

pub fn measures(u: &Field, w: &PairWeights) -> Result<MeasurePair> {
    let grid = w.grid();
    let crit = functionals::critical_exponent(grid.dim(), w.p(), w.s())?;
    let mu = nonlocal::ds_density(u, w)?;
    let nu_vals: Vec<f64> = u.values().iter().map(|v| v.abs().powf(crit)).collect();
    let hn = grid.cell_volume();
    let mu_total = hn * reduce::chunked_sum(mu.values());
    let nu_total = hn * reduce::chunked_sum(&nu_vals);
    Ok(MeasurePair {
        mu,
        nu: NodeMeasure::from_raw(u.fingerprint(), nu_vals),
        mu_total,
        nu_total,
        p: w.p(),
        crit,
    })
}

/// Position of `(s/N)·μ_total` against the thresholds `T = (s/N)Ŝ^{N/ps}` and `2T`,
/// each widened by a 5% band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyClass {
    /// Below `0.95 T`.
    BelowGround,
    /// Within 5% of `T`.
    GroundWindow,
    /// Between `1.05 T` and `1.95 T`.
    TwoBubbleWindow,
    /// From `1.95 T` on.
    Higher,
}

pub const ENERGY_BAND: f64 = 0.05;

pub fn classify_energy(level: f64, threshold: f64) -> EnergyClass {
    let r = level / threshold;
    if r < 1.0 - ENERGY_BAND {
        EnergyClass::BelowGround
    } else if r <= 1.0 + ENERGY_BAND {
        EnergyClass::GroundWindow
    } else if r < 2.0 - ENERGY_BAND {
        EnergyClass::TwoBubbleWindow
    } else {
        EnergyClass::Higher
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// Node of maximal `ν` density (first in row-major order on ties).
    pub xbar: Vec<f64>,
    pub xbar_node: usize,
    /// Smallest node distance `ρ` with `ν(B_ρ(xbar)) ≥ ν_total / 2`.
    pub half_mass_radius: f64,
    pub boundary_dist: f64,
    /// `ν`-weighted mean position, for diagnostics.
    pub barycenter: Vec<f64>,
    pub mu_total: f64,
    pub nu_total: f64,
    /// `(s/N) μ_total`.
    pub level: f64,
    pub threshold: f64,
    pub energy_class: EnergyClass,
    /// Fraction of `ν` outside `B_{2·half_mass_radius + h}(xbar)`.
    pub residual_mass: f64,
}

/// `ν(B_ρ(c))` with the closed ball.
pub fn ball_mass(density: &NodeMeasure, grid: &Grid, center: &[f64], rho: f64) -> f64 {
    let v = density.values();
    grid.cell_volume()
        * reduce::chunked_map_sum(v.len(), |i| {
            if v[i] != 0.0 && dist(&grid.point(i), center) <= rho {
                v[i]
            } else {
                0.0
            }
        })
}

pub fn concentration_point(
    m: &MeasurePair,
    grid: &Grid,
    s: f64,
    s_hat: f64,
) -> Result<ConcentrationReport> {
    if !(m.nu_total > 0.0) {
        return Err(Error::ZeroMeasure);
    }
    let nu = m.nu.values();
    let mut best = 0;
    for (i, &v) in nu.iter().enumerate() {
        if v > nu[best] {
            best = i;
        }
    }
    let xbar = grid.point(best);
    let hn = grid.cell_volume();

    let mut by_dist: Vec<(f64, f64)> = nu
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (dist(&grid.point(i), &xbar), hn * v))
        .collect();
    by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
    let mut acc = 0.0;
    let mut half = 0.0;
    for &(d, mass) in &by_dist {
        acc += mass;
        if acc >= 0.5 * m.nu_total * (1.0 - 1e-12) {
            half = d;
            break;
        }
    }
    let outer = 2.0 * half + grid.h();
    let residual = by_dist
        .iter()
        .filter(|(d, _)| *d > outer)
        .map(|(_, mass)| mass)
        .sum::<f64>()
        / m.nu_total;

    let mut bary = vec![0.0; grid.dim()];
    for (i, &v) in nu.iter().enumerate() {
        if v > 0.0 {
            for (b, x) in bary.iter_mut().zip(grid.point(i)) {
                *b += hn * v * x;
            }
        }
    }
    for b in bary.iter_mut() {
        *b /= m.nu_total;
    }

    let n = grid.dim();
    let level = s / n as f64 * m.mu_total;
    let threshold = functionals::energy_target(n, m.p, s, s_hat);
    Ok(ConcentrationReport {
        boundary_dist: grid.spec().distance_to_boundary(&xbar),
        xbar,
        xbar_node: best,
        half_mass_radius: half,
        barycenter: bary,
        mu_total: m.mu_total,
        nu_total: m.nu_total,
        level,
        threshold,
        energy_class: classify_energy(level, threshold),
        residual_mass: residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcEntry {
    pub radius: f64,
    pub mu_ball: f64,
    pub nu_ball: f64,
    /// `μ(B) - Ŝ ν(B)^{p/p*}`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcReport {
    pub entries: Vec<CcEntry>,
    /// `μ_total - Ŝ ν_total^{p/p*}`.
    pub global_margin: f64,
    /// `|ν_total - Ŝ^{N/ps}| / Ŝ^{N/ps}`.
    pub nu_quantum_gap: f64,
}

pub fn cc_inequality_check(
    m: &MeasurePair,
    grid: &Grid,
    s: f64,
    s_hat: f64,
    center: &[f64],
    radii: &[f64],
) -> CcReport {
    let e = m.p / m.crit;
    let entries = radii
        .iter()
        .map(|&rho| {
            let (mu_ball, nu_ball) = if rho.is_infinite() {
                (m.mu_total, m.nu_total)
            } else {
                (
                    ball_mass(&m.mu, grid, center, rho),
                    ball_mass(&m.nu, grid, center, rho),
                )
            };
            CcEntry {
                radius: rho,
                mu_ball,
                nu_ball,
                margin: mu_ball - s_hat * nu_ball.powf(e),
            }
        })
        .collect();
    let quantum = s_hat.powf(grid.dim() as f64 / (m.p * s));
    CcReport {
        entries,
        global_margin: m.mu_total - s_hat * m.nu_total.powf(e),
        nu_quantum_gap: (m.nu_total - quantum).abs() / quantum,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationDeviation {
    pub radius: f64,
    /// `2 r1 r2 / (r1 + r2)`.
    pub target: f64,
    pub deviation: f64,
    pub relative: f64,
}

pub fn harmonic_mean_radius(r1: f64, r2: f64) -> f64 {
    2.0 * r1 * r2 / (r1 + r2)
}

pub fn annulus_location_check(
    report: &ConcentrationReport,
    spec: &DomainSpec,
) -> Result<LocationDeviation> {
    let DomainSpec::Annulus { center, r1, r2 } = spec else {
        return Err(Error::NotAnnulus);
    };
    let radius = dist(&report.xbar, center);
    let target = harmonic_mean_radius(*r1, *r2);
    Ok(LocationDeviation {
        radius,
        target,
        deviation: radius - target,
        relative: (radius - target).abs() / target,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrend {
    pub distances: Vec<f64>,
    pub floor: f64,
    /// Minimum over the last three entries.
    pub tail_min: f64,
    pub holds: bool,
}

pub fn boundary_distance_trend(reports: &[ConcentrationReport], h: f64) -> BoundaryTrend {
    let distances: Vec<f64> = reports.iter().map(|r| r.boundary_dist).collect();
    let tail = &distances[distances.len().saturating_sub(3)..];
    let tail_min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = 2.0 * h;
    BoundaryTrend {
        holds: !tail.is_empty() && tail_min >= floor,
        distances,
        floor,
        tail_min,
    }
}
