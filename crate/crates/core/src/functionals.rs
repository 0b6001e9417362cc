//! Norms, the functionals `J_q`, Nehari rescaling and Sobolev/Hardy estimators.

use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::nonlocal;
use crate::reduce;
use crate::solver::{self, InitKind, SolverConfig};
use crate::weights::{PairWeights, WeightOptions};

fn exact_ratio(x: f64) -> Option<Ratio<i64>> {
    let r = Ratio::<i64>::approximate_float(x)?;
    (*r.numer() as f64 / *r.denom() as f64 == x).then_some(r)
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `p* = Np/(N - ps)`, in exact rational arithmetic when `p` and `s` are
/// short decimals.
pub fn critical_exponent(n: usize, p: f64, s: f64) -> Result<f64> {
    if n as f64 <= p * s {
        return Err(Error::CriticalDimension { n, ps: p * s });
    }
    if let (Some(pr), Some(sr)) = (exact_ratio(p), exact_ratio(s)) {
        let nr = Ratio::from_integer(n as i64);
        return Ok(ratio_to_f64(nr * pr / (nr - pr * sr)));
    }
    Ok(n as f64 * p / (n as f64 - p * s))
}

/// `q = p* - ε`, exact in rationals where possible.
pub fn exponent_for_eps(n: usize, p: f64, s: f64, eps: f64) -> Result<f64> {
    let crit = critical_exponent(n, p, s)?;
    let q = match (exact_ratio(p), exact_ratio(s), exact_ratio(eps)) {
        (Some(pr), Some(sr), Some(er)) => {
            let nr = Ratio::from_integer(n as i64);
            ratio_to_f64(nr * pr / (nr - pr * sr) - er)
        }
        _ => crit - eps,
    };
    if !(q > p && q <= crit) {
        return Err(Error::InvalidExponent { q, lo: p, hi: crit });
    }
    Ok(q)
}

/// `|u|_q = (h^N Σ |u_i|^q)^{1/q}`.
pub fn lq_norm(u: &Field, grid: &Grid, q: f64) -> f64 {
    lq_power(u, grid, q).powf(1.0 / q)
}

/// `|u|_q^q`.
pub fn lq_power(u: &Field, grid: &Grid, q: f64) -> f64 {
    let v = u.values();
    grid.cell_volume() * reduce::chunked_map_sum(v.len(), |i| v[i].abs().powf(q))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqEntry {
    pub q: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub p: f64,
    pub q: f64,
    /// `p* - q`.
    pub eps: f64,
    pub seminorm_p: f64,
    pub lq: Vec<LqEntry>,
    pub j_q: f64,
    /// `I_ε = J_q` with `q = p* - ε`.
    pub i_eps: f64,
    /// `[u]^p / |u|_q^p`; `None` for the zero field.
    pub rayleigh: Option<f64>,
}

impl EnergyReport {
    pub fn lq_norm(&self, q: f64) -> Option<f64> {
        self.lq.iter().find(|e| e.q == q).map(|e| e.norm)
    }

    /// Recomputes `J_q` from the stored parts.
    pub fn reconstruct_j(&self) -> f64 {
        let lq = self.lq_norm(self.q).unwrap_or(f64::NAN);
        self.seminorm_p / self.p - lq.powf(self.q) / self.q
    }
}

fn check_exponent(w: &PairWeights, q: f64) -> Result<f64> {
    let crit = critical_exponent(w.grid().dim(), w.p(), w.s())?;
    if !(q > w.p() && q <= crit) {
        return Err(Error::InvalidExponent {
            q,
            lo: w.p(),
            hi: crit,
        });
    }
    Ok(crit)
}

pub fn j_functional(u: &Field, w: &PairWeights, q: f64) -> Result<EnergyReport> {
    let crit = check_exponent(w, q)?;
    let seminorm = nonlocal::gagliardo_energy(u, w)?;
    report_from_energy(u, w, q, crit, seminorm)
}

pub(crate) fn report_from_energy(
    u: &Field,
    w: &PairWeights,
    q: f64,
    crit: f64,
    seminorm: f64,
) -> Result<EnergyReport> {
    let p = w.p();
    let grid = w.grid();
    let lq = lq_norm(u, grid, q);
    let mut entries = vec![LqEntry { q, norm: lq }];
    if crit != q {
        entries.push(LqEntry {
            q: crit,
            norm: lq_norm(u, grid, crit),
        });
    }
    let j = seminorm / p - lq.powf(q) / q;
    Ok(EnergyReport {
        p,
        q,
        eps: crit - q,
        seminorm_p: seminorm,
        lq: entries,
        j_q: j,
        i_eps: j,
        rayleigh: (lq > 0.0).then(|| seminorm / lq.powf(p)),
    })
}

/// `t = ([u]^p / |u|_q^q)^{1/(q-p)}`, the factor putting `t u` on the Nehari manifold.
pub fn nehari_factor(u: &Field, w: &PairWeights, q: f64) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    if q <= w.p() {
        return Err(Error::InvalidExponent {
            q,
            lo: w.p(),
            hi: f64::INFINITY,
        });
    }
    let e = nonlocal::gagliardo_energy(u, w)?;
    Ok((e / lq_power(u, w.grid(), q)).powf(1.0 / (q - w.p())))
}

pub fn nehari_scale(u: &Field, w: &PairWeights, q: f64) -> Result<Field> {
    let t = nehari_factor(u, w, q)?;
    Ok(if t == 1.0 { u.clone() } else { u.scaled(t) })
}

/// `[u]^p / |u|_q^p`, evaluated on `u` rescaled by `±2^j` so that the first
/// entry of largest magnitude lies in `[1, 2)`. The result is bit-identical
/// for `u` and `±2^k u`.
pub fn rayleigh_quotient(u: &Field, w: &PairWeights, q: f64) -> Result<f64> {
    let vals = u.values();
    let lead = vals
        .iter()
        .fold(0.0f64, |a, &x| if x.abs() > a.abs() { x } else { a });
    let m = lead.abs();
    if m == 0.0 {
        return Err(Error::ZeroField);
    }
    let k = m.log2().floor() as i32;
    let mut scale = 2f64.powi(-k);
    if m * scale >= 2.0 {
        scale *= 0.5;
    } else if m * scale < 1.0 {
        scale *= 2.0;
    }
    let scale = scale.copysign(lead);
    let v = Field::from_raw(u.fingerprint(), vals.iter().map(|x| x * scale).collect());
    let e = nonlocal::gagliardo_energy(&v, w)?;
    Ok(e / lq_norm(&v, w.grid(), q).powf(w.p()))
}

/// `c_q = (1/p - 1/q) S_q^{q/(q-p)}`.
pub fn ground_level_formula(p: f64, q: f64, s_q: f64) -> f64 {
    (1.0 / p - 1.0 / q) * s_q.powf(q / (q - p))
}

/// `(1/p - 1/q) Ŝ^{q/(q-p)} |Ω_h|^{-εp/((q-p)p*)}` with `q = p* - ε`.
pub fn energy_lower_bound(p: f64, crit: f64, eps: f64, s_hat: f64, measure: f64) -> f64 {
    let q = crit - eps;
    (1.0 / p - 1.0 / q) * s_hat.powf(q / (q - p)) * measure.powf(-eps * p / ((q - p) * crit))
}

/// `(s/N) Ŝ^{N/(ps)}`.
pub fn energy_target(n: usize, p: f64, s: f64, s_hat: f64) -> f64 {
    s / n as f64 * s_hat.powf(n as f64 / (p * s))
}

/// `(h^N Σ' |u_i|^p |x_i|^{-sp}) / [u]^p`, skipping nodes within `h/2` of the origin.
pub fn hardy_ratio(u: &Field, w: &PairWeights) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let grid = w.grid();
    let (p, sp) = (w.p(), w.p() * w.s());
    let v = u.values();
    let guard = 0.5 * grid.h();
    let num = grid.cell_volume()
        * reduce::chunked_map_sum(v.len(), |i| {
            if v[i] == 0.0 {
                return 0.0;
            }
            let r = grid.point(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            if r < guard {
                0.0
            } else {
                v[i].abs().powf(p) * r.powf(-sp)
            }
        });
    Ok(num / nonlocal::gagliardo_energy(u, w)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevEntry {
    pub radius: f64,
    pub h: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub entries: Vec<SobolevEntry>,
    pub finest: f64,
    pub extrapolated: f64,
    /// `[finest - (finest - extrapolated), finest]`.
    pub bracket: (f64, f64),
    /// Values decrease under refinement at each radius, up to 2% noise.
    pub refinement_trend_ok: bool,
}

/// Minimizes the discrete critical Rayleigh quotient on balls of the given
/// radii at the given spacings and extrapolates in `h` at the largest radius.
pub fn sobolev_constant_estimate(
    n: usize,
    p: f64,
    s: f64,
    radii: &[f64],
    spacings: &[f64],
    options: WeightOptions,
    cfg: &SolverConfig,
) -> Result<SobolevEstimate> {
    let crit = critical_exponent(n, p, s)?;
    if radii.is_empty() || spacings.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least one radius and two spacings".into(),
        ));
    }
    let mut hs = spacings.to_vec();
    hs.sort_by(|a, b| b.partial_cmp(a).expect("finite spacings"));
    let mut entries = Vec::new();
    for &radius in radii {
        for &h in &hs {
            let spec = DomainSpec::ball(&vec![0.0; n], radius);
            let grid = Arc::new(Grid::build(&spec, h)?);
            let w = PairWeights::with_options(grid, p, s, options)?;
            let mut local = cfg.clone();
            if matches!(local.init, InitKind::WarmStart(_)) {
                local.init = InitKind::default();
            }
            if let InitKind::Bump { center, width } = &mut local.init {
                *center = Some(vec![0.0; n]);
                *width = 2.0 * h;
            }
            let m = solver::minimize_rayleigh(&w, crit, &local, None)?;
            entries.push(SobolevEntry {
                radius,
                h,
                value: m.value,
                iterations: m.iterations,
                converged: m.converged,
            });
        }
    }
    if let Some(e) = entries.iter().find(|e| !e.converged) {
        return Err(Error::NotConverged {
            iterations: e.iterations,
            residual: f64::NAN,
        });
    }
    let mut trend_ok = true;
    for &radius in radii {
        let vals: Vec<f64> = entries
            .iter()
            .filter(|e| e.radius == radius)
            .map(|e| e.value)
            .collect();
        trend_ok &= vals.windows(2).all(|w| w[1] <= w[0] * 1.02);
    }
    let r_max = radii.iter().cloned().fold(f64::MIN, f64::max);
    let at_max: Vec<&SobolevEntry> = entries.iter().filter(|e| e.radius == r_max).collect();
    let (coarse, fine) = (at_max[at_max.len() - 2], at_max[at_max.len() - 1]);
    let ratio = coarse.h / fine.h;
    let extrapolated = fine.value + (fine.value - coarse.value) / (ratio - 1.0);
    let gap = fine.value - extrapolated;
    Ok(SobolevEstimate {
        finest: fine.value,
        extrapolated,
        bracket: (fine.value - gap.abs(), fine.value),
        refinement_trend_ok: trend_ok,
        entries,
    })
}
