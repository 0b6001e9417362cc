//! Bubble profiles, their truncations, and the estimates checked against them.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{dist, DomainSpec};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::nonlocal;
use crate::profile::{sample, Profile};
use crate::quadrature::{gauss_panels, log_radial};
use crate::weights::PairWeights;

/// `|S^{N-1}|` for `N = 1, 2`.
fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        _ => 2.0 * PI,
    }
}

/// `∫_{R^N} f(|x|) dx` for a radial integrand with algebraic decay.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let g = |r: f64| f(r) * r.powi(n as i32 - 1);
    sphere_area(n) * (gauss_panels(&g, 0.0, 1e-3, 16, 1) + log_radial(&g, 1e-3, 1e12, 6))
}

/// Least-squares slope of `log y` against `log x`, over the pairs with `y > 0`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `V_δ(x) = A δ^{-(N-2s)/2} (1 + |x - c|²/δ²)^{-(N-2s)/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bubble {
    n: usize,
    s: f64,
    delta: f64,
    center: Vec<f64>,
    amp: f64,
}

impl Bubble {
    /// Normalized so that `|V_δ|_{2*} = 1`.
    pub fn new(delta: f64, center: &[f64], s: f64) -> Result<Self> {
        let n = center.len();
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "dimension {n} unsupported"
            )));
        }
        if n as f64 <= 2.0 * s {
            return Err(Error::CriticalDimension { n, ps: 2.0 * s });
        }
        if !(delta > 0.0) || !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bubble needs δ > 0 and 0 < s < 1, got δ = {delta}, s = {s}"
            )));
        }
        let mut b = Bubble {
            n,
            s,
            delta,
            center: center.to_vec(),
            amp: 1.0,
        };
        b.amp = 1.0 / b.critical_norm();
        Ok(b)
    }

    /// Scaled so that `|V_δ|_{2*}^{2*} = S^{N/2s}`, the size of a solution of the
    /// critical equation when `S` is the Sobolev constant.
    pub fn nehari(delta: f64, center: &[f64], s: f64, s_const: f64) -> Result<Self> {
        let mut b = Self::new(delta, center, s)?;
        let crit = b.crit();
        b.amp = s_const.powf(b.n as f64 / (2.0 * s) / crit);
        Ok(b)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn amplitude(&self) -> f64 {
        self.amp
    }

    pub(crate) fn crit(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 - 2.0 * self.s)
    }

    /// Profile as a function of `r = |x - c|`.
    pub fn radial(&self, r: f64) -> f64 {
        let a = 0.5 * (self.n as f64 - 2.0 * self.s);
        let t = r / self.delta;
        self.amp * self.delta.powf(-a) * (1.0 + t * t).powf(-a)
    }

    /// `|V_δ|_{2*}` by radial quadrature.
    pub fn critical_norm(&self) -> f64 {
        let crit = self.crit();
        radial_integral(|r| self.radial(r).powf(crit), self.n).powf(1.0 / crit)
    }
}

impl Profile for Bubble {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.radial(dist(x, &self.center))
    }
}

/// `v_δ = G_δ(V_δ)`, centered at the origin and supported in `B_θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedBubble {
    base: Bubble,
    theta: f64,
    v1: f64,
    vtheta: f64,
    m: f64,
}

pub fn truncated_bubble(delta: f64, theta: f64, s: f64, n: usize) -> Result<TruncatedBubble> {
    TruncatedBubble::new(Bubble::new(delta, &vec![0.0; n], s)?, theta)
}

impl TruncatedBubble {
    pub fn new(base: Bubble, theta: f64) -> Result<Self> {
        if !(theta > 1.0) || !theta.is_finite() {
            return Err(Error::InvalidTheta(theta));
        }
        if base.delta > 0.5 {
            return Err(Error::InvalidParameter(format!(
                "truncation needs δ ≤ 1/2, got {}",
                base.delta
            )));
        }
        if base.center.iter().any(|&c| c != 0.0) {
            return Err(Error::InvalidParameter(
                "truncation is defined for bubbles centered at 0".into(),
            ));
        }
        let (v1, vtheta) = (base.radial(1.0), base.radial(theta));
        Ok(TruncatedBubble {
            m: v1 / (v1 - vtheta),
            base,
            theta,
            v1,
            vtheta,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `m_δ = V_δ(1) / (V_δ(1) - V_δ(θ))`.
    pub fn m_delta(&self) -> f64 {
        self.m
    }

    pub fn base(&self) -> &Bubble {
        &self.base
    }

    /// `G_δ(t)`.
    pub fn g(&self, t: f64) -> f64 {
        if t >= self.v1 {
            t
        } else if t >= self.vtheta {
            self.m * (t - self.vtheta)
        } else {
            0.0
        }
    }

    pub fn radial(&self, r: f64) -> f64 {
        if r <= 1.0 {
            self.base.radial(r)
        } else if r < self.theta {
            self.g(self.base.radial(r))
        } else {
            0.0
        }
    }

    /// `∫ v_δ^q`, integrating the smooth pieces separately.
    pub fn lq_power(&self, q: f64) -> f64 {
        let n = self.base.n;
        let f = |r: f64| self.radial(r).powf(q) * r.powi(n as i32 - 1);
        sphere_area(n)
            * (gauss_panels(f, 0.0, 1.0, 20, 16) + gauss_panels(f, 1.0, self.theta, 20, 16))
    }
}

impl Profile for TruncatedBubble {
    fn dim(&self) -> usize {
        self.base.n
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.radial(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// Lattice resolution for the truncated-bubble seminorm, in cells per `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    pub coarse_cells: f64,
    pub fine_cells: f64,
    /// Subcritical shift for the integral comparison.
    pub eps: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            coarse_cells: 16.0,
            fine_cells: 32.0,
            eps: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationEntry {
    pub delta: f64,
    pub seminorm_coarse: f64,
    pub seminorm_fine: f64,
    /// First-order Richardson combination of the two lattices.
    pub seminorm: f64,
    /// `[v_δ]² - S^{N/2s}`.
    pub gap: f64,
    pub int_truncated: f64,
    pub int_bubble: f64,
    /// `∫ v_δ^{2*-ε} - ∫ V_δ^{2*-ε}`.
    pub int_deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub theta: f64,
    pub quantum: f64,
    pub entries: Vec<TruncationEntry>,
    pub slope: Option<f64>,
    /// `N - 2s`.
    pub expected_slope: f64,
    pub gaps_positive: bool,
    pub gaps_decreasing: bool,
    pub deficits_nonpositive: bool,
}

fn lattice_seminorm(v: &TruncatedBubble, h: f64) -> Result<f64> {
    let n = v.base.n;
    let spec = DomainSpec::ball(&vec![0.0; n], v.theta);
    let grid = Arc::new(Grid::build(&spec, h)?);
    let w = PairWeights::build(grid.clone(), 2.0, v.base.s)?;
    nonlocal::gagliardo_energy(&sample(v, &grid), &w)
}

/// Truncated-bubble energy gaps against `S^{N/2s}`, with the bubble scaled to
/// the critical-equation size for the supplied `s_const`.
pub fn truncation_estimate_check(
    deltas: &[f64],
    theta: f64,
    s: f64,
    n: usize,
    s_const: f64,
    policy: &TruncationPolicy,
) -> Result<TruncationReport> {
    if deltas.iter().any(|&d| !(d > 0.0 && d <= 0.5)) {
        return Err(Error::InvalidParameter(
            "δ values must lie in (0, 1/2]".into(),
        ));
    }
    let quantum = s_const.powf(n as f64 / (2.0 * s));
    let mut entries = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let base = Bubble::nehari(delta, &vec![0.0; n], s, s_const)?;
        let q = base.crit() - policy.eps;
        let v = TruncatedBubble::new(base, theta)?;
        let coarse = lattice_seminorm(&v, delta / policy.coarse_cells)?;
        let fine = lattice_seminorm(&v, delta / policy.fine_cells)?;
        let ratio = policy.fine_cells / policy.coarse_cells;
        let seminorm = fine + (fine - coarse) / (ratio - 1.0);
        let int_truncated = v.lq_power(q);
        let int_bubble = radial_integral(|r| v.base.radial(r).powf(q), n);
        entries.push(TruncationEntry {
            delta,
            seminorm_coarse: coarse,
            seminorm_fine: fine,
            seminorm,
            gap: seminorm - quantum,
            int_truncated,
            int_bubble,
            int_deficit: int_truncated - int_bubble,
        });
    }
    let ds: Vec<f64> = entries.iter().map(|e| e.delta).collect();
    let gaps: Vec<f64> = entries.iter().map(|e| e.gap).collect();
    Ok(TruncationReport {
        theta,
        quantum,
        slope: loglog_slope(&ds, &gaps),
        expected_slope: n as f64 - 2.0 * s,
        gaps_positive: gaps.iter().all(|&g| g > 0.0),
        gaps_decreasing: gaps.windows(2).all(|w| w[1] < w[0]),
        deficits_nonpositive: entries.iter().all(|e| e.int_deficit <= 0.0),
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishEntry {
    pub delta: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishReport {
    pub entries: Vec<VanishEntry>,
    pub slope: Option<f64>,
    /// `N - ps`.
    pub expected_slope: f64,
}

const VANISH_OUTER: f64 = 1e8;

/// `F(δ) = δ^N ∫_{|x|>δ} |u|^p |x|^{-(N+ps)} dx` by polar quadrature.
pub fn vanish_check<P: Profile + ?Sized>(u: &P, deltas: &[f64], p: f64, s: f64) -> VanishReport {
    let n = u.dim();
    let angular = |r: f64| -> f64 {
        if n == 1 {
            u.eval(&[r]).abs().powf(p) + u.eval(&[-r]).abs().powf(p)
        } else {
            gauss_panels(
                |phi| u.eval(&[r * phi.cos(), r * phi.sin()]).abs().powf(p),
                0.0,
                2.0 * PI,
                16,
                8,
            )
        }
    };
    let entries: Vec<VanishEntry> = deltas
        .iter()
        .map(|&delta| VanishEntry {
            delta,
            value: delta.powi(n as i32)
                * log_radial(
                    |r| angular(r) * r.powf(-1.0 - p * s),
                    delta,
                    VANISH_OUTER,
                    16,
                ),
        })
        .collect();
    let ds: Vec<f64> = entries.iter().map(|e| e.delta).collect();
    let fs: Vec<f64> = entries.iter().map(|e| e.value).collect();
    VanishReport {
        slope: loglog_slope(&ds, &fs),
        expected_slope: n as f64 - p * s,
        entries,
    }
}
