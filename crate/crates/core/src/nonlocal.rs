//! Discrete Gagliardo energy, nonlocal density and energy gradient.
//!
//! With `I` the interior nodes, `w` the pair weights, `ρ_i` the weight mass of
//! exterior lattice nodes seen from `i` and `τ_i` the exterior-of-box tail,
//!
//! ```text
//! E(u) = h^{2N} Σ_{i≠j} |u_i - u_j|^p w_ij + 2 h^N Σ_i |u_i|^p τ_i
//! g_i  = 2p h^{2N} [Σ_{j∈I} (u_i - u_j)^{p-1} w_ij + u_i^{p-1} ρ_i] + 2p h^N u_i^{p-1} τ_i
//! ```
//!
//! where `t^{p-1}` is the signed power `|t|^{p-2} t`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, NodeMeasure};
use crate::reduce;
use crate::weights::PairWeights;

/// Signed power `|t|^{e} sign(t)`.
#[inline]
pub fn signed_pow(t: f64, e: f64) -> f64 {
    if e == 1.0 {
        t
    } else {
        t.abs().powf(e).copysign(t)
    }
}

#[inline]
fn abs_pow(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else {
        t.abs().powf(p)
    }
}

fn check(u: &Field, w: &PairWeights) -> Result<()> {
    if u.fingerprint() != w.grid().fingerprint() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `|D^s u|^p` at every node. `h^N Σ_i density_i` is the discrete energy.
pub fn ds_density(u: &Field, w: &PairWeights) -> Result<NodeMeasure> {
    check(u, w)?;
    let grid = w.grid();
    let hn = grid.cell_volume();
    let v = u.values();
    let p = w.p();
    let values = if let (Some(conv), true) = (w.convolver(), p == 2.0) {
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let (c1, c2) = conv.apply_pair(v, &sq);
        let r = w.row_sums_all();
        (0..v.len())
            .map(|i| {
                if grid.is_interior(i) {
                    let pair = (v[i] * v[i] * r[i] - 2.0 * v[i] * c1[i] + c2[i]).max(0.0);
                    hn * pair + 2.0 * v[i] * v[i] * w.tail(i)
                } else {
                    hn * c2[i]
                }
            })
            .collect()
    } else {
        let interior = grid.interior();
        let rho = w.rho();
        let mut out = vec![0.0; v.len()];
        let inner: Vec<f64> = interior
            .par_iter()
            .map(|&i| {
                let ui = v[i];
                let pair: f64 = interior
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| abs_pow(ui - v[j], p) * w.weight(i, j))
                    .sum();
                let up = abs_pow(ui, p);
                hn * (pair + up * rho[i]) + 2.0 * up * w.tail(i)
            })
            .collect();
        for (&i, d) in interior.iter().zip(inner) {
            out[i] = d;
        }
        let upow: Vec<f64> = v.iter().map(|&x| abs_pow(x, p)).collect();
        let exterior: Vec<usize> = (0..v.len()).filter(|&j| !grid.is_interior(j)).collect();
        let ext_vals: Vec<f64> = if let Some(conv) = w.convolver() {
            let c = conv.apply(&upow);
            exterior.iter().map(|&j| hn * c[j].max(0.0)).collect()
        } else {
            exterior
                .par_iter()
                .map(|&j| {
                    hn * interior
                        .iter()
                        .map(|&i| upow[i] * w.weight(i, j))
                        .sum::<f64>()
                })
                .collect()
        };
        for (&j, d) in exterior.iter().zip(ext_vals) {
            out[j] = d;
        }
        out
    };
    Ok(NodeMeasure::from_raw(u.fingerprint(), values))
}

/// Discrete `[u]^p_{s,p}`.
pub fn gagliardo_energy(u: &Field, w: &PairWeights) -> Result<f64> {
    let d = ds_density(u, w)?;
    Ok(w.grid().cell_volume() * reduce::chunked_sum(d.values()))
}

/// Exact gradient of [`gagliardo_energy`] with respect to the nodal values.
pub fn energy_gradient(u: &Field, w: &PairWeights) -> Result<Field> {
    check(u, w)?;
    let grid = w.grid();
    let hn = grid.cell_volume();
    let h2n = hn * hn;
    let v = u.values();
    let p = w.p();
    let mut g = vec![0.0; v.len()];
    if let (Some(conv), true) = (w.convolver(), p == 2.0) {
        let c = conv.apply(v);
        let r = w.row_sums_all();
        for &i in grid.interior() {
            g[i] = 4.0 * h2n * (v[i] * r[i] - c[i]) + 4.0 * hn * w.tail(i) * v[i];
        }
    } else {
        let interior = grid.interior();
        let rho = w.rho();
        let e = p - 1.0;
        let vals: Vec<f64> = interior
            .par_iter()
            .map(|&i| {
                let ui = v[i];
                let pair: f64 = interior
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| signed_pow(ui - v[j], e) * w.weight(i, j))
                    .sum();
                let up = signed_pow(ui, e);
                2.0 * p * (h2n * (pair + up * rho[i]) + hn * up * w.tail(i))
            })
            .collect();
        for (&i, gi) in interior.iter().zip(vals) {
            g[i] = gi;
        }
    }
    Ok(Field::from_raw(u.fingerprint(), g))
}

/// Energy and gradient from a single pass, using `Σ_i g_i u_i = p E`.
pub fn energy_and_gradient(u: &Field, w: &PairWeights) -> Result<(f64, Field)> {
    let g = energy_gradient(u, w)?;
    let e = reduce::dot(g.values(), u.values()) / w.p();
    Ok((e, g))
}

/// `C_θ = (1 - (1+θ)^{-1/(p-1)})^{-(p-1)}`.
pub fn leibniz_constant(p: f64, theta: f64) -> f64 {
    (1.0 - (1.0 + theta).powf(-1.0 / (p - 1.0))).powf(-(p - 1.0))
}

/// Whether `|a+b|^p ≤ (1+θ)|a|^p + C_θ|b|^p` holds (with a relative rounding allowance).
pub fn scalar_leibniz_check(a: f64, b: f64, p: f64, theta: f64) -> bool {
    let lhs = (a + b).abs().powf(p);
    let rhs = (1.0 + theta) * a.abs().powf(p) + leibniz_constant(p, theta) * b.abs().powf(p);
    lhs <= rhs * (1.0 + 1e-12)
}

/// Margins of `±(a-b)^{p-1}(a_± - b_±) - |a_± - b_±|^p ≥ 0` for both signs.
pub fn sign_inequality_margins(a: f64, b: f64, p: f64) -> [f64; 2] {
    let d = signed_pow(a - b, p - 1.0);
    let (ap, bp) = (a.max(0.0), b.max(0.0));
    let (am, bm) = ((-a).max(0.0), (-b).max(0.0));
    [
        d * (ap - bp) - (ap - bp).abs().powf(p),
        -d * (am - bm) - (am - bm).abs().powf(p),
    ]
}

/// Both sign-inequality margins are nonnegative up to a relative rounding allowance.
pub fn sign_inequality_holds(a: f64, b: f64, p: f64) -> bool {
    let scale = (a - b).abs().powf(p);
    sign_inequality_margins(a, b, p)
        .iter()
        .all(|&m| m >= -1e-12 * scale)
}
