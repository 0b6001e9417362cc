//! Bounded domains in one and two dimensions.
//!
//! All variants describe open sets. Membership, distance to the complement and
//! exterior normals have closed forms per variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainSpec {
    Ball {
        center: Vec<f64>,
        r: f64,
    },
    Annulus {
        center: Vec<f64>,
        r1: f64,
        r2: f64,
    },
    #[serde(rename = "box")]
    Rect {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Difference {
        outer: Box<DomainSpec>,
        inner: Box<DomainSpec>,
    },
}

/// A probe point `x0 - depth * normal` together with its membership flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub depth: f64,
    pub point: Vec<f64>,
    pub interior: bool,
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl DomainSpec {
    pub fn ball(center: &[f64], r: f64) -> Self {
        DomainSpec::Ball {
            center: center.to_vec(),
            r,
        }
    }

    pub fn annulus(center: &[f64], r1: f64, r2: f64) -> Self {
        DomainSpec::Annulus {
            center: center.to_vec(),
            r1,
            r2,
        }
    }

    pub fn rect(lo: &[f64], hi: &[f64]) -> Self {
        DomainSpec::Rect {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn difference(outer: DomainSpec, inner: DomainSpec) -> Self {
        DomainSpec::Difference {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    /// Spatial dimension. Call [`DomainSpec::validate`] first for a checked value.
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { center, .. } | DomainSpec::Annulus { center, .. } => center.len(),
            DomainSpec::Rect { lo, .. } => lo.len(),
            DomainSpec::Difference { outer, .. } => outer.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDomain(m));
        let n = self.dim();
        if !(1..=2).contains(&n) {
            return bad(format!("dimension {n} not supported (1 or 2)"));
        }
        match self {
            DomainSpec::Ball { center, r } => {
                if center.iter().any(|c| !c.is_finite()) || !(*r > 0.0 && r.is_finite()) {
                    return bad(format!("ball radius must be positive, got {r}"));
                }
            }
            DomainSpec::Annulus { center, r1, r2 } => {
                if center.iter().any(|c| !c.is_finite())
                    || !(*r1 > 0.0 && r1 < r2 && r2.is_finite())
                {
                    return bad(format!(
                        "annulus needs 0 < r1 < r2, got r1 = {r1}, r2 = {r2}"
                    ));
                }
            }
            DomainSpec::Rect { lo, hi } => {
                if lo.len() != hi.len()
                    || lo.iter().zip(hi).any(|(a, b)| !(a < b) || !b.is_finite())
                {
                    return bad("box needs lo < hi componentwise".into());
                }
            }
            DomainSpec::Difference { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                if inner.dim() != n {
                    return bad("difference operands have different dimensions".into());
                }
                if matches!(**inner, DomainSpec::Difference { .. }) {
                    return bad(
                        "the removed set of a difference must be a ball, annulus or box".into(),
                    );
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Ball { center, r } => dist(x, center) < *r,
            DomainSpec::Annulus { center, r1, r2 } => {
                let d = dist(x, center);
                *r1 < d && d < *r2
            }
            DomainSpec::Rect { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| a < v && v < b),
            DomainSpec::Difference { outer, inner } => {
                outer.contains(x) && !inner.closure_contains(x)
            }
        }
    }

    fn closure_contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Ball { center, r } => dist(x, center) <= *r,
            DomainSpec::Annulus { center, r1, r2 } => {
                let d = dist(x, center);
                *r1 <= d && d <= *r2
            }
            DomainSpec::Rect { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| a <= v && v <= b),
            DomainSpec::Difference { .. } => self.contains(x),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the closure.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Ball { center, r } | DomainSpec::Annulus { center, r2: r, .. } => (
                center.iter().map(|c| c - r).collect(),
                center.iter().map(|c| c + r).collect(),
            ),
            DomainSpec::Rect { lo, hi } => (lo.clone(), hi.clone()),
            DomainSpec::Difference { outer, .. } => outer.bounds(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Ball { r, .. } => 2.0 * r,
            DomainSpec::Annulus { r2, .. } => 2.0 * r2,
            DomainSpec::Rect { lo, hi } => dist(lo, hi),
            DomainSpec::Difference { outer, .. } => outer.diameter(),
        }
    }

    /// `dist(x, Ω^c)`; zero outside Ω.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            DomainSpec::Ball { center, r } => r - dist(x, center),
            DomainSpec::Annulus { center, r1, r2 } => {
                let d = dist(x, center);
                (d - r1).min(r2 - d)
            }
            DomainSpec::Rect { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            DomainSpec::Difference { outer, inner } => {
                outer.distance_to_boundary(x).min(inner.distance_to_set(x))
            }
        }
    }

    /// Distance from a point outside the closure to the set; zero inside.
    fn distance_to_set(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, r } => (dist(x, center) - r).max(0.0),
            DomainSpec::Annulus { center, r1, r2 } => {
                let d = dist(x, center);
                if d < *r1 {
                    r1 - d
                } else {
                    (d - r2).max(0.0)
                }
            }
            DomainSpec::Rect { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| {
                    let e = (a - v).max(v - b).max(0.0);
                    e * e
                })
                .sum::<f64>()
                .sqrt(),
            // Rejected by `validate`.
            DomainSpec::Difference { .. } => f64::NAN,
        }
    }

    /// Exterior unit normal at a boundary point, accepting points within `tol` of ∂Ω.
    pub fn exterior_normal(&self, x0: &[f64], tol: f64) -> Result<Vec<f64>> {
        let radial = |center: &[f64], sign: f64| -> Result<Vec<f64>> {
            let d = dist(x0, center);
            if d == 0.0 {
                return Err(Error::NotOnBoundary { distance: f64::NAN });
            }
            Ok(x0
                .iter()
                .zip(center)
                .map(|(a, c)| sign * (a - c) / d)
                .collect())
        };
        match self {
            DomainSpec::Ball { center, r } => {
                let gap = (dist(x0, center) - r).abs();
                if gap > tol {
                    return Err(Error::NotOnBoundary { distance: gap });
                }
                radial(center, 1.0)
            }
            DomainSpec::Annulus { center, r1, r2 } => {
                let d = dist(x0, center);
                let (g1, g2) = ((d - r1).abs(), (d - r2).abs());
                if g2 <= tol && g2 <= g1 {
                    radial(center, 1.0)
                } else if g1 <= tol {
                    radial(center, -1.0)
                } else {
                    Err(Error::NotOnBoundary {
                        distance: g1.min(g2),
                    })
                }
            }
            DomainSpec::Rect { lo, hi } => {
                let mut faces = Vec::new();
                let mut outside = 0.0f64;
                for k in 0..x0.len() {
                    let (gl, gh) = ((x0[k] - lo[k]).abs(), (x0[k] - hi[k]).abs());
                    if gl <= tol {
                        faces.push((k, -1.0));
                    } else if gh <= tol {
                        faces.push((k, 1.0));
                    }
                    outside = outside.max(lo[k] - x0[k]).max(x0[k] - hi[k]);
                }
                if outside > tol {
                    return Err(Error::NotOnBoundary { distance: outside });
                }
                match faces.as_slice() {
                    [] => Err(Error::NotOnBoundary {
                        distance: self.distance_to_boundary(x0),
                    }),
                    [(k, sign)] => {
                        let mut n = vec![0.0; x0.len()];
                        n[*k] = *sign;
                        Ok(n)
                    }
                    _ => Err(Error::UnsupportedBoundary),
                }
            }
            DomainSpec::Difference { outer, inner } => match outer.exterior_normal(x0, tol) {
                Ok(n) if !inner.closure_contains(x0) => Ok(n),
                _ => inner
                    .exterior_normal(x0, tol)
                    .map(|n| n.into_iter().map(|v| -v).collect()),
            },
        }
    }

    /// Points `x0 - ξ ν` along the inward normal at a boundary point.
    pub fn normal_probe(&self, x0: &[f64], depths: &[f64], tol: f64) -> Result<Vec<Probe>> {
        let nu = self.exterior_normal(x0, tol)?;
        let diam = self.diameter();
        depths
            .iter()
            .map(|&xi| {
                if !(xi >= 0.0 && xi < diam) {
                    return Err(Error::InvalidParameter(format!(
                        "probe depth {xi} outside [0, diameter = {diam})"
                    )));
                }
                let point: Vec<f64> = x0.iter().zip(&nu).map(|(a, n)| a - xi * n).collect();
                let interior = self.contains(&point);
                Ok(Probe {
                    depth: xi,
                    point,
                    interior,
                })
            })
            .collect()
    }

    /// Center of a ball or annulus.
    pub fn radial_center(&self) -> Option<&[f64]> {
        match self {
            DomainSpec::Ball { center, .. } | DomainSpec::Annulus { center, .. } => Some(center),
            _ => None,
        }
    }

    pub fn translated(&self, v: &[f64]) -> Self {
        let sh = |p: &[f64]| p.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>();
        match self {
            DomainSpec::Ball { center, r } => DomainSpec::Ball {
                center: sh(center),
                r: *r,
            },
            DomainSpec::Annulus { center, r1, r2 } => DomainSpec::Annulus {
                center: sh(center),
                r1: *r1,
                r2: *r2,
            },
            DomainSpec::Rect { lo, hi } => DomainSpec::Rect {
                lo: sh(lo),
                hi: sh(hi),
            },
            DomainSpec::Difference { outer, inner } => {
                DomainSpec::difference(outer.translated(v), inner.translated(v))
            }
        }
    }
}
