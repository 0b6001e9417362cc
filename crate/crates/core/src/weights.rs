//! Singular-kernel pair weights and exterior tails.
//!
//! The kernel `|x_i - x_j|^{-(N+ps)}` depends only on the lattice offset
//! `k_i - k_j`, so it is stored once per absolute offset rather than per pair.
//! Internally one-dimensional grids are treated as `1 × n` arrays.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature;

/// Treatment of the excluded diagonal cell of the double sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearField {
    /// Plain lattice sum over `i != j`.
    Excluded,
    /// Adds the local contribution of the omitted cell to the nearest-neighbour
    /// weights, exact for affine fields when `p = 2`.
    #[default]
    CellCorrected,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summation {
    Direct,
    Fft,
    /// FFT convolution for `p = 2` on grids with more than [`AUTO_FFT_NODES`] nodes.
    #[default]
    Auto,
}

pub const AUTO_FFT_NODES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    pub near_field: NearField,
    pub summation: Summation,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            near_field: NearField::CellCorrected,
            summation: Summation::Auto,
        }
    }
}

impl WeightOptions {
    pub fn excluded() -> Self {
        WeightOptions {
            near_field: NearField::Excluded,
            ..Default::default()
        }
    }
}

pub struct PairWeights {
    grid: Arc<Grid>,
    p: f64,
    s: f64,
    options: WeightOptions,
    /// `(n1, n2)` with `n1 = 1` in one dimension.
    dims: (usize, usize),
    table: Vec<f64>,
    tail: Vec<f64>,
    row_all: Vec<f64>,
    rho: Vec<f64>,
    conv: Option<Convolver>,
}

impl std::fmt::Debug for PairWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PairWeights")
            .field("p", &self.p)
            .field("s", &self.s)
            .field("options", &self.options)
            .field("nodes", &self.grid.n_nodes())
            .finish()
    }
}

/// `m_p = ∫_{[-1/2,1/2]^N} |z_1|^p |z|^{-(N+ps)} dz`.
pub fn near_field_moment(n: usize, p: f64, s: f64) -> f64 {
    let e = p - p * s;
    match n {
        1 => 2.0 * 0.5f64.powf(e) / e,
        2 => {
            let quarter = std::f64::consts::FRAC_PI_4;
            let a = quadrature::adaptive(
                &|phi: f64| 2f64.powf(-e) * phi.cos().powf(p * s),
                0.0,
                quarter,
                1e-15,
            );
            let b = quadrature::adaptive(
                &|phi: f64| phi.cos().powf(p) * (2.0 * phi.sin()).powf(-e),
                quarter,
                2.0 * quarter,
                1e-15,
            );
            4.0 / e * (a + b)
        }
        _ => f64::NAN,
    }
}

/// `∫_{ℝ^N \ box} |x - y|^{-(N+ps)} dy` for `x` strictly inside the box.
pub fn exterior_tail(x: &[f64], lo: &[f64], hi: &[f64], ps: f64) -> f64 {
    match x.len() {
        1 => ((x[0] - lo[0]).powf(-ps) + (hi[0] - x[0]).powf(-ps)) / ps,
        2 => {
            // Each side seen from x at perpendicular distance d contributes
            // d^{-ps}/(ps) ∫ cos^{ps}(φ) dφ over the angles it subtends.
            let sides = [
                (hi[0] - x[0], x[1] - lo[1], hi[1] - x[1]),
                (x[0] - lo[0], x[1] - lo[1], hi[1] - x[1]),
                (hi[1] - x[1], x[0] - lo[0], hi[0] - x[0]),
                (x[1] - lo[1], x[0] - lo[0], hi[0] - x[0]),
            ];
            sides
                .iter()
                .map(|&(d, t1, t2)| {
                    let (a, b) = (-(t1 / d).atan(), (t2 / d).atan());
                    let tol = 1e-13 * (b - a);
                    d.powf(-ps) / ps
                        * quadrature::adaptive(&|phi: f64| phi.cos().powf(ps), a, b, tol)
                })
                .sum()
        }
        _ => f64::NAN,
    }
}

impl PairWeights {
    pub fn build(grid: Arc<Grid>, p: f64, s: f64) -> Result<Self> {
        Self::with_options(grid, p, s, WeightOptions::default())
    }

    /// Builds weights for any `p > 1`, `0 < s < 1`. Kernel and tail are finite
    /// whenever `ps > 0`; operations needing the critical exponent check `N > ps`.
    pub fn with_options(grid: Arc<Grid>, p: f64, s: f64, options: WeightOptions) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "s = {s} must lie in (0, 1)"
            )));
        }
        let n = grid.dim();
        let dims = if n == 1 {
            (1, grid.shape()[0])
        } else {
            (grid.shape()[0], grid.shape()[1])
        };
        let h = grid.h();
        let alpha = n as f64 + p * s;
        let scale = h.powf(-alpha);
        let mut table = vec![0.0; dims.0 * dims.1];
        for a in 0..dims.0 {
            for b in 0..dims.1 {
                if a + b > 0 {
                    let r2 = (a * a + b * b) as f64;
                    table[a * dims.1 + b] = scale * r2.powf(-0.5 * alpha);
                }
            }
        }
        if options.near_field == NearField::CellCorrected {
            let boost = 0.5 * near_field_moment(n, p, s) * scale;
            if dims.1 > 1 {
                table[1] += boost;
            }
            if dims.0 > 1 {
                table[dims.1] += boost;
            }
        }

        let (lo, hi) = grid.bbox();
        let ps = p * s;
        let mut tail = vec![0.0; grid.n_nodes()];
        let interior_tails: Vec<(usize, f64)> = grid
            .interior()
            .par_iter()
            .map(|&i| (i, exterior_tail(&grid.point(i), &lo, &hi, ps)))
            .collect();
        for (i, t) in interior_tails {
            tail[i] = t;
        }

        let mut w = PairWeights {
            grid,
            p,
            s,
            options,
            dims,
            table,
            tail,
            row_all: Vec::new(),
            rho: Vec::new(),
            conv: None,
        };
        w.row_all = w.row_sums();
        w.rho = w.exterior_row_sums();
        let use_fft = match options.summation {
            Summation::Direct => false,
            Summation::Fft => true,
            Summation::Auto => p == 2.0 && w.grid.n_nodes() > AUTO_FFT_NODES,
        };
        if use_fft {
            w.conv = Some(Convolver::new(dims, &w.table));
        }
        Ok(w)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn options(&self) -> WeightOptions {
        self.options
    }

    pub fn uses_fft(&self) -> bool {
        self.conv.is_some()
    }

    pub(crate) fn convolver(&self) -> Option<&Convolver> {
        self.conv.as_ref()
    }

    /// 2D array position `(row, col)` of node `i`.
    #[inline]
    pub(crate) fn pos(&self, i: usize) -> (usize, usize) {
        (i / self.dims.1, i % self.dims.1)
    }

    /// Weight used in the double sum between nodes `i != j`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a1, b1) = self.pos(i);
        let (a2, b2) = self.pos(j);
        self.table[a1.abs_diff(a2) * self.dims.1 + b1.abs_diff(b2)]
    }

    /// The bare kernel `|x_i - x_j|^{-(N+ps)}`, `i != j`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.grid.point(i), self.grid.point(j));
        crate::domain::dist(&x, &y).powf(-(self.grid.dim() as f64 + self.p * self.s))
    }

    /// Exterior-of-bbox tail integral at node `i` (zero on exterior nodes).
    pub fn tail(&self, i: usize) -> f64 {
        self.tail[i]
    }

    pub fn tails(&self) -> &[f64] {
        &self.tail
    }

    /// `Σ_{j ≠ i} w_ij` over every node of the grid.
    pub fn row_sums_all(&self) -> &[f64] {
        &self.row_all
    }

    /// `Σ_{j exterior} w_ij` for interior `i` (zero on exterior nodes).
    pub fn exterior_row_sums(&self) -> Vec<f64> {
        if !self.rho.is_empty() {
            return self.rho.clone();
        }
        let grid = &self.grid;
        let exterior: Vec<usize> = (0..grid.n_nodes())
            .filter(|&j| !grid.is_interior(j))
            .collect();
        let mut rho = vec![0.0; grid.n_nodes()];
        let vals: Vec<f64> = grid
            .interior()
            .par_iter()
            .map(|&i| exterior.iter().map(|&j| self.weight(i, j)).sum())
            .collect();
        for (&i, v) in grid.interior().iter().zip(vals) {
            rho[i] = v;
        }
        rho
    }

    pub(crate) fn rho(&self) -> &[f64] {
        &self.rho
    }

    fn row_sums(&self) -> Vec<f64> {
        let (n1, n2) = self.dims;
        // prefix[a][b] = Σ_{a' ≤ a, b' ≤ b} table[a'][b']
        let mut prefix = vec![0.0; n1 * n2];
        for a in 0..n1 {
            let mut run = 0.0;
            for b in 0..n2 {
                run += self.table[a * n2 + b];
                prefix[a * n2 + b] = run + if a > 0 { prefix[(a - 1) * n2 + b] } else { 0.0 };
            }
        }
        let f = |a: usize, b: usize| prefix[a * n2 + b];
        // Sum over offsets a ∈ [-a1, a2], b ∈ [-b1, b2] of table[|a|][|b|].
        let rect = |a1: usize, a2: usize, b1: usize, b2: usize| {
            let t0 = |b: usize| f(0, b);
            f(a1, b1) + f(a2, b1) - t0(b1) + f(a1, b2) + f(a2, b2)
                - t0(b2)
                - (f(a1, 0) + f(a2, 0) - f(0, 0))
        };
        (0..n1 * n2)
            .map(|i| {
                let (a, b) = (i / n2, i % n2);
                rect(a, n1 - 1 - a, b, n2 - 1 - b)
            })
            .collect()
    }
}

/// Linear convolution with the offset table via zero-padded FFTs.
pub(crate) struct Convolver {
    dims: (usize, usize),
    padded: (usize, usize),
    kernel_hat: Vec<Complex<f64>>,
    fwd: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    inv: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
}

impl Convolver {
    fn new(dims: (usize, usize), table: &[f64]) -> Self {
        let pad = |n: usize| {
            if n == 1 {
                1
            } else {
                (2 * n - 1).next_power_of_two()
            }
        };
        let padded = (pad(dims.0), pad(dims.1));
        let mut planner = FftPlanner::new();
        let fwd = (
            planner.plan_fft_forward(padded.0),
            planner.plan_fft_forward(padded.1),
        );
        let inv = (
            planner.plan_fft_inverse(padded.0),
            planner.plan_fft_inverse(padded.1),
        );
        let (p1, p2) = padded;
        let mut buf = vec![Complex::new(0.0, 0.0); p1 * p2];
        for a in 0..dims.0 {
            for b in 0..dims.1 {
                let v = table[a * dims.1 + b];
                for ra in [a, (p1 - a) % p1] {
                    for rb in [b, (p2 - b) % p2] {
                        buf[ra * p2 + rb] = Complex::new(v, 0.0);
                    }
                }
            }
        }
        let mut conv = Convolver {
            dims,
            padded,
            kernel_hat: Vec::new(),
            fwd,
            inv,
        };
        conv.transform(&mut buf, true);
        conv.kernel_hat = buf;
        conv
    }

    fn transform(&self, buf: &mut [Complex<f64>], forward: bool) {
        let (p1, p2) = self.padded;
        let (f1, f2) = if forward { &self.fwd } else { &self.inv };
        f2.process(buf);
        if p1 > 1 {
            let mut col = vec![Complex::new(0.0, 0.0); p1];
            for b in 0..p2 {
                for a in 0..p1 {
                    col[a] = buf[a * p2 + b];
                }
                f1.process(&mut col);
                for a in 0..p1 {
                    buf[a * p2 + b] = col[a];
                }
            }
        }
    }

    /// Returns `(Σ_j w_ij x_j, Σ_j w_ij y_j)` for every node `i`.
    pub(crate) fn apply_pair(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n1, n2) = self.dims;
        let (p1, p2) = self.padded;
        let mut buf = vec![Complex::new(0.0, 0.0); p1 * p2];
        for a in 0..n1 {
            for b in 0..n2 {
                buf[a * p2 + b] = Complex::new(x[a * n2 + b], y[a * n2 + b]);
            }
        }
        self.transform(&mut buf, true);
        for (v, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *v *= k;
        }
        self.transform(&mut buf, false);
        let norm = 1.0 / (p1 * p2) as f64;
        let mut cx = vec![0.0; n1 * n2];
        let mut cy = vec![0.0; n1 * n2];
        for a in 0..n1 {
            for b in 0..n2 {
                let v = buf[a * p2 + b];
                cx[a * n2 + b] = v.re * norm;
                cy[a * n2 + b] = v.im * norm;
            }
        }
        (cx, cy)
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let zeros = vec![0.0; x.len()];
        self.apply_pair(x, &zeros).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    fn line(h: f64) -> Arc<Grid> {
        Arc::new(Grid::build(&DomainSpec::ball(&[0.0], 1.0), h).unwrap())
    }

    #[test]
    fn kernel_values_on_unit_lattice() {
        let g = Arc::new(Grid::build(&DomainSpec::ball(&[0.0], 2.0), 1.0).unwrap());
        let w = PairWeights::with_options(g.clone(), 2.0, 0.5, WeightOptions::excluded()).unwrap();
        let i = g.interior()[0];
        assert_eq!(w.kernel(i, i + 1), 1.0);
        assert_eq!(w.weight(i, i + 1), 1.0);
        assert_eq!(w.kernel(i, i + 2), 0.25);
        assert_eq!(w.weight(i + 2, i), 0.25);
    }

    #[test]
    fn weights_symmetric_positive() {
        let g = Arc::new(Grid::build(&DomainSpec::annulus(&[0.0, 0.0], 0.5, 1.0), 0.2).unwrap());
        let w = PairWeights::build(g.clone(), 2.5, 0.3).unwrap();
        for i in 0..g.n_nodes() {
            for j in 0..g.n_nodes() {
                if i != j {
                    assert!(w.weight(i, j) > 0.0);
                    assert_eq!(w.weight(i, j), w.weight(j, i));
                }
            }
        }
    }

    #[test]
    fn centered_tail_matches_closed_form_1d() {
        let g = line(0.1);
        let w = PairWeights::build(g.clone(), 2.0, 0.5).unwrap();
        let c = g.nearest_node(&[0.0]);
        let (lo, hi) = g.bbox();
        let l = (0.0 - lo[0]).min(hi[0]);
        let expected = 2.0 * l.powf(-1.0);
        assert!((w.tail(c) - expected).abs() < 1e-12 * expected);
        // radial quadrature oracle
        let oracle = 2.0 * quadrature::log_radial(|r| r.powf(-2.0), l, 1e12, 8);
        assert!((w.tail(c) - oracle).abs() < 1e-6 * oracle);
    }

    /// Brute-force polar integral: ∫_0^{2π} ρ(φ)^{-ps}/(ps) dφ with ρ the ray exit distance.
    fn polar_tail_oracle(x: &[f64], lo: &[f64], hi: &[f64], ps: f64) -> f64 {
        let m = 400_000;
        let dphi = 2.0 * std::f64::consts::PI / m as f64;
        (0..m)
            .map(|k| {
                let phi = (k as f64 + 0.5) * dphi;
                let (c, s) = (phi.cos(), phi.sin());
                let tx = if c > 0.0 {
                    (hi[0] - x[0]) / c
                } else {
                    (lo[0] - x[0]) / c
                };
                let ty = if s > 0.0 {
                    (hi[1] - x[1]) / s
                } else {
                    (lo[1] - x[1]) / s
                };
                tx.min(ty).powf(-ps) / ps * dphi
            })
            .sum()
    }

    #[test]
    fn tail_2d_matches_polar_oracle() {
        let (lo, hi) = (vec![-1.3, -0.7], vec![2.1, 0.9]);
        for (x, ps) in [([0.0, 0.0], 1.0), ([1.9, 0.8], 0.5), ([-1.2, -0.1], 1.6)] {
            let t = exterior_tail(&x, &lo, &hi, ps);
            let o = polar_tail_oracle(&x, &lo, &hi, ps);
            assert!((t - o).abs() < 1e-6 * o, "{t} vs {o}");
        }
    }

    #[test]
    fn tail_of_disk_region_is_lower_bound() {
        // The exterior of the box is contained in the exterior of the inscribed disk.
        let (lo, hi) = (vec![-1.0, -1.0], vec![1.0, 1.0]);
        let ps = 0.8;
        let disk = 2.0 * std::f64::consts::PI / ps;
        let outer = 2.0 * std::f64::consts::PI / ps * 2f64.sqrt().powf(-ps);
        let t = exterior_tail(&[0.0, 0.0], &lo, &hi, ps);
        assert!(t < disk && t > outer);
    }

    #[test]
    fn near_field_moment_values() {
        // 1D: 2 (1/2)^{p-ps}/(p-ps)
        assert!((near_field_moment(1, 2.0, 0.25) - 2.0 * 0.5f64.powf(1.5) / 1.5).abs() < 1e-15);
        // 2D, p = 2: polar integral of cos² r^{1-ps} over the unit cell, brute force
        let m = 2000;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                let z1 = (a as f64 + 0.5) / m as f64 - 0.5;
                let z2 = (b as f64 + 0.5) / m as f64 - 0.5;
                let r2 = z1 * z1 + z2 * z2;
                acc += z1 * z1 * r2.powf(-1.5);
            }
        }
        acc /= (m * m) as f64;
        let exact = near_field_moment(2, 2.0, 0.5);
        assert!((exact - 1.76275).abs() < 1e-4, "{exact}");
        assert!((acc - exact).abs() < 2e-3, "{acc} vs {exact}");
    }

    #[test]
    fn row_sums_match_direct() {
        for (spec, h) in [
            (DomainSpec::ball(&[0.0], 1.0), 0.1),
            (DomainSpec::annulus(&[0.0, 0.0], 0.5, 1.0), 0.15),
        ] {
            let g = Arc::new(Grid::build(&spec, h).unwrap());
            let w = PairWeights::build(g.clone(), 2.0, 0.4).unwrap();
            for i in 0..g.n_nodes() {
                let direct: f64 = (0..g.n_nodes())
                    .filter(|&j| j != i)
                    .map(|j| w.weight(i, j))
                    .sum();
                assert!((w.row_sums_all()[i] - direct).abs() < 1e-12 * direct);
                if g.is_interior(i) {
                    let ext: f64 = (0..g.n_nodes())
                        .filter(|&j| !g.is_interior(j))
                        .map(|j| w.weight(i, j))
                        .sum();
                    assert!((w.rho()[i] - ext).abs() < 1e-12 * ext);
                }
            }
        }
    }

    #[test]
    fn convolver_matches_direct_sum() {
        let g = Arc::new(Grid::build(&DomainSpec::ball(&[0.0, 0.0], 1.0), 0.2).unwrap());
        let opts = WeightOptions {
            summation: Summation::Fft,
            ..Default::default()
        };
        let w = PairWeights::with_options(g.clone(), 2.0, 0.5, opts).unwrap();
        let x: Vec<f64> = (0..g.n_nodes())
            .map(|i| ((i * 37) % 11) as f64 - 5.0)
            .collect();
        let y: Vec<f64> = (0..g.n_nodes()).map(|i| ((i * 13) % 7) as f64).collect();
        let (cx, cy) = w.convolver().unwrap().apply_pair(&x, &y);
        for i in 0..g.n_nodes() {
            let dx: f64 = (0..g.n_nodes())
                .filter(|&j| j != i)
                .map(|j| w.weight(i, j) * x[j])
                .sum();
            let dy: f64 = (0..g.n_nodes())
                .filter(|&j| j != i)
                .map(|j| w.weight(i, j) * y[j])
                .sum();
            let scale = w.row_sums_all()[i] * 5.0;
            assert!((cx[i] - dx).abs() < 1e-12 * scale);
            assert!((cy[i] - dy).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn critical_dimension_is_not_an_error_for_weights() {
        let g = line(0.1);
        assert!(PairWeights::build(g, 2.0, 0.5).is_ok());
    }
}
