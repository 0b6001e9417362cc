//! Ground states by projected-gradient minimization of the Rayleigh quotient.
//!
//! Iterates live on `{u ≥ 0, |u|_q = 1}`. Each step moves along the negative
//! gradient of `R(u) = [u]^p / |u|_q^p` with a Barzilai–Borwein step, clips to
//! the nonnegative cone, renormalizes and backtracks until an Armijo decrease
//! holds. The minimizer is finally rescaled onto the Nehari manifold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{dist, DomainSpec};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{self, EnergyReport};
use crate::nonlocal;
use crate::reduce;
use crate::weights::PairWeights;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// Gaussian bump; without a center one is drawn from the seed among nodes
    /// at least half the maximal boundary distance inside the domain.
    Bump {
        center: Option<Vec<f64>>,
        width: f64,
    },
    /// Gaussian in `|x|` centered on the mid-radius of a ball or annulus.
    RadialGaussian { width: f64 },
    #[serde(skip)]
    WarmStart(Field),
}

impl Default for InitKind {
    fn default() -> Self {
        InitKind::Bump {
            center: None,
            width: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the projected gradient, relative to the energy gradient, drops below this.
    pub grad_tol: f64,
    /// First step, relative to `max|u| / max|∇R|`.
    pub step0: f64,
    pub backtrack: f64,
    pub init: InitKind,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 20_000,
            grad_tol: 1e-7,
            step0: 1.0,
            backtrack: 0.5,
            init: InitKind::default(),
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.step0 > 0.0) {
            return bad("step0 must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if let InitKind::Bump { width, .. } | InitKind::RadialGaussian { width } = self.init {
            if !(width > 0.0) {
                return bad("init width must be positive");
            }
        }
        Ok(())
    }

    pub fn with_init(&self, init: InitKind) -> Self {
        SolverConfig {
            init,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    /// Nonnegative, Nehari-rescaled.
    pub u: Field,
    pub eps: f64,
    pub q: f64,
    pub report: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i |g_i - p h^N u_i^{q-1}| / max_i |g_i|` on the rescaled field.
    pub residual: f64,
}

impl GroundState {
    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Result of minimizing the Rayleigh quotient at fixed `q`.
#[derive(Clone, Debug)]
pub struct RayleighMin {
    /// Normalized so that `|u|_q = 1`.
    pub u: Field,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative projected-gradient norm at the returned iterate.
    pub residual: f64,
}

/// Node classes for the radially constrained solver: `floor(|k|)` of the lattice index.
pub struct RadialBins {
    bin: Vec<usize>,
    count: Vec<usize>,
}

impl RadialBins {
    pub fn new(w: &PairWeights) -> Result<Self> {
        let grid = w.grid();
        let centered = match grid.spec() {
            DomainSpec::Ball { center, .. } | DomainSpec::Annulus { center, .. } => {
                center.iter().all(|&c| c == 0.0)
            }
            _ => false,
        };
        if !centered {
            return Err(Error::NotRadialDomain);
        }
        let mut bin = vec![usize::MAX; grid.n_nodes()];
        let mut count = Vec::new();
        for &i in grid.interior() {
            let k = grid.lattice_index(i);
            let r = (k.iter().map(|&a| (a * a) as f64).sum::<f64>()).sqrt();
            let b = r.floor() as usize;
            if b >= count.len() {
                count.resize(b + 1, 0);
            }
            count[b] += 1;
            bin[i] = b;
        }
        Ok(RadialBins { bin, count })
    }

    /// Replaces interior values by their bin averages.
    pub fn average(&self, v: &mut [f64]) {
        let mut sum = vec![0.0; self.count.len()];
        for (i, &b) in self.bin.iter().enumerate() {
            if b != usize::MAX {
                sum[b] += v[i];
            }
        }
        for (i, &b) in self.bin.iter().enumerate() {
            if b != usize::MAX {
                v[i] = sum[b] / self.count[b] as f64;
            }
        }
    }
}

fn initial_field(w: &PairWeights, cfg: &SolverConfig) -> Result<Field> {
    let grid = w.grid();
    match &cfg.init {
        InitKind::WarmStart(f) => {
            if f.fingerprint() != grid.fingerprint() {
                return Err(Error::GridMismatch);
            }
            Ok(f.clone())
        }
        InitKind::Bump { center, width } => {
            let c = match center {
                Some(c) => c.clone(),
                None => {
                    let spec = grid.spec();
                    let depth: Vec<f64> = grid
                        .interior()
                        .iter()
                        .map(|&i| spec.distance_to_boundary(&grid.point(i)))
                        .collect();
                    let dmax = depth.iter().cloned().fold(0.0, f64::max);
                    let deep: Vec<usize> = grid
                        .interior()
                        .iter()
                        .zip(&depth)
                        .filter(|(_, &d)| d >= 0.5 * dmax)
                        .map(|(&i, _)| i)
                        .collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                    grid.point(*deep.choose(&mut rng).expect("interior is nonempty"))
                }
            };
            let w2 = 2.0 * width * width;
            Ok(Field::from_fn(grid, |x| (-dist(x, &c).powi(2) / w2).exp()))
        }
        InitKind::RadialGaussian { width } => {
            let spec = grid.spec();
            let (center, r0) = match spec {
                DomainSpec::Ball { center, .. } => (center.clone(), 0.0),
                DomainSpec::Annulus { center, r1, r2 } => (center.clone(), 0.5 * (r1 + r2)),
                _ => {
                    let (lo, hi) = spec.bounds();
                    (
                        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(),
                        0.0,
                    )
                }
            };
            let w2 = 2.0 * width * width;
            Ok(Field::from_fn(grid, |x| {
                (-(dist(x, &center) - r0).powi(2) / w2).exp()
            }))
        }
    }
}

struct Iterate {
    u: Vec<f64>,
    /// Rayleigh quotient (the energy, since `|u|_q = 1`).
    value: f64,
    g: Vec<f64>,
    grad_r: Vec<f64>,
}

struct Problem<'a> {
    w: &'a PairWeights,
    q: f64,
    radial: Option<&'a RadialBins>,
}

impl Problem<'_> {
    fn hn(&self) -> f64 {
        self.w.grid().cell_volume()
    }

    fn normalize(&self, v: &mut [f64]) -> Option<()> {
        let q = self.q;
        let norm = (self.hn() * reduce::chunked_map_sum(v.len(), |i| v[i].powf(q))).powf(1.0 / q);
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        Some(())
    }

    fn evaluate(&self, u: Vec<f64>) -> Result<Iterate> {
        let field = Field::from_raw(self.w.grid().fingerprint(), u);
        let (e, g) = nonlocal::energy_and_gradient(&field, self.w)?;
        #[cfg(debug_assertions)]
        {
            let partition = nonlocal::gagliardo_energy(&field, self.w)?;
            debug_assert!(
                (partition - e).abs() <= 1e-9 * e.abs().max(f64::MIN_POSITIVE),
                "density partition {partition} disagrees with energy {e}"
            );
        }
        let u = field.into_values();
        let g = g.into_values();
        let (p, q, hn) = (self.w.p(), self.q, self.hn());
        let mut grad_r: Vec<f64> = self
            .w
            .grid()
            .interior_mask()
            .iter()
            .enumerate()
            .map(|(i, &inside)| {
                if inside {
                    g[i] - p * e * hn * u[i].powf(q - 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        if let Some(bins) = self.radial {
            bins.average(&mut grad_r);
        }
        Ok(Iterate {
            u,
            value: e,
            g,
            grad_r,
        })
    }

    /// Projected-gradient norm relative to the energy gradient.
    fn residual(&self, it: &Iterate) -> f64 {
        let mask = self.w.grid().interior_mask();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..it.u.len() {
            if !mask[i] {
                continue;
            }
            let pg = if it.u[i] > 0.0 {
                it.grad_r[i]
            } else {
                it.grad_r[i].min(0.0)
            };
            num = num.max(pg.abs());
            den = den.max(it.g[i].abs());
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

/// Minimizes `[u]^p / |u|_q^p` over nonnegative fields for `p < q ≤ p*`.
pub fn minimize_rayleigh(
    w: &PairWeights,
    q: f64,
    cfg: &SolverConfig,
    radial: Option<&RadialBins>,
) -> Result<RayleighMin> {
    cfg.validate()?;
    if !(q > w.p()) {
        return Err(Error::InvalidExponent {
            q,
            lo: w.p(),
            hi: f64::INFINITY,
        });
    }
    let problem = Problem { w, q, radial };
    let grid = w.grid();
    let mut u0 = initial_field(w, cfg)?.into_values();
    for (i, x) in u0.iter_mut().enumerate() {
        if !grid.is_interior(i) || *x < 0.0 {
            *x = 0.0;
        }
    }
    if let Some(bins) = radial {
        bins.average(&mut u0);
    }
    problem.normalize(&mut u0).ok_or(Error::ZeroField)?;
    let mut cur = problem.evaluate(u0)?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gmax = max_abs(&cur.grad_r);
    let mut alpha = if gmax > 0.0 {
        cfg.step0 * max_abs(&cur.u) / gmax
    } else {
        cfg.step0
    };
    let (alpha_min, alpha_max) = (alpha * 1e-12, alpha * 1e12);
    let mut residual = problem.residual(&cur);
    let mut iterations = 0;
    let mut converged = residual < cfg.grad_tol;
    let mut trial = vec![0.0; cur.u.len()];
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..trial.len() {
                trial[i] = (cur.u[i] - step * cur.grad_r[i]).max(0.0);
            }
            // directional derivative of R along the clipped step (R is scale invariant)
            let slope =
                reduce::chunked_map_sum(trial.len(), |i| cur.grad_r[i] * (trial[i] - cur.u[i]));
            let mut v = trial.clone();
            if problem.normalize(&mut v).is_some() {
                if let Some(bins) = radial {
                    bins.average(&mut v);
                }
                let next = problem.evaluate(v)?;
                if next.value <= cur.value + 1e-4 * slope {
                    accepted = Some(next);
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        let Some(next) = accepted else {
            // no decrease is available at working precision
            break;
        };
        debug_assert!(next.value <= cur.value, "Rayleigh quotient increased");
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..next.u.len() {
            let s = next.u[i] - cur.u[i];
            ss += s * s;
            sy += s * (next.grad_r[i] - cur.grad_r[i]);
        }
        alpha = if sy > 0.0 {
            (ss / sy).clamp(alpha_min, alpha_max)
        } else {
            (2.0 * step).min(alpha_max)
        };
        cur = next;
        residual = problem.residual(&cur);
        converged = residual < cfg.grad_tol;
    }
    Ok(RayleighMin {
        u: Field::from_raw(grid.fingerprint(), cur.u),
        value: cur.value,
        iterations,
        converged,
        residual,
    })
}

fn finish(w: &PairWeights, q: f64, m: RayleighMin) -> Result<GroundState> {
    let crit = functionals::critical_exponent(w.grid().dim(), w.p(), w.s())?;
    let u = functionals::nehari_scale(&m.u, w, q)?;
    let (e, g) = nonlocal::energy_and_gradient(&u, w)?;
    let _ = e;
    let hn = w.grid().cell_volume();
    let p = w.p();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for &i in w.grid().interior() {
        let gi = g.values()[i];
        num = num.max((gi - p * hn * u.values()[i].powf(q - 1.0)).abs());
        den = den.max(gi.abs());
    }
    let seminorm = nonlocal::gagliardo_energy(&u, w)?;
    let report = functionals::report_from_energy(&u, w, q, crit, seminorm)?;
    debug_assert!(
        u.values().iter().all(|&x| x >= 0.0),
        "ground state changed sign"
    );
    Ok(GroundState {
        u,
        eps: crit - q,
        q,
        report,
        iterations: m.iterations,
        converged: m.converged,
        residual: if den > 0.0 { num / den } else { 0.0 },
    })
}

/// Discrete ground state for `p < q < p*`. Non-convergence is reported through
/// [`GroundState::converged`]; see [`GroundState::ensure_converged`].
pub fn solve_ground_state(w: &PairWeights, q: f64, cfg: &SolverConfig) -> Result<GroundState> {
    let crit = functionals::critical_exponent(w.grid().dim(), w.p(), w.s())?;
    if !(q > w.p() && q < crit) {
        return Err(Error::InvalidExponent {
            q,
            lo: w.p(),
            hi: crit,
        });
    }
    let m = minimize_rayleigh(w, q, cfg, None)?;
    finish(w, q, m)
}

/// Ground state restricted to fields constant on radial bins of width `h`.
pub fn solve_radial_constrained(
    w: &PairWeights,
    q: f64,
    cfg: &SolverConfig,
) -> Result<GroundState> {
    let bins = RadialBins::new(w)?;
    let crit = functionals::critical_exponent(w.grid().dim(), w.p(), w.s())?;
    if !(q > w.p() && q < crit) {
        return Err(Error::InvalidExponent {
            q,
            lo: w.p(),
            hi: crit,
        });
    }
    let m = minimize_rayleigh(w, q, cfg, Some(&bins))?;
    finish(w, q, m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendEntry {
    pub eps: f64,
    pub q: f64,
    pub i_eps: f64,
    pub lower_bound: f64,
    pub target: f64,
    pub rel_gap: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// Discrete Sobolev constant of the grid.
    pub s_hat_h: f64,
    pub target: f64,
    pub entries: Vec<TrendEntry>,
    pub gaps_decreasing: bool,
    pub lower_bound_holds: bool,
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub states: Vec<GroundState>,
    pub trend: TrendReport,
}

/// Ground states along a decreasing list of `ε`, each warm-started from the previous one.
pub fn epsilon_sweep(w: &PairWeights, eps_list: &[f64], cfg: &SolverConfig) -> Result<Sweep> {
    epsilon_sweep_with(w, eps_list, cfg, |_| {})
}

/// [`epsilon_sweep`], calling `on_state` as each ground state is finished.
pub fn epsilon_sweep_with<F: FnMut(&GroundState)>(
    w: &PairWeights,
    eps_list: &[f64],
    cfg: &SolverConfig,
    mut on_state: F,
) -> Result<Sweep> {
    let grid = w.grid();
    let (n, p, s) = (grid.dim(), w.p(), w.s());
    let crit = functionals::critical_exponent(n, p, s)?;
    if eps_list.is_empty() || eps_list.windows(2).any(|e| e[1] >= e[0]) {
        return Err(Error::InvalidParameter(
            "eps_list must be nonempty and strictly decreasing".into(),
        ));
    }
    if let Some(&e) = eps_list.iter().find(|&&e| !(e > 0.0 && e < crit - p)) {
        return Err(Error::InvalidParameter(format!(
            "eps = {e} outside (0, p* - p = {})",
            crit - p
        )));
    }
    let mut states: Vec<GroundState> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let q = functionals::exponent_for_eps(n, p, s, eps)?;
        let local = match states.last() {
            Some(prev) => cfg.with_init(InitKind::WarmStart(prev.u.clone())),
            None => cfg.clone(),
        };
        let mut st = solve_ground_state(w, q, &local)?;
        // Record the requested ε rather than p* - q, which may differ in the last bit.
        st.eps = eps;
        st.report.eps = eps;
        on_state(&st);
        states.push(st);
    }

    // Ŝ_h: the critical minimizer warm-started from the last state, and every
    // state's own critical quotient, whichever is smallest.
    let last = &states.last().expect("nonempty sweep").u;
    let crit_min = minimize_rayleigh(
        w,
        crit,
        &cfg.with_init(InitKind::WarmStart(last.clone())),
        None,
    )?;
    let mut s_hat = crit_min.value;
    for st in &states {
        let lp = st.report.lq_norm(crit).expect("critical norm recorded");
        s_hat = s_hat.min(st.report.seminorm_p / lp.powf(p));
    }
    let target = functionals::energy_target(n, p, s, s_hat);
    let measure = grid.measure();
    let entries: Vec<TrendEntry> = states
        .iter()
        .zip(eps_list)
        .map(|(st, &eps)| {
            let lower = functionals::energy_lower_bound(p, crit, eps, s_hat, measure);
            TrendEntry {
                eps,
                q: st.q,
                i_eps: st.report.i_eps,
                lower_bound: lower,
                target,
                rel_gap: (st.report.i_eps - target).abs() / target,
                converged: st.converged,
                iterations: st.iterations,
                residual: st.residual,
            }
        })
        .collect();
    let gaps_decreasing = entries.windows(2).all(|e| e[1].rel_gap < e[0].rel_gap);
    let lower_bound_holds = entries.iter().all(|e| e.i_eps >= e.lower_bound);
    Ok(Sweep {
        states,
        trend: TrendReport {
            s_hat_h: s_hat,
            target,
            entries,
            gaps_decreasing,
            lower_bound_holds,
        },
    })
}
