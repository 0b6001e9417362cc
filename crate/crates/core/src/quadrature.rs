//! One-dimensional quadrature rules.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Fixed-order Gauss–Legendre quadrature over `panels` equal panels of `[a, b]`.
pub fn gauss_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, order: usize, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let step = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * step;
            let mid = lo + 0.5 * step;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| wi * f(mid + 0.5 * step * xi))
                .sum::<f64>()
                * 0.5
                * step
        })
        .sum()
}

/// Adaptive Gauss–Legendre (7 vs 15 points) with absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    thread_local! {
        static RULES: ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) = (gauss_legendre(7), gauss_legendre(15));
    }
    RULES.with(|(lo_rule, hi_rule)| adaptive_rec(f, a, b, tol, lo_rule, hi_rule, 0))
}

fn rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, r: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    r.0.iter()
        .zip(&r.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

fn adaptive_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    lo_rule: &(Vec<f64>, Vec<f64>),
    hi_rule: &(Vec<f64>, Vec<f64>),
    depth: usize,
) -> f64 {
    let coarse = rule(f, a, b, lo_rule);
    let fine = rule(f, a, b, hi_rule);
    // Below a few ulps of the panel value the error estimate is rounding noise.
    let floor = 32.0 * f64::EPSILON * rule(&|x| f(x).abs(), a, b, hi_rule);
    if (fine - coarse).abs() <= tol.max(floor) || depth >= 40 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adaptive_rec(f, a, m, 0.5 * tol, lo_rule, hi_rule, depth + 1)
        + adaptive_rec(f, m, b, 0.5 * tol, lo_rule, hi_rule, depth + 1)
}

/// `∫_a^b f(r) dr` for `0 < a < b` on geometrically graded panels, suited to
/// integrands with algebraic behaviour at both small and large `r`.
pub fn log_radial<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels_per_decade: usize) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let decades = ((lb - la) / std::f64::consts::LN_10).max(1.0);
    let panels = (decades * panels_per_decade as f64).ceil() as usize;
    gauss_panels(
        |t| {
            let r = t.exp();
            f(r) * r
        },
        la,
        lb,
        16,
        panels,
    )
}
