//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stdout (bypassing capture), plus `DIAG` lines for companion runs.
//!
//! Criteria 1, 2, 6 and 9 are posed at N = 1, p = 2, s = 0.5, where N = ps and
//! the critical exponent does not exist. They are run as stated and fail with
//! `CriticalDimension`; the DIAG lines repeat them at s = 0.25 (p* = 4).

use std::io::Write;
use std::sync::{Arc, OnceLock};

use nlcrit_core::bubble::{truncation_estimate_check, vanish_check, TruncationPolicy};
use nlcrit_core::concentration::{
    annulus_location_check, boundary_distance_trend, cc_inequality_check, concentration_point,
    measures, ConcentrationReport,
};
use nlcrit_core::fieldio;
use nlcrit_core::functionals::{
    self, critical_exponent, lq_norm, lq_power, nehari_scale, rayleigh_quotient,
    sobolev_constant_estimate,
};
use nlcrit_core::moving_plane::moving_plane_monotonicity;
use nlcrit_core::nonlocal::{
    ds_density, energy_and_gradient, energy_gradient, gagliardo_energy, sign_inequality_holds,
};
use nlcrit_core::profile::{FnProfile, KelvinTransform, Profile};
use nlcrit_core::reduce::chunked_sum;
use nlcrit_core::solver::{
    epsilon_sweep, minimize_rayleigh, solve_radial_constrained, InitKind, SolverConfig, Sweep,
};
use nlcrit_core::{DomainSpec, Error, Field, Grid, PairWeights, Summation, WeightOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(tag: &str, id: u32, name: &str, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{tag} criterion {id} ({name}): {detail}");
    let _ = out.flush();
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    line(if pass { "PASS" } else { "FAIL" }, id, name, detail);
    assert!(pass, "criterion {id} ({name}): {detail}");
}

fn literature_s(n: usize, s: f64) -> f64 {
    let text = include_str!("fixtures/sobolev_literature.json");
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["values"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["n"].as_u64() == Some(n as u64) && e["s"].as_f64() == Some(s))
        .and_then(|e| e["value"].as_f64())
        .expect("fixture entry")
}

fn weights(spec: &DomainSpec, h: f64, p: f64, s: f64) -> PairWeights {
    PairWeights::build(Arc::new(Grid::build(spec, h).unwrap()), p, s).unwrap()
}

const EPS_1D: [f64; 5] = [0.5, 0.25, 0.1, 0.05, 0.02];
const EPS_2D: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

fn interval() -> DomainSpec {
    DomainSpec::ball(&[0.0], 1.0)
}

/// The stated 1D sweep (s = 0.5).
fn stated_1d_sweep() -> Result<Sweep, Error> {
    epsilon_sweep(
        &weights(&interval(), 0.01, 2.0, 0.5),
        &EPS_1D,
        &SolverConfig::default(),
    )
}

/// The same sweep at s = 0.25.
fn companion_1d() -> &'static (PairWeights, Sweep) {
    static CELL: OnceLock<(PairWeights, Sweep)> = OnceLock::new();
    CELL.get_or_init(|| {
        let w = weights(&interval(), 0.01, 2.0, 0.25);
        let sw = epsilon_sweep(&w, &EPS_1D, &SolverConfig::default()).unwrap();
        (w, sw)
    })
}

fn annulus_spec() -> DomainSpec {
    DomainSpec::annulus(&[0.0, 0.0], 1.0, 3.0)
}

/// Annulus sweep, started from a bump on the positive x-axis at mid-radius.
fn annulus_sweep() -> &'static (PairWeights, Sweep, Vec<ConcentrationReport>) {
    static CELL: OnceLock<(PairWeights, Sweep, Vec<ConcentrationReport>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let w = weights(&annulus_spec(), 0.05, 2.0, 0.5);
        let cfg = SolverConfig::default().with_init(InitKind::Bump {
            center: Some(vec![2.0, 0.0]),
            width: 0.25,
        });
        let sw = epsilon_sweep(&w, &EPS_2D, &cfg).unwrap();
        let reports = reports_for(&w, &sw);
        (w, sw, reports)
    })
}

fn reports_for(w: &PairWeights, sw: &Sweep) -> Vec<ConcentrationReport> {
    sw.states
        .iter()
        .map(|st| {
            let m = measures(&st.u, w).unwrap();
            concentration_point(&m, w.grid(), w.s(), sw.trend.s_hat_h).unwrap()
        })
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

#[test]
fn c01_energy_limit() {
    let name = "energy limit";
    let (_, sw) = companion_1d();
    let gaps: Vec<f64> = sw.trend.entries.iter().map(|e| e.rel_gap).collect();
    let last_nu = {
        let (w, sw) = companion_1d();
        let m = measures(&sw.states.last().unwrap().u, w).unwrap();
        let cc = cc_inequality_check(
            &m,
            w.grid(),
            w.s(),
            sw.trend.s_hat_h,
            &[0.0],
            &[f64::INFINITY],
        );
        cc.nu_quantum_gap
    };
    line(
        "DIAG",
        1,
        name,
        &format!(
            "s = 0.25 companion: S_h = {:.6}, target = {:.6}, relative gaps {}, decreasing = {}, final < 15% = {}, \
             final nu_total off S_h^(N/2s) by {:.3}",
            sw.trend.s_hat_h,
            sw.trend.target,
            fmt_list(&gaps),
            sw.trend.gaps_decreasing,
            gaps.last().unwrap() < &0.15,
            last_nu
        ),
    );
    match stated_1d_sweep() {
        Ok(sw) => {
            let gaps: Vec<f64> = sw.trend.entries.iter().map(|e| e.rel_gap).collect();
            let pass = sw.trend.gaps_decreasing && *gaps.last().unwrap() < 0.15;
            verdict(1, name, pass, &format!("relative gaps {}", fmt_list(&gaps)));
        }
        Err(e) => verdict(
            1,
            name,
            false,
            &format!("N = 1, p = 2, s = 0.5 sweep not computable: {e}"),
        ),
    }
}

#[test]
fn c02_lower_bound() {
    let name = "lower bound";
    let (_, sw) = companion_1d();
    let margins: Vec<f64> = sw
        .trend
        .entries
        .iter()
        .map(|e| e.i_eps - e.lower_bound)
        .collect();
    line(
        "DIAG",
        2,
        name,
        &format!(
            "s = 0.25 companion: I_eps - bound = {}, all >= 0: {}",
            fmt_list(&margins),
            sw.trend.lower_bound_holds
        ),
    );
    match stated_1d_sweep() {
        Ok(sw) => verdict(
            2,
            name,
            sw.trend.lower_bound_holds,
            "bound checked on every entry",
        ),
        Err(e) => verdict(
            2,
            name,
            false,
            &format!("N = 1, p = 2, s = 0.5 sweep not computable: {e}"),
        ),
    }
}

#[test]
fn c03_annulus_harmonic_mean() {
    let name = "annulus harmonic mean";
    let (_, sw, reports) = annulus_sweep();
    let last = reports.last().unwrap();
    let dev = annulus_location_check(last, &annulus_spec()).unwrap();
    let radii: Vec<f64> = reports
        .iter()
        .map(|r| r.xbar.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let bary = last.barycenter.iter().map(|x| x * x).sum::<f64>().sqrt();
    line(
        "DIAG",
        3,
        name,
        &format!(
            "|xbar| per eps {}, barycenter radius {:.4}, converged {:?}, gaps {}",
            fmt_list(&radii),
            bary,
            sw.states.iter().map(|s| s.converged).collect::<Vec<_>>(),
            fmt_list(
                &sw.trend
                    .entries
                    .iter()
                    .map(|e| e.rel_gap)
                    .collect::<Vec<_>>()
            )
        ),
    );
    verdict(
        3,
        name,
        dev.relative < 0.10,
        &format!(
            "|xbar| = {:.4}, target {:.4}, relative deviation {:.4} (limit 0.10)",
            dev.radius, dev.target, dev.relative
        ),
    );
}

#[test]
fn c04_inner_concentration() {
    let name = "inner concentration";
    let (wa, _, reports) = annulus_sweep();
    let annulus = boundary_distance_trend(reports, wa.grid().h());

    let disk = DomainSpec::ball(&[0.0, 0.0], 1.0);
    let wd = weights(&disk, 0.05, 2.0, 0.5);
    let sd = epsilon_sweep(&wd, &EPS_2D, &SolverConfig::default()).unwrap();
    let disk_trend = boundary_distance_trend(&reports_for(&wd, &sd), wd.grid().h());
    let pass = annulus.holds && disk_trend.holds;
    verdict(
        4,
        name,
        pass,
        &format!(
            "annulus boundary distances {} (floor {:.2}), disk {} (floor {:.2})",
            fmt_list(&annulus.distances),
            annulus.floor,
            fmt_list(&disk_trend.distances),
            disk_trend.floor
        ),
    );
}

#[test]
fn c05_moving_plane() {
    let name = "moving-plane monotonicity";
    let (w, sw, _) = annulus_sweep();
    let rep =
        moving_plane_monotonicity(&sw.states.last().unwrap().u, w.grid(), w.s(), 5e-2).unwrap();
    line(
        "DIAG",
        5,
        name,
        &format!("outer profile max relative violation {:.3e}", rep.max_outer),
    );
    verdict(
        5,
        name,
        rep.inner_ok,
        &format!(
            "M = {}, inner max relative violation {:.3e} over {} rays (limit 5e-2)",
            rep.m,
            rep.max_inner,
            rep.rays.len()
        ),
    );
}

#[test]
fn c06_truncated_bubble() {
    let name = "truncated-bubble estimate";
    let deltas = [0.5, 0.25, 0.125];
    let rep = truncation_estimate_check(
        &deltas,
        2.0,
        0.25,
        1,
        literature_s(1, 0.25),
        &TruncationPolicy::default(),
    )
    .unwrap();
    let gaps: Vec<f64> = rep.entries.iter().map(|e| e.gap).collect();
    line(
        "DIAG",
        6,
        name,
        &format!(
            "s = 0.25 companion: gaps {}, positive = {}, decreasing = {}, slope {:?} vs {}, integral deficits <= 0: {}",
            fmt_list(&gaps),
            rep.gaps_positive,
            rep.gaps_decreasing,
            rep.slope,
            rep.expected_slope,
            rep.deficits_nonpositive
        ),
    );
    match truncation_estimate_check(&deltas, 2.0, 0.5, 1, f64::NAN, &TruncationPolicy::default()) {
        Ok(rep) => {
            let pass = rep.gaps_positive
                && rep.gaps_decreasing
                && rep
                    .slope
                    .is_some_and(|m| (m - rep.expected_slope).abs() <= 0.5);
            verdict(6, name, pass, &format!("slope {:?}", rep.slope));
        }
        Err(e) => verdict(
            6,
            name,
            false,
            &format!("N = 1, p = 2, s = 0.5 bubble not defined: {e}"),
        ),
    }
}

#[test]
fn c07_vanishing() {
    let name = "vanishing tail decay";
    let deltas = [0.4, 0.2, 0.1, 0.05];
    let wide1 = FnProfile::new(1, |x: &[f64]| 1.0 / (1.0 + x[0] * x[0] / 100.0));
    let wide2 = FnProfile::new(2, |x: &[f64]| {
        1.0 / (1.0 + (x[0] * x[0] + x[1] * x[1]) / 100.0)
    });
    let plateau2 = FnProfile::new(2, |x: &[f64]| {
        if x[0].abs() < 20.0 && x[1].abs() < 20.0 {
            1.0
        } else {
            0.0
        }
    });
    let cases: [(&dyn Profile, f64, f64, &str); 5] = [
        (&wide1, 2.0, 0.5, "1D p=2 s=0.5"),
        (&wide1, 2.0, 0.25, "1D p=2 s=0.25"),
        (&wide1, 3.0, 0.2, "1D p=3 s=0.2"),
        (&wide2, 2.0, 0.5, "2D p=2 s=0.5"),
        (&plateau2, 1.5, 0.6, "2D p=1.5 s=0.6"),
    ];
    let mut pass = true;
    let mut parts = vec![];
    for (u, p, s, label) in cases {
        let rep = vanish_check(u, &deltas, p, s);
        let slope = rep.slope.unwrap_or(f64::NAN);
        pass &= (slope - rep.expected_slope).abs() <= 0.3;
        parts.push(format!("{label}: {slope:.3} vs {:.2}", rep.expected_slope));
    }
    let narrow = FnProfile::new(1, |x: &[f64]| (1.0 - x[0] * x[0]).max(0.0));
    let rep = vanish_check(&narrow, &deltas, 2.0, 0.25);
    line(
        "DIAG",
        7,
        name,
        &format!("unit-support bump (1-x^2)_+, p=2 s=0.25: slope {:?} (pre-asymptotic on this delta range)", rep.slope),
    );
    verdict(7, name, pass, &parts.join("; "));
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn suite_gradient(p: f64, s: f64, tol: f64) -> Result<(), String> {
    for (spec, h) in [
        (DomainSpec::ball(&[0.0], 1.0), 0.05),
        (DomainSpec::ball(&[0.0, 0.0], 1.0), 0.3),
    ] {
        let w = PairWeights::with_options(
            Arc::new(Grid::build(&spec, h).unwrap()),
            p,
            s,
            WeightOptions {
                summation: Summation::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        let g = w.grid();
        let u = Field::random(g, &mut ChaCha8Rng::seed_from_u64(1), 0.1, 1.0);
        let grad = energy_gradient(&u, &w).unwrap();
        let step = 1e-6 * u.max_abs();
        for &i in g.interior() {
            let bump = |d: f64| {
                let mut v = u.values().to_vec();
                v[i] += d;
                gagliardo_energy(&Field::from_values(g, v).unwrap(), &w).unwrap()
            };
            let fd = (bump(step) - bump(-step)) / (2.0 * step);
            let gi = grad.values()[i];
            if (gi - fd).abs() / (gi.abs() + 1.0) >= tol {
                return Err(format!("gradient p = {p}: {gi} vs {fd}"));
            }
        }
    }
    Ok(())
}

fn suite_fields() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (spec, h) in [
        (DomainSpec::ball(&[0.0], 1.0), 0.05),
        (DomainSpec::annulus(&[0.0, 0.0], 0.5, 1.2), 0.15),
    ] {
        for (p, s, summ) in [
            (2.0, 0.25, Summation::Fft),
            (2.0, 0.25, Summation::Direct),
            (3.0, 0.3, Summation::Direct),
        ] {
            let w = PairWeights::with_options(
                Arc::new(Grid::build(&spec, h).unwrap()),
                p,
                s,
                WeightOptions {
                    summation: summ,
                    ..Default::default()
                },
            )
            .unwrap();
            let g = w.grid();
            let u = Field::random(g, &mut rng, -1.0, 1.0);
            let (e, grad) = energy_and_gradient(&u, &w).unwrap();
            let t = 1.7;
            if rel(gagliardo_energy(&u.scaled(t), &w).unwrap(), t.powf(p) * e) >= 1e-10 {
                return Err("homogeneity".into());
            }
            let ug: f64 = u
                .values()
                .iter()
                .zip(grad.values())
                .map(|(a, b)| a * b)
                .sum();
            if rel(ug / p, e) >= 1e-10 {
                return Err("Euler identity".into());
            }
            let d = ds_density(&u, &w).unwrap();
            if (g.cell_volume() * chunked_sum(d.values())).to_bits()
                != gagliardo_energy(&u, &w).unwrap().to_bits()
            {
                return Err("density partition".into());
            }
            let q = p + 0.7;
            let v = nehari_scale(&u, &w, q).unwrap();
            let gv = energy_gradient(&v, &w).unwrap();
            let vg: f64 = v.values().iter().zip(gv.values()).map(|(a, b)| a * b).sum();
            if rel(vg / p, lq_power(&v, g, q)) >= 1e-8 {
                return Err("Nehari residual".into());
            }
            let r = rayleigh_quotient(&u, &w, q).unwrap();
            for f in [0.25, -8.0, 1024.0] {
                if rayleigh_quotient(&u.scaled(f), &w, q).unwrap().to_bits() != r.to_bits() {
                    return Err("Rayleigh scale invariance".into());
                }
            }
            let bytes = fieldio::encode(g, &u, &serde_json::json!({})).unwrap();
            let back = fieldio::decode(&bytes).unwrap().into_field(g).unwrap();
            if back
                .values()
                .iter()
                .zip(u.values())
                .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return Err("field round-trip".into());
            }
        }
    }
    Ok(())
}

fn suite_kelvin() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let (cx, cy, z0, z1) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        );
        let s = rng.gen_range(0.05..0.95);
        let u = FnProfile::new(2, move |x: &[f64]| {
            (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2))).exp() + 0.1
        });
        let z = [z0, z1];
        let once = KelvinTransform::new(&u, &z, s, 2.0).unwrap();
        let twice = KelvinTransform::new(&once, &z, s, 2.0).unwrap();
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        if rel(twice.eval(&x), u.eval(&x)) >= 1e-12 {
            return Err("Kelvin involution".into());
        }
    }
    Ok(())
}

fn suite_sign() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1_000_000 {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let (a, b) = (
            rng.gen_range(-1.0..1.0) * scale,
            rng.gen_range(-1.0..1.0) * scale,
        );
        let p = rng.gen_range(1.05..6.0);
        if !sign_inequality_holds(a, b, p) {
            return Err(format!("sign inequality at a = {a}, b = {b}, p = {p}"));
        }
    }
    Ok(())
}

fn suite_sobolev_margin() -> Result<(), String> {
    let w = weights(&interval(), 0.05, 2.0, 0.25);
    let crit = critical_exponent(1, 2.0, 0.25).unwrap();
    let s_hat = minimize_rayleigh(&w, crit, &SolverConfig::default(), None)
        .unwrap()
        .value;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let u = Field::random(w.grid(), &mut rng, -0.5, 1.0);
        if gagliardo_energy(&u, &w).unwrap() - s_hat * lq_norm(&u, w.grid(), crit).powi(2) < 0.0 {
            return Err("Sobolev margin".into());
        }
    }
    Ok(())
}

#[test]
fn c08_property_suites() {
    let name = "property suites";
    let results = [
        ("gradient p=2", suite_gradient(2.0, 0.25, 1e-6)),
        ("gradient p=3", suite_gradient(3.0, 0.3, 1e-4)),
        (
            "energy/partition/Nehari/Rayleigh/round-trip",
            suite_fields(),
        ),
        ("Kelvin involution", suite_kelvin()),
        ("sign inequality 1e6 draws", suite_sign()),
        ("Sobolev margin", suite_sobolev_margin()),
    ];
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    let detail = if failed.is_empty() {
        format!(
            "{} suites green (full proptest versions in tests/properties.rs)",
            results.len()
        )
    } else {
        failed.join("; ")
    };
    verdict(8, name, failed.is_empty(), &detail);
}

#[test]
fn c09_sobolev_cross_check() {
    let name = "Sobolev estimator cross-check";
    let cfg = SolverConfig::default();
    let est = sobolev_constant_estimate(
        1,
        2.0,
        0.25,
        &[4.0, 8.0],
        &[0.025, 0.0125],
        WeightOptions::default(),
        &cfg,
    )
    .unwrap();
    let lit = literature_s(1, 0.25);
    line(
        "DIAG",
        9,
        name,
        &format!(
            "s = 0.25 companion: finest {:.5}, extrapolated {:.5}, literature {:.5}, relative error {:.4}, refinement trend ok = {}",
            est.finest,
            est.extrapolated,
            lit,
            rel(est.extrapolated, lit),
            est.refinement_trend_ok
        ),
    );
    match sobolev_constant_estimate(
        1,
        2.0,
        0.5,
        &[4.0, 8.0],
        &[0.025, 0.0125],
        WeightOptions::default(),
        &cfg,
    ) {
        Ok(est) => verdict(
            9,
            name,
            false,
            &format!(
                "extrapolated {} but no finite literature value exists",
                est.extrapolated
            ),
        ),
        Err(e) => verdict(
            9,
            name,
            false,
            &format!("N = 1, p = 2, s = 0.5 has no Sobolev constant: {e}"),
        ),
    }
}

#[test]
fn c10_nonradiality_gap() {
    let name = "non-radiality gap";
    let (w, sw, _) = annulus_sweep();
    let eps = [0.4, 0.2, 0.1];
    let mut cfg = SolverConfig::default().with_init(InitKind::RadialGaussian { width: 0.3 });
    let mut gaps = vec![];
    let mut radial = vec![];
    for (k, &e) in eps.iter().enumerate() {
        let q = functionals::exponent_for_eps(2, 2.0, 0.5, e).unwrap();
        let st = solve_radial_constrained(w, q, &cfg).unwrap();
        let free = &sw.states[k];
        assert_eq!(free.eps, e);
        radial.push(st.report.j_q);
        gaps.push(st.report.j_q - free.report.j_q);
        cfg = cfg.with_init(InitKind::WarmStart(st.u.clone()));
    }
    let pass = gaps.iter().all(|&g| g > 0.0) && gaps.windows(2).all(|g| g[1] > g[0]);
    verdict(
        10,
        name,
        pass,
        &format!(
            "J_radial {}, gaps J_radial - J_free {} at eps {:?}",
            fmt_list(&radial),
            fmt_list(&gaps),
            eps
        ),
    );
}
