use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, OnceLock};

use nlcrit_cli::{
    run_experiment, verify, CheckName, RunConfig, RunManifest, RunStatus, DEMO_ANNULUS,
};
use nlcrit_core::fieldio::{decode, encode, load_field, save_field};
use nlcrit_core::{DomainSpec, Error, Field, Grid};
use tempfile::TempDir;

fn small_config(dir: &Path, eps: &[f64], checks: &[&str]) -> RunConfig {
    let checks: Vec<String> = checks.iter().map(|c| format!("\"{c}\"")).collect();
    let text = format!(
        r#"{{"domain": {{"type": "ball", "center": [0.0], "r": 1.0}}, "p": 2.0, "s": 0.25, "h": 0.05,
            "eps_list": {eps:?}, "checks": [{}], "output_dir": {:?}}}"#,
        checks.join(","),
        dir
    );
    RunConfig::from_json(&text).unwrap()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn demo_run() -> &'static (TempDir, RunManifest) {
    static RUN: OnceLock<(TempDir, RunManifest)> = OnceLock::new();
    RUN.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let mut cfg = RunConfig::from_json(DEMO_ANNULUS).unwrap();
        cfg.output_dir = tmp.path().to_path_buf();
        let m = run_experiment(&cfg).unwrap();
        (tmp, m)
    })
}

#[test]
fn empty_checks_give_sweep_only_manifest() {
    let tmp = TempDir::new().unwrap();
    let m = run_experiment(&small_config(tmp.path(), &[0.5, 0.25], &[])).unwrap();
    assert_eq!(m.status, RunStatus::Ok);
    assert!(m.checks.is_empty());
    assert_eq!(m.results.len(), 2);
    for r in &m.results {
        assert!(tmp.path().join(&r.field).is_file(), "{}", r.field);
    }
    for p in &m.plots {
        assert!(tmp.path().join(p).is_file(), "{p}");
    }
    assert!(m.s_hat_h.unwrap() > 0.0);
    assert_eq!(RunManifest::load(tmp.path()).unwrap(), m);
}

#[test]
fn rerun_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let checks = [
        "energy_trend",
        "concentration",
        "cc_inequality",
        "boundary_trend",
        "radial_gap",
    ];
    let ma = run_experiment(&small_config(a.path(), &[0.5, 0.25, 0.1], &checks)).unwrap();
    let mb = run_experiment(&small_config(b.path(), &[0.5, 0.25, 0.1], &checks)).unwrap();
    assert_eq!(ma.config_hash, mb.config_hash);
    let fa = files(a.path());
    assert_eq!(fa, files(b.path()));
    for f in fa.iter().filter(|f| !f.ends_with("timings.json")) {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f:?}"
        );
    }
}

#[test]
fn csv_numbers_are_reproduced_by_verify() {
    let tmp = TempDir::new().unwrap();
    let checks = [
        "energy_trend",
        "concentration",
        "cc_inequality",
        "boundary_trend",
    ];
    run_experiment(&small_config(tmp.path(), &[0.5, 0.25], &checks)).unwrap();
    let v = verify(tmp.path(), &[]).unwrap();
    assert_eq!(v.len(), checks.len());
    assert!(v.iter().all(|e| e.reproduced == Some(true)));
}

#[test]
fn field_round_trip_and_truncation() {
    let dir = TempDir::new().unwrap();
    let grid = Arc::new(Grid::build(&DomainSpec::annulus(&[0.0, 0.0], 1.0, 2.0), 0.2).unwrap());
    let zero = Field::zeros(&grid);
    let wavy = Field::from_fn(&grid, |x| (x[0] * 7.3).sin() * (x[1] * 1.1).cos() / 3.0);
    for (k, u) in [zero, wavy].iter().enumerate() {
        let path = dir.path().join(format!("u{k}.nlf"));
        save_field(&path, &grid, u, &serde_json::json!({"k": k})).unwrap();
        let back = load_field(&path).unwrap().into_field(&grid).unwrap();
        let bits = |f: &Field| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(u));
    }
    let bytes = encode(&grid, &Field::zeros(&grid), &serde_json::Value::Null).unwrap();
    for cut in [0, 10, 63, 64, bytes.len() - 1] {
        assert!(
            matches!(decode(&bytes[..cut]), Err(Error::Format { .. })),
            "cut at {cut}"
        );
    }
}

#[test]
fn plots_match_results() {
    let one = TempDir::new().unwrap();
    let m = run_experiment(&small_config(one.path(), &[0.25], &[])).unwrap();
    let trend = std::fs::read_to_string(one.path().join("plots/trend.svg")).unwrap();
    assert_eq!(trend.matches(r#"class="point""#).count(), 1);
    assert!(trend.contains(r#"class="target""#));
    assert_eq!(
        m.plots
            .iter()
            .filter(|p| p.contains("density_eps_"))
            .count(),
        1
    );

    let (dir, m) = demo_run();
    let trend = std::fs::read_to_string(dir.path().join("plots/trend.svg")).unwrap();
    assert_eq!(trend.matches(r#"class="point""#).count(), m.results.len());
    for k in 0..m.results.len() {
        let radial =
            std::fs::read_to_string(dir.path().join(format!("plots/radial_eps_{k}.svg"))).unwrap();
        assert!(radial.contains(r#"id="harmonic-mean""#));
        assert!(radial.contains("= 1.5000"));
    }
}

#[test]
fn demo_manifest_reports_annulus_deviation() {
    let (dir, m) = demo_run();
    let loc = m
        .checks
        .iter()
        .find(|c| c.name == CheckName::AnnulusLocation)
        .unwrap();
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join(&loc.report)).unwrap()).unwrap();
    let fin = &rep["report"]["final"];
    assert_eq!(fin["target"].as_f64().unwrap(), 1.5);
    let dev = fin["deviation"].as_f64().unwrap();
    assert!(dev.is_finite());
    assert_eq!(loc.passed, fin["relative"].as_f64().unwrap() <= 0.10);
}

fn nlcrit(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_nlcrit"))
        .args(args)
        .output()
        .unwrap();
    out.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let write = |name: &str, body: &str| {
        let p = tmp.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let base =
        r#"{"domain": {"type": "ball", "center": [0.0], "r": 1.0}, "p": 2.0, "s": 0.25, "h": 0.1"#;
    let ok = write("ok.json", &format!(r#"{base}, "eps_list": [0.5, 0.25]}}"#));
    let critical = write(
        "critical.json",
        &base
            .replace("0.25", "0.5")
            .replace("\"h\": 0.1", "\"h\": 0.1, \"eps_list\": [0.1]}"),
    );
    let unknown = write(
        "unknown.json",
        &format!(r#"{base}, "eps_list": [0.5], "colour": 1}}"#),
    );
    let stalled = write(
        "stalled.json",
        &format!(r#"{base}, "eps_list": [0.5], "solver": {{"max_iters": 1}}}}"#),
    );
    let out = tmp.path().join("run");
    let out = out.to_str().unwrap();

    assert_eq!(
        nlcrit(&[
            "sweep",
            "--config",
            &ok,
            "--out",
            out,
            "--threads",
            "1",
            "--seed",
            "3"
        ]),
        0
    );
    assert_eq!(nlcrit(&["verify", "--out", out]), 0);
    assert_eq!(nlcrit(&["plot", "--out", out]), 0);
    assert_eq!(
        nlcrit(&["solve", "--eps", "0.3", "--config", &ok, "--out", out]),
        0
    );
    assert_eq!(nlcrit(&["sweep", "--config", &critical, "--out", out]), 2);
    assert_eq!(nlcrit(&["sweep", "--config", &unknown, "--out", out]), 2);
    assert_eq!(nlcrit(&["sweep"]), 2);
    assert_eq!(
        nlcrit(&["verify", "--out", out, "--checks", "no_such_check"]),
        2
    );
    assert_eq!(nlcrit(&["sobolev", "--n", "1", "--s", "0.5"]), 2);
    assert_eq!(nlcrit(&["sweep", "--config", &stalled, "--out", out]), 3);

    let (dir, m) = demo_run();
    let expected = if m.checks.iter().all(|c| c.passed) {
        0
    } else {
        4
    };
    assert_eq!(
        nlcrit(&["verify", "--out", dir.path().to_str().unwrap()]),
        expected
    );
}
