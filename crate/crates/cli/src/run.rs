//! Run orchestration and the manifest.
//!
//! Layout of an output directory:
//!
//! ```text
//! manifest.json      config, hash, results, check summaries, status
//! timings.json       wall-clock seconds per stage (the only nondeterministic file)
//! sweep.csv/.json    energy trend as recorded by the solver
//! fields/eps_K.nlf   ground state for the K-th entry of eps_list
//! checks/NAME.json   verifier reports, with a CSV twin
//! plots/*.svg
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use nlcrit_core::fieldio::{load_field, save_field, write_atomic};
use nlcrit_core::solver::{epsilon_sweep_with, GroundState, TrendReport};
use nlcrit_core::{Grid, GridHeader, PairWeights};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::checks::{self, Inputs, State};
use crate::config::{CheckName, RunConfig};
use crate::plots;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub eps: f64,
    pub q: f64,
    /// Relative to the output directory.
    pub field: String,
    pub i_eps: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: CheckName,
    pub passed: bool,
    pub report: String,
    pub csv: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NotConverged,
    ChecksFailed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    /// Canonical config, without `output_dir`.
    pub config: Value,
    pub grid: GridHeader,
    pub interior_nodes: usize,
    pub s_hat_h: Option<f64>,
    pub target: Option<f64>,
    pub results: Vec<ResultEntry>,
    pub trend: Option<TrendReport>,
    pub checks: Vec<CheckSummary>,
    pub plots: Vec<String>,
    pub timings: String,
    pub status: RunStatus,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn run_config(&self, dir: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig =
            serde_json::from_value(self.config.clone()).context("config stored in manifest")?;
        cfg.output_dir = dir.to_path_buf();
        Ok(cfg)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), &serde_json::to_value(self)?)
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

#[derive(Default)]
struct Timings(Vec<(String, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.push((stage.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let map: serde_json::Map<String, Value> =
            self.0.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        write_json(&dir.join("timings.json"), &Value::Object(map))
    }
}

fn build_weights(cfg: &RunConfig) -> Result<PairWeights> {
    let grid = Arc::new(Grid::build(&cfg.domain, cfg.h).context("building grid")?);
    PairWeights::with_options(grid, cfg.p, cfg.s, cfg.weights).context("building pair weights")
}

fn field_name(k: usize) -> String {
    format!("fields/eps_{k}.nlf")
}

/// Runs the sweep, the requested checks and the plots, writing everything under
/// `cfg.output_dir`. Results finished before an error are still persisted.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(dir.join("fields"))
        .with_context(|| format!("creating {}", dir.display()))?;
    let mut timings = Timings::default();
    let w = timings.time("weights", || build_weights(cfg))?;
    let grid = w.grid();
    let hash = cfg.hash();
    let mut manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_hash: hash.clone(),
        config: serde_json::from_str(&cfg.canonical_json())?,
        grid: grid.header(),
        interior_nodes: grid.n_interior(),
        s_hat_h: None,
        target: None,
        results: vec![],
        trend: None,
        checks: vec![],
        plots: vec![],
        timings: "timings.json".into(),
        status: RunStatus::Ok,
        error: None,
    };

    let mut states: Vec<State> = vec![];
    let mut save_err: Option<anyhow::Error> = None;
    let sweep = timings.time("sweep", || {
        epsilon_sweep_with(&w, &cfg.eps_list, &cfg.solver, |st: &GroundState| {
            let k = manifest.results.len();
            let name = field_name(k);
            let meta = json!({"eps": st.eps, "q": st.q, "config_hash": hash});
            if let Err(e) = save_field(&dir.join(&name), grid, &st.u, &meta) {
                save_err.get_or_insert(anyhow!(e).context(format!("saving {name}")));
            }
            manifest.results.push(ResultEntry {
                eps: st.eps,
                q: st.q,
                field: name,
                i_eps: st.report.i_eps,
                converged: st.converged,
                iterations: st.iterations,
                residual: st.residual,
            });
            states.push(State {
                eps: st.eps,
                q: st.q,
                u: st.u.clone(),
            });
        })
    });
    let sweep = match (sweep, save_err) {
        (Ok(sw), None) => sw,
        (res, save_err) => {
            let err = save_err
                .unwrap_or_else(|| anyhow!(res.err().expect("sweep failed")).context("sweep"));
            manifest.status = RunStatus::Failed;
            manifest.error = Some(format!("{err:#}"));
            manifest.write(&dir)?;
            timings.write(&dir)?;
            return Err(err);
        }
    };
    manifest.s_hat_h = Some(sweep.trend.s_hat_h);
    manifest.target = Some(sweep.trend.target);
    write_json(
        &dir.join("sweep.json"),
        &serde_json::to_value(&sweep.trend)?,
    )?;
    let mut csv =
        String::from("eps,q,i_eps,lower_bound,target,rel_gap,converged,iterations,residual\n");
    for e in &sweep.trend.entries {
        csv += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            e.eps,
            e.q,
            e.i_eps,
            e.lower_bound,
            e.target,
            e.rel_gap,
            e.converged,
            e.iterations,
            e.residual
        );
    }
    write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
    manifest.trend = Some(sweep.trend.clone());
    if manifest.results.iter().any(|r| !r.converged) {
        manifest.status = RunStatus::NotConverged;
    }

    let check_res = timings.time("checks", || {
        run_checks(cfg, &w, &states, sweep.trend.s_hat_h, &dir)
    });
    match check_res {
        Ok(summaries) => {
            if manifest.status == RunStatus::Ok && summaries.iter().any(|c| !c.passed) {
                manifest.status = RunStatus::ChecksFailed;
            }
            manifest.checks = summaries;
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(format!("{e:#}"));
        }
    }

    let energies: Vec<(f64, f64)> = manifest.results.iter().map(|r| (r.eps, r.i_eps)).collect();
    let plot_res = timings.time("plots", || {
        plots::emit_plots(
            &dir.join("plots"),
            grid,
            cfg.p,
            cfg.s,
            &states,
            &energies,
            manifest.target,
        )
    });
    match plot_res {
        Ok(paths) => manifest.plots = relative(&dir, &paths),
        Err(e) => eprintln!("warning: plots not written: {e:#}"),
    }
    manifest.write(&dir)?;
    timings.write(&dir)?;
    Ok(manifest)
}

fn relative(dir: &Path, paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| {
            p.strip_prefix(dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect()
}

fn run_checks(
    cfg: &RunConfig,
    w: &PairWeights,
    states: &[State],
    s_hat: f64,
    dir: &Path,
) -> Result<Vec<CheckSummary>> {
    let inputs = Inputs {
        w,
        states,
        s_hat,
        solver: &cfg.solver,
    };
    std::fs::create_dir_all(dir.join("checks"))?;
    let mut out = vec![];
    for &name in &cfg.checks {
        let o =
            checks::run_check(name, &inputs).with_context(|| format!("check {}", name.as_str()))?;
        let report = format!("checks/{}.json", name.as_str());
        let csv = format!("checks/{}.csv", name.as_str());
        write_json(
            &dir.join(&report),
            &json!({"name": name, "passed": o.passed, "report": o.report}),
        )?;
        write_atomic(&dir.join(&csv), o.csv.as_bytes())?;
        out.push(CheckSummary {
            name,
            passed: o.passed,
            report,
            csv,
        });
    }
    Ok(out)
}

/// A finished run reloaded from disk.
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub config: RunConfig,
    pub weights: PairWeights,
    pub states: Vec<State>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest = RunManifest::load(dir)?;
    let config = manifest.run_config(dir)?;
    let weights = build_weights(&config)?;
    let mut states = vec![];
    for r in &manifest.results {
        let lf = load_field(&dir.join(&r.field)).with_context(|| format!("loading {}", r.field))?;
        let u = lf
            .into_field(weights.grid())
            .with_context(|| format!("{} does not match the configured grid", r.field))?;
        states.push(State {
            eps: r.eps,
            q: r.q,
            u,
        });
    }
    Ok(LoadedRun {
        manifest,
        config,
        weights,
        states,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyEntry {
    pub name: CheckName,
    pub passed: bool,
    /// Recomputed JSON and CSV equal the persisted files byte for byte.
    pub reproduced: Option<bool>,
}

/// Reruns `names` (the run's own checks when empty) on the persisted fields.
pub fn verify(dir: &Path, names: &[CheckName]) -> Result<Vec<VerifyEntry>> {
    let run = load_run(dir)?;
    let s_hat = run
        .manifest
        .s_hat_h
        .ok_or_else(|| anyhow!("manifest has no Sobolev estimate; the sweep did not finish"))?;
    let names: Vec<CheckName> = if names.is_empty() {
        run.manifest.checks.iter().map(|c| c.name).collect()
    } else {
        names.to_vec()
    };
    let inputs = Inputs {
        w: &run.weights,
        states: &run.states,
        s_hat,
        solver: &run.config.solver,
    };
    let mut out = vec![];
    for name in names {
        let o =
            checks::run_check(name, &inputs).with_context(|| format!("check {}", name.as_str()))?;
        let reproduced = run
            .manifest
            .checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| {
                let mut json = serde_json::to_string_pretty(
                    &json!({"name": name, "passed": o.passed, "report": o.report}),
                )
                .expect("serializes");
                json.push('\n');
                let same =
                    |rel: &str, body: &[u8]| std::fs::read(dir.join(rel)).is_ok_and(|b| b == body);
                same(&c.report, json.as_bytes()) && same(&c.csv, o.csv.as_bytes())
            });
        out.push(VerifyEntry {
            name,
            passed: o.passed,
            reproduced,
        });
    }
    Ok(out)
}

/// Regenerates the SVGs of a finished run.
pub fn replot(dir: &Path) -> Result<Vec<PathBuf>> {
    let run = load_run(dir)?;
    let energies: Vec<(f64, f64)> = run
        .manifest
        .results
        .iter()
        .map(|r| (r.eps, r.i_eps))
        .collect();
    let c = &run.config;
    plots::emit_plots(
        &dir.join("plots"),
        run.weights.grid(),
        c.p,
        c.s,
        &run.states,
        &energies,
        run.manifest.target,
    )
}
