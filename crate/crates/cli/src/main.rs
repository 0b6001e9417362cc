use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use nlcrit_cli::{
    exit, exit_code, status_code, CheckName, ConfigError, RunConfig, RunManifest, DEMO_ANNULUS,
};
use nlcrit_core::fieldio::write_atomic;
use nlcrit_core::functionals::sobolev_constant_estimate;
use nlcrit_core::{SolverConfig, WeightOptions};

/// Ground states of the nearly-critical fractional p-Laplacian on bounded domains.
///
/// Settings are taken from built-in defaults, then the `--config` file, then
/// the flags, each overriding the one before.
#[derive(Parser)]
#[command(name = "nlcrit", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the kernel sums.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the initial guess (overrides `solver.rng_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ground state for a single eps.
    Solve {
        #[arg(long)]
        eps: f64,
    },
    /// Ground states along the configured eps_list, then the configured checks.
    Sweep,
    /// Rerun checks on the fields persisted in the output directory.
    Verify {
        /// Comma-separated check names; defaults to those of the run.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Estimate the Sobolev constant on balls by refinement.
    Sobolev {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.25)]
        s: f64,
        #[arg(long, value_delimiter = ',', default_value = "4,8")]
        radii: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        spacings: Vec<f64>,
    },
    /// Regenerate the SVG figures of a finished run.
    Plot,
    /// Run the bundled annulus configuration.
    DemoAnnulus,
}

fn config_error(e: anyhow::Error) -> anyhow::Error {
    anyhow!(ConfigError(format!("{e:#}")))
}

fn load_config(cli: &Cli, fallback: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, fallback) {
        (Some(path), _) => RunConfig::load(path),
        (None, Some(text)) => RunConfig::from_json(text),
        (None, None) => Err(anyhow!("--config is required for this command")),
    }
    .map_err(config_error)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.solver.rng_seed = seed;
    }
    Ok(cfg)
}

fn run_dir(cli: &Cli) -> Result<PathBuf> {
    if let Some(out) = &cli.out {
        return Ok(out.clone());
    }
    Ok(load_config(cli, None)?.output_dir)
}

fn run(cfg: RunConfig) -> Result<i32> {
    cfg.validate().map_err(config_error)?;
    let m = nlcrit_cli::run_experiment(&cfg)?;
    summarize(&cfg.output_dir, &m);
    Ok(status_code(m.status))
}

fn summarize(dir: &Path, m: &RunManifest) {
    println!("config {} -> {}", &m.config_hash[..12], dir.display());
    if let (Some(s), Some(t)) = (m.s_hat_h, m.target) {
        println!("S_hat_h = {s:.6}, target (s/N) S^(N/ps) = {t:.6}");
    }
    for r in &m.results {
        println!(
            "eps {:<8} I_eps {:.6}  iterations {:>6}  residual {:.2e}{}",
            r.eps,
            r.i_eps,
            r.iterations,
            r.residual,
            if r.converged { "" } else { "  NOT CONVERGED" }
        );
    }
    for c in &m.checks {
        println!(
            "check {:<17} {}",
            c.name.as_str(),
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    println!("status {:?}", m.status);
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Solve { eps } => {
            let mut cfg = load_config(cli, None)?;
            cfg.eps_list = vec![*eps];
            run(cfg)
        }
        Cmd::Sweep => run(load_config(cli, None)?),
        Cmd::DemoAnnulus => {
            let mut cfg = load_config(cli, Some(DEMO_ANNULUS))?;
            if cli.config.is_none() && cli.out.is_none() {
                cfg.output_dir = PathBuf::from("runs/demo-annulus");
            }
            run(cfg)
        }
        Cmd::Verify { checks } => {
            let names = checks
                .iter()
                .map(|c| {
                    CheckName::parse(c)
                        .ok_or_else(|| anyhow!(ConfigError(format!("unknown check {c:?}"))))
                })
                .collect::<Result<Vec<_>>>()?;
            let dir = run_dir(cli)?;
            let entries = nlcrit_cli::verify(&dir, &names)?;
            let mut code = exit::OK;
            for e in &entries {
                let repro = match e.reproduced {
                    Some(true) => "reproduced",
                    Some(false) => "DIFFERS from persisted report",
                    None => "not in the run",
                };
                println!(
                    "check {:<17} {}  {}",
                    e.name.as_str(),
                    if e.passed { "PASS" } else { "FAIL" },
                    repro
                );
                if !e.passed || e.reproduced == Some(false) {
                    code = exit::CHECK_FAILED;
                }
            }
            Ok(code)
        }
        Cmd::Plot => {
            let dir = run_dir(cli)?;
            for p in nlcrit_cli::replot(&dir)? {
                println!("{}", p.display());
            }
            Ok(exit::OK)
        }
        Cmd::Sobolev {
            n,
            p,
            s,
            radii,
            spacings,
        } => {
            let mut solver = SolverConfig::default();
            if let Some(seed) = cli.seed {
                solver.rng_seed = seed;
            }
            let est = match sobolev_constant_estimate(
                *n,
                *p,
                *s,
                radii,
                spacings,
                WeightOptions::default(),
                &solver,
            ) {
                Err(
                    e @ (nlcrit_core::Error::CriticalDimension { .. }
                    | nlcrit_core::Error::InvalidParameter(_)),
                ) => return Err(anyhow!(ConfigError(e.to_string()))),
                r => r.context("Sobolev estimate")?,
            };
            for e in &est.entries {
                println!("R {:<4} h {:<8} value {:.6}", e.radius, e.h, e.value);
            }
            println!(
                "finest {:.6}  extrapolated {:.6}  refinement trend ok {}",
                est.finest, est.extrapolated, est.refinement_trend_ok
            );
            if let Some(out) = &cli.out {
                std::fs::create_dir_all(out)?;
                let body = serde_json::to_string_pretty(&serde_json::json!({
                    "n": n, "p": p, "s": s, "estimate": est,
                }))? + "\n";
                write_atomic(&out.join("sobolev.json"), body.as_bytes())?;
            }
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(exit::OTHER as u8);
        }
    }
    let code = match dispatch(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
