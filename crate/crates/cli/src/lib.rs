//! Experiment runner: configuration, sweeps, verifiers, persistence and plots.

pub mod checks;
pub mod config;
pub mod plots;
pub mod run;

pub use config::{CheckName, RunConfig};
pub use run::{load_run, replot, run_experiment, verify, RunManifest, RunStatus};

/// The bundled annulus reproduction.
pub const DEMO_ANNULUS: &str = include_str!("../configs/demo_annulus.json");

/// Marks an error as a problem with the user's configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
}

/// Exit code for an error escaping a subcommand.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return exit::CONFIG;
        }
        if let Some(nlcrit_core::Error::NotConverged { .. }) =
            cause.downcast_ref::<nlcrit_core::Error>()
        {
            return exit::NOT_CONVERGED;
        }
    }
    exit::OTHER
}

pub fn status_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Ok => exit::OK,
        RunStatus::NotConverged => exit::NOT_CONVERGED,
        RunStatus::ChecksFailed => exit::CHECK_FAILED,
        RunStatus::Failed => exit::OTHER,
    }
}
