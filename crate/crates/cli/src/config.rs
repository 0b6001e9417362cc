//! Run configuration.
//!
//! Precedence, lowest first: built-in defaults, the JSON config file,
//! command-line flags (`--out`, `--seed`).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nlcrit_core::functionals::critical_exponent;
use nlcrit_core::{DomainSpec, SolverConfig, WeightOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Registered verifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    EnergyTrend,
    Concentration,
    CcInequality,
    AnnulusLocation,
    BoundaryTrend,
    MovingPlane,
    RadialGap,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::EnergyTrend,
        CheckName::Concentration,
        CheckName::CcInequality,
        CheckName::AnnulusLocation,
        CheckName::BoundaryTrend,
        CheckName::MovingPlane,
        CheckName::RadialGap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::EnergyTrend => "energy_trend",
            CheckName::Concentration => "concentration",
            CheckName::CcInequality => "cc_inequality",
            CheckName::AnnulusLocation => "annulus_location",
            CheckName::BoundaryTrend => "boundary_trend",
            CheckName::MovingPlane => "moving_plane",
            CheckName::RadialGap => "radial_gap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub p: f64,
    pub s: f64,
    pub h: f64,
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub weights: WeightOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let n = self.domain.dim();
        critical_exponent(n, self.p, self.s)?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            bail!("h must be positive, got {}", self.h);
        }
        if self.eps_list.is_empty() {
            bail!("eps_list is empty");
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            bail!("eps_list must be strictly decreasing");
        }
        self.solver.validate()?;
        let annulus = matches!(self.domain, DomainSpec::Annulus { .. });
        let radial = matches!(&self.domain, DomainSpec::Ball { center, .. } | DomainSpec::Annulus { center, .. }
            if center.iter().all(|&c| c == 0.0));
        for c in &self.checks {
            match c {
                CheckName::AnnulusLocation | CheckName::MovingPlane if !annulus => {
                    bail!("check {} needs an annulus domain", c.as_str())
                }
                CheckName::RadialGap if !radial => {
                    bail!("check radial_gap needs a ball or annulus centered at 0")
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The configuration as JSON, without `output_dir`, keys sorted.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        // serde_json's default map is ordered by key, so this is canonical.
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"domain": {"type": "ball", "center": [0.0], "r": 1.0},
        "p": 2.0, "s": 0.25, "h": 0.05, "eps_list": [0.5, 0.1]}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert!(c.checks.is_empty());
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.output_dir, PathBuf::from("runs/latest"));
    }

    #[test]
    fn hash_ignores_key_order_and_output_dir() {
        let a = RunConfig::from_json(BASE).unwrap();
        let b = RunConfig::from_json(
            r#"{"eps_list": [0.5, 0.1], "h": 0.05, "s": 0.25, "p": 2.0, "output_dir": "elsewhere",
                "domain": {"r": 1.0, "center": [0.0], "type": "ball"}}"#,
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.h = 0.04;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            BASE.replace("0.25", "0.5"),
            BASE.replace("[0.5, 0.1]", "[0.1, 0.5]"),
            BASE.replace("[0.5, 0.1]", "[]"),
            BASE.replace("\"h\": 0.05", "\"h\": -1"),
            BASE.replace("\"h\": 0.05", "\"h\": 0.05, \"checks\": [\"moving_plane\"]"),
            BASE.replace(
                "\"h\": 0.05",
                "\"h\": 0.05, \"checks\": [\"no_such_check\"]",
            ),
            BASE.replace("\"h\": 0.05", "\"h\": 0.05, \"typo\": 1"),
        ];
        for text in bad {
            assert!(RunConfig::from_json(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn check_names_round_trip() {
        for c in CheckName::ALL {
            assert_eq!(CheckName::parse(c.as_str()), Some(c));
            assert_eq!(
                serde_json::to_string(&c).unwrap(),
                format!("\"{}\"", c.as_str())
            );
        }
    }
}
