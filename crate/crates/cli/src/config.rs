//! Run configuration files (TOML, `schema_version = 1`).
//!
//! ```toml
//! schema_version = 1
//! kind = "nl-sweep"
//! experiment_id = "nl-desk"
//! alpha_grid = [0.33, 0.35, 0.37, 0.39]
//! sizes = [8, 16, 32]
//! n_samples = 500
//! master_seed = 7
//! ```
//!
//! Sweep kinds and the `β` they use:
//!
//! | kind               | β                          | extra keys   |
//! |--------------------|----------------------------|--------------|
//! | `nl-sweep`         | `β = α`                    |              |
//! | `correlator`       | `β = α`, correlator on     |              |
//! | `cut-sweep`        | `β = λα`                   | `lambda`     |
//! | `fixed-beta-sweep` | fixed                      | `beta`       |
//! | `mcf-sweep`        | `β = 0`, min-cost flow     |              |
//! | `clean-scan`       | `α = 0`, scan over β       | `beta_grid`  |
//!
//! `fit` and `collapse` read the records of an earlier sweep named by
//! `input` and take their settings from a `[fit]` or `[collapse]` table.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use u1qec::decoders::{BetaRule, PointSet, SweepConfig};
use u1qec::scaling::{Quantity, Refinement};
use u1qec::worm;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    NlSweep,
    CutSweep,
    FixedBetaSweep,
    McfSweep,
    CleanScan,
    Fit,
    Collapse,
    Correlator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub kind: Kind,
    #[serde(default = "default_id")]
    pub experiment_id: String,
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_loops")]
    pub n_therm_loops: u64,
    #[serde(default = "default_loops")]
    pub n_measure_loops: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub workers: Option<usize>,
    #[serde(default = "default_blocks")]
    pub correlator_blocks: usize,
    #[serde(default = "default_cap")]
    pub step_cap: u64,
    /// Store the sampled error field in every record.
    #[serde(default)]
    pub dump_fields: bool,
    pub input: Option<PathBuf>,
    pub fit: Option<FitSettings>,
    pub collapse: Option<CollapseSettings>,
}

fn default_id() -> String {
    "run".into()
}
fn default_samples() -> usize {
    100
}
fn default_loops() -> u64 {
    100_000
}
fn default_blocks() -> usize {
    worm::DEFAULT_CORRELATOR_BLOCKS
}
fn default_cap() -> u64 {
    worm::DEFAULT_STEP_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    #[serde(default = "default_quantity")]
    pub quantity: Quantity,
    /// Omit for the two-parameter fit.
    pub fixed_jump: Option<f64>,
    #[serde(default)]
    pub refinement: Refinement,
}

fn default_quantity() -> Quantity {
    Quantity::Upsilon
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseMode {
    Bkt,
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSettings {
    pub mode: CollapseMode,
    #[serde(default = "default_quantity")]
    pub quantity: Quantity,
    pub alpha_c: Option<f64>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub nu: Option<f64>,
    /// `[lo, hi, step]` for the power-law grid search over α_c.
    pub alpha_search: Option<[f64; 3]>,
    /// `[lo, hi, step]` for ν; defaults to `[1, 4, 0.02]`.
    pub nu_search: Option<[f64; 3]>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_sweep(&self) -> bool {
        !matches!(self.kind, Kind::Fit | Kind::Collapse)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version: expected {SCHEMA_VERSION}, got {}", self.schema_version);
        }
        if self.experiment_id.is_empty() || self.experiment_id.contains(char::is_whitespace) {
            bail!("experiment_id: must be a non-empty word");
        }
        let forbid = |present: bool, key: &str| -> Result<()> {
            if present {
                bail!("{key}: not used by kind {:?}", self.kind);
            }
            Ok(())
        };
        match self.kind {
            Kind::Fit | Kind::Collapse => {
                if self.input.is_none() {
                    bail!("input: required for kind {:?}", self.kind);
                }
                if self.kind == Kind::Fit && self.fit.is_none() {
                    bail!("fit: table required for kind fit");
                }
                if self.kind == Kind::Collapse && self.collapse.is_none() {
                    bail!("collapse: table required for kind collapse");
                }
                return Ok(());
            }
            Kind::CleanScan => {
                forbid(!self.alpha_grid.is_empty(), "alpha_grid")?;
                if self.beta_grid.is_empty() {
                    bail!("beta_grid: must not be empty");
                }
            }
            _ => {
                forbid(!self.beta_grid.is_empty(), "beta_grid")?;
                if self.alpha_grid.is_empty() {
                    bail!("alpha_grid: must not be empty");
                }
            }
        }
        forbid(self.lambda.is_some() && self.kind != Kind::CutSweep, "lambda")?;
        forbid(self.beta.is_some() && self.kind != Kind::FixedBetaSweep, "beta")?;
        if self.kind == Kind::CutSweep && !self.lambda.is_some_and(|l| l > 0.0) {
            bail!("lambda: cut-sweep needs a positive lambda");
        }
        if self.kind == Kind::FixedBetaSweep && !self.beta.is_some_and(|b| b > 0.0) {
            bail!("beta: fixed-beta-sweep needs a positive beta");
        }
        if self.workers == Some(0) {
            bail!("workers: must be >= 1");
        }
        if self.correlator_blocks < 2 {
            bail!("correlator_blocks: must be >= 2");
        }
        self.sweep_config().validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(())
    }

    pub fn beta_rule(&self) -> Option<BetaRule> {
        match self.kind {
            Kind::NlSweep | Kind::Correlator => Some(BetaRule::Nishimori),
            Kind::CutSweep => self.lambda.map(BetaRule::Proportional),
            Kind::FixedBetaSweep => self.beta.map(BetaRule::Fixed),
            Kind::McfSweep => Some(BetaRule::Zero),
            _ => None,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let points = match self.kind {
            Kind::CleanScan => PointSet::CleanBeta { grid: self.beta_grid.clone() },
            _ => {
                PointSet::Alpha { grid: self.alpha_grid.clone(), rule: self.beta_rule().unwrap_or(BetaRule::Nishimori) }
            }
        };
        let mut s = SweepConfig::new(points, self.sizes.clone(), self.n_samples, self.master_seed)
            .with_loops(self.n_therm_loops, self.n_measure_loops);
        s.measure_correlator = self.kind == Kind::Correlator;
        s.correlator_blocks = self.correlator_blocks;
        s.step_cap = self.step_cap;
        s
    }
}

/// `lo, lo + step, …` up to `hi` inclusive, computed by index to avoid drift.
pub fn grid(range: [f64; 3]) -> Result<Vec<f64>> {
    let [lo, hi, step] = range;
    if !(step > 0.0 && hi >= lo) {
        bail!("grid [{lo}, {hi}, {step}] is not increasing");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NL: &str = r#"
schema_version = 1
kind = "nl-sweep"
alpha_grid = [0.3, 0.35]
sizes = [4, 8]
n_samples = 4
"#;

    #[test]
    fn parses_minimal_sweep() {
        let c = RunConfig::from_toml(NL).unwrap();
        assert_eq!(c.kind, Kind::NlSweep);
        assert_eq!(c.n_therm_loops, 100_000);
        assert_eq!(c.beta_rule(), Some(BetaRule::Nishimori));
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let bad = [
            NL.replace("alpha_grid = [0.3, 0.35]", "alpha_grid = []"),
            NL.replace("schema_version = 1", "schema_version = 2"),
            NL.replace("n_samples = 4", "n_samples = 4\nlambda = 0.5"),
            NL.replace("n_samples = 4", "n_samples = 4\nbogus = 1"),
            NL.replace("nl-sweep", "cut-sweep"),
            NL.replace("nl-sweep", "clean-scan"),
            NL.replace("[0.3, 0.35]", "[0.35, 0.3]"),
            NL.replace("nl-sweep", "fit"),
        ];
        for b in bad {
            assert!(RunConfig::from_toml(&b).is_err(), "{b}");
        }
    }

    #[test]
    fn grids() {
        assert_eq!(grid([1.0, 4.0, 0.02]).unwrap().len(), 151);
        assert!(grid([1.0, 0.0, 0.1]).is_err());
    }
}
