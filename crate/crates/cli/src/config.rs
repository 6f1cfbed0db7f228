use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use singulim::descent::DescentConfig;
use singulim::limits::default_theta_grid;
use singulim::{Error, Result};

/// Environment variable consulted for the seed of randomized entry points.
pub const SEED_ENV: &str = "SINGULIM_SEED";

/// Everything a run can be configured with, loadable from JSON via `--config`.
/// Command-line flags override the file; absent keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub descent: DescentConfig,
    /// Seed for random directions and random starts; `SINGULIM_SEED` wins
    /// over this value, `--seed` wins over both.
    pub seed: u64,
    pub trace_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    /// Exponents tried by the Łojasiewicz probe.
    pub theta_grid: Vec<f64>,
    /// Diagnostics look at the last `tail_fraction` of the trace.
    pub tail_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            descent: DescentConfig::default(),
            seed: 0,
            trace_out: None,
            report_out: None,
            theta_grid: default_theta_grid(),
            tail_fraction: 0.5,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            Some(p) => {
                let text = singulim::io::read_text(p)?;
                serde_json::from_str(&text).map_err(|e| Error::parse("config", e))?
            }
            None => RunConfig::default(),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.descent.validate()?;
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::config("tail_fraction", "must lie in (0, 1]"));
        }
        if self.theta_grid.is_empty() {
            return Err(Error::config("theta_grid", "must not be empty"));
        }
        if let Some(t) = self.theta_grid.iter().find(|t| !(**t > 0.0 && **t <= 0.5)) {
            return Err(Error::config("theta_grid", format!("{t} is outside (0, 1/2]")));
        }
        Ok(())
    }

    /// Flag, then environment, then file.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|e| Error::parse(SEED_ENV, format!("`{v}`: {e}"))),
            Err(_) => Ok(self.seed),
        }
    }

    /// First trace index of the diagnostic tail for a trace of `len` iterates.
    pub fn tail_start(&self, len: usize) -> usize {
        let skip = ((1.0 - self.tail_fraction) * len as f64).floor() as usize;
        skip.min(len.saturating_sub(1))
    }
}
