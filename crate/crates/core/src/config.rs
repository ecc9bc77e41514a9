//! TOML run configuration shared by the command-line subcommands.
//!
//! Every key is optional; command-line flags override file values.
//!
//! ```toml
//! grid = "crates/core/fixtures/14bus.json"
//! seed = 7
//!
//! [sim]
//! horizon = 9
//! days = 35
//!
//! [policy]
//! kind = "rob"
//! variant = "dus"
//! gamma_w = 0.5
//!
//! [sweep]
//! gamma_w = [0.0, 0.5, 1.0]
//! variants = ["dus", "sus2"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ccg::{AdOptions, CcgOptions};
use crate::dispatch::{Penalties, ReserveShortfall};
use crate::error::{Error, Result};
use crate::sim::{Policy, SimConfig};
use crate::uncertainty::{SetKind, SetSpec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<PathBuf>,
    pub wind: Option<PathBuf>,
    pub demand: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub penalties: PenaltySection,
    #[serde(default)]
    pub ccg: CcgSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: Option<usize>,
    pub days: Option<usize>,
    pub max_intervals: Option<usize>,
    pub train_days: Option<usize>,
    pub refit_every: Option<usize>,
    pub lags: Option<usize>,
    pub estimation_window: Option<usize>,
    pub demand_std_frac: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    La,
    ResLa,
    Rob,
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "la" => Ok(PolicyKind::La),
            "res-la" | "resla" => Ok(PolicyKind::ResLa),
            "rob" => Ok(PolicyKind::Rob),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: Option<PolicyKind>,
    pub variant: Option<SetKind>,
    pub gamma_w: Option<f64>,
    pub gamma_d: Option<f64>,
    pub gamma_t: Option<f64>,
    pub res_factor: Option<f64>,
    pub reserve_caps: Option<Vec<f64>>,
    pub reserve_shortfall: Option<ReserveShortfall>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub under: Option<f64>,
    pub over: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcgSection {
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub delta: Option<f64>,
    pub max_alternations: Option<usize>,
    pub restart_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub gamma_w: Option<Vec<f64>>,
    pub gamma_d: Option<Vec<f64>>,
    pub variants: Option<Vec<SetKind>>,
}

pub const DEFAULT_RES_FACTOR: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn penalties(&self) -> Penalties {
        let d = Penalties::default();
        Penalties {
            under: self.penalties.under.unwrap_or(d.under),
            over: self.penalties.over.unwrap_or(d.over),
        }
    }

    pub fn ccg_options(&self) -> CcgOptions {
        let d = CcgOptions::default();
        let c = &self.ccg;
        CcgOptions {
            epsilon: c.epsilon.unwrap_or(d.epsilon),
            max_iter: c.max_iter.unwrap_or(d.max_iter),
            ad: AdOptions {
                delta: c.delta.unwrap_or(d.ad.delta),
                max_alternations: c.max_alternations.unwrap_or(d.ad.max_alternations),
                restart_seed: c.restart_seed.or(d.ad.restart_seed),
            },
        }
    }

    pub fn lags(&self) -> usize {
        self.sim.lags.unwrap_or(crate::wind::DEFAULT_LAGS)
    }

    pub fn set_spec(&self) -> SetSpec {
        let p = &self.policy;
        SetSpec {
            kind: p.variant.unwrap_or_default(),
            gamma_w: p.gamma_w.unwrap_or(0.0),
            gamma_t: p.gamma_t,
            gamma_d: p.gamma_d.unwrap_or(0.0),
            lags: self.lags(),
        }
    }

    pub fn policy(&self) -> Policy {
        match self.policy.kind.unwrap_or(PolicyKind::La) {
            PolicyKind::La => Policy::La,
            PolicyKind::ResLa => Policy::ResLa {
                res_factor: self.policy.res_factor.unwrap_or(DEFAULT_RES_FACTOR),
            },
            PolicyKind::Rob => Policy::Rob(self.set_spec()),
        }
    }

    /// The simulator configuration, validated.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let s = &self.sim;
        let cfg = SimConfig {
            horizon: s.horizon.unwrap_or(d.horizon),
            days: s.days.unwrap_or(d.days),
            max_intervals: s.max_intervals,
            policy: self.policy(),
            penalties: self.penalties(),
            refit_every: s.refit_every.unwrap_or(d.refit_every),
            lags: self.lags(),
            train_days: s.train_days.unwrap_or(d.train_days),
            estimation_window: s.estimation_window,
            demand_std_frac: s.demand_std_frac.unwrap_or(d.demand_std_frac),
            ccg: self.ccg_options(),
            reserve_caps: self.policy.reserve_caps.clone(),
            reserve_shortfall: self.policy.reserve_shortfall.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep grid: Γʷ defaults to 0, 0.1, …, 1.0, Γᵈ to {0} and the variants
    /// to DUS and SUS2.
    pub fn sweep_lists(&self) -> (Vec<f64>, Vec<f64>, Vec<SetKind>) {
        let gw = self
            .sweep
            .gamma_w
            .clone()
            .unwrap_or_else(|| (0..=10).map(|k| k as f64 / 10.0).collect());
        let gd = self.sweep.gamma_d.clone().unwrap_or_else(|| vec![0.0]);
        let v = self
            .sweep
            .variants
            .clone()
            .unwrap_or_else(|| vec![SetKind::Dus, SetKind::Sus2]);
        (gw, gd, v)
    }
}
