use std::path::PathBuf;

use csi_har_core::dataset::{Dataset, SplitSpec};
use csi_har_core::fusion::{FusionConfig, Topology};
use csi_har_core::kernel_bank::KernelBankConfig;
use csi_har_core::ridge::{RidgeConfig, SolverChoice, DEFAULT_ALPHAS, DEFAULT_FOLDS};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_RUNS: usize = 10;

/// Everything needed to reproduce a training or evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub topologies: Vec<Topology>,
    /// Empty selects every AP in the dataset.
    pub aps: Vec<u32>,
    pub data: PathBuf,
    pub seed: u64,
    pub runs: usize,
    pub train_fraction: f64,
    #[serde(default)]
    pub cross_user: bool,
    /// The seed field is replaced by the run seed.
    pub bank: KernelBankConfig,
    pub alphas: Vec<f64>,
    pub folds: usize,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default)]
    pub parallel_runs: bool,
    #[serde(default)]
    pub model_out: Option<PathBuf>,
    #[serde(default)]
    pub report_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            topologies: Topology::ALL.to_vec(),
            aps: Vec::new(),
            data: PathBuf::new(),
            seed: 0,
            runs: DEFAULT_RUNS,
            train_fraction: 0.8,
            cross_user: false,
            bank: KernelBankConfig::default(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            folds: DEFAULT_FOLDS,
            solver: SolverChoice::Auto,
            parallel_runs: false,
            model_out: None,
            report_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.topologies.is_empty() {
            return Err(CliError::Usage("no topology selected".into()));
        }
        if self.runs == 0 {
            return Err(CliError::Usage("runs must be at least 1".into()));
        }
        if self.data.as_os_str().is_empty() {
            return Err(CliError::Usage("no data directory given".into()));
        }
        self.bank.validate()?;
        self.ridge(0).validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Usage(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Seed of run `r` (zero-based).
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    pub fn ridge(&self, seed: u64) -> RidgeConfig {
        RidgeConfig {
            alphas: self.alphas.clone(),
            folds: self.folds,
            seed,
            solver: self.solver,
        }
    }

    pub fn fusion(&self, seed: u64) -> FusionConfig {
        FusionConfig {
            bank: KernelBankConfig { seed, ..self.bank },
            ridge: self.ridge(seed),
        }
    }

    pub fn split(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed,
            cross_user: self.cross_user,
        }
    }

    /// The selected APs, ascending, checked against the dataset.
    pub fn resolve_aps(&self, dataset: &Dataset) -> Result<Vec<u32>, CliError> {
        if self.aps.is_empty() {
            return Ok(dataset.ap_ids.clone());
        }
        let mut aps = self.aps.clone();
        aps.sort_unstable();
        aps.dedup();
        if let Some(missing) = aps.iter().find(|a| !dataset.ap_ids.contains(a)) {
            return Err(CliError::Usage(format!(
                "AP {missing} is not in the dataset (available: {:?})",
                dataset.ap_ids
            )));
        }
        Ok(aps)
    }
}
