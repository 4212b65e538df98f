//! Simulation and bootstrap studies: data generators, MSE metrics, and
//! runners that time each method pipeline (selection, then fitting) and
//! report per-method accuracy, cost, and relative efficiency.

mod generate;
mod metrics;
mod runner;

pub use generate::{
    bootstrap_standin_config, default_paper_config, desk_scale_config, gen_clr_data,
};
pub use metrics::{mse_report, relative_efficiency};
pub use runner::{run_bootstrap, run_simulation, write_rows_csv, BootstrapReport};

use crate::em::EmControls;
use crate::error::{Error, Result};
use crate::info::CovariateFamily;
use crate::params::ClrParams;
use crate::rng::RngSpec;
use crate::selection::{Method, SelectionPlan};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Full description of one simulation study: the generating truth, the
/// covariate family, sizes, methods, and the random stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: CovariateFamily,
    pub mu_z: Vec<f64>,
    pub sigma_z: Vec<Vec<f64>>,
    pub truth: ClrParams,
    pub n_full: usize,
    pub k: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub restarts: usize,
    #[serde(default)]
    pub controls: EmControls,
    pub rng: RngSpec,
}

impl SimConfig {
    pub fn p(&self) -> usize {
        self.mu_z.len()
    }

    pub fn sigma_z_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |a, b| self.sigma_z[a][b])
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.truth.p() != p {
            return Err(Error::DimensionMismatch {
                what: "truth covariate count",
                expected: p,
                actual: self.truth.p(),
            });
        }
        if self.sigma_z.len() != p || self.sigma_z.iter().any(|row| row.len() != p) {
            return Err(Error::DimensionMismatch {
                what: "Sigma_z",
                expected: p,
                actual: self.sigma_z.len(),
            });
        }
        let m = self.sigma_z_matrix();
        for a in 0..p {
            for b in 0..p {
                if (m[(a, b)] - m[(b, a)]).abs() > 1e-12 {
                    return Err(Error::NotSpd);
                }
            }
        }
        if m.cholesky().is_none() {
            return Err(Error::NotSpd);
        }
        if self.k > self.n_full {
            return Err(Error::SubdataExceedsData {
                k: self.k,
                n: self.n_full,
            });
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be ≥ 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be ≥ 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        if self.methods.contains(&Method::Iboss) {
            SelectionPlan::new(self.k, p)?;
        }
        Ok(())
    }

    /// Stable identifier of the resolved config (FNV-1a over the JSON form),
    /// embedded in reports so runs can be matched to their configuration.
    pub fn digest(&self) -> String {
        let encoded = serde_json::to_string(self).unwrap_or_default();
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in encoded.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        }
        format!("{hash:016x}")
    }
}

/// Accuracy, timing, and relative efficiency of one method over a study.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub mse_intercept: f64,
    pub mse_slopes: f64,
    /// Mean wall-clock seconds per replicate spent selecting subdata.
    pub cpu_select_seconds: f64,
    /// Mean wall-clock seconds per replicate spent fitting.
    pub cpu_fit_seconds: f64,
    /// (MSE_iboss/MSE_A)/(Time_A/Time_iboss); 1 for the iboss row itself,
    /// absent when no iboss baseline ran.
    pub eff_vs_iboss: Option<f64>,
    pub replicates_used: usize,
    pub failures: usize,
}

/// One long-format output row, ready for external plotting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub method: Method,
    pub n: usize,
    pub replicate: usize,
    pub mse_b0: f64,
    pub mse_b1: f64,
    pub t_select: f64,
    pub t_fit: f64,
}

/// Study outcome: per-method aggregates plus the raw per-replicate rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub stream: u64,
    pub config_hash: String,
    pub n_full: usize,
    pub k: usize,
    pub methods: Vec<MethodStats>,
    pub rows: Vec<ReplicateRow>,
}

impl ExperimentReport {
    pub fn method(&self, m: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|s| s.method == m)
    }
}
