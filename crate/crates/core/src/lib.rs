//! Information-based optimal subdata selection for clusterwise linear
//! regression.
//!
//! Massive datasets make mixture-of-experts fitting expensive; this crate
//! selects a small, maximally informative subsample by taking per-covariate
//! extreme rows with sequential exclusion, fits the Gaussian mixture of
//! regressions by EM on the subdata, and provides the Fisher-information
//! machinery (complete/missing decomposition, closed-form surrogate bound,
//! Monte-Carlo oracle, D-criterion, asymptotic variance limits) that
//! justifies the selection rule.
//!
//! The crate is organized around the pipeline:
//!
//! * [`data`] — datasets and CSV ingestion
//! * [`params`] — mixture parameters and the flat θ layout
//! * [`selection`] — extreme-value, random, and full-data selection
//! * [`em`] — loglikelihood, EM fitting, cluster-count choice, label alignment
//! * [`info`] — information matrices, overlap integrals, surrogate bound,
//!   Monte-Carlo oracle, asymptotic limits
//! * [`experiments`] — simulation and bootstrap study runners

pub mod data;
pub mod em;
pub mod error;
pub mod experiments;
pub mod info;
mod math;
pub mod params;
pub mod rng;
pub mod selection;

pub use data::Dataset;
pub use em::{
    align_labels, e_step, em_fit, log_density_point, loglik, m_step, select_g, EmControls,
    FitResult, GSelection, Responsibilities,
};
pub use error::{Error, Result};
pub use experiments::{
    default_paper_config, desk_scale_config, gen_clr_data, mse_report, relative_efficiency,
    run_bootstrap, run_simulation, ExperimentReport, MethodStats, ReplicateRow, SimConfig,
};
pub use info::{
    asymptotic_limit, complete_info_point, d_criterion, f1, f2, f3, missing_info_diag,
    subdata_info, surrogate_q, true_info_point_mc, AsymptoticLimit, CovariateFamily, InfoMatrix,
    InfoMode, McInfo, QuadControls, SurrogateDiag,
};
pub use params::{validate_params, ClrParams, SIGMA2_FLOOR};
pub use rng::RngSpec;
pub use selection::{
    select_full, select_iboss, select_iboss_full_sort, select_random, Method, SelectionPlan,
    SelectionResult,
};
