//! Fisher-information machinery for the mixture regression model.
//!
//! The per-point information decomposes as I(x) = I_C − I_M: a closed-form
//! block-diagonal complete-information part and a missing-information part
//! with no closed form. This module provides the complete blocks, the
//! missing-information diagonal by adaptive quadrature, the closed-form
//! surrogate diagonal that dominates it, a Monte-Carlo estimator of the full
//! per-point information, the D-criterion, and the asymptotic variance
//! limits for the extreme-value subdata selector.

pub mod asymptotic;
pub mod mc;
pub mod missing;
pub mod overlap;
pub mod quad;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::ClrParams;
use crate::rng::RngSpec;
use crate::selection::SelectionResult;
use nalgebra::DMatrix;

pub use asymptotic::{asymptotic_limit, AsymptoticLimit, CovariateFamily};
pub use mc::{true_info_point_mc, McInfo};
pub use missing::missing_info_diag;
pub use overlap::{f1, f2, f3, surrogate_q};
pub use quad::{QuadControls, QuadOutcome};

/// Symmetric information matrix in the flat θ layout
/// (β by cluster, then σ², then π).
#[derive(Clone, Debug, PartialEq)]
pub struct InfoMatrix {
    d: usize,
    m: DMatrix<f64>,
}

impl InfoMatrix {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            m: DMatrix::zeros(d, d),
        }
    }

    /// Wrap a square matrix, insisting on symmetry within 1e-10 relative to
    /// the largest entry.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "information matrix",
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidConfig(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { d: m.nrows(), m })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn add_assign(&mut self, other: &InfoMatrix) {
        assert_eq!(self.d, other.d, "information dimensions");
        self.m += &other.m;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.m[(i, i)]).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Nonnegative diagonal of the closed-form surrogate that dominates the
/// missing-information diagonal, in θ order.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateDiag {
    pub q: Vec<f64>,
}

/// Closed-form complete-information matrix at one design point: block
/// diagonal with per-cluster β blocks π_g·xxᵀ/σ²_g, variance entries
/// π_g/(2σ⁴_g), and the mixing block 1/π_g + 1/π_G on the diagonal and
/// 1/π_G off it.
pub fn complete_info_point(x: &[f64], params: &ClrParams) -> InfoMatrix {
    let p = params.p();
    assert_eq!(x.len(), p + 1, "design vector length");
    let g_count = params.g_count();
    let d = params.theta_dim();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for g in 0..g_count {
        let off = params.beta_offset(g);
        let factor = params.pi()[g] / params.sigma2()[g];
        for a in 0..=p {
            for b in 0..=p {
                m[(off + a, off + b)] = factor * x[a] * x[b];
            }
        }
        let so = params.sigma2_offset(g);
        let s2 = params.sigma2()[g];
        m[(so, so)] = params.pi()[g] / (2.0 * s2 * s2);
    }
    if g_count > 1 {
        let inv_last = 1.0 / params.pi()[g_count - 1];
        for a in 0..g_count - 1 {
            for b in 0..g_count - 1 {
                let (ia, ib) = (params.pi_offset(a), params.pi_offset(b));
                m[(ia, ib)] = if a == b {
                    1.0 / params.pi()[a] + inv_last
                } else {
                    inv_last
                };
            }
        }
    }
    InfoMatrix { d, m }
}

/// How [`subdata_info`] evaluates each per-point matrix.
#[derive(Clone, Copy, Debug)]
pub enum InfoMode {
    /// Closed-form complete information.
    Complete,
    /// Monte-Carlo estimate of the true information.
    Mc { n_draws: usize, rng: RngSpec },
}

/// Information of a subdata set: the sum of per-point matrices over the
/// selected rows.
pub fn subdata_info(
    data: &Dataset,
    subset: &SelectionResult,
    params: &ClrParams,
    mode: InfoMode,
) -> Result<InfoMatrix> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut total = InfoMatrix::zeros(params.theta_dim());
    let mut x = vec![0.0; data.p() + 1];
    for (pos, i) in subset.iter().enumerate() {
        data.design_row(i, &mut x);
        let point = match mode {
            InfoMode::Complete => complete_info_point(&x, params),
            InfoMode::Mc { n_draws, rng } => {
                true_info_point_mc(&x, params, n_draws, rng.stream(pos as u64))?.info
            }
        };
        total.add_assign(&point);
    }
    Ok(total)
}

/// D-criterion: log-determinant of the information matrix, −∞ when the
/// matrix is not positive definite.
pub fn d_criterion(info: &InfoMatrix) -> f64 {
    match info.m.clone().cholesky() {
        Some(chol) => {
            let l = chol.l();
            2.0 * (0..info.d).map(|i| l[(i, i)].ln()).sum::<f64>()
        }
        None => f64::NEG_INFINITY,
    }
}
