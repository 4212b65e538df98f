//! Asymptotic variance limits of the scaled slope estimators under
//! extreme-value subdata selection, for normal and lognormal covariates.

use crate::error::{Error, Result};
use crate::params::ClrParams;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Covariate distribution family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateFamily {
    Normal,
    Lognormal,
}

/// Scaling diagonal and limiting covariance for one cluster's coefficient
/// estimator: V(S_N β̂_g) → limit as the full data size grows, where S_N is
/// the diagonal scaling evaluated at N.
#[derive(Clone, Debug)]
pub struct AsymptoticLimit {
    pub scaling: Vec<f64>,
    pub limit: DMatrix<f64>,
    pub family: CovariateFamily,
}

/// Evaluate the limit for cluster `g`.
///
/// Normal covariates: scaling diag(1, √log N, …), limit
/// (σ²_g/π_g)·blkdiag(1/k, (1/(4r))(Φ_z ρ² Φ_z)⁻¹).
/// Lognormal covariates: scaling diag(1, exp(σ_{z1}√(2 log N)), …), limit
/// (2σ²_g/(kπ_g))·[[1, −νᵀ], [−ν, pΨ + ννᵀ]] with ν_j = e^{−μ_{zj}} and
/// Ψ = diag(e^{−2μ_{zj}}).
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_limit(
    params: &ClrParams,
    family: CovariateFamily,
    mu_z: &[f64],
    sigma_z: &DMatrix<f64>,
    k: usize,
    r: usize,
    n_full: usize,
    g: usize,
) -> Result<AsymptoticLimit> {
    let p = mu_z.len();
    if params.p() != p {
        return Err(Error::DimensionMismatch {
            what: "covariate count",
            expected: params.p(),
            actual: p,
        });
    }
    if sigma_z.nrows() != p || sigma_z.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "Sigma_z",
            expected: p,
            actual: sigma_z.nrows(),
        });
    }
    if g >= params.g_count() {
        return Err(Error::InvalidClusterCount { g });
    }
    if k == 0 || r == 0 {
        return Err(Error::ZeroSubdata);
    }
    if n_full < 2 {
        return Err(Error::InvalidConfig("full data size must be ≥ 2".into()));
    }
    let log_n = (n_full as f64).ln();
    let (s2g, pig) = (params.sigma2()[g], params.pi()[g]);
    let sdevs: Vec<f64> = (0..p).map(|j| sigma_z[(j, j)].sqrt()).collect();
    if sdevs.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::NotSpd);
    }
    let mut limit = DMatrix::<f64>::zeros(p + 1, p + 1);
    let scaling: Vec<f64>;
    match family {
        CovariateFamily::Normal => {
            scaling = std::iter::once(1.0)
                .chain(std::iter::repeat_n(log_n.sqrt(), p))
                .collect();
            // Φ ρ² Φ with ρ the correlation matrix of Σ_z
            let mut rho = sigma_z.clone();
            for a in 0..p {
                for b in 0..p {
                    rho[(a, b)] /= sdevs[a] * sdevs[b];
                }
            }
            let rho2 = &rho * &rho;
            let mut phi_rho2_phi = rho2;
            for a in 0..p {
                for b in 0..p {
                    phi_rho2_phi[(a, b)] *= sdevs[a] * sdevs[b];
                }
            }
            let chol = phi_rho2_phi.cholesky().ok_or(Error::SingularCorrelation)?;
            // a rank-deficient ρ can squeak through the factorization on
            // rounding alone; reject on conditioning as well
            let diag: Vec<f64> = (0..p).map(|i| chol.l_dirty()[(i, i)]).collect();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            if lo.is_nan() || lo <= 1e-7 * hi {
                return Err(Error::SingularCorrelation);
            }
            let inv = chol.inverse();
            limit[(0, 0)] = s2g / (pig * k as f64);
            let slope_factor = s2g / (pig * 4.0 * r as f64);
            for a in 0..p {
                for b in 0..p {
                    limit[(a + 1, b + 1)] = slope_factor * inv[(a, b)];
                }
            }
        }
        CovariateFamily::Lognormal => {
            let root = (2.0 * log_n).sqrt();
            scaling = std::iter::once(1.0)
                .chain(sdevs.iter().map(|s| (s * root).exp()))
                .collect();
            let nu: Vec<f64> = mu_z.iter().map(|m| (-m).exp()).collect();
            let factor = 2.0 * s2g / (pig * k as f64);
            limit[(0, 0)] = factor;
            for j in 0..p {
                limit[(0, j + 1)] = -factor * nu[j];
                limit[(j + 1, 0)] = -factor * nu[j];
            }
            for a in 0..p {
                for b in 0..p {
                    let mut v = nu[a] * nu[b];
                    if a == b {
                        v += p as f64 * (-2.0 * mu_z[a]).exp();
                    }
                    limit[(a + 1, b + 1)] = factor * v;
                }
            }
        }
    }
    Ok(AsymptoticLimit {
        scaling,
        limit,
        family,
    })
}
