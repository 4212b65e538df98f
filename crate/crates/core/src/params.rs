//! Clusterwise linear regression parameters and the flat θ layout.
//!
//! The flattened parameter vector is ordered (β_1, …, β_G, σ²_1, …, σ²_G,
//! π_1, …, π_{G−1}), total length G(p+3)−1. Every matrix and diagonal in the
//! information module follows this block order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Lower bound on component variances. EM on mixtures can drive a component
/// variance to zero (unbounded likelihood); flooring keeps the likelihood
/// bounded. This is a documented deviation from the unconstrained MLE.
pub const SIGMA2_FLOOR: f64 = 1e-10;

/// Tolerance for the mixing-weight simplex constraint Σ π_g = 1.
pub const PI_SUM_TOL: f64 = 1e-12;

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    beta: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
    pi: Vec<f64>,
}

/// Full parameter vector of a G-cluster linear-regression mixture:
/// per-cluster coefficients β_g (intercept first), variances σ²_g, and
/// mixing weights π_g.
///
/// Construction validates the invariants; instances are immutable. The last
/// mixing weight is canonicalized to 1 − Σ_{g<G} π_g so that the flat θ
/// layout (which drops π_G) round-trips exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ClrParams {
    g: usize,
    p: usize,
    beta: Vec<f64>, // row-major G x (p+1)
    sigma2: Vec<f64>,
    pi: Vec<f64>,
}

impl ClrParams {
    pub fn new(beta: Vec<Vec<f64>>, sigma2: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        let g = beta.len();
        if g == 0 {
            return Err(Error::InvalidClusterCount { g: 0 });
        }
        let width = beta[0].len();
        if width < 1 {
            return Err(Error::DimensionMismatch {
                what: "beta row",
                expected: 1,
                actual: 0,
            });
        }
        let mut flat = Vec::with_capacity(g * width);
        for row in &beta {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    what: "beta row",
                    expected: width,
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let mut params = Self {
            g,
            p: width - 1,
            beta: flat,
            sigma2,
            pi,
        };
        params.validate()?;
        params.canonicalize_pi();
        Ok(params)
    }

    /// Re-check all invariants, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.sigma2.len() != self.g {
            return Err(Error::DimensionMismatch {
                what: "sigma2",
                expected: self.g,
                actual: self.sigma2.len(),
            });
        }
        if self.pi.len() != self.g {
            return Err(Error::DimensionMismatch {
                what: "pi",
                expected: self.g,
                actual: self.pi.len(),
            });
        }
        if self.beta.len() != self.g * (self.p + 1) {
            return Err(Error::DimensionMismatch {
                what: "beta",
                expected: self.g * (self.p + 1),
                actual: self.beta.len(),
            });
        }
        for (idx, &b) in self.beta.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite {
                    what: "beta",
                    row: idx / (self.p + 1),
                    col: idx % (self.p + 1),
                });
            }
        }
        for (gi, &s2) in self.sigma2.iter().enumerate() {
            if !s2.is_finite() || s2 < SIGMA2_FLOOR {
                return Err(Error::Sigma2NotPositive {
                    cluster: gi,
                    value: s2,
                });
            }
        }
        let mut sum = 0.0;
        for (gi, &w) in self.pi.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::PiNotPositive {
                    cluster: gi,
                    value: w,
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > PI_SUM_TOL {
            return Err(Error::PiNotSimplex { sum });
        }
        Ok(())
    }

    // Pin π_G to 1 − Σ_{g<G} π_g so dropping it in the flat layout is lossless.
    fn canonicalize_pi(&mut self) {
        let head: f64 = self.pi[..self.g - 1].iter().sum();
        self.pi[self.g - 1] = 1.0 - head;
    }

    pub fn g_count(&self) -> usize {
        self.g
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of free parameters, G(p+3)−1.
    pub fn theta_dim(&self) -> usize {
        self.g * (self.p + 3) - 1
    }

    pub fn beta(&self, g: usize) -> &[f64] {
        let w = self.p + 1;
        &self.beta[g * w..(g + 1) * w]
    }

    pub fn beta_rows(&self) -> Vec<Vec<f64>> {
        (0..self.g).map(|g| self.beta(g).to_vec()).collect()
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Cluster-g mean at design vector x, i.e. γ_g = xᵀβ_g.
    pub fn mean(&self, g: usize, x: &[f64]) -> f64 {
        self.beta(g).iter().zip(x).map(|(b, v)| b * v).sum()
    }

    /// Flatten to the θ layout: (β_1, …, β_G, σ²_1, …, σ²_G, π_1, …, π_{G−1}).
    pub fn theta_flatten(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.theta_dim());
        theta.extend_from_slice(&self.beta);
        theta.extend_from_slice(&self.sigma2);
        theta.extend_from_slice(&self.pi[..self.g - 1]);
        theta
    }

    /// Rebuild from a flat θ vector. Inverse of [`theta_flatten`](Self::theta_flatten).
    pub fn theta_unflatten(theta: &[f64], g: usize, p: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidClusterCount { g: 0 });
        }
        let dim = g * (p + 3) - 1;
        if theta.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "theta",
                expected: dim,
                actual: theta.len(),
            });
        }
        let nb = g * (p + 1);
        let beta = theta[..nb].to_vec();
        let sigma2 = theta[nb..nb + g].to_vec();
        let mut pi = theta[nb + g..].to_vec();
        let head: f64 = pi.iter().sum();
        pi.push(1.0 - head);
        let mut params = Self {
            g,
            p,
            beta,
            sigma2,
            pi,
        };
        params.validate()?;
        params.canonicalize_pi();
        Ok(params)
    }

    // Offsets of the θ blocks, used by the information module.

    pub fn beta_offset(&self, g: usize) -> usize {
        g * (self.p + 1)
    }

    pub fn sigma2_offset(&self, g: usize) -> usize {
        self.g * (self.p + 1) + g
    }

    pub fn pi_offset(&self, g: usize) -> usize {
        self.g * (self.p + 2) + g
    }
}

/// Returns the parameters unchanged when every invariant holds, otherwise
/// reports which one fails.
pub fn validate_params(params: ClrParams) -> Result<ClrParams> {
    params.validate()?;
    Ok(params)
}

impl TryFrom<ParamsRepr> for ClrParams {
    type Error = Error;

    fn try_from(repr: ParamsRepr) -> Result<Self> {
        ClrParams::new(repr.beta, repr.sigma2, repr.pi)
    }
}

impl From<ClrParams> for ParamsRepr {
    fn from(p: ClrParams) -> Self {
        ParamsRepr {
            beta: p.beta_rows(),
            sigma2: p.sigma2,
            pi: p.pi,
        }
    }
}
