//! Accuracy and efficiency metrics.

use crate::error::{Error, Result};
use crate::params::ClrParams;

/// Empirical MSEs over S replicates of label-aligned estimates:
/// (1/S) Σ_s Σ_g (β̂^{(s)}_{g,0} − β_{g,0})² for the intercepts and
/// (1/S) Σ_s Σ_g ‖β̂^{(s)}_{g,1:} − β_{g,1:}‖² for the slopes.
///
/// Callers must align labels first (see `em::align_labels`); the reference
/// may be the generating truth or a full-data fit.
pub fn mse_report(fits: &[ClrParams], reference: &ClrParams) -> Result<(f64, f64)> {
    if fits.is_empty() {
        return Err(Error::InvalidConfig("no fits to score".into()));
    }
    let g_count = reference.g_count();
    let p = reference.p();
    let mut intercept = 0.0;
    let mut slopes = 0.0;
    for fit in fits {
        if fit.g_count() != g_count {
            return Err(Error::ClusterCountMismatch {
                left: fit.g_count(),
                right: g_count,
            });
        }
        if fit.p() != p {
            return Err(Error::DimensionMismatch {
                what: "covariate count",
                expected: p,
                actual: fit.p(),
            });
        }
        for g in 0..g_count {
            let est = fit.beta(g);
            let truth = reference.beta(g);
            let d0 = est[0] - truth[0];
            intercept += d0 * d0;
            for j in 1..=p {
                let dj = est[j] - truth[j];
                slopes += dj * dj;
            }
        }
    }
    let s = fits.len() as f64;
    Ok((intercept / s, slopes / s))
}

/// Relative efficiency of method A against the iboss baseline:
/// (MSE_iboss/MSE_A) / (Time_A/Time_iboss). Equals 1 when both match.
pub fn relative_efficiency(
    mse_a: f64,
    time_a: f64,
    mse_iboss: f64,
    time_iboss: f64,
) -> Result<f64> {
    for (what, value) in [
        ("mse_a", mse_a),
        ("time_a", time_a),
        ("mse_iboss", mse_iboss),
        ("time_iboss", time_iboss),
    ] {
        if value.is_nan() || value <= 0.0 || !value.is_finite() {
            return Err(Error::NonPositive { what, value });
        }
    }
    Ok((mse_iboss / mse_a) / (time_a / time_iboss))
}
