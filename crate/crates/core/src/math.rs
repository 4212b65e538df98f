//! Small numeric helpers shared by the likelihood and information modules.

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Log of the normal density φ(y | mean, var).
#[inline]
pub(crate) fn log_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// log Σ exp(v_i), stable against large offsets.
#[inline]
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
