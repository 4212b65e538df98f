//! Missing-information diagonal: the three expectation families
//!
//!   I_{β_g|M}  = E[w_g(1−w_g) (y−γ_g)² xxᵀ / σ⁴_g],
//!   I_{σ²_g|M} = E[w_g(1−w_g) Δ²_{σ²,g}],
//!   I_{π_g|M}  = E[w_g(1−w_g)/π²_g + w_G(1−w_G)/π²_G + 2 w_g w_G/(π_g π_G)],
//!
//! with w_g = π_g φ_g / Σ_l π_l φ_l and the expectation over the mixture
//! density of y. There is no closed form; each scalar is evaluated by
//! adaptive quadrature over the union of ±10σ_g windows around the cluster
//! means γ_g.

use crate::error::Result;
use crate::math::{log_normal_pdf, log_sum_exp};
use crate::params::ClrParams;

use super::quad::{integrate_windows, merge_windows, QuadControls};

struct MixtureAt {
    /// log(π_g φ_g) per cluster
    lp: Vec<f64>,
    /// log mixture density
    logm: f64,
}

fn mixture_at(y: f64, gammas: &[f64], params: &ClrParams) -> MixtureAt {
    let lp: Vec<f64> = (0..params.g_count())
        .map(|g| params.pi()[g].ln() + log_normal_pdf(y, gammas[g], params.sigma2()[g]))
        .collect();
    let logm = log_sum_exp(&lp);
    MixtureAt { lp, logm }
}

impl MixtureAt {
    #[inline]
    fn w(&self, g: usize) -> f64 {
        (self.lp[g] - self.logm).exp()
    }

    /// w_g(1−w_g)·m(y) = π_g φ_g (1−w_g), which stays well-scaled in the tails.
    #[inline]
    fn w_complement_mass(&self, g: usize) -> f64 {
        self.lp[g].exp() * (1.0 - self.w(g))
    }
}

/// Diagonal of the missing-information matrix in θ order, by quadrature.
pub fn missing_info_diag(
    x: &[f64],
    params: &ClrParams,
    quad_controls: &QuadControls,
) -> Result<Vec<f64>> {
    let g_count = params.g_count();
    let p = params.p();
    assert_eq!(x.len(), p + 1, "design vector length");
    let d = params.theta_dim();
    if g_count == 1 {
        // w ≡ 1: no information is missing
        return Ok(vec![0.0; d]);
    }
    let gammas: Vec<f64> = (0..g_count).map(|g| params.mean(g, x)).collect();
    let windows = merge_windows(
        (0..g_count)
            .map(|g| {
                let s = params.sigma2()[g].sqrt();
                (gammas[g] - 10.0 * s, gammas[g] + 10.0 * s)
            })
            .collect(),
    );

    let mut diag = vec![0.0; d];
    for g in 0..g_count {
        let s2 = params.sigma2()[g];
        let beta_scalar = integrate_windows(
            &|y: f64| {
                let mix = mixture_at(y, &gammas, params);
                let dev = y - gammas[g];
                mix.w_complement_mass(g) * dev * dev / (s2 * s2)
            },
            &windows,
            quad_controls,
        )?
        .value;
        let off = params.beta_offset(g);
        for j in 0..=p {
            diag[off + j] = (x[j] * x[j] * beta_scalar).max(0.0);
        }
        let sigma_entry = integrate_windows(
            &|y: f64| {
                let mix = mixture_at(y, &gammas, params);
                let dev = y - gammas[g];
                let delta = (dev * dev - s2) / (2.0 * s2 * s2);
                mix.w_complement_mass(g) * delta * delta
            },
            &windows,
            quad_controls,
        )?
        .value;
        diag[params.sigma2_offset(g)] = sigma_entry.max(0.0);
    }
    let last = g_count - 1;
    let pi = params.pi();
    // E[w_g(1−w_g)] per cluster and E[w_g w_G] cross terms
    let mut own = vec![0.0; g_count];
    for (g, slot) in own.iter_mut().enumerate() {
        *slot = integrate_windows(
            &|y: f64| mixture_at(y, &gammas, params).w_complement_mass(g),
            &windows,
            quad_controls,
        )?
        .value
        .max(0.0);
    }
    for g in 0..g_count - 1 {
        let cross = integrate_windows(
            &|y: f64| {
                let mix = mixture_at(y, &gammas, params);
                mix.lp[g].exp() * mix.w(last)
            },
            &windows,
            quad_controls,
        )?
        .value
        .max(0.0);
        diag[params.pi_offset(g)] = own[g] / (pi[g] * pi[g])
            + own[last] / (pi[last] * pi[last])
            + 2.0 * cross / (pi[g] * pi[last]);
    }
    Ok(diag)
}
