//! Monte-Carlo estimate of the true per-point information via score outer
//! products. The off-diagonal blocks of I(x) have no closed form, so this
//! estimator is the only route to the full dense matrix and serves as the
//! oracle for the decomposition I(x) = I_C − I_M.

use crate::error::{Error, Result};
use crate::math::{log_normal_pdf, log_sum_exp};
use crate::params::ClrParams;
use crate::rng::RngSpec;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::InfoMatrix;

/// Monte-Carlo information estimate with per-entry standard errors.
#[derive(Clone, Debug)]
pub struct McInfo {
    pub info: InfoMatrix,
    pub se: DMatrix<f64>,
    pub n_draws: usize,
}

impl McInfo {
    pub fn max_se(&self) -> f64 {
        self.se.iter().copied().fold(0.0, f64::max)
    }
}

struct ScoreContext<'a> {
    params: &'a ClrParams,
    x: &'a [f64],
    gammas: Vec<f64>,
    log_pi: Vec<f64>,
}

impl<'a> ScoreContext<'a> {
    fn new(params: &'a ClrParams, x: &'a [f64]) -> Self {
        Self {
            gammas: (0..params.g_count()).map(|g| params.mean(g, x)).collect(),
            log_pi: params.pi().iter().map(|v| v.ln()).collect(),
            params,
            x,
        }
    }

    /// Score ∂ log m(y) / ∂θ at one response draw, in θ order:
    /// w_g Δ_{β,g} x for each β block, w_g Δ_{σ²,g} for each variance, and
    /// w_g/π_g − w_G/π_G for the mixing weights.
    fn score_into(&self, y: f64, logs: &mut [f64], out: &mut [f64]) {
        let g_count = self.params.g_count();
        let p = self.params.p();
        for (g, slot) in logs.iter_mut().enumerate() {
            *slot = self.log_pi[g] + log_normal_pdf(y, self.gammas[g], self.params.sigma2()[g]);
        }
        let norm = log_sum_exp(logs);
        let w_last = (logs[g_count - 1] - norm).exp();
        for g in 0..g_count {
            let w = (logs[g] - norm).exp();
            let s2 = self.params.sigma2()[g];
            let dev = y - self.gammas[g];
            let lin = w * dev / s2;
            let off = self.params.beta_offset(g);
            for j in 0..=p {
                out[off + j] = lin * self.x[j];
            }
            out[self.params.sigma2_offset(g)] = w * (dev * dev / s2 - 1.0) / (2.0 * s2);
            if g < g_count - 1 {
                out[self.params.pi_offset(g)] =
                    w / self.params.pi()[g] - w_last / self.params.pi()[g_count - 1];
            }
        }
    }
}

/// Estimate I(x) = E[score·scoreᵀ] by Monte Carlo with antithetic response
/// draws within the sampled mixture component. `n_draws` counts response
/// evaluations (two per antithetic pair) and must be at least 10⁴.
/// Reproducible for a fixed `rng`; draws are partitioned into fixed chunks
/// so the result does not depend on thread scheduling.
pub fn true_info_point_mc(
    x: &[f64],
    params: &ClrParams,
    n_draws: usize,
    rng: RngSpec,
) -> Result<McInfo> {
    if n_draws < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "n_draws must be ≥ 10000, got {n_draws}"
        )));
    }
    let d = params.theta_dim();
    let n_pairs = n_draws / 2;
    let n_chunks = 64.min(n_pairs);
    let base = n_pairs / n_chunks;
    let rem = n_pairs % n_chunks;

    let partials: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let pairs = base + usize::from(c < rem);
            let mut r = rng.stream(c as u64).rng();
            let ctx = ScoreContext::new(params, x);
            let g_count = params.g_count();
            let mut logs = vec![0.0; g_count];
            let mut s_plus = vec![0.0; d];
            let mut s_minus = vec![0.0; d];
            let mut sum = DMatrix::<f64>::zeros(d, d);
            let mut sumsq = DMatrix::<f64>::zeros(d, d);
            for _ in 0..pairs {
                let u: f64 = r.random();
                let mut label = g_count - 1;
                let mut acc = 0.0;
                for (g, &w) in params.pi().iter().enumerate() {
                    acc += w;
                    if u < acc {
                        label = g;
                        break;
                    }
                }
                let spread = params.sigma2()[label].sqrt();
                let eps: f64 = StandardNormal.sample(&mut r);
                ctx.score_into(ctx.gammas[label] + spread * eps, &mut logs, &mut s_plus);
                ctx.score_into(ctx.gammas[label] - spread * eps, &mut logs, &mut s_minus);
                for a in 0..d {
                    for b in 0..d {
                        let v = 0.5 * (s_plus[a] * s_plus[b] + s_minus[a] * s_minus[b]);
                        sum[(a, b)] += v;
                        sumsq[(a, b)] += v * v;
                    }
                }
            }
            (sum, sumsq)
        })
        .collect();

    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut sumsq = DMatrix::<f64>::zeros(d, d);
    for (s, sq) in partials {
        sum += s;
        sumsq += sq;
    }
    let n = n_pairs as f64;
    let mean = sum / n;
    let mut se = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let var = (sumsq[(a, b)] / n - mean[(a, b)] * mean[(a, b)]).max(0.0);
            se[(a, b)] = (var / n).sqrt();
        }
    }
    Ok(McInfo {
        info: InfoMatrix::from_matrix(mean)?,
        se,
        n_draws: 2 * n_pairs,
    })
}
