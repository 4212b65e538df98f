//! Synthetic data generation from the mixture regression model, plus the
//! stock configurations used by the CLI and the test harness.

use crate::data::Dataset;
use crate::em::EmControls;
use crate::error::Result;
use crate::info::CovariateFamily;
use crate::params::ClrParams;
use crate::rng::RngSpec;
use crate::selection::Method;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SimConfig;

/// Draw a full dataset from the configured truth: covariates multivariate
/// normal (or componentwise exp of one, for the lognormal family), latent
/// cluster labels from π, and responses from the labeled expert. Returns the
/// labels alongside for generator diagnostics.
pub fn gen_clr_data(config: &SimConfig, rng: RngSpec) -> Result<(Dataset, Vec<usize>)> {
    config.validate()?;
    let p = config.p();
    let n = config.n_full;
    let truth = &config.truth;
    let chol = config
        .sigma_z_matrix()
        .cholesky()
        .ok_or(crate::error::Error::NotSpd)?;
    let l = chol.l();
    let mut r = rng.rng();
    let mut z = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut eps = vec![0.0; p];
    let mut x = vec![0.0; p + 1];
    let g_count = truth.g_count();
    for _ in 0..n {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut r);
        }
        x[0] = 1.0;
        for j in 0..p {
            let mut v = config.mu_z[j];
            for (m, &e) in eps.iter().enumerate().take(j + 1) {
                v += l[(j, m)] * e;
            }
            if config.family == CovariateFamily::Lognormal {
                v = v.exp();
            }
            z.push(v);
            x[j + 1] = v;
        }
        let u: f64 = r.random();
        let mut label = g_count - 1;
        let mut acc = 0.0;
        for (g, &w) in truth.pi().iter().enumerate() {
            acc += w;
            if u < acc {
                label = g;
                break;
            }
        }
        labels.push(label);
        let noise: f64 = StandardNormal.sample(&mut r);
        y.push(truth.mean(label, &x) + truth.sigma2()[label].sqrt() * noise);
    }
    Ok((Dataset::new(n, p, z, y)?, labels))
}

fn equicorrelated(p: usize, off_diag: f64) -> Vec<Vec<f64>> {
    (0..p)
        .map(|a| {
            (0..p)
                .map(|b| if a == b { 1.0 } else { off_diag })
                .collect()
        })
        .collect()
}

/// The large simulation configuration: p=10, G=5, π=(0.1,0.1,0.2,0.3,0.3),
/// σ_g=g, intercepts β_{g,0}=g, slopes (g, g+1, …, g+9), unit-variance
/// covariates with 0.5 cross-correlation, k=10000. Full-scale runs are slow;
/// the CLI gates this behind `--paper-scale`.
pub fn default_paper_config() -> SimConfig {
    let g_count = 5;
    let p = 10;
    let beta: Vec<Vec<f64>> = (1..=g_count)
        .map(|g| {
            let mut row = vec![g as f64];
            row.extend((0..p).map(|j| (g + j) as f64));
            row
        })
        .collect();
    let sigma2: Vec<f64> = (1..=g_count).map(|g| (g * g) as f64).collect();
    let pi = vec![0.1, 0.1, 0.2, 0.3, 0.3];
    SimConfig {
        family: CovariateFamily::Normal,
        mu_z: vec![0.0; p],
        sigma_z: equicorrelated(p, 0.5),
        truth: ClrParams::new(beta, sigma2, pi).expect("paper truth is valid"),
        n_full: 100_000,
        k: 10_000,
        replicates: 100,
        methods: vec![Method::Iboss, Method::Random, Method::Full],
        restarts: 5,
        controls: EmControls::default(),
        rng: RngSpec::new(0),
    }
}

/// Shrunk configuration for desk-scale runs: p=3, G=2, k=996 (the per-tail
/// count k/(2p) must be an integer, which rules out k=1000 at p=3), N=10⁴,
/// 20 replicates.
pub fn desk_scale_config() -> SimConfig {
    let truth = ClrParams::new(
        vec![vec![1.0, 1.0, 2.0, 3.0], vec![-1.0, -2.0, 1.0, -3.0]],
        vec![1.0, 4.0],
        vec![0.4, 0.6],
    )
    .expect("desk truth is valid");
    SimConfig {
        family: CovariateFamily::Normal,
        mu_z: vec![0.0; 3],
        sigma_z: equicorrelated(3, 0.5),
        truth,
        n_full: 10_000,
        k: 996,
        replicates: 20,
        methods: vec![Method::Iboss, Method::Random, Method::Full],
        restarts: 5,
        controls: EmControls::default(),
        rng: RngSpec::new(0),
    }
}

/// Two-cluster single-covariate stand-in for the real-data bootstrap
/// protocol; the reference CSV is not redistributed, so tests generate a
/// synthetic dataset with the same shape.
pub fn bootstrap_standin_config(n_full: usize, seed: u64) -> SimConfig {
    // the two lines cross at z = -30, far outside the data range, so the
    // clusters stay distinguishable over the whole design
    let truth = ClrParams::new(
        vec![vec![0.0, 2.0], vec![30.0, 3.0]],
        vec![1.0, 2.25],
        vec![0.45, 0.55],
    )
    .expect("stand-in truth is valid");
    SimConfig {
        family: CovariateFamily::Normal,
        mu_z: vec![0.0],
        sigma_z: vec![vec![1.0]],
        truth,
        n_full,
        k: 1000.min(n_full & !1),
        replicates: 1,
        methods: vec![Method::Iboss, Method::Random],
        restarts: 5,
        controls: EmControls::default(),
        rng: RngSpec::new(seed),
    }
}
