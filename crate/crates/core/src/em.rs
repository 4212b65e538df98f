//! Loglikelihood evaluation and EM fitting of the clusterwise linear
//! regression model, with multi-restart, convergence control, AIC-based
//! cluster-count selection, and label alignment.
//!
//! The M-step uses the standard weighted-MLE updates for a Gaussian
//! mixture of regressions: π_g is the mean responsibility, β_g solves the
//! responsibility-weighted least-squares normal equations, and σ²_g is the
//! weighted mean squared residual floored at [`SIGMA2_FLOOR`].

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{log_normal_pdf, log_sum_exp};
use crate::params::{ClrParams, SIGMA2_FLOOR};
use crate::rng::RngSpec;
use crate::selection::SelectionResult;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

/// Convergence controls for one EM run. Defaults: relative loglikelihood
/// change below 1e-8 or 500 iterations.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EmControls {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EmControls {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

// A cluster is degenerate when its total responsibility falls below 1e-8·k
// or below the p+2 points needed to identify its regression and variance
// (fewer leaves the weighted fit exact and drives σ² to the floor), or when
// σ² already sits at the floor. Degenerate clusters are reseeded from the
// worst-fit points; a restart that keeps collapsing falls back to its last
// stable state.
const DEGENERATE_RESP_FRAC: f64 = 1e-8;
const MAX_REINITS: usize = 10;

fn degenerate_cluster(
    sums: &[f64],
    params: &ClrParams,
    subset_len: usize,
    p: usize,
) -> Option<usize> {
    if sums.len() == 1 {
        // a single expert owns every point; a floored variance there means
        // genuinely noiseless data, not a collapsed mixture component
        return None;
    }
    let threshold = (DEGENERATE_RESP_FRAC * subset_len as f64).max((p + 2) as f64);
    (0..sums.len()).find(|&c| sums[c] < threshold || params.sigma2()[c] <= 2.0 * SIGMA2_FLOOR)
}

/// Posterior cluster membership probabilities w_ig for one subdata set;
/// each row sums to 1.
#[derive(Clone, Debug)]
pub struct Responsibilities {
    k: usize,
    g: usize,
    w: Vec<f64>, // row-major k x g
}

impl Responsibilities {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn g_count(&self) -> usize {
        self.g
    }

    #[inline]
    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.w[i * self.g + g]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.g..(i + 1) * self.g]
    }

    /// Total responsibility per cluster, Σ_i w_ig.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.g];
        for row in self.w.chunks_exact(self.g) {
            for (s, &w) in sums.iter_mut().zip(row) {
                *s += w;
            }
        }
        sums
    }
}

/// log Σ_g π_g φ(y | xᵀβ_g, σ²_g), computed via log-sum-exp.
pub fn log_density_point(x: &[f64], y: f64, params: &ClrParams) -> f64 {
    assert_eq!(x.len(), params.p() + 1, "design vector length");
    let mut terms = Vec::with_capacity(params.g_count());
    for g in 0..params.g_count() {
        let gamma = params.mean(g, x);
        terms.push(params.pi()[g].ln() + log_normal_pdf(y, gamma, params.sigma2()[g]));
    }
    log_sum_exp(&terms)
}

fn log_density_rows(data: &Dataset, subset: &SelectionResult, params: &ClrParams) -> Vec<f64> {
    let mut x = vec![0.0; data.p() + 1];
    subset
        .iter()
        .map(|i| {
            data.design_row(i, &mut x);
            log_density_point(&x, data.y(i), params)
        })
        .collect()
}

/// Mixture loglikelihood of the rows in `subset`.
pub fn loglik(data: &Dataset, subset: &SelectionResult, params: &ClrParams) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if params.p() != data.p() {
        return Err(Error::DimensionMismatch {
            what: "covariate count",
            expected: data.p(),
            actual: params.p(),
        });
    }
    Ok(log_density_rows(data, subset, params).iter().sum())
}

/// E-step: responsibilities w_ig = π_g φ_ig / Σ_l π_l φ_il, computed in
/// log-space and normalized so each row sums to 1.
pub fn e_step(data: &Dataset, subset: &SelectionResult, params: &ClrParams) -> Responsibilities {
    let g = params.g_count();
    let k = subset.len();
    let mut w = vec![0.0; k * g];
    let mut x = vec![0.0; data.p() + 1];
    let mut logs = vec![0.0; g];
    for (row, i) in subset.iter().enumerate() {
        data.design_row(i, &mut x);
        let y = data.y(i);
        for (c, slot) in logs.iter_mut().enumerate() {
            let gamma = params.mean(c, &x);
            *slot = params.pi()[c].ln() + log_normal_pdf(y, gamma, params.sigma2()[c]);
        }
        let norm = log_sum_exp(&logs);
        let out = &mut w[row * g..(row + 1) * g];
        let mut total = 0.0;
        for c in 0..g {
            out[c] = (logs[c] - norm).exp();
            total += out[c];
        }
        for v in out.iter_mut() {
            *v /= total;
        }
    }
    Responsibilities { k, g, w }
}

/// M-step: weighted-MLE updates from fixed responsibilities.
pub fn m_step(
    data: &Dataset,
    subset: &SelectionResult,
    resp: &Responsibilities,
) -> Result<ClrParams> {
    let g = resp.g_count();
    let p = data.p();
    let k = subset.len();
    assert_eq!(resp.k(), k, "responsibility rows");
    let mut beta = Vec::with_capacity(g);
    let mut sigma2 = Vec::with_capacity(g);
    let mut pi = Vec::with_capacity(g);
    let mut x = vec![0.0; p + 1];
    for c in 0..g {
        let mut gram = DMatrix::<f64>::zeros(p + 1, p + 1);
        let mut rhs = DVector::<f64>::zeros(p + 1);
        let mut total = 0.0;
        for (row, i) in subset.iter().enumerate() {
            let w = resp.get(row, c);
            data.design_row(i, &mut x);
            total += w;
            for a in 0..=p {
                let wa = w * x[a];
                rhs[a] += wa * data.y(i);
                for b in a..=p {
                    gram[(a, b)] += wa * x[b];
                }
            }
        }
        if total <= 0.0 {
            return Err(Error::EmptyCluster { cluster: c });
        }
        for a in 0..=p {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or(Error::SingularGram { cluster: c })?;
        let coeffs = chol.solve(&rhs);
        let mut rss = 0.0;
        for (row, i) in subset.iter().enumerate() {
            data.design_row(i, &mut x);
            let pred: f64 = coeffs.iter().zip(&x).map(|(b, v)| b * v).sum();
            let res = data.y(i) - pred;
            rss += resp.get(row, c) * res * res;
        }
        beta.push(coeffs.iter().copied().collect::<Vec<f64>>());
        sigma2.push((rss / total).max(SIGMA2_FLOOR));
        pi.push(total / k as f64);
    }
    ClrParams::new(beta, sigma2, pi)
}

/// Result of one EM fit: winning parameters plus convergence diagnostics.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ClrParams,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub aic: f64,
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("FitResult", 9)?;
        s.serialize_field("g", &self.params.g_count())?;
        s.serialize_field("beta", &self.params.beta_rows())?;
        s.serialize_field("sigma2", &self.params.sigma2())?;
        s.serialize_field("pi", &self.params.pi())?;
        s.serialize_field("loglik", &self.loglik)?;
        s.serialize_field("aic", &self.aic)?;
        s.serialize_field("iterations", &self.iterations)?;
        s.serialize_field("converged", &self.converged)?;
        s.serialize_field("restart_index", &self.restart_index)?;
        s.end()
    }
}

struct RestartOutcome {
    params: ClrParams,
    loglik: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn random_hard_init(
    data: &Dataset,
    subset: &SelectionResult,
    g: usize,
    rng: &mut impl Rng,
) -> Result<ClrParams> {
    let m = subset.len();
    let mut labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..g)).collect();
    let mut counts = vec![0usize; g];
    for &l in &labels {
        counts[l] += 1;
    }
    for c in 0..g {
        while counts[c] == 0 {
            let i = rng.random_range(0..m);
            if counts[labels[i]] > 1 {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] += 1;
            }
        }
    }
    let mut w = vec![0.0; m * g];
    for (row, &l) in labels.iter().enumerate() {
        w[row * g + l] = 1.0;
    }
    m_step(data, subset, &Responsibilities { k: m, g, w })
}

// Reseed a collapsed cluster from the 10% of points with the worst current
// log-density (at least p+2 of them, so its regression is identifiable).
fn reinit_cluster(
    resp: &mut Responsibilities,
    data: &Dataset,
    subset: &SelectionResult,
    params: &ClrParams,
    dead: usize,
) {
    let m = subset.len();
    let take = (m / 10).max(data.p() + 2).min(m);
    let dens = log_density_rows(data, subset, params);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&a, &b| dens[a].total_cmp(&dens[b]));
    let g = resp.g;
    for &row in &order[..take] {
        let slot = &mut resp.w[row * g..(row + 1) * g];
        for v in slot.iter_mut() {
            *v = 0.0;
        }
        slot[dead] = 1.0;
    }
}

fn run_restart(
    data: &Dataset,
    subset: &SelectionResult,
    g: usize,
    rng: RngSpec,
    controls: &EmControls,
) -> Result<RestartOutcome> {
    let mut r = rng.rng();
    let mut params = random_hard_init(data, subset, g, &mut r)?;
    let mut trace = vec![loglik(data, subset, &params)?];
    let mut converged = false;
    let mut iterations = 0;
    let mut reinits = 0;
    let mut gave_up = None;
    // last state in which every cluster was alive, the fallback when a
    // cluster the data cannot support keeps collapsing
    let mut last_stable: Option<(ClrParams, Vec<f64>, usize)> = None;
    for _ in 0..controls.max_iter {
        let mut resp = e_step(data, subset, &params);
        let sums = resp.column_sums();
        match degenerate_cluster(&sums, &params, subset.len(), data.p()) {
            Some(dead) if reinits >= MAX_REINITS => {
                gave_up = Some(dead);
                break;
            }
            Some(dead) => {
                reinit_cluster(&mut resp, data, subset, &params, dead);
                reinits += 1;
                // the ascent guarantee restarts from the reseeded state
                trace.clear();
            }
            None => last_stable = Some((params.clone(), trace.clone(), iterations)),
        }
        params = m_step(data, subset, &resp)?;
        let ll = loglik(data, subset, &params)?;
        let prev = trace.last().copied();
        trace.push(ll);
        iterations += 1;
        if let Some(prev) = prev {
            if (ll - prev).abs() <= controls.tol * prev.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }
    if gave_up.is_none() {
        let sums = e_step(data, subset, &params).column_sums();
        gave_up = degenerate_cluster(&sums, &params, subset.len(), data.p());
    }
    if let Some(dead) = gave_up {
        let (p, t, i) = match last_stable {
            Some(state) => state,
            None => return Err(Error::EmptyCluster { cluster: dead }),
        };
        return Ok(RestartOutcome {
            loglik: *t.last().expect("trace nonempty"),
            params: p,
            trace: t,
            iterations: i,
            converged: false,
        });
    }
    Ok(RestartOutcome {
        loglik: *trace.last().expect("trace nonempty"),
        params,
        trace,
        iterations,
        converged,
    })
}

/// Fit by EM with `restarts` independent random initializations, returning
/// the best-loglikelihood run. Restarts execute concurrently, each on its
/// own derived random stream, so the outcome does not depend on scheduling.
pub fn em_fit(
    data: &Dataset,
    subset: &SelectionResult,
    g: usize,
    restarts: usize,
    rng: RngSpec,
    controls: &EmControls,
) -> Result<FitResult> {
    if g == 0 {
        return Err(Error::InvalidClusterCount { g });
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be ≥ 1".into()));
    }
    let needed = g * (data.p() + 2);
    if subset.len() < needed {
        return Err(Error::SubsetTooSmallForFit {
            got: subset.len(),
            needed,
            g,
        });
    }
    let outcomes: Vec<Result<RestartOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|s| run_restart(data, subset, g, rng.stream(s as u64), controls))
        .collect();
    let mut best: Option<(usize, RestartOutcome)> = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        if let Ok(out) = outcome {
            let better = match &best {
                Some((_, cur)) => out.loglik > cur.loglik,
                None => true,
            };
            if better {
                best = Some((idx, out));
            }
        }
    }
    let (restart_index, out) = best.ok_or(Error::AllRestartsDegenerate { restarts })?;
    let dim = out.params.theta_dim() as f64;
    Ok(FitResult {
        aic: 2.0 * dim - 2.0 * out.loglik,
        params: out.params,
        loglik: out.loglik,
        loglik_trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
        restart_index,
    })
}

/// Fits for every candidate cluster count plus the AIC choice.
#[derive(Clone, Debug)]
pub struct GSelection {
    pub candidates: Vec<usize>,
    pub fits: Vec<FitResult>,
    /// Index into `candidates`/`fits` of the AIC minimizer (ties toward
    /// smaller G).
    pub chosen_index: usize,
}

impl GSelection {
    pub fn chosen(&self) -> &FitResult {
        &self.fits[self.chosen_index]
    }

    pub fn chosen_g(&self) -> usize {
        self.candidates[self.chosen_index]
    }
}

/// Fit each candidate G and choose the AIC minimizer.
pub fn select_g(
    data: &Dataset,
    subset: &SelectionResult,
    g_candidates: &[usize],
    restarts: usize,
    rng: RngSpec,
    controls: &EmControls,
) -> Result<GSelection> {
    if g_candidates.is_empty() {
        return Err(Error::InvalidConfig("empty G candidate list".into()));
    }
    let mut fits = Vec::with_capacity(g_candidates.len());
    for &g in g_candidates {
        fits.push(em_fit(
            data,
            subset,
            g,
            restarts,
            rng.stream(g as u64),
            controls,
        )?);
    }
    let mut chosen_index = 0;
    for i in 1..fits.len() {
        let (a, ga) = (fits[i].aic, g_candidates[i]);
        let (b, gb) = (fits[chosen_index].aic, g_candidates[chosen_index]);
        if a < b || (a == b && ga < gb) {
            chosen_index = i;
        }
    }
    Ok(GSelection {
        candidates: g_candidates.to_vec(),
        fits,
        chosen_index,
    })
}

// Exact min-cost assignment via the Hungarian algorithm with potentials,
// O(n³). Returns the column assigned to each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // row matched to each column, 0 = none
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0usize; n];
    for j in 1..=n {
        if assigned_row[j] > 0 {
            result[assigned_row[j] - 1] = j - 1;
        }
    }
    result
}

/// Permute the clusters of `fitted` to minimize Σ_g ‖β̂_{perm(g)} − β_g^ref‖²,
/// resolving label switching before any MSE computation.
pub fn align_labels(fitted: &ClrParams, reference: &ClrParams) -> Result<ClrParams> {
    let g = fitted.g_count();
    if g != reference.g_count() {
        return Err(Error::ClusterCountMismatch {
            left: g,
            right: reference.g_count(),
        });
    }
    if fitted.p() != reference.p() {
        return Err(Error::DimensionMismatch {
            what: "covariate count",
            expected: reference.p(),
            actual: fitted.p(),
        });
    }
    let cost: Vec<Vec<f64>> = (0..g)
        .map(|f| {
            (0..g)
                .map(|r| {
                    fitted
                        .beta(f)
                        .iter()
                        .zip(reference.beta(r))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    let slot_of = min_cost_assignment(&cost);
    let mut beta = vec![Vec::new(); g];
    let mut sigma2 = vec![0.0; g];
    let mut pi = vec![0.0; g];
    for (f, &r) in slot_of.iter().enumerate() {
        beta[r] = fitted.beta(f).to_vec();
        sigma2[r] = fitted.sigma2()[f];
        pi[r] = fitted.pi()[f];
    }
    ClrParams::new(beta, sigma2, pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::select_full;
    use rand_distr::{Distribution, StandardNormal};

    fn single_params(beta: Vec<f64>, sigma2: f64) -> ClrParams {
        ClrParams::new(vec![beta], vec![sigma2], vec![1.0]).unwrap()
    }

    #[test]
    fn log_density_unit_height_peak() {
        let s2 = 1.0 / (2.0 * std::f64::consts::PI);
        let params = single_params(vec![0.5, 2.0], s2);
        let x = [1.0, 3.0];
        let y = params.mean(0, &x);
        assert!(log_density_point(&x, y, &params).abs() < 1e-14);
    }

    #[test]
    fn collapsed_mixture_equals_single_gaussian() {
        let two = ClrParams::new(
            vec![vec![1.0, -2.0], vec![1.0, -2.0]],
            vec![1.5, 1.5],
            vec![0.5, 0.5],
        )
        .unwrap();
        let one = single_params(vec![1.0, -2.0], 1.5);
        let x = [1.0, 0.7];
        for y in [-3.0, 0.0, 2.5] {
            let a = log_density_point(&x, y, &two);
            let b = log_density_point(&x, y, &one);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_component_density_matches_direct_arithmetic() {
        // intercept-only experts with means 0 and 2
        let params =
            ClrParams::new(vec![vec![0.0], vec![2.0]], vec![1.0, 1.0], vec![0.3, 0.7]).unwrap();
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let phi0 = inv_sqrt_2pi; // φ(0|0,1)
        let phi2 = inv_sqrt_2pi * (-2.0f64).exp(); // φ(0|2,1)
        let expected = (0.3 * phi0 + 0.7 * phi2).ln();
        let got = log_density_point(&[1.0], 0.0, &params);
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn log_sum_exp_keeps_huge_offsets_finite() {
        let params =
            ClrParams::new(vec![vec![0.0], vec![1e4]], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let v = log_density_point(&[1.0], 0.0, &params);
        assert!(v.is_finite());
        // dominated by the near component: log(0.5 φ(0|0,1))
        let expected = 0.5f64.ln() - 0.5 * crate::math::LN_2PI;
        assert!((v - expected).abs() < 1e-10);
    }

    fn toy_dataset(n: usize, seed: u64, params: &ClrParams) -> Dataset {
        let mut rng = RngSpec::new(seed).rng();
        let p = params.p();
        let mut z = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut x = vec![0.0; p + 1];
        for _ in 0..n {
            x[0] = 1.0;
            for j in 0..p {
                let v: f64 = StandardNormal.sample(&mut rng);
                z.push(v);
                x[j + 1] = v;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut g = params.g_count() - 1;
            for (c, &w) in params.pi().iter().enumerate() {
                acc += w;
                if u < acc {
                    g = c;
                    break;
                }
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            y.push(params.mean(g, &x) + params.sigma2()[g].sqrt() * noise);
        }
        Dataset::new(n, p, z, y).unwrap()
    }

    #[test]
    fn loglik_singleton_and_additivity() {
        let params = ClrParams::new(
            vec![vec![0.0, 1.0], vec![2.0, -1.0]],
            vec![1.0, 2.0],
            vec![0.4, 0.6],
        )
        .unwrap();
        let data = toy_dataset(20, 3, &params);
        let single = SelectionResult {
            method: crate::selection::Method::Full,
            k: 1,
            indices: vec![7],
        };
        let mut x = vec![0.0; 2];
        data.design_row(7, &mut x);
        let expected = log_density_point(&x, data.y(7), &params);
        assert!((loglik(&data, &single, &params).unwrap() - expected).abs() < 1e-14);

        // duplicated dataset: loglik exactly doubles
        let mut z2 = Vec::new();
        let mut y2 = Vec::new();
        for i in 0..data.n() {
            for _ in 0..2 {
                z2.extend_from_slice(data.z_row(i));
                y2.push(data.y(i));
            }
        }
        let doubled = Dataset::new(2 * data.n(), data.p(), z2, y2).unwrap();
        let a = loglik(&data, &select_full(&data), &params).unwrap();
        let b = loglik(&doubled, &select_full(&doubled), &params).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn loglik_matches_termwise_summation_oracle() {
        let params = ClrParams::new(
            vec![vec![0.5, 1.0, -1.0], vec![-2.0, 0.0, 3.0]],
            vec![1.0, 4.0],
            vec![0.35, 0.65],
        )
        .unwrap();
        let data = toy_dataset(50, 11, &params);
        let full = select_full(&data);
        // independent oracle: densities summed term by term without
        // log-space shortcuts
        let mut expected = 0.0;
        for i in 0..data.n() {
            let mut density = 0.0;
            for g in 0..2 {
                let mut mean = params.beta(g)[0];
                for j in 0..data.p() {
                    mean += params.beta(g)[j + 1] * data.z(i, j);
                }
                let s2 = params.sigma2()[g];
                let d = data.y(i) - mean;
                density += params.pi()[g] * (-d * d / (2.0 * s2)).exp()
                    / (2.0 * std::f64::consts::PI * s2).sqrt();
            }
            expected += density.ln();
        }
        let got = loglik(&data, &full, &params).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn e_step_basics() {
        let one = single_params(vec![0.0, 1.0], 1.0);
        let data = toy_dataset(10, 5, &one);
        let resp = e_step(&data, &select_full(&data), &one);
        for i in 0..10 {
            assert_eq!(resp.get(i, 0), 1.0);
        }

        // equidistant point between symmetric clusters
        let sym =
            ClrParams::new(vec![vec![-1.0], vec![1.0]], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let d = Dataset::new(1, 1, vec![0.0], vec![0.0]).unwrap();
        let resp = e_step(&d, &select_full(&d), &sym);
        assert!((resp.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((resp.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn e_step_matches_direct_ratio() {
        let params = ClrParams::new(
            vec![vec![0.0, 1.0], vec![1.0, -1.0], vec![-2.0, 0.5]],
            vec![1.0, 0.5, 2.0],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let data = toy_dataset(40, 23, &params);
        let full = select_full(&data);
        let resp = e_step(&data, &full, &params);
        let mut x = vec![0.0; 2];
        for i in 0..data.n() {
            data.design_row(i, &mut x);
            let y = data.y(i);
            let mut dens = [0.0; 3];
            for (g, slot) in dens.iter_mut().enumerate() {
                let s2 = params.sigma2()[g];
                let d = y - params.mean(g, &x);
                *slot = params.pi()[g] * (-d * d / (2.0 * s2)).exp()
                    / (2.0 * std::f64::consts::PI * s2).sqrt();
            }
            let total: f64 = dens.iter().sum();
            let mut row_sum = 0.0;
            for (g, &d) in dens.iter().enumerate() {
                assert!((resp.get(i, g) - d / total).abs() < 1e-12);
                row_sum += resp.get(i, g);
            }
            assert!((row_sum - 1.0).abs() < 1e-12);
        }
    }

    fn ols(data: &Dataset, rows: &[usize]) -> DVector<f64> {
        let p = data.p();
        let mut xt_x = DMatrix::<f64>::zeros(p + 1, p + 1);
        let mut xt_y = DVector::<f64>::zeros(p + 1);
        let mut x = vec![0.0; p + 1];
        for &i in rows {
            data.design_row(i, &mut x);
            for a in 0..=p {
                xt_y[a] += x[a] * data.y(i);
                for b in 0..=p {
                    xt_x[(a, b)] += x[a] * x[b];
                }
            }
        }
        xt_x.cholesky().unwrap().solve(&xt_y)
    }

    #[test]
    fn m_step_single_cluster_is_ols() {
        let truth = single_params(vec![1.0, 2.0], 0.5);
        let data = toy_dataset(60, 9, &truth);
        let full = select_full(&data);
        let resp = Responsibilities {
            k: 60,
            g: 1,
            w: vec![1.0; 60],
        };
        let fitted = m_step(&data, &full, &resp).unwrap();
        let reference = ols(&data, &full.indices);
        for j in 0..2 {
            assert!((fitted.beta(0)[j] - reference[j]).abs() < 1e-10);
        }
        assert!((fitted.pi()[0] - 1.0).abs() < 1e-15);
        // σ² equals the mean squared residual
        let mut rss = 0.0;
        let mut x = vec![0.0; 2];
        for i in 0..60 {
            data.design_row(i, &mut x);
            let r = data.y(i) - fitted.mean(0, &x);
            rss += r * r;
        }
        assert!((fitted.sigma2()[0] - rss / 60.0).abs() < 1e-12);
    }

    #[test]
    fn m_step_hard_responsibilities_decouple() {
        let truth = ClrParams::new(
            vec![vec![0.0, 1.0], vec![10.0, -1.0]],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let data = toy_dataset(80, 31, &truth);
        let full = select_full(&data);
        let mut w = vec![0.0; 80 * 2];
        let (mut rows0, mut rows1) = (Vec::new(), Vec::new());
        for i in 0..80 {
            if i % 2 == 0 {
                w[i * 2] = 1.0;
                rows0.push(i);
            } else {
                w[i * 2 + 1] = 1.0;
                rows1.push(i);
            }
        }
        let fitted = m_step(&data, &full, &Responsibilities { k: 80, g: 2, w }).unwrap();
        let b0 = ols(&data, &rows0);
        let b1 = ols(&data, &rows1);
        for j in 0..2 {
            assert!((fitted.beta(0)[j] - b0[j]).abs() < 1e-10);
            assert!((fitted.beta(1)[j] - b1[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn m_step_soft_weights_match_dense_solve() {
        let truth = ClrParams::new(
            vec![vec![0.0, 1.0, 2.0], vec![3.0, -1.0, 0.5]],
            vec![1.0, 2.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let data = toy_dataset(30, 77, &truth);
        let full = select_full(&data);
        let mut rng = RngSpec::new(5).rng();
        let mut w = vec![0.0; 30 * 2];
        for i in 0..30 {
            let a: f64 = rng.random_range(0.05..0.95);
            w[i * 2] = a;
            w[i * 2 + 1] = 1.0 - a;
        }
        let resp = Responsibilities {
            k: 30,
            g: 2,
            w: w.clone(),
        };
        let fitted = m_step(&data, &full, &resp).unwrap();
        // dense generic solve of the weighted normal equations
        for c in 0..2 {
            let p = data.p();
            let mut xtwx = DMatrix::<f64>::zeros(p + 1, p + 1);
            let mut xtwy = DVector::<f64>::zeros(p + 1);
            let mut x = vec![0.0; p + 1];
            for i in 0..30 {
                data.design_row(i, &mut x);
                let wi = w[i * 2 + c];
                for a in 0..=p {
                    xtwy[a] += wi * x[a] * data.y(i);
                    for b in 0..=p {
                        xtwx[(a, b)] += wi * x[a] * x[b];
                    }
                }
            }
            let beta = xtwx.lu().solve(&xtwy).unwrap();
            for j in 0..=p {
                assert!((fitted.beta(c)[j] - beta[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn em_fit_single_cluster_matches_ols() {
        let truth = single_params(vec![2.0, -1.5], 1.0);
        let data = toy_dataset(120, 41, &truth);
        let full = select_full(&data);
        let fit = em_fit(&data, &full, 1, 3, RngSpec::new(1), &EmControls::default()).unwrap();
        let reference = ols(&data, &full.indices);
        for j in 0..2 {
            assert!((fit.params.beta(0)[j] - reference[j]).abs() < 1e-8);
        }
        assert!(fit.converged);
    }

    #[test]
    fn em_fit_recovers_separated_intercepts() {
        // intercepts 0 and 100, σ = 1; recovery within 0.5 in ≥95% of runs
        let truth = ClrParams::new(
            vec![vec![0.0, 1.0], vec![100.0, 1.0]],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let mut hits = 0;
        for run in 0..100 {
            let data = toy_dataset(200, 1000 + run, &truth);
            let full = select_full(&data);
            let fit = em_fit(
                &data,
                &full,
                2,
                5,
                RngSpec::new(run),
                &EmControls::default(),
            )
            .unwrap();
            let aligned = align_labels(&fit.params, &truth).unwrap();
            let ok =
                (aligned.beta(0)[0] - 0.0).abs() < 0.5 && (aligned.beta(1)[0] - 100.0).abs() < 0.5;
            if ok {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 runs recovered the intercepts");
    }

    #[test]
    fn em_trace_is_nondecreasing() {
        let truth = ClrParams::new(
            vec![vec![0.0, 1.0], vec![5.0, -2.0]],
            vec![1.0, 2.0],
            vec![0.4, 0.6],
        )
        .unwrap();
        for seed in 0..10 {
            let data = toy_dataset(150, 600 + seed, &truth);
            let full = select_full(&data);
            let fit = em_fit(
                &data,
                &full,
                2,
                2,
                RngSpec::new(seed),
                &EmControls::default(),
            )
            .unwrap();
            for w in fit.loglik_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "trace decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn e_then_m_is_a_fixed_point_at_convergence() {
        let truth = ClrParams::new(
            vec![vec![0.0, 2.0], vec![8.0, -1.0]],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let data = toy_dataset(300, 87, &truth);
        let full = select_full(&data);
        let controls = EmControls {
            max_iter: 2000,
            tol: 1e-13,
        };
        let fit = em_fit(&data, &full, 2, 4, RngSpec::new(2), &controls).unwrap();
        let resp = e_step(&data, &full, &fit.params);
        let next = m_step(&data, &full, &resp).unwrap();
        let a = fit.params.theta_flatten();
        let b = next.theta_flatten();
        let drift = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-6, "θ moved by {drift} after an extra E+M step");
    }

    #[test]
    fn select_g_prefers_true_cluster_count() {
        // A bounded EM budget for model comparison: exhaustive EM keeps
        // refining spurious near-degenerate components whose loglik gain
        // exceeds the AIC penalty ~10% of the time per cluster, which is the
        // known behavior of the mixture LRT, not a defect of the search.
        let controls = EmControls {
            max_iter: 60,
            tol: 1e-6,
        };

        // single-cluster data: AIC should pick G=1 in ≥90% of runs
        let one = single_params(vec![0.0, 1.0], 1.0);
        let mut ones = 0;
        for run in 0..50 {
            let data = toy_dataset(800, 1000 + run, &one);
            let full = select_full(&data);
            let sel = select_g(&data, &full, &[1, 2], 3, RngSpec::new(run), &controls).unwrap();
            if sel.chosen_g() == 1 {
                ones += 1;
            }
        }
        assert!(ones >= 45, "AIC chose G=1 only {ones}/50 times");

        // well separated two-cluster data: AIC should pick G=2
        let two = ClrParams::new(
            vec![vec![0.0, 1.0], vec![30.0, -1.0]],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let mut twos = 0;
        for run in 0..50 {
            let data = toy_dataset(800, 7000 + run, &two);
            let full = select_full(&data);
            let sel = select_g(&data, &full, &[1, 2, 3], 3, RngSpec::new(run), &controls).unwrap();
            if sel.chosen_g() == 2 {
                twos += 1;
            }
        }
        assert!(twos >= 45, "AIC chose G=2 only {twos}/50 times");

        // singleton candidate list is trivially chosen
        let data = toy_dataset(100, 9, &one);
        let full = select_full(&data);
        let sel = select_g(&data, &full, &[2], 2, RngSpec::new(0), &controls).unwrap();
        assert_eq!(sel.chosen_g(), 2);
    }

    #[test]
    fn align_labels_recovers_swap_and_identity() {
        let reference = ClrParams::new(
            vec![vec![0.0, 1.0], vec![5.0, -1.0]],
            vec![1.0, 2.0],
            vec![0.3, 0.7],
        )
        .unwrap();
        let swapped = ClrParams::new(
            vec![vec![5.0, -1.0], vec![0.0, 1.0]],
            vec![2.0, 1.0],
            vec![0.7, 0.3],
        )
        .unwrap();
        let aligned = align_labels(&swapped, &reference).unwrap();
        assert_eq!(aligned.beta(0), reference.beta(0));
        assert_eq!(aligned.beta(1), reference.beta(1));
        assert_eq!(aligned.sigma2(), reference.sigma2());

        let same = align_labels(&reference, &reference).unwrap();
        assert_eq!(same.beta_rows(), reference.beta_rows());

        // idempotent after the first application
        let again = align_labels(&aligned, &reference).unwrap();
        assert_eq!(again.beta_rows(), aligned.beta_rows());
    }

    #[test]
    fn align_labels_recovers_planted_permutation() {
        let mut rng = RngSpec::new(404).rng();
        for _ in 0..50 {
            let g = 3;
            let p = 2;
            let beta: Vec<Vec<f64>> = (0..g)
                .map(|c| {
                    (0..=p)
                        .map(|_| 10.0 * c as f64 + rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            let reference =
                ClrParams::new(beta.clone(), vec![1.0; g], vec![1.0 / g as f64; g]).unwrap();
            // plant a permutation plus small noise (well below half the
            // minimum inter-β distance)
            let perm = [2usize, 0, 1];
            let noisy: Vec<Vec<f64>> = (0..g)
                .map(|c| {
                    beta[perm[c]]
                        .iter()
                        .map(|b| b + rng.random_range(-0.2..0.2))
                        .collect()
                })
                .collect();
            let fitted = ClrParams::new(noisy, vec![1.0; g], vec![1.0 / g as f64; g]).unwrap();
            let aligned = align_labels(&fitted, &reference).unwrap();
            for c in 0..g {
                for j in 0..=p {
                    assert!((aligned.beta(c)[j] - reference.beta(c)[j]).abs() < 0.5);
                }
            }
        }
    }

    #[test]
    fn assignment_matches_permutation_enumeration() {
        fn brute_force(cost: &[Vec<f64>]) -> f64 {
            let n = cost.len();
            let mut cols: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut cols, 0, cost, &mut best);
            best
        }
        fn permute(cols: &mut Vec<usize>, i: usize, cost: &[Vec<f64>], best: &mut f64) {
            let n = cols.len();
            if i == n {
                let total: f64 = (0..n).map(|r| cost[r][cols[r]]).sum();
                if total < *best {
                    *best = total;
                }
                return;
            }
            for j in i..n {
                cols.swap(i, j);
                permute(cols, i + 1, cost, best);
                cols.swap(i, j);
            }
        }

        let mut rng = RngSpec::new(88).rng();
        for n in 2..=5usize {
            for _ in 0..40 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect())
                    .collect();
                let assignment = min_cost_assignment(&cost);
                let mut seen = vec![false; n];
                let mut total = 0.0;
                for (r, &c) in assignment.iter().enumerate() {
                    assert!(!seen[c], "assignment not a bijection");
                    seen[c] = true;
                    total += cost[r][c];
                }
                let best = brute_force(&cost);
                assert!((total - best).abs() < 1e-9, "hungarian {total} vs {best}");
            }
        }
    }
}
