//! Study runners. Replicates are embarrassingly parallel with per-replicate
//! random streams; results are reduced in replicate order so reports are
//! bit-identical across thread counts. Timing-sensitive comparisons should
//! run with a single-thread pool (the CLI's `--serial`).

use crate::data::Dataset;
use crate::em::{align_labels, em_fit, EmControls};
use crate::error::{Error, Result};
use crate::params::ClrParams;
use crate::rng::RngSpec;
use crate::selection::{
    select_full, select_iboss, select_random, Method, SelectionPlan, SelectionResult,
};
use rand::Rng;
use rayon::prelude::*;
use std::io::Write;
use std::time::Instant;

use super::{gen_clr_data, mse_report, ExperimentReport, MethodStats, ReplicateRow, SimConfig};

struct MethodOutcome {
    aligned: Option<ClrParams>,
    t_select: f64,
    t_fit: f64,
}

fn select_for(
    method: Method,
    data: &Dataset,
    k: usize,
    plan: Option<&SelectionPlan>,
    rng: RngSpec,
) -> Result<SelectionResult> {
    match method {
        Method::Iboss => select_iboss(data, plan.expect("validated plan")),
        Method::Random => select_random(data, k, rng),
        Method::Full => Ok(select_full(data)),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_method_pipeline(
    method: Method,
    data: &Dataset,
    k: usize,
    plan: Option<&SelectionPlan>,
    g: usize,
    restarts: usize,
    reference: &ClrParams,
    select_rng: RngSpec,
    fit_rng: RngSpec,
    controls: &EmControls,
) -> Result<MethodOutcome> {
    let t0 = Instant::now();
    let subset = select_for(method, data, k, plan, select_rng)?;
    let t_select = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let fit = em_fit(data, &subset, g, restarts, fit_rng, controls);
    let t_fit = t1.elapsed().as_secs_f64();
    let aligned = match fit {
        Ok(f) => Some(align_labels(&f.params, reference)?),
        Err(Error::AllRestartsDegenerate { .. }) | Err(Error::EmptyCluster { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(MethodOutcome {
        aligned,
        t_select,
        t_fit,
    })
}

fn aggregate_methods(
    methods: &[Method],
    per_replicate: &[Vec<MethodOutcome>],
    reference: &ClrParams,
    n_full: usize,
    rows: &mut Vec<ReplicateRow>,
) -> Result<Vec<MethodStats>> {
    let mut stats = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let mut aligned = Vec::new();
        let mut t_select_total = 0.0;
        let mut t_fit_total = 0.0;
        let mut failures = 0usize;
        for (rep, outcomes) in per_replicate.iter().enumerate() {
            let out = &outcomes[mi];
            match &out.aligned {
                Some(params) => {
                    let (b0, b1) = mse_report(std::slice::from_ref(params), reference)?;
                    rows.push(ReplicateRow {
                        method,
                        n: n_full,
                        replicate: rep,
                        mse_b0: b0,
                        mse_b1: b1,
                        t_select: out.t_select,
                        t_fit: out.t_fit,
                    });
                    aligned.push(params.clone());
                    t_select_total += out.t_select;
                    t_fit_total += out.t_fit;
                }
                None => failures += 1,
            }
        }
        if aligned.is_empty() {
            return Err(Error::AllRestartsDegenerate {
                restarts: per_replicate.len(),
            });
        }
        let used = aligned.len();
        let (mse_intercept, mse_slopes) = mse_report(&aligned, reference)?;
        stats.push(MethodStats {
            method,
            mse_intercept,
            mse_slopes,
            cpu_select_seconds: t_select_total / used as f64,
            cpu_fit_seconds: t_fit_total / used as f64,
            eff_vs_iboss: None,
            replicates_used: used,
            failures,
        });
    }
    fill_efficiency(&mut stats);
    Ok(stats)
}

fn fill_efficiency(stats: &mut [MethodStats]) {
    let baseline = stats
        .iter()
        .find(|s| s.method == Method::Iboss)
        .map(|s| (s.mse_slopes, s.cpu_select_seconds + s.cpu_fit_seconds));
    if let Some((mse_b, time_b)) = baseline {
        for s in stats.iter_mut() {
            let time_a = s.cpu_select_seconds + s.cpu_fit_seconds;
            s.eff_vs_iboss = if s.method == Method::Iboss {
                Some(1.0)
            } else {
                super::relative_efficiency(s.mse_slopes, time_a, mse_b, time_b).ok()
            };
        }
    }
}

/// Run the simulation study described by `config`: per replicate, generate a
/// fresh dataset, run every method pipeline (selection timed separately from
/// fitting), align labels to the truth, and aggregate MSEs. Failed EM
/// replicates are excluded and counted.
pub fn run_simulation(config: &SimConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let plan = if config.methods.contains(&Method::Iboss) {
        Some(SelectionPlan::new(config.k, config.p())?)
    } else {
        None
    };
    let g = config.truth.g_count();
    let per_replicate: Vec<Result<Vec<MethodOutcome>>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_rng = config.rng.stream(rep as u64);
            let (data, _) = gen_clr_data(config, rep_rng.stream(0))?;
            config
                .methods
                .iter()
                .enumerate()
                .map(|(mi, &method)| {
                    run_method_pipeline(
                        method,
                        &data,
                        config.k,
                        plan.as_ref(),
                        g,
                        config.restarts,
                        &config.truth,
                        rep_rng.stream(1 + mi as u64),
                        rep_rng.stream(100 + mi as u64),
                        &config.controls,
                    )
                })
                .collect()
        })
        .collect();
    let per_replicate: Vec<Vec<MethodOutcome>> =
        per_replicate.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let methods = aggregate_methods(
        &config.methods,
        &per_replicate,
        &config.truth,
        config.n_full,
        &mut rows,
    )?;
    Ok(ExperimentReport {
        seed: config.rng.seed,
        stream: config.rng.stream,
        config_hash: config.digest(),
        n_full: config.n_full,
        k: config.k,
        methods,
        rows,
    })
}

/// One bootstrap study at a fixed sample size n.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct BootstrapReport {
    pub n: usize,
    pub report: ExperimentReport,
}

/// Bootstrap comparison on observed data: fit the full data once for the
/// reference coefficients, then for each sample size n draw `b_samples`
/// bootstrap resamples, select subdata of size k by each method, fit, align
/// to the full-data reference, and score against its coefficients.
#[allow(clippy::too_many_arguments)]
pub fn run_bootstrap(
    data: &Dataset,
    g: usize,
    n_values: &[usize],
    k: usize,
    b_samples: usize,
    methods: &[Method],
    restarts: usize,
    rng: RngSpec,
    controls: &EmControls,
) -> Result<Vec<BootstrapReport>> {
    if n_values.is_empty() {
        return Err(Error::InvalidConfig("no bootstrap sizes requested".into()));
    }
    if b_samples == 0 {
        return Err(Error::InvalidConfig("b_samples must be ≥ 1".into()));
    }
    for &n in n_values {
        if n > data.n() {
            return Err(Error::SubdataExceedsData { k: n, n: data.n() });
        }
        if k > n {
            return Err(Error::SubdataExceedsData { k, n });
        }
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let plan = if methods.contains(&Method::Iboss) {
        Some(SelectionPlan::new(k, data.p())?)
    } else {
        None
    };
    let full_fit = em_fit(
        data,
        &select_full(data),
        g,
        restarts,
        rng.stream(0),
        controls,
    )?;
    let reference = full_fit.params;
    let mut reports = Vec::with_capacity(n_values.len());
    for (ni, &n) in n_values.iter().enumerate() {
        let per_sample: Vec<Result<Vec<MethodOutcome>>> = (0..b_samples)
            .into_par_iter()
            .map(|b| {
                let sample_rng = rng.stream(1 + ni as u64).stream(b as u64);
                let mut draw = sample_rng.stream(0).rng();
                let rows: Vec<usize> = (0..n).map(|_| draw.random_range(0..data.n())).collect();
                let sample = data.take_rows(&rows)?;
                methods
                    .iter()
                    .enumerate()
                    .map(|(mi, &method)| {
                        run_method_pipeline(
                            method,
                            &sample,
                            k,
                            plan.as_ref(),
                            g,
                            restarts,
                            &reference,
                            sample_rng.stream(1 + mi as u64),
                            sample_rng.stream(100 + mi as u64),
                            controls,
                        )
                    })
                    .collect()
            })
            .collect();
        let per_sample: Vec<Vec<MethodOutcome>> = per_sample.into_iter().collect::<Result<_>>()?;
        let mut rows = Vec::new();
        let stats = aggregate_methods(methods, &per_sample, &reference, n, &mut rows)?;
        reports.push(BootstrapReport {
            n,
            report: ExperimentReport {
                seed: rng.seed,
                stream: rng.stream,
                config_hash: format!("bootstrap-n{n}-k{k}-g{g}"),
                n_full: n,
                k,
                methods: stats,
                rows,
            },
        });
    }
    Ok(reports)
}

/// Long-format CSV of per-replicate rows:
/// method,N,replicate,mse_b0,mse_b1,t_select,t_fit.
pub fn write_rows_csv<W: Write>(rows: &[ReplicateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method",
        "N",
        "replicate",
        "mse_b0",
        "mse_b1",
        "t_select",
        "t_fit",
    ])?;
    for row in rows {
        w.write_record(&[
            row.method.to_string(),
            row.n.to_string(),
            row.replicate.to_string(),
            format!("{:.17e}", row.mse_b0),
            format!("{:.17e}", row.mse_b1),
            format!("{:.6e}", row.t_select),
            format!("{:.6e}", row.t_fit),
        ])?;
    }
    w.flush()?;
    Ok(())
}
