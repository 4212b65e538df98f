use crate::artifact::{sha256_file, with_metadata, write_atomic, write_json, Metadata};
use crate::{BootstrapArgs, FitArgs, InfoArgs, SelectArgs, SimulateArgs};
use clr_iboss::{
    d_criterion, default_paper_config, desk_scale_config, em_fit, missing_info_diag, run_bootstrap,
    run_simulation, select_full, select_g, select_iboss, select_random, subdata_info, surrogate_q,
    ClrParams, Dataset, EmControls, Error, FitResult, InfoMode, Method, QuadControls, Result,
    RngSpec, SelectionPlan, SelectionResult, SimConfig,
};
use serde::Serialize;
use serde_json::json;
use std::path::Path;

fn load_dataset(path: &Path, response_col: &str) -> Result<(Dataset, String)> {
    let data = Dataset::from_csv_path(path, response_col)?;
    let digest = sha256_file(path)?;
    Ok((data, digest))
}

fn load_selection(path: &Path, data: &Dataset) -> Result<SelectionResult> {
    let text = std::fs::read_to_string(path)?;
    let selection: SelectionResult = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("bad selection file {}: {e}", path.display())))?;
    let mut previous: Option<usize> = None;
    for &i in &selection.indices {
        if i >= data.n() {
            return Err(Error::InvalidConfig(format!(
                "selection index {i} out of range for {} rows",
                data.n()
            )));
        }
        if previous.is_some_and(|p| p >= i) {
            return Err(Error::InvalidConfig(
                "selection indices must be strictly increasing".into(),
            ));
        }
        previous = Some(i);
    }
    Ok(selection)
}

fn emit<P: Serialize>(output: &Path, metadata: &Metadata, payload: &P) -> Result<()> {
    let value = with_metadata(metadata, payload)?;
    write_json(output, &value)?;
    Ok(())
}

pub fn select(args: &SelectArgs) -> Result<()> {
    let (data, digest) = load_dataset(&args.input, &args.response_col)?;
    let result = match args.method {
        Method::Iboss => {
            let k = args
                .k
                .ok_or_else(|| Error::InvalidConfig("--k is required".into()))?;
            let plan = SelectionPlan::new(k, data.p())?;
            select_iboss(&data, &plan)?
        }
        Method::Random => {
            let k = args
                .k
                .ok_or_else(|| Error::InvalidConfig("--k is required".into()))?;
            select_random(&data, k, RngSpec::new(args.seed))?
        }
        Method::Full => select_full(&data),
    };
    let metadata = Metadata::new("select", args.seed, args, Some(digest));
    emit(&args.output, &metadata, &result)
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let (data, digest) = load_dataset(&args.input, &args.response_col)?;
    let subset = match &args.indices {
        Some(path) => load_selection(path, &data)?,
        None => select_full(&data),
    };
    let controls = EmControls {
        max_iter: args.max_iter,
        tol: args.tol,
    };
    let rng = RngSpec::new(args.seed);
    let metadata = Metadata::new("fit", args.seed, args, Some(digest));
    if let Some(candidates) = &args.g_list {
        let selection = select_g(&data, &subset, candidates, args.restarts, rng, &controls)?;
        let candidate_summaries: Vec<_> = selection
            .candidates
            .iter()
            .zip(&selection.fits)
            .map(|(g, fit)| {
                json!({
                    "g": g,
                    "aic": fit.aic,
                    "loglik": fit.loglik,
                    "iterations": fit.iterations,
                    "converged": fit.converged,
                })
            })
            .collect();
        let chosen = selection.chosen();
        let mut payload =
            serde_json::to_value(chosen).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        payload["chosen_g"] = json!(selection.chosen_g());
        payload["candidates"] = json!(candidate_summaries);
        return emit(&args.output, &metadata, &payload);
    }
    let g = args
        .g
        .ok_or_else(|| Error::InvalidConfig("--g or --g-list is required".into()))?;
    let fit: FitResult = em_fit(&data, &subset, g, args.restarts, rng, &controls)?;
    emit(&args.output, &metadata, &fit)
}

fn load_params(path: &Path) -> Result<ClrParams> {
    let text = std::fs::read_to_string(path)?;
    let params: ClrParams = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("bad params file {}: {e}", path.display())))?;
    Ok(params)
}

pub fn info(args: &InfoArgs) -> Result<()> {
    let (data, digest) = load_dataset(&args.input, &args.response_col)?;
    let params = load_params(&args.params)?;
    if params.p() != data.p() {
        return Err(Error::DimensionMismatch {
            what: "covariate count",
            expected: data.p(),
            actual: params.p(),
        });
    }
    let subset = match &args.indices {
        Some(path) => load_selection(path, &data)?,
        None => select_full(&data),
    };
    let complete = subdata_info(&data, &subset, &params, InfoMode::Complete)?;
    let d = params.theta_dim();
    let quad = QuadControls {
        abs_tol: args.quad_tol,
        ..QuadControls::default()
    };
    let mut missing = vec![0.0; d];
    let mut surrogate = vec![0.0; d];
    let mut x = vec![0.0; data.p() + 1];
    for i in subset.iter() {
        data.design_row(i, &mut x);
        for (acc, v) in missing
            .iter_mut()
            .zip(missing_info_diag(&x, &params, &quad)?)
        {
            *acc += v;
        }
        for (acc, v) in surrogate.iter_mut().zip(surrogate_q(&x, &params)?.q) {
            *acc += v;
        }
    }
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..d).map(|b| complete.matrix()[(a, b)]).collect())
        .collect();
    let payload = json!({
        "d": d,
        "layout": "beta-by-cluster,sigma2,pi",
        "rows_used": subset.len(),
        "complete": rows,
        "missing_diag": missing,
        "surrogate_diag": surrogate,
        "logdet_complete": d_criterion(&complete),
    });
    let metadata = Metadata::new("info", 0, args, Some(digest));
    emit(&args.output, &metadata, &payload)
}

fn resolve_sim_config(args: &SimulateArgs) -> Result<SimConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| {
                Error::InvalidConfig(format!("bad config file {}: {e}", path.display()))
            })?
        }
        None if args.paper_scale => default_paper_config(),
        None => desk_scale_config(),
    };
    if let Some(seed) = args.seed {
        config.rng = RngSpec::new(seed);
    }
    if let Some(replicates) = args.replicates {
        config.replicates = replicates;
    }
    if let Some(n) = args.n {
        config.n_full = n;
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(restarts) = args.restarts {
        config.restarts = restarts;
    }
    config.validate()?;
    Ok(config)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = resolve_sim_config(args)?;
    if args.dry_run {
        let text = serde_json::to_string_pretty(&config)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        println!("{text}");
        return Ok(());
    }
    let report = run_simulation(&config)?;
    let output = args
        .output
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--output is required".into()))?;
    if let Some(csv_path) = &args.csv {
        let mut buf = Vec::new();
        clr_iboss::experiments::write_rows_csv(&report.rows, &mut buf)?;
        write_atomic(csv_path, &buf)?;
    }
    let input_hash = match &args.config {
        Some(path) => Some(sha256_file(path)?),
        None => None,
    };
    let metadata = Metadata::new("simulate", config.rng.seed, &config, input_hash);
    emit(output, &metadata, &report)
}

pub fn bootstrap(args: &BootstrapArgs) -> Result<()> {
    let (data, digest) = load_dataset(&args.input, &args.response_col)?;
    let reports = run_bootstrap(
        &data,
        args.g,
        &args.n_list,
        args.k,
        args.b_samples,
        &args.methods,
        args.restarts,
        RngSpec::new(args.seed),
        &EmControls::default(),
    )?;
    if let Some(csv_path) = &args.csv {
        let rows: Vec<_> = reports
            .iter()
            .flat_map(|r| r.report.rows.iter().cloned())
            .collect();
        let mut buf = Vec::new();
        clr_iboss::experiments::write_rows_csv(&rows, &mut buf)?;
        write_atomic(csv_path, &buf)?;
    }
    let metadata = Metadata::new("bootstrap", args.seed, args, Some(digest));
    emit(&args.output, &metadata, &json!({ "reports": reports }))
}
