use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sharenet::estimation::{fit, fit_heterogeneous, EstimationResult, Method};
use sharenet::io::{
    attach_covariates, read_covariates, read_json, write_json, write_panel_with, write_scree,
};
use sharenet::metrics::{did_for_outcome, outcome_table, write_outcomes, DidResult, Outcome};
use sharenet::scaling::{scaling_table, write_scaling, ScalingOptions};
use sharenet::uncertainty::attach;
use sharenet::{
    bootstrap_mc, bootstrap_np, read_panel, se_asymptotic, simulate_panel, stability_census,
    BootstrapReport, GroupPanel, PanelSchema, RunConfig, SimConfig, ThetaParams,
};

use crate::{
    Analysis, AnalyzeArgs, BenchArgs, CliError, EstimateArgs, MethodArg, SeArg, SimulateArgs,
};

type Result<T> = std::result::Result<T, CliError>;

/// `panel.csv` → `panel.config.json`.
fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("config.json")
}

fn parse_theta(raw: &str) -> Result<ThetaParams> {
    let values = raw
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--theta {raw:?} is not a list of numbers")))?;
    ThetaParams::from_slice(&values).map_err(|e| CliError::Usage(e.to_string()))
}

/// θ from an estimation report, a bare result, or a bare parameter object.
fn theta_from_file(path: &Path) -> Result<ThetaParams> {
    let v: Value = read_json(path)?;
    let candidates = [&v["result"]["theta"], &v["theta"], &v];
    candidates
        .iter()
        .find_map(|c| serde_json::from_value::<ThetaParams>((*c).clone()).ok())
        .ok_or_else(|| CliError::Usage(format!("{}: no parameter vector found", path.display())))
}

fn schema(q: usize) -> PanelSchema {
    PanelSchema {
        q,
        ..PanelSchema::default()
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(path) => read_json::<RunConfig>(path)?.simulation,
        None => {
            let d = SimConfig::default();
            let periods = a.periods.unwrap_or(d.periods);
            let mut model = d.model.clone();
            if let Some(q) = a.q {
                model.q = q;
            }
            SimConfig {
                n_groups: a.groups.unwrap_or(d.n_groups),
                n_treatment_groups: a.treatment_groups.unwrap_or(d.n_treatment_groups),
                n: a.n.unwrap_or(d.n),
                periods,
                treatment_start: a
                    .treatment_start
                    .unwrap_or(d.treatment_start.min(periods + 1)),
                theta: a
                    .theta
                    .as_deref()
                    .map(parse_theta)
                    .transpose()?
                    .unwrap_or(d.theta),
                model,
                ..d
            }
        }
    };
    let cfg = SimConfig {
        seed: a.seed.unwrap_or(cfg.seed),
        ..cfg
    };
    cfg.validate()?;
    let panels = simulate_panel(&cfg)?;
    write_panel_with(&panels, &a.out, &schema(cfg.model.q))?;
    write_json(
        &json!({ "command": "simulate", "out": a.out, "simulation": cfg }),
        sidecar(&a.out),
    )?;
    let cells: Vec<f64> = panels
        .iter()
        .flat_map(|p| (1..=p.periods()).flat_map(move |t| p.state(t).contributions.values()))
        .collect();
    let mean = cells.iter().sum::<f64>() / cells.len().max(1) as f64;
    println!(
        "groups {}  periods {}  players {}  mean contribution {mean:.4}",
        panels.len(),
        cfg.periods,
        cfg.n
    );
    Ok(())
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    command: &'static str,
    config: Value,
    result: &'a EstimationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    homogeneous: Option<&'a EstimationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap_mc: Option<&'a BootstrapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap_np: Option<&'a BootstrapReport>,
}

fn write_report<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(value).map_err(sharenet::Error::from)?
        ),
    }
    Ok(())
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let run = match &a.config {
        Some(path) => read_json::<RunConfig>(path)?,
        None => RunConfig::default(),
    };
    let mut fit_opts = run.estimation.clone();
    let mut boot = run.bootstrap.clone();
    if let Some(m) = a.multistart {
        fit_opts.multistart = m;
    }
    if let Some(s) = a.seed {
        fit_opts.seed = s;
        boot.seed = s;
    }
    if let Some(b) = a.replicates {
        boot.replicates = b;
    }
    let wants_bootstrap = matches!(a.se, SeArg::Mc | SeArg::Np | SeArg::All);
    if wants_bootstrap && boot.replicates < 1 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let method = match a.method {
        MethodArg::Mle => Method::Mle,
        MethodArg::Mple => Method::Mple,
    };
    let mut model = run.simulation.model.clone();
    model.q = a.q;

    let mut panels: Vec<GroupPanel> = read_panel(&a.data, &schema(a.q))?;
    if let Some(path) = &a.covariates {
        attach_covariates(&mut panels, &read_covariates(path)?)?;
    }
    let homogeneous = fit(
        method,
        &panels,
        &ThetaParams::zeros(false),
        &model,
        &fit_opts,
    )?;
    let (mut result, nested) = if a.covariates.is_some() {
        let het = fit_heterogeneous(method, &panels, &homogeneous.theta, &model, &fit_opts)?;
        (het, Some(homogeneous))
    } else {
        (homogeneous, None)
    };

    let mut mc = None;
    let mut np = None;
    if result.converged {
        let asy = matches!(a.se, SeArg::Asymptotic | SeArg::All)
            .then(|| se_asymptotic(&panels, &result.theta, method, &model))
            .transpose()?;
        if matches!(a.se, SeArg::Mc | SeArg::All) {
            mc = Some(bootstrap_mc(&panels, &result.theta, method, &model, &boot)?);
        }
        if matches!(a.se, SeArg::Np | SeArg::All) {
            np = Some(bootstrap_np(&panels, &result.theta, method, &model, &boot)?);
        }
        attach(&mut result, asy, mc.as_ref(), np.as_ref());
    }

    let config = json!({
        "data": a.data,
        "method": method,
        "covariates": a.covariates,
        "q": a.q,
        "se": format!("{:?}", a.se).to_lowercase(),
        "model": model,
        "estimation": fit_opts,
        "bootstrap": boot,
    });
    let report = EstimateReport {
        command: "estimate",
        config,
        result: &result,
        homogeneous: nested.as_ref(),
        bootstrap_mc: mc.as_ref(),
        bootstrap_np: np.as_ref(),
    };
    write_report(&report, a.out.as_deref())?;
    if !result.converged {
        return Err(CliError::NotConverged(result.status.clone()));
    }
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let mut what = a.what.clone();
    what.sort();
    what.dedup();
    let theta = match (&a.theta, &a.theta_file) {
        (Some(raw), _) => Some(parse_theta(raw)?),
        (None, Some(path)) => Some(theta_from_file(path)?),
        (None, None) => None,
    };
    if what.contains(&Analysis::Stability) && theta.is_none() {
        return Err(CliError::Usage(
            "stability analysis needs --theta-file or --theta".into(),
        ));
    }
    let needs_data = what.iter().any(|w| *w != Analysis::Pca);
    let panels = match (&a.data, needs_data) {
        (Some(path), true) => {
            let mut p = read_panel(path, &schema(a.q))?;
            if let (Some(cov), Some(t)) = (&a.covariates, &theta) {
                if t.is_heterogeneous() {
                    attach_covariates(&mut p, &read_covariates(cov)?)?;
                }
            }
            p
        }
        (None, true) => return Err(CliError::Usage("--data is required".into())),
        (_, false) => Vec::new(),
    };
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.out_dir.display())))?;
    let spec = sharenet::MpcrSpec::default();
    let mut written = Vec::new();

    for analysis in &what {
        match analysis {
            Analysis::Stability => {
                let census = stability_census(&panels, theta.as_ref().expect("checked"), &spec)?;
                let path = a.out_dir.join("census.csv");
                census.write_csv(&path)?;
                println!(
                    "{} of {} cross-sections topologically stable",
                    census.topologically_stable(),
                    census.rows.len()
                );
                for (key, count) in &census.stable_counts {
                    println!("  {key}: {count}");
                }
                written.push(path);
            }
            Analysis::Metrics => {
                let path = a.out_dir.join("outcomes.csv");
                write_outcomes(&outcome_table(&panels, &spec)?, &path)?;
                written.push(path);
            }
            Analysis::Regressions => {
                let records = outcome_table(&panels, &spec)?;
                let results = Outcome::ALL
                    .iter()
                    .map(|&o| did_for_outcome(&records, o))
                    .collect::<std::result::Result<Vec<DidResult>, _>>()?;
                let path = a.out_dir.join("regressions.json");
                write_json(
                    &json!({ "command": "analyze", "data": a.data, "regressions": results }),
                    &path,
                )?;
                written.push(path);
            }
            Analysis::Pca => {
                let path = a.covariates.as_ref().ok_or_else(|| {
                    CliError::Usage("pca needs --covariates with survey items".into())
                })?;
                let table = read_covariates(path)?;
                let pca = table.pca.ok_or_else(|| {
                    CliError::Usage(format!(
                        "{}: covariates are precomputed; no survey items to decompose",
                        path.display()
                    ))
                })?;
                let out = a.out_dir.join("scree.csv");
                write_scree(&pca, &out)?;
                written.push(out);
            }
        }
    }
    let names: Vec<String> = what
        .iter()
        .map(|w| format!("{w:?}").to_lowercase())
        .collect();
    write_json(
        &json!({
            "command": "analyze",
            "data": a.data,
            "theta": theta,
            "covariates": a.covariates,
            "q": a.q,
            "what": names,
            "outputs": written,
        }),
        a.out_dir.join("analyze.config.json"),
    )?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn parse_range(raw: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Usage(format!("--n-range {raw:?} is not MIN:MAX"));
    let (lo, hi) = raw.split_once(':').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let (n_min, n_max) = parse_range(&a.n_range)?;
    let options = ScalingOptions {
        n_min,
        n_max,
        q: a.q,
        reps: a.reps,
        seed: a.seed,
        groups: a.groups,
        periods: a.periods,
        min_time_ms: a.min_time_ms,
    };
    let report = scaling_table(&options)?;
    write_scaling(&report, &a.out)?;
    write_json(
        &json!({ "command": "bench", "out": a.out, "report": report }),
        sidecar(&a.out),
    )?;
    println!("n   loglik_terms  pseudo_terms  loglik_s      pseudo_s");
    for r in &report.rows {
        println!(
            "{:<3} {:<13} {:<13} {:<13.4e} {:.4e}",
            r.n, r.loglik_terms, r.pseudo_terms, r.loglik_seconds, r.pseudo_seconds
        );
    }
    println!(
        "growth exponents (log2 time per player): loglik {:.3}, pseudo {:.3}",
        report.loglik_exponent, report.pseudo_exponent
    );
    Ok(())
}
