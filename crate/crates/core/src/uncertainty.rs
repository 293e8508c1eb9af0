//! Standard errors: clustered sandwich, simulation bootstrap at the
//! estimate, and stratified resampling of whole groups.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    group_rng, simulate_group, GroupDesign, GroupPanel, InitialRule, RevisionRule, Sampler,
    DEFAULT_MH_SWEEPS, EXACT_SAMPLER_MAX_N,
};
use crate::error::{Error, Result};
use crate::estimation::{fit_prepared, DecisionSet, EstimationResult, FitOptions, Method};
use crate::game::ThetaParams;
use crate::model::Model;

/// Largest acceptable condition number of the observed information.
const MAX_CONDITION: f64 = 1e12;

/// Share of dropped replicates above which a report is flagged.
pub const MAX_DROPPED_SHARE: f64 = 0.05;

/// Negative Hessian of the objective over the free parameters, by central
/// differences of the analytic score with step `1e-5·max(1, |θ_j|)`.
pub fn observed_information(
    data: &DecisionSet,
    method: Method,
    theta: &ThetaParams,
    free: &[bool],
) -> Result<DMatrix<f64>> {
    let x = theta.to_vec();
    let idx: Vec<usize> = (0..x.len()).filter(|&j| free[j]).collect();
    let k = idx.len();
    let mut h = DMatrix::zeros(k, k);
    for (col, &j) in idx.iter().enumerate() {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += step;
        down[j] -= step;
        let g_up = data
            .evaluate(method, &ThetaParams::from_slice(&up)?)?
            .gradient;
        let g_down = data
            .evaluate(method, &ThetaParams::from_slice(&down)?)?
            .gradient;
        for (row, &i) in idx.iter().enumerate() {
            h[(row, col)] = -(g_up[i] - g_down[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Inverse of the observed information, or a singularity error.
fn invert_information(h: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(&h);
    if condition.is_nan() || condition >= MAX_CONDITION {
        return Err(Error::Singular { condition });
    }
    h.cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Singular { condition })
}

/// Group-clustered sandwich standard errors `sqrt(diag(H⁻¹ G H⁻¹))` with
/// small-sample factor `C/(C−1)`. Fixed parameters get a standard error of 0.
pub fn se_asymptotic(
    panels: &[GroupPanel],
    theta: &ThetaParams,
    method: Method,
    model: &Model,
) -> Result<Vec<f64>> {
    let data = DecisionSet::build(panels, model)?;
    se_asymptotic_prepared(&data, theta, method, &vec![true; theta.len()])
}

pub fn se_asymptotic_prepared(
    data: &DecisionSet,
    theta: &ThetaParams,
    method: Method,
    free: &[bool],
) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..theta.len()).filter(|&j| free[j]).collect();
    let k = idx.len();
    let bread = invert_information(observed_information(data, method, theta, free)?)?;
    let eval = data.evaluate(method, theta)?;
    let clusters = eval.group_gradients.len();
    let mut meat = DMatrix::zeros(k, k);
    for g in &eval.group_gradients {
        let s = DVector::from_iterator(k, idx.iter().map(|&j| g[j]));
        meat += &s * s.transpose();
    }
    if clusters > 1 {
        meat *= clusters as f64 / (clusters as f64 - 1.0);
    }
    let cov = &bread * meat * &bread;
    let mut se = vec![0.0; theta.len()];
    for (row, &j) in idx.iter().enumerate() {
        se[j] = cov[(row, row)].max(0.0).sqrt();
    }
    Ok(se)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapKind {
    /// Panels simulated from the model at the estimate.
    Mc,
    /// Groups resampled with replacement within regime strata.
    Np,
}

/// How groups are drawn in the nonparametric bootstrap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    #[default]
    Stratified,
    /// Every replicate is the original sample; a test hook.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Refit settings; each replicate starts at the point estimate.
    pub fit: FitOptions,
    /// Random restarts tried before a non-converged replicate is dropped.
    pub extra_starts: usize,
    /// Metropolis sweeps per revision when groups are too large to enumerate.
    pub mh_sweeps: usize,
    /// Simulated groups start from the observed first cross-section rather
    /// than a draw from the empty-history response.
    pub condition_on_initial: bool,
    pub resample: Resample,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            replicates: 1000,
            seed: 0,
            fit: FitOptions::single_start(),
            extra_starts: 3,
            mh_sweeps: DEFAULT_MH_SWEEPS,
            condition_on_initial: true,
            resample: Resample::Stratified,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub kind: BootstrapKind,
    pub method: Method,
    /// Replicates requested.
    pub replicates: usize,
    pub param_names: Vec<String>,
    pub estimate: Vec<f64>,
    /// Standard deviation of the retained replicate estimates.
    pub se: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Retained replicate estimates, one row per replicate.
    pub replicate_matrix: Vec<Vec<f64>>,
    pub dropped: usize,
    /// More than 5% of replicates failed to converge.
    pub flagged: bool,
    /// Share of replicates whose generalized reciprocity stays positive
    /// under treatment (`θ2 + θ3 > 0`).
    pub persistence: f64,
}

impl BootstrapReport {
    fn from_replicates(
        kind: BootstrapKind,
        method: Method,
        estimate: &ThetaParams,
        requested: usize,
        outcomes: Vec<Option<Vec<f64>>>,
    ) -> Self {
        let kept: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
        let dropped = requested - kept.len();
        let k = estimate.len();
        let column = |j: usize| kept.iter().map(|r| r[j]).collect::<Vec<_>>();
        let se = (0..k).map(|j| std_dev(&column(j))).collect();
        let lower = (0..k).map(|j| percentile(&column(j), 0.025)).collect();
        let upper = (0..k).map(|j| percentile(&column(j), 0.975)).collect();
        let persistence = if kept.is_empty() {
            0.0
        } else {
            kept.iter().filter(|r| r[1] + r[2] > 0.0).count() as f64 / kept.len() as f64
        };
        BootstrapReport {
            kind,
            method,
            replicates: requested,
            param_names: estimate.names().into_iter().map(String::from).collect(),
            estimate: estimate.to_vec(),
            se,
            lower,
            upper,
            replicate_matrix: kept,
            dropped,
            flagged: dropped as f64 > MAX_DROPPED_SHARE * requested as f64,
            persistence,
        }
    }

    /// Writes the replicate matrix as CSV with a header of parameter names.
    pub fn write_replicates(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["replicate".to_string()];
        header.extend(self.param_names.iter().cloned());
        w.write_record(&header)?;
        for (r, row) in self.replicate_matrix.iter().enumerate() {
            let mut rec = vec![(r + 1).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{other:?}")),
        }
    } else {
        Error::Csv(e)
    }
}

/// Sample standard deviation; zero with fewer than two values.
fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile (Hyndman and Fan type 7).
fn percentile(x: &[f64], p: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Refits one replicate from the point estimate, retrying from random
/// starts before giving up.
fn refit(
    data: &DecisionSet,
    method: Method,
    start: &ThetaParams,
    options: &BootstrapOptions,
    warm: Option<&Vec<f64>>,
    replicate: u64,
) -> Option<Vec<f64>> {
    let first = FitOptions {
        multistart: 0,
        initial_inverse_hessian: warm.cloned(),
        ..options.fit.clone()
    };
    if let Ok(res) = fit_prepared(method, data, start, &first) {
        if res.converged {
            return Some(res.theta.to_vec());
        }
    }
    if options.extra_starts == 0 {
        return None;
    }
    let retry = FitOptions {
        multistart: options.extra_starts,
        seed: options.seed ^ replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        initial_inverse_hessian: None,
        ..options.fit.clone()
    };
    match fit_prepared(method, data, start, &retry) {
        Ok(res) if res.converged => Some(res.theta.to_vec()),
        _ => None,
    }
}

/// Inverse observed information at the estimate, used to warm-start refits.
fn warm_start(
    panels: &[GroupPanel],
    theta: &ThetaParams,
    method: Method,
    model: &Model,
    free: &[bool],
) -> Option<Vec<f64>> {
    let data = DecisionSet::build(panels, model).ok()?;
    let inv = invert_information(observed_information(&data, method, theta, free).ok()?).ok()?;
    Some(inv.transpose().as_slice().to_vec())
}

fn check_replicates(options: &BootstrapOptions) -> Result<()> {
    if options.replicates == 0 {
        return Err(Error::Config(
            "at least one bootstrap replicate is required".into(),
        ));
    }
    Ok(())
}

/// Simulates panels at `theta` with the observed design (groups, group
/// sizes, treatment schedules, covariates) and refits each.
pub fn bootstrap_mc(
    panels: &[GroupPanel],
    theta: &ThetaParams,
    method: Method,
    model: &Model,
    options: &BootstrapOptions,
) -> Result<BootstrapReport> {
    check_replicates(options)?;
    if panels.is_empty() {
        return Err(Error::Data("no panels to bootstrap".into()));
    }
    let free = options.fit.free_mask(theta.len())?;
    let warm = warm_start(panels, theta, method, model, &free);
    let designs: Vec<GroupDesign> = panels
        .iter()
        .map(|p| GroupDesign {
            group_id: p.group_id.clone(),
            n: p.n(),
            periods: p.periods(),
            treatment_start: p.treatment_start,
            initial: options.condition_on_initial.then(|| p.state(1).clone()),
            covariates: p.covariates.clone(),
        })
        .collect();
    let outcomes: Vec<Option<Vec<f64>>> = (0..options.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = group_rng(options.seed, r);
            let sim: Result<Vec<GroupPanel>> = designs
                .iter()
                .map(|d| {
                    let sampler = if d.n <= EXACT_SAMPLER_MAX_N {
                        Sampler::Exact
                    } else {
                        Sampler::Metropolis {
                            sweeps: options.mh_sweeps,
                        }
                    };
                    simulate_group(
                        d,
                        model,
                        theta,
                        &InitialRule::LogitFromEmptyHistory,
                        &RevisionRule::All,
                        sampler,
                        &mut rng,
                    )
                })
                .collect();
            let data = DecisionSet::build(&sim.ok()?, model).ok()?;
            refit(&data, method, theta, options, warm.as_ref(), r)
        })
        .collect();
    Ok(BootstrapReport::from_replicates(
        BootstrapKind::Mc,
        method,
        theta,
        options.replicates,
        outcomes,
    ))
}

/// Draws whole groups with replacement within the treatment and baseline
/// strata, keeping each stratum's size, and refits each resample.
pub fn bootstrap_np(
    panels: &[GroupPanel],
    theta: &ThetaParams,
    method: Method,
    model: &Model,
    options: &BootstrapOptions,
) -> Result<BootstrapReport> {
    check_replicates(options)?;
    if panels.is_empty() {
        return Err(Error::Data("no panels to bootstrap".into()));
    }
    let free = options.fit.free_mask(theta.len())?;
    let warm = warm_start(panels, theta, method, model, &free);
    let strata: Vec<Vec<&GroupPanel>> = [true, false]
        .iter()
        .map(|&t| {
            panels
                .iter()
                .filter(|p| p.is_treatment_group() == t)
                .collect()
        })
        .collect();
    let outcomes: Vec<Option<Vec<f64>>> = (0..options.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let sample: Vec<GroupPanel> = match options.resample {
                Resample::Identity => panels.to_vec(),
                Resample::Stratified => {
                    let mut rng = group_rng(options.seed, r);
                    stratified_draw(&strata, &mut rng)
                }
            };
            let data = DecisionSet::build(&sample, model).ok()?;
            refit(&data, method, theta, options, warm.as_ref(), r)
        })
        .collect();
    Ok(BootstrapReport::from_replicates(
        BootstrapKind::Np,
        method,
        theta,
        options.replicates,
        outcomes,
    ))
}

/// One stratified resample: as many draws per stratum as it has groups.
pub fn stratified_draw<R: Rng>(strata: &[Vec<&GroupPanel>], rng: &mut R) -> Vec<GroupPanel> {
    strata
        .iter()
        .flat_map(|s| {
            (0..s.len())
                .map(|_| (*s.choose(rng).expect("non-empty stratum")).clone())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Attaches the requested standard errors to a fit.
pub fn attach(
    result: &mut EstimationResult,
    asymptotic: Option<Vec<f64>>,
    mc: Option<&BootstrapReport>,
    np: Option<&BootstrapReport>,
) {
    if asymptotic.is_some() {
        result.se_asymptotic = asymptotic;
    }
    if let Some(r) = mc {
        result.se_mc_bootstrap = Some(r.se.clone());
    }
    if let Some(r) = np {
        result.se_np_bootstrap = Some(r.se.clone());
    }
}
