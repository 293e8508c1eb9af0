use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{DecisionSet, Method};
use super::optimizer::{maximize, AscentSettings};
use crate::dynamics::GroupPanel;
use crate::error::{Error, Result};
use crate::game::ThetaParams;
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Random starts in addition to the supplied one.
    pub multistart: usize,
    /// Random starts are uniform on `[-start_range, start_range]` per free coordinate.
    pub start_range: f64,
    pub seed: u64,
    /// Which parameters are estimated; the rest stay at their starting value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<bool>>,
    /// Row-major inverse curvature for the free parameters, used to seed the
    /// quasi-Newton approximation.
    #[serde(skip)]
    pub initial_inverse_hessian: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iters: 500,
            grad_tol: 1e-6,
            step_tol: 1e-9,
            multistart: 5,
            start_range: 50.0,
            seed: 0,
            free: None,
            initial_inverse_hessian: None,
        }
    }
}

impl FitOptions {
    /// Single start from the supplied parameters.
    pub fn single_start() -> Self {
        FitOptions {
            multistart: 0,
            ..FitOptions::default()
        }
    }

    pub(crate) fn free_mask(&self, k: usize) -> Result<Vec<bool>> {
        match &self.free {
            None => Ok(vec![true; k]),
            Some(f) if f.len() == k => Ok(f.clone()),
            Some(f) => Err(Error::Config(format!(
                "free-parameter mask has {} entries for {k} parameters",
                f.len()
            ))),
        }
    }
}

/// Point estimates, fit diagnostics and (when computed) standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub theta: ThetaParams,
    pub param_names: Vec<String>,
    /// Objective value at the estimate.
    pub loglik: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: String,
    /// Number of estimated parameters.
    pub k: usize,
    pub free: Vec<bool>,
    pub n_groups: usize,
    pub n_decision_obs: usize,
    pub aic: f64,
    /// Undefined when `n_decision_obs <= k + 1`.
    pub aicc: Option<f64>,
    pub bic: f64,
    pub starts: usize,
    pub se_asymptotic: Option<Vec<f64>>,
    pub se_mc_bootstrap: Option<Vec<f64>>,
    pub se_np_bootstrap: Option<Vec<f64>>,
}

/// AIC, AICc and BIC for `k` parameters and `m` observations.
pub fn information_criteria(loglik: f64, k: usize, m: usize) -> (f64, Option<f64>, f64) {
    let kf = k as f64;
    let aic = 2.0 * kf - 2.0 * loglik;
    let aicc = (m > k + 1).then(|| aic + 2.0 * kf * (kf + 1.0) / (m as f64 - kf - 1.0));
    let bic = kf * (m as f64).ln() - 2.0 * loglik;
    (aic, aicc, bic)
}

/// Maximizes the chosen objective from `theta0` and any random starts.
pub fn fit(
    method: Method,
    panels: &[GroupPanel],
    theta0: &ThetaParams,
    model: &Model,
    options: &FitOptions,
) -> Result<EstimationResult> {
    let data = DecisionSet::build(panels, model)?;
    fit_prepared(method, &data, theta0, options)
}

/// As [`fit`], on an already prepared decision set.
pub fn fit_prepared(
    method: Method,
    data: &DecisionSet,
    theta0: &ThetaParams,
    options: &FitOptions,
) -> Result<EstimationResult> {
    if !theta0.is_finite() {
        return Err(Error::Config("starting parameters must be finite".into()));
    }
    let full0 = theta0.to_vec();
    let k_all = full0.len();
    let free = options.free_mask(k_all)?;
    let free_idx: Vec<usize> = (0..k_all).filter(|&j| free[j]).collect();
    if free_idx.is_empty() {
        return Err(Error::Config("no free parameters".into()));
    }
    let k = free_idx.len();

    let embed = |x: &[f64]| -> Result<ThetaParams> {
        let mut full = full0.clone();
        for (&j, &v) in free_idx.iter().zip(x) {
            full[j] = v;
        }
        ThetaParams::from_slice(&full)
    };
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let theta = embed(x)?;
        let eval = data.evaluate(method, &theta)?;
        Ok((
            eval.value,
            free_idx.iter().map(|&j| eval.gradient[j]).collect(),
        ))
    };

    let initial_inverse_hessian = match &options.initial_inverse_hessian {
        Some(h) if h.len() == k * k => Some(DMatrix::from_row_slice(k, k, h)),
        Some(h) => {
            return Err(Error::Config(format!(
                "initial inverse curvature has {} entries, expected {}",
                h.len(),
                k * k
            )))
        }
        None => None,
    };
    let settings = AscentSettings {
        max_iters: options.max_iters,
        grad_tol: options.grad_tol,
        step_tol: options.step_tol,
        initial_inverse_hessian,
    };

    let mut starts = vec![free_idx.iter().map(|&j| full0[j]).collect::<Vec<_>>()];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.multistart {
        starts.push(
            (0..k)
                .map(|_| rng.random_range(-options.start_range..=options.start_range))
                .collect(),
        );
    }

    let mut best: Option<super::optimizer::AscentOutcome> = None;
    let mut total_iters = 0;
    for x0 in &starts {
        let out = match maximize(objective, x0, &settings) {
            Ok(out) => out,
            // a random start can land where the potential overflows
            Err(Error::Numeric(_)) if best.is_some() || starts.len() > 1 => continue,
            Err(e) => return Err(e),
        };
        total_iters += out.iterations;
        let better = match &best {
            None => true,
            Some(b) => (out.converged, out.value) > (b.converged, b.value),
        };
        if better {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| Error::Numeric("no start produced a finite objective".into()))?;

    let theta = embed(&best.x)?;
    let m = data.decisions();
    let (aic, aicc, bic) = information_criteria(best.value, k, m);
    Ok(EstimationResult {
        method,
        param_names: theta.names().into_iter().map(String::from).collect(),
        theta,
        loglik: best.value,
        gradient_norm: best.gradient.iter().map(|g| g * g).sum::<f64>().sqrt(),
        iterations: if starts.len() == 1 {
            best.iterations
        } else {
            total_iters
        },
        converged: best.converged,
        status: best.status,
        k,
        free,
        n_groups: data.groups(),
        n_decision_obs: m,
        aic,
        aicc,
        bic,
        starts: starts.len(),
        se_asymptotic: None,
        se_mc_bootstrap: None,
        se_np_bootstrap: None,
    })
}

/// Fits the 16-parameter model with covariate interactions. A 4-parameter
/// start is padded with zero interactions.
pub fn fit_heterogeneous(
    method: Method,
    panels: &[GroupPanel],
    theta0: &ThetaParams,
    model: &Model,
    options: &FitOptions,
) -> Result<EstimationResult> {
    if let Some(p) = panels.iter().find(|p| p.covariates.is_none()) {
        return Err(Error::Config(format!(
            "group {} has no player covariates",
            p.group_id
        )));
    }
    let start = match theta0.het {
        Some(_) => *theta0,
        None => theta0.with_het([0.0; 12]),
    };
    fit(method, panels, &start, model, options)
}
