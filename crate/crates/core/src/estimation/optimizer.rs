//! BFGS ascent with backtracking line search.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Clone, Debug)]
pub(crate) struct AscentSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub initial_inverse_hessian: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub(crate) struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: String,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Maximizes `f`, which returns the value and gradient at a point.
pub(crate) fn maximize<F>(f: F, x0: &[f64], settings: &AscentSettings) -> Result<AscentOutcome>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let k = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut value, g) = f(x.as_slice())?;
    let mut grad = DVector::from_vec(g);
    // inverse of the negative Hessian
    let mut h = match &settings.initial_inverse_hessian {
        Some(m) => m.clone(),
        None => DMatrix::identity(k, k) / grad.norm().max(1.0),
    };
    let scale_first = settings.initial_inverse_hessian.is_none();

    let outcome =
        |x: &DVector<f64>, value, grad: &DVector<f64>, it, converged, status: &str| AscentOutcome {
            x: x.as_slice().to_vec(),
            value,
            gradient: grad.as_slice().to_vec(),
            iterations: it,
            converged,
            status: status.to_string(),
        };

    for iter in 0..settings.max_iters {
        if grad.norm() < settings.grad_tol {
            return Ok(outcome(
                &x,
                value,
                &grad,
                iter,
                true,
                "gradient tolerance reached",
            ));
        }
        let mut dir = &h * &grad;
        if dir.dot(&grad) <= 0.0 {
            h = DMatrix::identity(k, k) / grad.norm().max(1.0);
            dir = &h * &grad;
        }
        let slope = dir.dot(&grad);
        let noise = 1e-12 * (1.0 + value.abs());

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + alpha * &dir;
            if let Ok((v, g)) = f(trial.as_slice()) {
                let g = DVector::from_vec(g);
                let sufficient = v >= value + ARMIJO * alpha * slope;
                let flat = (v - value).abs() <= noise && g.norm() < grad.norm();
                if v.is_finite() && (sufficient || flat) {
                    accepted = Some((trial, v, g));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            let converged = grad.norm() < settings.grad_tol;
            return Ok(outcome(
                &x,
                value,
                &grad,
                iter,
                converged,
                "line search failed",
            ));
        };

        let s = &x_new - &x;
        // ascent on f is descent on -f; curvature pair uses the gradient of -f
        let y = &grad - &g_new;
        x = x_new;
        value = v_new;
        grad = g_new;

        if s.norm() < settings.step_tol * (1.0 + x.norm()) {
            let converged = grad.norm() < settings.grad_tol;
            return Ok(outcome(
                &x,
                value,
                &grad,
                iter + 1,
                converged,
                "step tolerance reached",
            ));
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if iter == 0 && scale_first {
                h = DMatrix::identity(k, k) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(k, k);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            h = left * &h * right + rho * &s * s.transpose();
        }
    }
    let converged = grad.norm() < settings.grad_tol;
    let status = if converged {
        "gradient tolerance reached"
    } else {
        "iteration limit reached"
    };
    Ok(outcome(
        &x,
        value,
        &grad,
        settings.max_iters,
        converged,
        status,
    ))
}
