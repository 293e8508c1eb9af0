//! Maximum likelihood and maximum pseudolikelihood estimation.
//!
//! The potential is linear in the parameters, so both objectives are sums of
//! multinomial-logit log-probabilities with linear indices and are concave.

mod fit;
mod objective;
mod optimizer;

pub use fit::{
    fit, fit_heterogeneous, fit_prepared, information_criteria, EstimationResult, FitOptions,
};
pub use objective::{gradient, loglik, pseudo_loglik, DecisionSet, Evaluation, Method};
