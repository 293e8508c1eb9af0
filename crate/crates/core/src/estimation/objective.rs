//! Log-likelihood and log-pseudolikelihood of panels, with analytic scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{self, dot4, grid_sums, Decision, Workspace};
use crate::dynamics::{scaled, GroupPanel};
use crate::error::{Error, Result};
use crate::game::{Grid, MpcrTable, PlayerCovariates, ThetaParams, HET_BLOCK_TARGET};
use crate::model::{BoundaryRule, Model};

/// Estimation objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Full likelihood over the joint per-player choice.
    Mle,
    /// Product of one-link and contribution conditionals.
    Mple,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Mle => "mle",
            Method::Mple => "mple",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Method::Mle),
            "mple" => Ok(Method::Mple),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

struct Observation {
    decision: Decision,
    mask: u32,
    level: usize,
    x: Option<PlayerCovariates>,
}

struct GroupData {
    mpcr: MpcrTable,
    obs: Vec<Observation>,
}

/// Every decision of a set of panels, prepared for repeated evaluation.
pub struct DecisionSet {
    groups: Vec<GroupData>,
    grid: Grid,
    feature_scale: f64,
    has_covariates: bool,
}

impl DecisionSet {
    /// Periods `2..=T` of every group; period 1 only supplies history.
    pub fn build(panels: &[GroupPanel], model: &Model) -> Result<Self> {
        model.validate()?;
        if panels.is_empty() {
            return Err(Error::Data("no panels to evaluate".into()));
        }
        let grid = model.grid()?;
        let mut groups = Vec::with_capacity(panels.len());
        for panel in panels {
            if panel.periods() < 2 {
                return Err(Error::Data(format!(
                    "group {}: at least two periods are required",
                    panel.group_id
                )));
            }
            let n = panel.n();
            let mpcr = model.mpcr.table(n)?;
            let mut obs = Vec::with_capacity((panel.periods() - 1) * n);
            for t in 2..=panel.periods() {
                if model.boundary == BoundaryRule::Drop
                    && panel.is_treatment_group()
                    && t == panel.treatment_start
                {
                    continue;
                }
                let regime = panel.regime(t);
                let (prev, cur) = (panel.state(t - 1), panel.state(t));
                for i in 0..n {
                    let level = regrid(cur.contributions.grid(), cur.contributions.level(i), grid)
                        .ok_or_else(|| {
                            Error::Data(format!(
                                "group {}, period {t}, player {}: contribution {} is off the {}-point grid",
                                panel.group_id,
                                i + 1,
                                cur.contributions.value(i),
                                grid.q()
                            ))
                        })?;
                    let info = prev.info_for(&mpcr, i, regime);
                    let decision = Decision::new(i, n, &info);
                    let mask = decision.compact(cur.network.out_links(i));
                    obs.push(Observation {
                        decision,
                        mask,
                        level,
                        x: panel.covariate(i).copied(),
                    });
                }
            }
            groups.push(GroupData { mpcr, obs });
        }
        Ok(DecisionSet {
            groups,
            grid,
            feature_scale: model.feature_scale,
            has_covariates: panels.iter().all(|p| p.covariates.is_some()),
        })
    }

    pub fn groups(&self) -> usize {
        self.groups.len()
    }

    /// Number of individual decisions entering the objective.
    pub fn decisions(&self) -> usize {
        self.groups.iter().map(|g| g.obs.len()).sum()
    }

    pub fn has_covariates(&self) -> bool {
        self.has_covariates
    }

    /// Objective value, score and per-group scores at `theta`.
    pub fn evaluate(&self, method: Method, theta: &ThetaParams) -> Result<Evaluation> {
        if theta.is_heterogeneous() && !self.has_covariates {
            return Err(Error::Config(
                "heterogeneity parameters require covariates for every group".into(),
            ));
        }
        let k = theta.len();
        let per_group: Vec<GroupEval> = self
            .groups
            .par_iter()
            .map(|g| self.evaluate_group(g, method, theta, k))
            .collect::<Result<_>>()?;
        let mut value = 0.0;
        let mut gradient = vec![0.0; k];
        let mut terms = 0;
        let mut group_gradients = Vec::with_capacity(per_group.len());
        for g in per_group {
            value += g.value;
            terms += g.terms;
            for (acc, v) in gradient.iter_mut().zip(&g.gradient) {
                *acc += v;
            }
            group_gradients.push(g.gradient);
        }
        if !value.is_finite() {
            return Err(Error::Numeric(format!("objective is {value} at {theta:?}")));
        }
        Ok(Evaluation {
            value,
            gradient,
            group_gradients,
            terms,
        })
    }

    fn evaluate_group(
        &self,
        group: &GroupData,
        method: Method,
        theta: &ThetaParams,
        k: usize,
    ) -> Result<GroupEval> {
        let mut out = GroupEval {
            value: 0.0,
            gradient: vec![0.0; k],
            terms: 0,
        };
        let mut ws = Workspace::default();
        let q = self.grid.q();
        for ob in &group.obs {
            let coef = scaled(theta.effective(ob.x.as_ref())?, self.feature_scale);
            let c_obs = self.grid.value(ob.level);
            let (d, s) = ob.decision.stats(ob.mask);
            let b_obs = ob.decision.features(&group.mpcr, d, s);
            let a_obs = dot4(&coef, &b_obs);
            // score with respect to the player's effective coefficients
            let mut score = [0.0; 4];
            match method {
                Method::Mle => {
                    let part = choice::partition(&ob.decision, &group.mpcr, q, &coef, &mut ws)?;
                    out.value += c_obs * a_obs - part.log_z;
                    out.terms += part.terms;
                    for f in 0..4 {
                        score[f] = c_obs * b_obs[f] - part.expected[f];
                    }
                }
                Method::Mple => {
                    let shift = a_obs.max(0.0);
                    let (w, cw) = grid_sums(a_obs, q, shift);
                    out.value += c_obs * a_obs - (shift + w.ln());
                    out.terms += q as u64;
                    let mean_c = cw / w;
                    for f in 0..4 {
                        score[f] = (c_obs - mean_c) * b_obs[f];
                    }
                    for bit in 0..ob.decision.n - 1 {
                        let on = ob.mask & (1 << bit) != 0;
                        let inc = ob.decision.inc(bit);
                        let (d_alt, s_alt) = if on {
                            (d - 1, s - inc)
                        } else {
                            (d + 1, s + inc)
                        };
                        let b_alt = ob.decision.features(&group.mpcr, d_alt, s_alt);
                        let phi_obs = c_obs * a_obs;
                        let phi_alt = c_obs * dot4(&coef, &b_alt);
                        let top = phi_obs.max(phi_alt);
                        let (e_obs, e_alt) = ((phi_obs - top).exp(), (phi_alt - top).exp());
                        let lse = top + (e_obs + e_alt).ln();
                        out.value += phi_obs - lse;
                        out.terms += 2;
                        let p_alt = e_alt / (e_obs + e_alt);
                        for f in 0..4 {
                            score[f] += c_obs * p_alt * (b_obs[f] - b_alt[f]);
                        }
                    }
                }
            }
            for f in &mut score {
                *f *= self.feature_scale;
            }
            accumulate(
                &mut out.gradient,
                &score,
                ob.x.as_ref(),
                theta.is_heterogeneous(),
            );
        }
        Ok(out)
    }
}

/// Maps a score on the effective coefficients onto the full parameter vector.
fn accumulate(grad: &mut [f64], score: &[f64; 4], x: Option<&PlayerCovariates>, het: bool) {
    for f in 0..4 {
        grad[f] += score[f];
    }
    if het {
        let xs = x.expect("checked by evaluate").as_array();
        for (block, &target) in HET_BLOCK_TARGET.iter().enumerate() {
            for (k, xk) in xs.iter().enumerate() {
                grad[4 + 3 * block + k] += score[target] * xk;
            }
        }
    }
}

fn regrid(from: Grid, level: usize, to: Grid) -> Option<usize> {
    if from == to {
        return Some(level);
    }
    let scaled = level * (to.q() - 1);
    scaled
        .is_multiple_of(from.q() - 1)
        .then_some(scaled / (from.q() - 1))
}

struct GroupEval {
    value: f64,
    gradient: Vec<f64>,
    terms: u64,
}

/// Objective value with its analytic score.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Score contribution of each group, in panel order.
    pub group_gradients: Vec<Vec<f64>>,
    /// Exponential terms accumulated.
    pub terms: u64,
}

/// Full log-likelihood: `Σ φ(observed) − ln Z` over groups, periods `2..=T`
/// and players.
pub fn loglik(panels: &[GroupPanel], theta: &ThetaParams, model: &Model) -> Result<f64> {
    Ok(DecisionSet::build(panels, model)?
        .evaluate(Method::Mle, theta)?
        .value)
}

/// Log-pseudolikelihood: contribution conditional plus one two-point
/// conditional per potential link.
pub fn pseudo_loglik(panels: &[GroupPanel], theta: &ThetaParams, model: &Model) -> Result<f64> {
    Ok(DecisionSet::build(panels, model)?
        .evaluate(Method::Mple, theta)?
        .value)
}

/// Analytic score of either objective.
pub fn gradient(
    method: Method,
    panels: &[GroupPanel],
    theta: &ThetaParams,
    model: &Model,
) -> Result<Vec<f64>> {
    Ok(DecisionSet::build(panels, model)?
        .evaluate(method, theta)?
        .gradient)
}
