//! Per-period outcome measures and fixed-effects difference-in-differences
//! regressions with group-clustered standard errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dynamics::GroupPanel;
use crate::error::{Error, Result};
use crate::game::{CrossSection, MpcrSpec};
use crate::stability::is_efficient_structure;

/// Outcome measures of one cross-section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub efficient_structure: bool,
    pub mean_contribution: f64,
    /// Mean out-degree.
    pub mean_links: f64,
    /// Players without outgoing links.
    pub isolated_count: usize,
    /// Mean private cost `(1 − m(d_i))·c_i`.
    pub mean_cost: f64,
    /// `Σ_i Σ_{j≠i} A_ij A_ji m_i m_j c_i c_j`.
    pub reciprocity: f64,
    /// Concentration of generated benefits; absent when nobody contributes.
    pub hhi: Option<f64>,
}

pub fn outcome_row(state: &CrossSection, mpcr: &MpcrSpec) -> Result<OutcomeRow> {
    let n = state.n();
    let table = mpcr.table(n)?;
    let net = &state.network;
    let c = state.contributions.values();
    let m: Vec<f64> = (0..n).map(|i| table.at(net.out_degree(i))).collect();
    let nf = n as f64;
    let mut reciprocity = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            if net.adj(i, j) && net.adj(j, i) {
                reciprocity += m[i] * m[j] * c[i] * c[j];
            }
        }
    }
    let total: f64 = c.iter().sum();
    let hhi = (total > 0.0).then(|| c.iter().map(|v| (v / total).powi(2)).sum());
    Ok(OutcomeRow {
        efficient_structure: is_efficient_structure(net, mpcr)?,
        mean_contribution: total / nf,
        mean_links: net.edge_count() as f64 / nf,
        isolated_count: (0..n).filter(|&i| net.out_degree(i) == 0).count(),
        mean_cost: (0..n).map(|i| (1.0 - m[i]) * c[i]).sum::<f64>() / nf,
        reciprocity,
        hhi,
    })
}

/// Named outcome column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    EfficientStructure,
    Contribution,
    Links,
    Isolated,
    Cost,
    Reciprocity,
    Hhi,
}

impl Outcome {
    pub const ALL: [Outcome; 7] = [
        Outcome::EfficientStructure,
        Outcome::Contribution,
        Outcome::Links,
        Outcome::Isolated,
        Outcome::Cost,
        Outcome::Reciprocity,
        Outcome::Hhi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::EfficientStructure => "efficient_structure",
            Outcome::Contribution => "mean_contribution",
            Outcome::Links => "mean_links",
            Outcome::Isolated => "isolated_count",
            Outcome::Cost => "mean_cost",
            Outcome::Reciprocity => "reciprocity",
            Outcome::Hhi => "hhi",
        }
    }

    pub fn value(self, row: &OutcomeRow) -> Option<f64> {
        match self {
            Outcome::EfficientStructure => Some(row.efficient_structure as u8 as f64),
            Outcome::Contribution => Some(row.mean_contribution),
            Outcome::Links => Some(row.mean_links),
            Outcome::Isolated => Some(row.isolated_count as f64),
            Outcome::Cost => Some(row.mean_cost),
            Outcome::Reciprocity => Some(row.reciprocity),
            Outcome::Hhi => row.hhi,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown outcome {s:?}")))
    }
}

/// Outcome row with its panel coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub group: String,
    pub period: usize,
    /// First treatment period of the group; 0 for baseline-only groups.
    pub treatment_start: usize,
    pub outcome: OutcomeRow,
}

impl OutcomeRecord {
    pub fn treated(&self) -> bool {
        self.treatment_start > 0 && self.period >= self.treatment_start
    }
}

pub fn outcome_table(panels: &[GroupPanel], mpcr: &MpcrSpec) -> Result<Vec<OutcomeRecord>> {
    let mut out = Vec::new();
    for p in panels {
        for t in 1..=p.periods() {
            out.push(OutcomeRecord {
                group: p.group_id.clone(),
                period: t,
                treatment_start: p.treatment_start,
                outcome: outcome_row(p.state(t), mpcr)?,
            });
        }
    }
    Ok(out)
}

/// Plot-ready per-period outcome CSV; `hhi` is left empty when undefined.
pub fn write_outcomes(records: &[OutcomeRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = crate::io::csv_writer(path)?;
    let mut header = vec!["group", "period", "treatment"];
    header.extend(Outcome::ALL.iter().map(|o| o.name()));
    w.write_record(&header)?;
    for r in records {
        let mut rec = vec![
            r.group.clone(),
            r.period.to_string(),
            (r.treated() as u8).to_string(),
        ];
        rec.extend(Outcome::ALL.iter().map(|o| {
            o.value(&r.outcome)
                .map(|v| v.to_string())
                .unwrap_or_default()
        }));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One observation of a panel regression.
#[derive(Clone, Debug, PartialEq)]
pub struct DidObservation {
    pub group: String,
    pub period: usize,
    /// 0 for groups never treated.
    pub treatment_start: usize,
    pub y: f64,
}

impl DidObservation {
    /// Period, treatment dummy, treatment × periods since the intervention.
    fn regressors(&self) -> [f64; 3] {
        let treated = self.treatment_start > 0 && self.period >= self.treatment_start;
        let t = treated as u8 as f64;
        let since = self.period as f64 - self.treatment_start as f64;
        [self.period as f64, t, t * since]
    }
}

pub const DID_REGRESSORS: [&str; 3] = ["period", "treatment", "treatment_x_period"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub coef: f64,
    /// Absent with a single cluster.
    pub se: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DidResult {
    pub outcome: String,
    pub n_obs: usize,
    pub n_groups: usize,
    pub coefficients: Vec<Coefficient>,
    /// Residuals in input order.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl DidResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Within-group OLS of `y` on period, treatment and treatment × (period −
/// treatment start), with group-clustered covariance scaled by
/// `C/(C−1)·(D−1)/(D−K)`.
pub fn did_regression(obs: &[DidObservation], outcome: &str) -> Result<DidResult> {
    const K: usize = 3;
    let d = obs.len();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (r, o) in obs.iter().enumerate() {
        groups.entry(o.group.as_str()).or_default().push(r);
    }
    if groups.is_empty() {
        return Err(Error::Regression(format!("{outcome}: no observations")));
    }
    let mut x = DMatrix::zeros(d, K);
    let mut y = DVector::zeros(d);
    for rows in groups.values() {
        let len = rows.len() as f64;
        let mut mean_x = [0.0; K];
        let mut mean_y = 0.0;
        for &r in rows {
            let reg = obs[r].regressors();
            for k in 0..K {
                mean_x[k] += reg[k] / len;
            }
            mean_y += obs[r].y / len;
        }
        for &r in rows {
            let reg = obs[r].regressors();
            for k in 0..K {
                x[(r, k)] = reg[k] - mean_x[k];
            }
            y[r] = obs[r].y - mean_y;
        }
    }
    let xtx = x.transpose() * &x;
    let sv = xtx.clone().svd(false, false).singular_values;
    if sv.min().is_nan() || sv.min() <= 1e-10 * sv.max().max(1e-300) {
        return Err(Error::Regression(format!(
            "{outcome}: regressors are collinear after removing group means"
        )));
    }
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Regression(format!("{outcome}: singular design")))?;
    let beta = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &beta;

    let c = groups.len();
    let se: Vec<Option<f64>> = if c > 1 && d > K {
        let mut meat = DMatrix::<f64>::zeros(K, K);
        for rows in groups.values() {
            let mut s = DVector::<f64>::zeros(K);
            for &r in rows {
                for k in 0..K {
                    s[k] += x[(r, k)] * resid[r];
                }
            }
            meat += &s * s.transpose();
        }
        let (cf, df) = (c as f64, d as f64);
        let factor = cf / (cf - 1.0) * (df - 1.0) / (df - K as f64);
        let cov = &xtx_inv * meat * &xtx_inv * factor;
        (0..K).map(|k| Some(cov[(k, k)].max(0.0).sqrt())).collect()
    } else {
        vec![None; K]
    };
    let t_dist = (c > 1).then(|| StudentsT::new(0.0, 1.0, (c - 1) as f64).expect("positive df"));
    let coefficients = (0..K)
        .map(|k| {
            let p_value = match (&t_dist, se[k]) {
                (Some(t), Some(s)) if s > 0.0 => Some(2.0 * (1.0 - t.cdf((beta[k] / s).abs()))),
                _ => None,
            };
            Coefficient {
                name: DID_REGRESSORS[k].to_string(),
                coef: beta[k],
                se: se[k],
                p_value,
            }
        })
        .collect();
    Ok(DidResult {
        outcome: outcome.to_string(),
        n_obs: d,
        n_groups: c,
        coefficients,
        residuals: resid.as_slice().to_vec(),
    })
}

/// Regression of one outcome column; rows where it is undefined are dropped.
pub fn did_for_outcome(records: &[OutcomeRecord], outcome: Outcome) -> Result<DidResult> {
    let obs: Vec<DidObservation> = records
        .iter()
        .filter_map(|r| {
            outcome.value(&r.outcome).map(|y| DidObservation {
                group: r.group.clone(),
                period: r.period,
                treatment_start: r.treatment_start,
                y,
            })
        })
        .collect();
    did_regression(&obs, outcome.name())
}
