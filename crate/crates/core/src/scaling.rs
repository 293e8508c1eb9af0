//! Wall-clock scaling of the two objectives with group size.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{random_panel, GroupPanel};
use crate::error::{Error, Result};
use crate::estimation::{DecisionSet, Method};
use crate::game::ThetaParams;
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingOptions {
    pub n_min: usize,
    pub n_max: usize,
    pub q: usize,
    /// Timed repetitions per group size; the median is reported.
    pub reps: usize,
    pub seed: u64,
    pub groups: usize,
    pub periods: usize,
    /// Each timing repeats the evaluation until at least this long has passed.
    pub min_time_ms: u64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            n_min: 4,
            n_max: 12,
            q: 21,
            reps: 5,
            seed: 0,
            groups: 10,
            periods: 6,
            min_time_ms: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub decisions: usize,
    /// Exponential terms per player and cross-section: `2^(n−1)·q`.
    pub loglik_terms: u64,
    /// `2·(n−1) + q`.
    pub pseudo_terms: u64,
    pub loglik_seconds: f64,
    pub pseudo_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub options: ScalingOptions,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log2(time)` against `n`.
    pub loglik_exponent: f64,
    pub pseudo_exponent: f64,
}

impl ScalingReport {
    pub fn row(&self, n: usize) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// `t(b)/t(a)` for the chosen objective.
    pub fn ratio(&self, method: Method, a: usize, b: usize) -> Option<f64> {
        let (ra, rb) = (self.row(a)?, self.row(b)?);
        Some(match method {
            Method::Mle => rb.loglik_seconds / ra.loglik_seconds,
            Method::Mple => rb.pseudo_seconds / ra.pseudo_seconds,
        })
    }
}

fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let m = x.len() / 2;
    if x.len() % 2 == 1 {
        x[m]
    } else {
        0.5 * (x[m - 1] + x[m])
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn time_one(
    data: &DecisionSet,
    method: Method,
    theta: &ThetaParams,
    min: Duration,
) -> Result<(f64, u64)> {
    let start = Instant::now();
    let mut runs = 0u32;
    loop {
        let terms = data.evaluate(method, theta)?.terms;
        runs += 1;
        let elapsed = start.elapsed();
        if elapsed >= min {
            return Ok((elapsed.as_secs_f64() / runs as f64, terms));
        }
    }
}

/// Times one evaluation of each objective on uniformly random panels of
/// every group size in range, on a single worker thread.
pub fn scaling_table(options: &ScalingOptions) -> Result<ScalingReport> {
    if options.n_min < 2 || options.n_max < options.n_min || options.reps == 0 {
        return Err(Error::Config(
            "need 2 <= n_min <= n_max and reps >= 1".into(),
        ));
    }
    if options.groups == 0 || options.periods < 2 {
        return Err(Error::Config(
            "need at least one group and two periods".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let model = Model::default().with_q(options.q);
    let grid = model.grid()?;
    let theta = ThetaParams::new(5.2368, 20.1884, -6.9893, 24.2407);
    let min = Duration::from_millis(options.min_time_ms);
    let mut rows = Vec::new();
    for n in options.n_min..=options.n_max {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ n as u64);
        let panels: Vec<GroupPanel> = (0..options.groups)
            .map(|g| random_panel(g.to_string(), n, options.periods, 2, grid, &mut rng))
            .collect::<Result<_>>()?;
        let data = DecisionSet::build(&panels, &model)?;
        let decisions = data.decisions();
        let mut full = Vec::with_capacity(options.reps);
        let mut pseudo = Vec::with_capacity(options.reps);
        let mut counts = (0, 0);
        for _ in 0..options.reps {
            let (tf, cf) = pool.install(|| time_one(&data, Method::Mle, &theta, min))?;
            let (tp, cp) = pool.install(|| time_one(&data, Method::Mple, &theta, min))?;
            full.push(tf);
            pseudo.push(tp);
            counts = (cf, cp);
        }
        rows.push(ScalingRow {
            n,
            decisions,
            loglik_terms: counts.0 / decisions as u64,
            pseudo_terms: counts.1 / decisions as u64,
            loglik_seconds: median(full),
            pseudo_seconds: median(pseudo),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let exponent = |f: fn(&ScalingRow) -> f64| {
        if rows.len() < 2 {
            return f64::NAN;
        }
        slope(&ns, &rows.iter().map(|r| f(r).log2()).collect::<Vec<_>>())
    };
    Ok(ScalingReport {
        options: options.clone(),
        loglik_exponent: exponent(|r| r.loglik_seconds),
        pseudo_exponent: exponent(|r| r.pseudo_seconds),
        rows,
    })
}

/// Scaling table as CSV.
pub fn write_scaling(report: &ScalingReport, path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = crate::io::csv_writer(path)?;
    w.write_record([
        "n",
        "decisions",
        "loglik_terms",
        "pseudo_terms",
        "loglik_seconds",
        "pseudo_seconds",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.n.to_string(),
            r.decisions.to_string(),
            r.loglik_terms.to_string(),
            r.pseudo_terms.to_string(),
            format!("{:.6e}", r.loglik_seconds),
            format!("{:.6e}", r.pseudo_seconds),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
