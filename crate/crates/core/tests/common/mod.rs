//! Independent brute-force oracles shared by the integration tests.
//!
//! These re-derive every potential through `game::potential` and enumerate
//! choice sets directly with plain exponentials; they share nothing with
//! the enumeration kernel used by the library objectives.

#![allow(dead_code)]

use sharenet::dynamics::GroupPanel;
use sharenet::game::{potential, Grid, InfoSet, LinkSet, MpcrTable, ThetaParams};
use sharenet::Model;

pub const TABLE2_MLE: [f64; 4] = [5.2368, 20.1884, -6.9893, 24.2407];

pub fn table2() -> ThetaParams {
    ThetaParams {
        base: TABLE2_MLE,
        het: None,
    }
}

/// Every link set available to player `i` in a group of `n`.
pub fn link_sets(n: usize, i: usize) -> Vec<LinkSet> {
    (0u32..1 << n)
        .filter(|bits| bits >> i & 1 == 0)
        .map(LinkSet::from_bits)
        .collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Lagged information built by hand from the adjacency matrix.
fn lagged_info(panel: &GroupPanel, mpcr: &MpcrTable, t: usize, i: usize) -> InfoSet {
    let prev = panel.state(t - 1);
    let adj = prev.network.adjacency_matrix();
    let n = panel.n();
    let flows: Vec<f64> = (0..n)
        .map(|j| {
            if j == i || adj[i][j] == 0 {
                0.0
            } else {
                let d_j = (0..n).filter(|&r| r != j && adj[r][j] == 1).count();
                prev.contributions.value(j) * mpcr.at(d_j)
            }
        })
        .collect();
    if panel.regime(t).is_treatment() {
        InfoSet::treatment(flows)
    } else {
        InfoSet::baseline(flows.iter().sum())
    }
}

fn each_decision(
    panels: &[GroupPanel],
    model: &Model,
    mut visit: impl FnMut(&GroupPanel, &MpcrTable, usize, usize, InfoSet),
) {
    for panel in panels {
        let mpcr = model.mpcr.table(panel.n()).unwrap();
        for t in 2..=panel.periods() {
            for i in 0..panel.n() {
                let info = lagged_info(panel, &mpcr, t, i);
                visit(panel, &mpcr, t, i, info);
            }
        }
    }
}

pub fn oracle_loglik(panels: &[GroupPanel], theta: &ThetaParams, model: &Model) -> f64 {
    let grid = Grid::new(model.q).unwrap();
    let mut total = 0.0;
    each_decision(panels, model, |panel, mpcr, t, i, info| {
        let x = panel.covariate(i);
        let phi = |links: LinkSet, c: f64| {
            model.feature_scale * potential(links, c, &info, theta, mpcr, x).unwrap()
        };
        let all: Vec<f64> = link_sets(panel.n(), i)
            .into_iter()
            .flat_map(|l| (0..grid.q()).map(move |k| (l, k)))
            .map(|(l, k)| phi(l, grid.value(k)))
            .collect();
        let cur = panel.state(t);
        total += phi(cur.network.out_links(i), cur.contributions.value(i)) - log_sum_exp(&all);
    });
    total
}

pub fn oracle_pseudo_loglik(panels: &[GroupPanel], theta: &ThetaParams, model: &Model) -> f64 {
    let grid = Grid::new(model.q).unwrap();
    let mut total = 0.0;
    each_decision(panels, model, |panel, mpcr, t, i, info| {
        let x = panel.covariate(i);
        let phi = |links: LinkSet, c: f64| {
            model.feature_scale * potential(links, c, &info, theta, mpcr, x).unwrap()
        };
        let cur = panel.state(t);
        let links = cur.network.out_links(i);
        let c = cur.contributions.value(i);
        let levels: Vec<f64> = (0..grid.q()).map(|k| phi(links, grid.value(k))).collect();
        total += phi(links, c) - log_sum_exp(&levels);
        for j in (0..panel.n()).filter(|&j| j != i) {
            let pair = [phi(links.without(j), c), phi(links.with(j), c)];
            total += phi(links, c) - log_sum_exp(&pair);
        }
    });
    total
}

/// Central finite-difference gradient of a scalar function.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Planted difference-in-differences coefficients: period, treatment,
/// treatment × periods since the intervention.
pub const PLANTED_DID: [f64; 3] = [-0.03, 0.8, 0.01];

/// Experiment-shaped outcome panel (46 groups, 28 treated from period 16,
/// 30 periods) with normal group effects and idiosyncratic noise.
pub fn planted_did(seed: u64) -> Vec<sharenet::metrics::DidObservation> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let effect = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut out = Vec::new();
    for g in 0..46 {
        let start = if g < 28 { 16 } else { 0 };
        let alpha = effect.sample(&mut rng);
        for t in 1..=30usize {
            let treated = start > 0 && t >= start;
            let d = treated as u8 as f64;
            let y = alpha
                + PLANTED_DID[0] * t as f64
                + PLANTED_DID[1] * d
                + PLANTED_DID[2] * d * (t as f64 - start as f64)
                + noise.sample(&mut rng);
            out.push(sharenet::metrics::DidObservation {
                group: format!("g{g}"),
                period: t,
                treatment_start: start,
                y,
            });
        }
    }
    out
}
