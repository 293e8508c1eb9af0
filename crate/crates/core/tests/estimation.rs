mod common;

use common::{finite_difference, oracle_loglik, oracle_pseudo_loglik, table2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharenet::dynamics::random_panel;
use sharenet::estimation::{
    fit, fit_heterogeneous, gradient, information_criteria, loglik, pseudo_loglik, FitOptions,
    Method,
};
use sharenet::{
    ContributionProfile, CrossSection, Error, GroupPanel, Model, MpcrSpec, NetworkState,
    PlayerCovariates, SimConfig, ThetaParams,
};

fn random_fixture(seed: u64, n: usize, q: usize, groups: usize, periods: usize) -> Vec<GroupPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Model::default().with_q(q).grid().unwrap();
    (0..groups)
        .map(|g| {
            let start = if g % 2 == 0 { 2 } else { 0 };
            random_panel(g.to_string(), n, periods, start, grid, &mut rng).unwrap()
        })
        .collect()
}

fn random_theta(rng: &mut ChaCha8Rng, scale: f64) -> ThetaParams {
    ThetaParams::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

#[test]
fn likelihoods_match_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..12 {
        let n = 2 + case % 3;
        let q = if case % 2 == 0 { 3 } else { 21 };
        let panels = random_fixture(case as u64, n, q, 3, 4);
        let model = Model::default().with_q(q);
        let theta = random_theta(&mut rng, 10.0);
        let full = loglik(&panels, &theta, &model).unwrap();
        let pseudo = pseudo_loglik(&panels, &theta, &model).unwrap();
        let want_full = oracle_loglik(&panels, &theta, &model);
        let want_pseudo = oracle_pseudo_loglik(&panels, &theta, &model);
        assert!(
            (full - want_full).abs() < 1e-10,
            "case {case}: {full} vs {want_full}"
        );
        assert!((pseudo - want_pseudo).abs() < 1e-10, "case {case}");
    }
}

#[test]
fn uniform_values_at_zero_theta() {
    let panels = random_fixture(3, 4, 21, 5, 6);
    let model = Model::default();
    let zero = ThetaParams::zeros(false);
    let d = (5 * 5 * 4) as f64;
    let full = loglik(&panels, &zero, &model).unwrap();
    let pseudo = pseudo_loglik(&panels, &zero, &model).unwrap();
    assert!((full + d * 168f64.ln()).abs() < 1e-9);
    assert!((pseudo + d * (3.0 * 2f64.ln() + 21f64.ln())).abs() < 1e-9);
}

#[test]
fn single_decision_collapses_to_choice_probability() {
    let grid = Model::default().grid().unwrap();
    let first = CrossSection::new(
        NetworkState::from_edges(2, &[(1, 0)]).unwrap(),
        ContributionProfile::new(grid, vec![4, 15]).unwrap(),
    )
    .unwrap();
    let second = CrossSection::new(
        NetworkState::from_edges(2, &[(0, 1)]).unwrap(),
        ContributionProfile::new(grid, vec![20, 0]).unwrap(),
    )
    .unwrap();
    let panel = GroupPanel::new("solo", 0, vec![first, second], None).unwrap();
    let model = Model::default();
    let theta = table2();
    let mpcr = model.mpcr.table(2).unwrap();
    let mut total = 0.0;
    for i in 0..2 {
        let info = panel.state(1).info_for(&mpcr, i, panel.regime(2));
        let table = sharenet::choice_distribution(i, &info, &theta, &model, &mpcr, None).unwrap();
        let chosen = panel.state(2);
        total += table
            .prob(chosen.network.out_links(i), chosen.contributions.level(i))
            .ln();
    }
    let got = loglik(&[panel], &theta, &model).unwrap();
    assert!((got - total).abs() < 1e-12);
}

#[test]
fn pseudo_equals_full_when_links_carry_no_payoff() {
    let model = Model::default().with_mpcr(MpcrSpec::Unchecked(vec![1.0; 4]));
    let panels = random_fixture(5, 4, 21, 4, 5);
    let theta = ThetaParams::new(3.7, 0.0, 0.0, 0.0);
    let full = loglik(&panels, &theta, &model).unwrap();
    let pseudo = pseudo_loglik(&panels, &theta, &model).unwrap();
    assert!((full - pseudo).abs() < 1e-10);
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..6 {
        let n = 2 + case % 3;
        let panels = random_fixture(100 + case as u64, n, 21, 3, 4);
        let model = Model::default();
        let theta = random_theta(&mut rng, 5.0);
        for method in [Method::Mle, Method::Mple] {
            let g = gradient(method, &panels, &theta, &model).unwrap();
            let f = |x: &[f64]| {
                let t = ThetaParams::from_slice(x).unwrap();
                match method {
                    Method::Mle => loglik(&panels, &t, &model).unwrap(),
                    Method::Mple => pseudo_loglik(&panels, &t, &model).unwrap(),
                }
            };
            let fd = finite_difference(f, &theta.to_vec(), 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                let rel = (a - b).abs() / b.abs().max(1.0);
                assert!(rel < 1e-6, "case {case} {method}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn cost_score_on_symmetric_two_player_fixture() {
    // every link set and both corner contributions appear equally often
    let grid = Model::default().with_q(2).grid().unwrap();
    let cs = |edges: &[(usize, usize)], levels: Vec<usize>| {
        CrossSection::new(
            NetworkState::from_edges(2, edges).unwrap(),
            ContributionProfile::new(grid, levels).unwrap(),
        )
        .unwrap()
    };
    let empty = cs(&[], vec![0, 0]);
    let states = [
        empty.clone(),
        cs(&[(0, 1), (1, 0)], vec![1, 1]),
        empty.clone(),
        cs(&[(0, 1), (1, 0)], vec![0, 0]),
        empty.clone(),
        cs(&[], vec![1, 1]),
        empty.clone(),
        cs(&[], vec![0, 0]),
    ];
    // responses always follow an empty history so features only depend on the choice
    let panels: Vec<GroupPanel> = (0..4)
        .map(|k| {
            GroupPanel::new(k.to_string(), 0, states[2 * k..2 * k + 2].to_vec(), None).unwrap()
        })
        .collect();
    let model = Model::default().with_q(2);
    let g = gradient(Method::Mle, &panels, &ThetaParams::zeros(false), &model).unwrap();
    // cost feature is c·(m(d) − 1): −0.2 only for (link, c = 1); observed once per player
    let observed = 2.0 * -0.2;
    let expected = 8.0 * -0.2 / 4.0;
    assert!((g[0] - (observed - expected)).abs() < 1e-12, "{}", g[0]);
}

#[test]
fn information_criteria_identities() {
    let (aic, aicc, bic) = information_criteria(-1000.0, 4, 5336);
    assert!((aic - 2008.0).abs() < 1e-9);
    assert!((aicc.unwrap() - (2008.0 + 40.0 / 5331.0)).abs() < 1e-9);
    assert!((bic - (4.0 * 5336f64.ln() + 2000.0)).abs() < 1e-9);
    assert!(information_criteria(-1.0, 4, 5).1.is_none());
}

#[test]
fn off_grid_contribution_is_reported() {
    let coarse = random_fixture(9, 3, 3, 1, 3);
    let err = loglik(&coarse, &table2(), &Model::default().with_q(4)).unwrap_err();
    match err {
        Error::Data(msg) => assert!(msg.contains("group") && msg.contains("period")),
        other => panic!("unexpected {other:?}"),
    }
}

fn small_simulation(seed: u64) -> Vec<GroupPanel> {
    sharenet::simulate_panel(&SimConfig {
        n_groups: 12,
        n_treatment_groups: 6,
        periods: 12,
        treatment_start: 6,
        seed,
        ..SimConfig::default()
    })
    .unwrap()
}

#[test]
fn fit_converges_and_reports_criteria() {
    let panels = small_simulation(1);
    let model = Model::default();
    let res = fit(
        Method::Mle,
        &panels,
        &ThetaParams::zeros(false),
        &model,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(res.converged, "{}", res.status);
    assert!(res.gradient_norm < 1e-6);
    assert_eq!(res.n_decision_obs, 12 * 11 * 4);
    assert!((res.aic - (2.0 * 4.0 - 2.0 * res.loglik)).abs() < 1e-9);

    // restarting at the optimum needs at most two iterations
    let again = fit(
        Method::Mle,
        &panels,
        &res.theta,
        &model,
        &FitOptions::single_start(),
    )
    .unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 2, "{} iterations", again.iterations);

    let mple = fit(
        Method::Mple,
        &panels,
        &ThetaParams::zeros(false),
        &model,
        &FitOptions::single_start(),
    )
    .unwrap();
    assert!(mple.converged);
    let at_mple = loglik(&panels, &mple.theta, &model).unwrap();
    assert!(res.loglik >= at_mple - 1e-9);
}

#[test]
fn feature_scaling_rescales_estimates_inversely() {
    let base = Model::default();
    let scaled = Model {
        feature_scale: 2.5,
        ..Model::default()
    };
    let truth = table2();
    let half: Vec<f64> = truth.to_vec().iter().map(|v| v / 2.5).collect();
    let panels = sharenet::simulate_panel(&SimConfig {
        n_groups: 10,
        n_treatment_groups: 5,
        periods: 10,
        treatment_start: 5,
        model: scaled.clone(),
        theta: ThetaParams::from_slice(&half).unwrap(),
        ..SimConfig::default()
    })
    .unwrap();
    let opts = FitOptions::single_start();
    let zero = ThetaParams::zeros(false);
    let a = fit(Method::Mle, &panels, &zero, &base, &opts).unwrap();
    let b = fit(Method::Mle, &panels, &zero, &scaled, &opts).unwrap();
    for (x, y) in a.theta.to_vec().iter().zip(b.theta.to_vec()) {
        assert!((x - 2.5 * y).abs() < 1e-5 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn heterogeneous_fit_nests_homogeneous_fit() {
    let mut panels = small_simulation(4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in &mut panels {
        p.covariates = Some(
            (0..p.n())
                .map(|_| PlayerCovariates {
                    trust: rng.random_range(-1.5..1.5),
                    rec1: rng.random_range(-1.5..1.5),
                    rec2: rng.random_range(-1.5..1.5),
                })
                .collect(),
        );
    }
    let model = Model::default();
    let opts = FitOptions::single_start();
    let homo = fit(
        Method::Mle,
        &panels,
        &ThetaParams::zeros(false),
        &model,
        &opts,
    )
    .unwrap();
    let het = fit_heterogeneous(Method::Mle, &panels, &homo.theta, &model, &opts).unwrap();
    assert_eq!(het.k, 16);
    assert!(het.loglik >= homo.loglik - 1e-9);

    panels[0].covariates = None;
    let err = fit_heterogeneous(Method::Mle, &panels, &homo.theta, &model, &opts).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
