mod common;

use common::table2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sharenet::dynamics::{
    choice_distribution, simulate_panel, step_exact, step_mh, ChoiceTable, RevisionRule, SimConfig,
    StepContext,
};
use sharenet::{ContributionProfile, CrossSection, Grid, Model, NetworkState, Regime, ThetaParams};

/// Expected total-variation distance of an `draws`-sample empirical
/// distribution from its source, by the normal approximation per cell.
fn expected_tv_noise(p: &[f64], draws: f64) -> f64 {
    0.5 * (2.0 / (std::f64::consts::PI * draws)).sqrt() * p.iter().map(|x| x.sqrt()).sum::<f64>()
}

/// Previous state with substantial incoming benefits for player 0.
fn fixture(q: usize) -> CrossSection {
    let grid = Grid::new(q).unwrap();
    CrossSection::new(
        NetworkState::from_edges(4, &[(1, 0), (2, 0), (0, 1), (3, 2)]).unwrap(),
        ContributionProfile::new(grid, vec![q - 1, q - 1, (q - 1) / 2, q - 1]).unwrap(),
    )
    .unwrap()
}

fn table_for(prev: &CrossSection, model: &Model, regime: Regime, i: usize) -> ChoiceTable {
    let mpcr = model.mpcr.table(4).unwrap();
    let info = prev.info_for(&mpcr, i, regime);
    choice_distribution(i, &info, &table2(), model, &mpcr, None).unwrap()
}

#[test]
fn exact_steps_reproduce_choice_distribution() {
    // three contribution levels keep the sampling noise of 10^5 draws well below the threshold
    let model = Model::default().with_q(3);
    let prev = fixture(3);
    let regime = Regime::Treatment;
    let ctx = StepContext::new(&model, 4, table2()).unwrap();
    let tables: Vec<ChoiceTable> = (0..4)
        .map(|i| table_for(&prev, &model, regime, i))
        .collect();
    let draws = 100_000;
    let mut counts = vec![vec![0u64; tables[0].len()]; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..draws {
        let next = step_exact(&prev, regime, &ctx, &mut rng).unwrap();
        for i in 0..4 {
            let k = tables[i].index(next.network.out_links(i), next.contributions.level(i));
            counts[i][k] += 1;
        }
    }
    for i in 0..4 {
        let noise = expected_tv_noise(tables[i].probs(), draws as f64);
        assert!(
            noise < 0.007,
            "fixture too diffuse for the threshold: {noise}"
        );
        let tv = tables[i].total_variation(&counts[i]);
        assert!(tv < 0.01, "player {i}: TV {tv}");
    }
}

#[test]
fn metropolis_reproduces_choice_distribution() {
    let model = Model::default().with_q(3);
    let prev = fixture(3);
    let regime = Regime::Treatment;
    let player = 0;
    let table = table_for(&prev, &model, regime, player);
    let replicates = 10_000u64;
    let noise = expected_tv_noise(table.probs(), replicates as f64);
    assert!(
        noise < 0.014,
        "fixture too diffuse for the threshold: {noise}"
    );
    let ctx = StepContext::new(&model, 4, table2())
        .unwrap()
        .with_revision(RevisionRule::Players(vec![player]));
    let chosen: Vec<usize> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(r);
            let (next, _) = step_mh(&prev, regime, &ctx, &mut rng, 5000).unwrap();
            table.index(
                next.network.out_links(player),
                next.contributions.level(player),
            )
        })
        .collect();
    let mut counts = vec![0u64; table.len()];
    for k in chosen {
        counts[k] += 1;
    }
    let tv = table.total_variation(&counts);
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn metropolis_accepts_everything_at_zero_theta() {
    let model = Model::default();
    let ctx = StepContext::new(&model, 4, ThetaParams::zeros(false)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, stats) = step_mh(&fixture(21), Regime::Baseline, &ctx, &mut rng, 50).unwrap();
    assert_eq!(stats.proposed, 50 * 4 * 4);
    assert_eq!(stats.accepted, stats.proposed);
    let (same, stats) = step_mh(&fixture(21), Regime::Baseline, &ctx, &mut rng, 0).unwrap();
    assert_eq!(same, fixture(21));
    assert_eq!(stats.proposed, 0);
}

#[test]
fn baseline_argmax_without_history_is_inaction() {
    let model = Model::default();
    let mpcr = model.mpcr.table(4).unwrap();
    let info = sharenet::InfoSet::baseline(0.0);
    let t = choice_distribution(0, &info, &table2(), &model, &mpcr, None).unwrap();
    let (links, level) = t.argmax();
    assert!(links.is_empty());
    assert_eq!(level, 0);
    assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn revision_rule_freezes_other_players() {
    let model = Model::default();
    let ctx = StepContext::new(&model, 4, table2())
        .unwrap()
        .with_revision(RevisionRule::Players(vec![0]));
    let prev = fixture(21);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let next = step_exact(&prev, Regime::Treatment, &ctx, &mut rng).unwrap();
        for i in 1..4 {
            assert_eq!(next.network.out_links(i), prev.network.out_links(i));
            assert_eq!(next.contributions.level(i), prev.contributions.level(i));
        }
    }
}

#[test]
fn experiment_design_dimensions_and_determinism() {
    let cfg = SimConfig::default();
    let a = simulate_panel(&cfg).unwrap();
    assert_eq!(a.len(), 46);
    assert_eq!(a.iter().filter(|p| p.is_treatment_group()).count(), 28);
    assert!(a.iter().all(|p| p.periods() == 30 && p.n() == 4));
    assert!(a[..28].iter().all(|p| p.treatment_start == 16));
    let b = simulate_panel(&cfg).unwrap();
    assert_eq!(a, b);

    let one = simulate_panel(&SimConfig {
        periods: 1,
        treatment_start: 2,
        ..SimConfig::default()
    })
    .unwrap();
    assert!(one.iter().all(|p| p.periods() == 1));
}

#[test]
fn simulation_is_identical_across_thread_counts() {
    let cfg = SimConfig {
        n_groups: 8,
        n_treatment_groups: 4,
        seed: 5,
        ..SimConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_panel(&cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn treatment_raises_mutual_links() {
    let panels = simulate_panel(&SimConfig {
        n_groups: 40,
        n_treatment_groups: 20,
        seed: 2,
        ..SimConfig::default()
    })
    .unwrap();
    let mut mutual = [0.0; 2];
    let mut cells = [0.0; 2];
    for p in &panels {
        for t in 1..=p.periods() {
            let s = p.state(t);
            let k = p.regime(t).is_treatment() as usize;
            cells[k] += 1.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    if s.network.adj(i, j) && s.network.adj(j, i) {
                        mutual[k] += 1.0;
                    }
                }
            }
        }
    }
    assert!(mutual[1] / cells[1] > mutual[0] / cells[0]);
}
