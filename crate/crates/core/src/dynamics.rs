//! Forward simulation of logit-response play.
//!
//! Each revising player draws `(links, contribution)` from the logit
//! distribution over its full choice set given what it observed in the
//! previous period. Small groups are sampled exactly by enumeration; larger
//! groups use a per-player Metropolis chain over the same target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{self, dot4, Decision, Workspace};
use crate::error::{Error, Result};
use crate::game::{
    ContributionProfile, CrossSection, Grid, InfoSet, LinkSet, MpcrTable, NetworkState,
    PlayerCovariates, Regime, ThetaParams, MAX_PLAYERS,
};
use crate::model::Model;

/// Largest group size sampled by full enumeration under [`Sampler::Auto`].
pub const EXACT_SAMPLER_MAX_N: usize = 16;

/// Default Metropolis sweeps per revision.
pub const DEFAULT_MH_SWEEPS: usize = 5000;

/// Observed (or simulated) history of one group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPanel {
    pub group_id: String,
    /// First period (1-based) played under the treatment regime; 0 = never.
    pub treatment_start: usize,
    /// Cross-sections for periods `1..=T`.
    pub states: Vec<CrossSection>,
    pub covariates: Option<Vec<PlayerCovariates>>,
}

impl GroupPanel {
    pub fn new(
        group_id: impl Into<String>,
        treatment_start: usize,
        states: Vec<CrossSection>,
        covariates: Option<Vec<PlayerCovariates>>,
    ) -> Result<Self> {
        let group_id = group_id.into();
        let first = states
            .first()
            .ok_or_else(|| Error::Data(format!("group {group_id}: no periods")))?;
        let (n, grid) = (first.n(), first.contributions.grid());
        for (t, s) in states.iter().enumerate() {
            if s.n() != n || s.contributions.grid() != grid {
                return Err(Error::Data(format!(
                    "group {group_id}, period {}: inconsistent group size or grid",
                    t + 1
                )));
            }
        }
        if let Some(x) = &covariates {
            if x.len() != n {
                return Err(Error::Data(format!(
                    "group {group_id}: {} covariate rows for {n} players",
                    x.len()
                )));
            }
        }
        Ok(GroupPanel {
            group_id,
            treatment_start,
            states,
            covariates,
        })
    }

    pub fn n(&self) -> usize {
        self.states[0].n()
    }

    pub fn periods(&self) -> usize {
        self.states.len()
    }

    pub fn grid(&self) -> Grid {
        self.states[0].contributions.grid()
    }

    /// Regime of a 1-based period.
    pub fn regime(&self, period: usize) -> Regime {
        if self.treatment_start > 0 && period >= self.treatment_start {
            Regime::Treatment
        } else {
            Regime::Baseline
        }
    }

    pub fn is_treatment_group(&self) -> bool {
        self.treatment_start > 0 && self.treatment_start <= self.periods()
    }

    /// Cross-section of a 1-based period.
    pub fn state(&self, period: usize) -> &CrossSection {
        &self.states[period - 1]
    }

    pub fn covariate(&self, i: usize) -> Option<&PlayerCovariates> {
        self.covariates.as_ref().map(|x| &x[i])
    }
}

/// Exact logit choice probabilities of one player.
#[derive(Clone, Debug)]
pub struct ChoiceTable {
    decision: Decision,
    q: usize,
    probs: Vec<f64>,
}

impl ChoiceTable {
    pub fn player(&self) -> usize {
        self.decision.player
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Flat probabilities, laid out `[compact_mask * q + level]`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn index(&self, links: LinkSet, level: usize) -> usize {
        self.decision.compact(links) as usize * self.q + level
    }

    pub fn choice(&self, index: usize) -> (LinkSet, usize) {
        (
            self.decision.expand((index / self.q) as u32),
            index % self.q,
        )
    }

    pub fn prob(&self, links: LinkSet, level: usize) -> f64 {
        self.probs[self.index(links, level)]
    }

    /// Most probable choice (first on ties).
    pub fn argmax(&self) -> (LinkSet, usize) {
        let best = self
            .probs
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc },
            );
        self.choice(best.0)
    }

    /// Total-variation distance to empirical counts over the same layout.
    pub fn total_variation(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        0.5 * self
            .probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| (p - c as f64 / total as f64).abs())
            .sum::<f64>()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (LinkSet, usize) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.choice(k);
            }
        }
        // u landed in the rounding slack above the cumulative sum
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        self.choice(last)
    }
}

/// Logit distribution over all `2^(n−1)·q` choices of player `i`.
pub fn choice_distribution(
    i: usize,
    info: &InfoSet,
    theta: &ThetaParams,
    model: &Model,
    mpcr: &MpcrTable,
    x: Option<&PlayerCovariates>,
) -> Result<ChoiceTable> {
    let n = mpcr.n();
    if n > MAX_PLAYERS || i >= n {
        return Err(Error::Domain(format!("player {i} in a group of {n}")));
    }
    info.validate()?;
    let coef = scaled(theta.effective(x)?, model.feature_scale);
    let decision = Decision::new(i, n, info);
    let probs = choice::probabilities(&decision, mpcr, model.q, &coef, &mut Workspace::default())?;
    Ok(ChoiceTable {
        decision,
        q: model.q,
        probs,
    })
}

pub(crate) fn scaled(mut coef: [f64; 4], scale: f64) -> [f64; 4] {
    for c in &mut coef {
        *c *= scale;
    }
    coef
}

/// Which players revise their action each period.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionRule {
    /// Everyone revises simultaneously.
    #[default]
    All,
    /// Only the listed players (0-based) revise.
    Players(Vec<usize>),
}

impl RevisionRule {
    pub fn revises(&self, i: usize) -> bool {
        match self {
            RevisionRule::All => true,
            RevisionRule::Players(p) => p.contains(&i),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Exact for `n <= 16`, Metropolis otherwise.
    #[default]
    Auto,
    Exact,
    Metropolis {
        sweeps: usize,
    },
}

/// Everything a transition needs besides the previous state.
#[derive(Clone, Debug)]
pub struct StepContext<'a> {
    pub model: &'a Model,
    pub mpcr: MpcrTable,
    pub theta: ThetaParams,
    pub covariates: Option<&'a [PlayerCovariates]>,
    pub revision: RevisionRule,
}

impl<'a> StepContext<'a> {
    pub fn new(model: &'a Model, n: usize, theta: ThetaParams) -> Result<Self> {
        model.validate()?;
        Ok(StepContext {
            model,
            mpcr: model.mpcr.table(n)?,
            theta,
            covariates: None,
            revision: RevisionRule::All,
        })
    }

    pub fn with_covariates(mut self, x: Option<&'a [PlayerCovariates]>) -> Self {
        self.covariates = x;
        self
    }

    pub fn with_revision(mut self, revision: RevisionRule) -> Self {
        self.revision = revision;
        self
    }

    fn coef(&self, i: usize) -> Result<[f64; 4]> {
        let x = self.covariates.map(|x| &x[i]);
        Ok(scaled(self.theta.effective(x)?, self.model.feature_scale))
    }

    fn grid(&self) -> Result<Grid> {
        self.model.grid()
    }
}

/// Draws every revising player's action exactly from its choice distribution.
pub fn step_exact<R: Rng>(
    prev: &CrossSection,
    regime: Regime,
    ctx: &StepContext<'_>,
    rng: &mut R,
) -> Result<CrossSection> {
    let n = prev.n();
    let mut next = prev.clone();
    let mut ws = Workspace::default();
    for i in 0..n {
        if !ctx.revision.revises(i) {
            continue;
        }
        let info = prev.info_for(&ctx.mpcr, i, regime);
        let decision = Decision::new(i, n, &info);
        let probs =
            choice::probabilities(&decision, &ctx.mpcr, ctx.model.q, &ctx.coef(i)?, &mut ws)?;
        let table = ChoiceTable {
            decision,
            q: ctx.model.q,
            probs,
        };
        let (links, level) = table.sample(rng);
        next.network.set_out_links(i, links)?;
        next.contributions.set_level(i, level)?;
    }
    Ok(next)
}

/// Proposal and acceptance counts of a Metropolis transition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MhStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MhStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Metropolis transition: per revising player, `sweeps` sweeps of `n`
/// random-scan proposals, each toggling one link or redrawing the
/// contribution level uniformly, started from the player's previous action.
pub fn step_mh<R: Rng>(
    prev: &CrossSection,
    regime: Regime,
    ctx: &StepContext<'_>,
    rng: &mut R,
    sweeps: usize,
) -> Result<(CrossSection, MhStats)> {
    let n = prev.n();
    let q = ctx.model.q;
    let grid = ctx.grid()?;
    let mut next = prev.clone();
    let mut stats = MhStats::default();
    if sweeps == 0 {
        return Ok((next, stats));
    }
    for i in 0..n {
        if !ctx.revision.revises(i) {
            continue;
        }
        let info = prev.info_for(&ctx.mpcr, i, regime);
        let decision = Decision::new(i, n, &info);
        let coef = ctx.coef(i)?;
        let mut mask = decision.compact(prev.network.out_links(i));
        let mut level = prev.contributions.level(i);
        let (mut d, mut s) = decision.stats(mask);
        let mut a = dot4(&coef, &decision.features(&ctx.mpcr, d, s));
        let mut phi = grid.value(level) * a;
        for _ in 0..sweeps * n {
            let coord = rng.random_range(0..n);
            let (new_mask, new_level, new_d, new_s) = if coord < n - 1 {
                let bit = 1u32 << coord;
                if mask & bit == 0 {
                    (mask | bit, level, d + 1, s + decision.inc(coord))
                } else {
                    (mask & !bit, level, d - 1, s - decision.inc(coord))
                }
            } else {
                (mask, rng.random_range(0..q), d, s)
            };
            let new_a = if new_mask == mask {
                a
            } else {
                dot4(&coef, &decision.features(&ctx.mpcr, new_d, new_s))
            };
            let new_phi = grid.value(new_level) * new_a;
            if !new_phi.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite potential for player {i} in Metropolis proposal"
                )));
            }
            let delta = new_phi - phi;
            let u: f64 = rng.random();
            stats.proposed += 1;
            if delta >= 0.0 || u < delta.exp() {
                stats.accepted += 1;
                let removed = new_d < d;
                mask = new_mask;
                level = new_level;
                d = new_d;
                // recompute from scratch on removal to avoid drift in S
                s = if removed {
                    decision.stats(mask).1
                } else {
                    new_s
                };
                a = new_a;
                phi = new_phi;
            }
        }
        next.network.set_out_links(i, decision.expand(mask))?;
        next.contributions.set_level(i, level)?;
    }
    Ok((next, stats))
}

/// One transition with the configured sampler.
pub fn step<R: Rng>(
    prev: &CrossSection,
    regime: Regime,
    ctx: &StepContext<'_>,
    sampler: Sampler,
    rng: &mut R,
) -> Result<CrossSection> {
    match sampler {
        Sampler::Exact => step_exact(prev, regime, ctx, rng),
        Sampler::Auto if prev.n() <= EXACT_SAMPLER_MAX_N => step_exact(prev, regime, ctx, rng),
        Sampler::Auto => Ok(step_mh(prev, regime, ctx, rng, DEFAULT_MH_SWEEPS)?.0),
        Sampler::Metropolis { sweeps } => Ok(step_mh(prev, regime, ctx, rng, sweeps)?.0),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialRule {
    /// Period 1 drawn from the logit response to an empty history.
    #[default]
    LogitFromEmptyHistory,
    /// Period 1 is the empty network with zero contributions.
    Empty,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateRule {
    #[default]
    None,
    /// Independent standard-normal trust and reciprocity scores.
    StandardNormal,
}

/// Simulation design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_groups: usize,
    /// The first `n_treatment_groups` groups switch regime at `treatment_start`.
    pub n_treatment_groups: usize,
    pub n: usize,
    pub periods: usize,
    pub treatment_start: usize,
    pub model: Model,
    pub theta: ThetaParams,
    pub seed: u64,
    pub initial: InitialRule,
    pub revision: RevisionRule,
    pub sampler: Sampler,
    pub covariates: CovariateRule,
}

impl Default for SimConfig {
    /// The laboratory design with the homogeneous maximum-likelihood estimates.
    fn default() -> Self {
        SimConfig {
            n_groups: 46,
            n_treatment_groups: 28,
            n: 4,
            periods: 30,
            treatment_start: 16,
            model: Model::default(),
            theta: ThetaParams::new(5.2368, 20.1884, -6.9893, 24.2407),
            seed: 0,
            initial: InitialRule::default(),
            revision: RevisionRule::default(),
            sampler: Sampler::default(),
            covariates: CovariateRule::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.model.mpcr.table(self.n)?;
        if self.n_treatment_groups > self.n_groups {
            return Err(Error::Config(format!(
                "{} treatment groups exceed {} groups",
                self.n_treatment_groups, self.n_groups
            )));
        }
        if self.periods == 0 {
            return Err(Error::Config("at least one period is required".into()));
        }
        if self.treatment_start > self.periods + 1 {
            return Err(Error::Config(format!(
                "treatment start {} beyond period {}",
                self.treatment_start,
                self.periods + 1
            )));
        }
        if self.n_treatment_groups > 0 && self.treatment_start == 0 {
            return Err(Error::Config(
                "treatment groups need a treatment start period".into(),
            ));
        }
        if !self.theta.is_finite() {
            return Err(Error::Config("parameters must be finite".into()));
        }
        if self.theta.is_heterogeneous() && self.covariates == CovariateRule::None {
            return Err(Error::Config(
                "heterogeneous parameters need a covariate rule".into(),
            ));
        }
        if let RevisionRule::Players(p) = &self.revision {
            if p.iter().any(|&i| i >= self.n) {
                return Err(Error::Config(
                    "revision rule names a player outside the group".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Design of one simulated group.
#[derive(Clone, Debug)]
pub struct GroupDesign {
    pub group_id: String,
    pub n: usize,
    pub periods: usize,
    pub treatment_start: usize,
    /// Fixed first cross-section; `None` draws it per the initial rule.
    pub initial: Option<CrossSection>,
    pub covariates: Option<Vec<PlayerCovariates>>,
}

/// Simulates one group forward.
pub fn simulate_group<R: Rng>(
    design: &GroupDesign,
    model: &Model,
    theta: &ThetaParams,
    initial_rule: &InitialRule,
    revision: &RevisionRule,
    sampler: Sampler,
    rng: &mut R,
) -> Result<GroupPanel> {
    let n = design.n;
    let grid = model.grid()?;
    let ctx = StepContext::new(model, n, *theta)?
        .with_covariates(design.covariates.as_deref())
        .with_revision(revision.clone());
    let regime_at = |t: usize| {
        if design.treatment_start > 0 && t >= design.treatment_start {
            Regime::Treatment
        } else {
            Regime::Baseline
        }
    };

    let first = match (&design.initial, initial_rule) {
        (Some(s), _) => s.clone(),
        (None, InitialRule::Empty) => CrossSection::empty(n, grid)?,
        (None, InitialRule::LogitFromEmptyHistory) => {
            // everyone chooses in period 1; an empty cross-section carries no flows
            let empty = CrossSection::empty(n, grid)?;
            let all = StepContext {
                revision: RevisionRule::All,
                ..ctx.clone()
            };
            step(&empty, regime_at(1), &all, sampler, rng)?
        }
    };
    let mut states = Vec::with_capacity(design.periods);
    states.push(first);
    for t in 2..=design.periods {
        let next = step(&states[t - 2], regime_at(t), &ctx, sampler, rng)?;
        states.push(next);
    }
    GroupPanel::new(
        design.group_id.clone(),
        design.treatment_start,
        states,
        design.covariates.clone(),
    )
}

/// Per-group random stream derived from a run seed.
pub fn group_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates every group of a design; a pure function of the config.
pub fn simulate_panel(cfg: &SimConfig) -> Result<Vec<GroupPanel>> {
    cfg.validate()?;
    (0..cfg.n_groups)
        .into_par_iter()
        .map(|g| {
            let mut rng = group_rng(cfg.seed, g as u64);
            let covariates = match cfg.covariates {
                CovariateRule::None => None,
                CovariateRule::StandardNormal => Some(
                    (0..cfg.n)
                        .map(|_| PlayerCovariates {
                            trust: rng.sample(StandardNormal),
                            rec1: rng.sample(StandardNormal),
                            rec2: rng.sample(StandardNormal),
                        })
                        .collect(),
                ),
            };
            let design = GroupDesign {
                group_id: (g + 1).to_string(),
                n: cfg.n,
                periods: cfg.periods,
                treatment_start: if g < cfg.n_treatment_groups {
                    cfg.treatment_start
                } else {
                    0
                },
                initial: None,
                covariates,
            };
            simulate_group(
                &design,
                &cfg.model,
                &cfg.theta,
                &cfg.initial,
                &cfg.revision,
                cfg.sampler,
                &mut rng,
            )
        })
        .collect()
}

/// Uniformly random panel, for fixtures and timing; not a model simulation.
pub fn random_panel<R: Rng>(
    group_id: impl Into<String>,
    n: usize,
    periods: usize,
    treatment_start: usize,
    grid: Grid,
    rng: &mut R,
) -> Result<GroupPanel> {
    let states = (0..periods)
        .map(|_| {
            let links = (0..n)
                .map(|i| LinkSet::from_bits(rng.random_range(0..1u32 << n)).without(i))
                .collect();
            let levels = (0..n).map(|_| rng.random_range(0..grid.q())).collect();
            CrossSection::new(
                NetworkState::from_links(links)?,
                ContributionProfile::new(grid, levels)?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    GroupPanel::new(group_id, treatment_start, states, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MpcrSpec;

    const TABLE2: [f64; 4] = [5.2368, 20.1884, -6.9893, 24.2407];

    fn table2() -> ThetaParams {
        ThetaParams {
            base: TABLE2,
            het: None,
        }
    }

    #[test]
    fn uniform_when_theta_zero() {
        let model = Model::default();
        let mpcr = model.mpcr.table(4).unwrap();
        let info = InfoSet::baseline(0.7);
        let t =
            choice_distribution(0, &info, &ThetaParams::zeros(false), &model, &mpcr, None).unwrap();
        assert_eq!(t.len(), 168);
        for &p in t.probs() {
            assert!((p - 1.0 / 168.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cost_domination_leaves_only_costless_choices() {
        // without links the whole contribution comes back, so it carries no cost
        let model = Model::default();
        let mpcr = model.mpcr.table(4).unwrap();
        let info = InfoSet::treatment(vec![0.0, 0.4, 0.8, 0.2]);
        let theta = ThetaParams::new(1e6, 0.0, 0.0, 0.0);
        let t = choice_distribution(0, &info, &theta, &model, &mpcr, None).unwrap();
        let costless: Vec<usize> = (0..t.len())
            .filter(|&k| {
                let (links, level) = t.choice(k);
                level == 0 || links.is_empty()
            })
            .collect();
        assert_eq!(costless.len(), 8 + 20);
        let mass: f64 = costless.iter().map(|&k| t.probs()[k]).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for &k in &costless {
            assert!((t.probs()[k] - 1.0 / 28.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_without_history_is_no_links_no_contribution() {
        let model = Model::default();
        let mpcr = model.mpcr.table(4).unwrap();
        let info = InfoSet::baseline(0.0);
        let t = choice_distribution(2, &info, &table2(), &model, &mpcr, None).unwrap();
        let (links, level) = t.argmax();
        assert!(links.is_empty());
        assert_eq!(level, 0);
        assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_potential_is_reported() {
        let model = Model::default();
        let mpcr = model.mpcr.table(4).unwrap();
        let theta = ThetaParams::new(f64::INFINITY, 0.0, 0.0, 0.0);
        let err = choice_distribution(0, &InfoSet::baseline(0.0), &theta, &model, &mpcr, None);
        assert!(matches!(err, Err(Error::Numeric(_))));
    }

    fn dyad_state() -> CrossSection {
        let grid = Grid::new(21).unwrap();
        CrossSection::new(
            NetworkState::from_edges(4, &[(0, 1), (1, 0), (2, 3)]).unwrap(),
            ContributionProfile::new(grid, vec![20, 16, 8, 0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn step_is_seed_deterministic() {
        let model = Model::default();
        let ctx = StepContext::new(&model, 4, ThetaParams::zeros(false)).unwrap();
        let prev = dyad_state();
        let a = step_exact(&prev, Regime::Baseline, &ctx, &mut group_rng(9, 0)).unwrap();
        let b = step_exact(&prev, Regime::Baseline, &ctx, &mut group_rng(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_revising_players_repeat() {
        let model = Model::default();
        let ctx = StepContext::new(&model, 4, table2())
            .unwrap()
            .with_revision(RevisionRule::Players(vec![0]));
        let prev = dyad_state();
        let mut rng = group_rng(3, 0);
        for _ in 0..50 {
            let next = step_exact(&prev, Regime::Treatment, &ctx, &mut rng).unwrap();
            for i in 1..4 {
                assert_eq!(next.network.out_links(i), prev.network.out_links(i));
                assert_eq!(next.contributions.level(i), prev.contributions.level(i));
            }
            let (next, _) = step_mh(&prev, Regime::Treatment, &ctx, &mut rng, 3).unwrap();
            for i in 1..4 {
                assert_eq!(next.network.out_links(i), prev.network.out_links(i));
            }
        }
    }

    #[test]
    fn mh_accepts_everything_at_zero_theta() {
        let model = Model::default();
        let ctx = StepContext::new(&model, 4, ThetaParams::zeros(false)).unwrap();
        let (_, stats) = step_mh(
            &dyad_state(),
            Regime::Baseline,
            &ctx,
            &mut group_rng(1, 1),
            100,
        )
        .unwrap();
        assert_eq!(stats.proposed, 4 * 4 * 100);
        assert_eq!(stats.accepted, stats.proposed);
    }

    #[test]
    fn mh_with_zero_sweeps_is_identity() {
        let model = Model::default();
        let ctx = StepContext::new(&model, 4, table2()).unwrap();
        let prev = dyad_state();
        let (next, stats) =
            step_mh(&prev, Regime::Treatment, &ctx, &mut group_rng(1, 1), 0).unwrap();
        assert_eq!(next, prev);
        assert_eq!(stats.proposed, 0);
    }

    #[test]
    fn single_period_panels_hold_initial_state() {
        let cfg = SimConfig {
            periods: 1,
            n_groups: 3,
            n_treatment_groups: 1,
            treatment_start: 1,
            ..SimConfig::default()
        };
        let panels = simulate_panel(&cfg).unwrap();
        assert_eq!(panels.len(), 3);
        assert!(panels.iter().all(|p| p.periods() == 1));
        let cfg = SimConfig {
            initial: InitialRule::Empty,
            ..cfg
        };
        let panels = simulate_panel(&cfg).unwrap();
        let empty = CrossSection::empty(4, Grid::new(21).unwrap()).unwrap();
        assert!(panels.iter().all(|p| p.states[0] == empty));
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            n_treatment_groups: 50,
            ..SimConfig::default()
        };
        assert!(matches!(simulate_panel(&bad), Err(Error::Config(_))));
        let bad = SimConfig {
            treatment_start: 40,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            theta: ThetaParams::zeros(true),
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            model: Model::default().with_mpcr(MpcrSpec::PurelyCongestive(3.0)),
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn panel_regimes() {
        let cfg = SimConfig {
            n_groups: 2,
            n_treatment_groups: 1,
            periods: 5,
            treatment_start: 3,
            ..SimConfig::default()
        };
        let panels = simulate_panel(&cfg).unwrap();
        assert!(panels[0].is_treatment_group());
        assert!(!panels[1].is_treatment_group());
        assert_eq!(panels[0].regime(2), Regime::Baseline);
        assert_eq!(panels[0].regime(3), Regime::Treatment);
        assert_eq!(panels[1].regime(5), Regime::Baseline);
    }
}
