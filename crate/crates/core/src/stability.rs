//! Topological and behavioral stability of cross-sections, efficiency of
//! network structures, and the four-player motif taxonomy.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::GroupPanel;
use crate::error::{Error, Result};
use crate::game::{
    potential, CrossSection, LinkSet, MpcrSpec, MpcrTable, NetworkState, PlayerCovariates, Regime,
    ThetaParams,
};

/// Deviation gains and slopes below this are treated as zero.
pub const STABILITY_TOL: f64 = 1e-9;

/// Parameters of a stability evaluation.
#[derive(Clone, Copy, Debug)]
pub struct StabilitySetting<'a> {
    pub theta: &'a ThetaParams,
    pub mpcr: &'a MpcrSpec,
    pub regime: Regime,
    pub covariates: Option<&'a [PlayerCovariates]>,
    /// Take information from this earlier cross-section instead of the
    /// state's own flows.
    pub lagged: Option<&'a CrossSection>,
}

impl<'a> StabilitySetting<'a> {
    pub fn new(theta: &'a ThetaParams, mpcr: &'a MpcrSpec, regime: Regime) -> Self {
        StabilitySetting {
            theta,
            mpcr,
            regime,
            covariates: None,
            lagged: None,
        }
    }

    pub fn with_covariates(mut self, x: Option<&'a [PlayerCovariates]>) -> Self {
        self.covariates = x;
        self
    }

    pub fn with_lagged(mut self, prev: Option<&'a CrossSection>) -> Self {
        self.lagged = prev;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologicalReport {
    pub stable: bool,
    /// Best potential gain from changing links alone, per player (≥ 0).
    pub gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BehavioralReport {
    pub stable: bool,
    pub topological: TopologicalReport,
    /// Marginal potential of contributing, `φ(c = 1) − φ(c = 0)`, per player.
    pub slopes: Vec<f64>,
    /// Whether each contribution satisfies its first-order or corner condition.
    pub contribution_ok: Vec<bool>,
}

struct Prepared<'a> {
    table: MpcrTable,
    setting: &'a StabilitySetting<'a>,
    state: &'a CrossSection,
}

impl<'a> Prepared<'a> {
    fn new(state: &'a CrossSection, setting: &'a StabilitySetting<'a>) -> Result<Self> {
        let n = state.n();
        if let Some(prev) = setting.lagged {
            if prev.n() != n {
                return Err(Error::Data(
                    "lagged cross-section has a different group size".into(),
                ));
            }
        }
        if let Some(x) = setting.covariates {
            if x.len() != n {
                return Err(Error::Data(format!(
                    "{} covariate rows for {n} players",
                    x.len()
                )));
            }
        }
        Ok(Prepared {
            table: setting.mpcr.table(n)?,
            setting,
            state,
        })
    }

    fn phi(&self, i: usize, links: LinkSet, c: f64) -> Result<f64> {
        let source = self.setting.lagged.unwrap_or(self.state);
        let info = source.info_for(&self.table, i, self.setting.regime);
        let x = self.setting.covariates.map(|x| &x[i]);
        potential(links, c, &info, self.setting.theta, &self.table, x)
    }
}

/// Checks that no player can raise its potential by changing only its link
/// set, holding every contribution fixed.
pub fn is_topologically_stable(
    state: &CrossSection,
    setting: &StabilitySetting,
) -> Result<TopologicalReport> {
    let p = Prepared::new(state, setting)?;
    topological(&p)
}

fn topological(p: &Prepared) -> Result<TopologicalReport> {
    let n = p.state.n();
    let mut gaps = Vec::with_capacity(n);
    for i in 0..n {
        let c = p.state.contributions.value(i);
        let own = p.phi(i, p.state.network.out_links(i), c)?;
        let mut best = own;
        for bits in 0u32..1 << n {
            if bits >> i & 1 == 1 {
                continue;
            }
            best = best.max(p.phi(i, LinkSet::from_bits(bits), c)?);
        }
        gaps.push(best - own);
    }
    Ok(TopologicalReport {
        stable: gaps.iter().all(|&g| g <= STABILITY_TOL),
        gaps,
    })
}

/// Topological stability plus, for every player, a zero marginal potential
/// of contributing or a corner contribution in the direction of its sign.
pub fn is_behaviorally_stable(
    state: &CrossSection,
    setting: &StabilitySetting,
) -> Result<BehavioralReport> {
    let p = Prepared::new(state, setting)?;
    let topological = topological(&p)?;
    let n = state.n();
    let mut slopes = Vec::with_capacity(n);
    let mut contribution_ok = Vec::with_capacity(n);
    for i in 0..n {
        let links = state.network.out_links(i);
        let slope = p.phi(i, links, 1.0)? - p.phi(i, links, 0.0)?;
        let c = state.contributions.value(i);
        contribution_ok.push(
            slope.abs() < STABILITY_TOL || (c == 1.0 && slope > 0.0) || (c == 0.0 && slope < 0.0),
        );
        slopes.push(slope);
    }
    Ok(BehavioralReport {
        stable: topological.stable && contribution_ok.iter().all(|&ok| ok),
        topological,
        slopes,
        contribution_ok,
    })
}

/// Out-degrees maximizing the total return per contributed unit.
fn efficient_degrees(table: &MpcrTable) -> Vec<usize> {
    let best = (0..table.n())
        .map(|d| table.multiplier(d))
        .fold(f64::NEG_INFINITY, f64::max);
    (0..table.n())
        .filter(|&d| table.multiplier(d) >= best - 1e-12)
        .collect()
}

/// Every player's out-degree maximizes `m(d)·(d+1)`: at least one link under
/// pure congestion, exactly one under subcongestion, all links under
/// supercongestion.
pub fn is_efficient_structure(net: &NetworkState, mpcr: &MpcrSpec) -> Result<bool> {
    let table = mpcr.table(net.n())?;
    let best = efficient_degrees(&table);
    Ok((0..net.n()).all(|i| best.contains(&net.out_degree(i))))
}

/// Efficient structure with every player contributing the full endowment.
pub fn is_efficient_outcome(state: &CrossSection, mpcr: &MpcrSpec) -> Result<bool> {
    Ok(is_efficient_structure(&state.network, mpcr)?
        && (0..state.n()).all(|i| state.contributions.value(i) == 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Motif {
    Empty,
    SinglePair,
    DoublePair,
    Triad,
    Cycle,
    Other,
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Motif::Empty => "empty",
            Motif::SinglePair => "single_pair",
            Motif::DoublePair => "double_pair",
            Motif::Triad => "triad",
            Motif::Cycle => "cycle",
            Motif::Other => "other",
        };
        f.write_str(s)
    }
}

const PERMUTATIONS_OF_4: usize = 24;

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(PERMUTATIONS_OF_4);
    for a in 0..4 {
        for b in (0..4).filter(|&b| b != a) {
            for c in (0..4).filter(|&c| c != a && c != b) {
                out.push([a, b, c, 6 - a - b - c]);
            }
        }
    }
    out
}

/// Smallest adjacency code over all relabelings.
fn canonical_code(net: &NetworkState) -> u32 {
    permutations4()
        .iter()
        .map(|perm| {
            let p = net.permuted(perm);
            (0..4).fold(0, |acc, i| acc | p.out_links(i).bits() << (4 * i))
        })
        .min()
        .expect("non-empty permutation set")
}

fn template(edges: &[(usize, usize)]) -> u32 {
    canonical_code(&NetworkState::from_edges(4, edges).expect("valid template"))
}

/// Labels a four-player network up to relabeling of players.
pub fn classify_motif(net: &NetworkState) -> Result<Motif> {
    if net.n() != 4 {
        return Err(Error::Unsupported(format!(
            "motif classification needs 4 players, got {}",
            net.n()
        )));
    }
    let code = canonical_code(net);
    let templates = [
        (Motif::Empty, template(&[])),
        (Motif::SinglePair, template(&[(0, 1), (1, 0)])),
        (
            Motif::DoublePair,
            template(&[(0, 1), (1, 0), (2, 3), (3, 2)]),
        ),
        (
            Motif::Triad,
            template(&[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]),
        ),
        (Motif::Cycle, template(&[(0, 1), (1, 2), (2, 3), (3, 0)])),
    ];
    Ok(templates
        .iter()
        .find(|(_, t)| *t == code)
        .map_or(Motif::Other, |(m, _)| *m))
}

/// Stability flags for one cross-section.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusRow {
    pub group: String,
    pub period: usize,
    pub regime: Regime,
    pub topo_stable: bool,
    pub behav_stable: bool,
    pub efficient_structure: bool,
    /// Absent for groups of other than four players.
    pub motif: Option<Motif>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityCensus {
    pub rows: Vec<CensusRow>,
    /// Topologically stable cross-sections by motif and regime.
    pub stable_counts: BTreeMap<String, usize>,
}

impl StabilityCensus {
    pub fn topologically_stable(&self) -> usize {
        self.rows.iter().filter(|r| r.topo_stable).count()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = crate::io::csv_writer(path)?;
        w.write_record([
            "group",
            "period",
            "regime",
            "topo_stable",
            "behav_stable",
            "efficient_structure",
            "motif",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.group.clone(),
                r.period.to_string(),
                regime_label(r.regime).to_string(),
                (r.topo_stable as u8).to_string(),
                (r.behav_stable as u8).to_string(),
                (r.efficient_structure as u8).to_string(),
                r.motif.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::Baseline => "baseline",
        Regime::Treatment => "treatment",
    }
}

/// Applies the stability, efficiency and motif checks to every cross-section,
/// using each period's own flows and regime.
pub fn stability_census(
    panels: &[GroupPanel],
    theta: &ThetaParams,
    mpcr: &MpcrSpec,
) -> Result<StabilityCensus> {
    let cells: Vec<(&GroupPanel, usize)> = panels
        .iter()
        .flat_map(|p| (1..=p.periods()).map(move |t| (p, t)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(panel, t)| {
            let state = panel.state(t);
            let regime = panel.regime(t);
            let setting = StabilitySetting::new(theta, mpcr, regime)
                .with_covariates(panel.covariates.as_deref());
            let behav = is_behaviorally_stable(state, &setting)?;
            Ok(CensusRow {
                group: panel.group_id.clone(),
                period: t,
                regime,
                topo_stable: behav.topological.stable,
                behav_stable: behav.stable,
                efficient_structure: is_efficient_structure(&state.network, mpcr)?,
                motif: classify_motif(&state.network).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stable_counts = BTreeMap::new();
    for r in rows.iter().filter(|r| r.topo_stable) {
        let motif = r
            .motif
            .map_or("unclassified".to_string(), |m| m.to_string());
        *stable_counts
            .entry(format!("{}/{}", motif, regime_label(r.regime)))
            .or_insert(0) += 1;
    }
    Ok(StabilityCensus {
        rows,
        stable_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ContributionProfile, Grid};
    use proptest::prelude::*;

    const TABLE2: [f64; 4] = [5.2368, 20.1884, -6.9893, 24.2407];

    fn state(edges: &[(usize, usize)], tokens: [usize; 4]) -> CrossSection {
        let grid = Grid::new(21).unwrap();
        CrossSection::new(
            NetworkState::from_edges(4, edges).unwrap(),
            ContributionProfile::new(grid, tokens.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn check(s: &CrossSection, regime: Regime) -> BehavioralReport {
        let theta = ThetaParams {
            base: TABLE2,
            het: None,
        };
        let spec = MpcrSpec::default();
        is_behaviorally_stable(s, &StabilitySetting::new(&theta, &spec, regime)).unwrap()
    }

    #[test]
    fn empty_network_is_stable() {
        let r = check(&state(&[], [0; 4]), Regime::Treatment);
        assert!(r.stable && r.topological.stable);
        assert!(r.slopes.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn mutual_dyad_at_full_contribution() {
        let dyad = [(0, 1), (1, 0)];
        let r = check(&state(&dyad, [20, 20, 0, 0]), Regime::Treatment);
        assert!(r.stable);
        assert!(r.slopes[0] > 5.0 && r.slopes[0] < 5.1, "{}", r.slopes[0]);
        let half = check(&state(&dyad, [10, 10, 0, 0]), Regime::Treatment);
        assert!(!half.stable);
        assert!(!half.contribution_ok[0]);
    }

    #[test]
    fn ring_is_stable_without_direct_reciprocity() {
        let ring = [(0, 1), (1, 2), (2, 3), (3, 0)];
        let r = check(&state(&ring, [20; 4]), Regime::Baseline);
        assert!(r.topological.stable, "{:?}", r.topological.gaps);
    }

    #[test]
    fn unilateral_link_is_unstable() {
        let r = check(&state(&[(0, 1)], [20, 0, 0, 0]), Regime::Treatment);
        assert!(!r.topological.stable);
        assert!((r.topological.gaps[0] - 5.2368 * 0.2).abs() < 1e-9);
    }

    #[test]
    fn efficiency_by_congestion_class() {
        let complete: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let ring = [(0, 1), (1, 2), (2, 3), (3, 0)];
        let isolate = [(0, 1), (1, 0), (2, 0)];
        let pure = MpcrSpec::default();
        let sub = MpcrSpec::Subcongestive(vec![1.5, 1.4, 1.3]);
        let sup = MpcrSpec::Supercongestive(vec![1.5, 2.0, 2.5]);
        let net = |e: &[(usize, usize)]| NetworkState::from_edges(4, e).unwrap();
        assert!(is_efficient_structure(&net(&complete), &pure).unwrap());
        assert!(is_efficient_structure(&net(&ring), &pure).unwrap());
        assert!(is_efficient_structure(&net(&ring), &sub).unwrap());
        assert!(!is_efficient_structure(&net(&complete), &sub).unwrap());
        assert!(is_efficient_structure(&net(&complete), &sup).unwrap());
        assert!(!is_efficient_structure(&net(&ring), &sup).unwrap());
        for spec in [&pure, &sub, &sup] {
            assert!(!is_efficient_structure(&net(&isolate), spec).unwrap());
        }
    }

    #[test]
    fn motif_labels() {
        let net = |e: &[(usize, usize)]| NetworkState::from_edges(4, e).unwrap();
        assert_eq!(classify_motif(&net(&[])).unwrap(), Motif::Empty);
        assert_eq!(
            classify_motif(&net(&[(2, 3), (3, 2)])).unwrap(),
            Motif::SinglePair
        );
        assert_eq!(
            classify_motif(&net(&[(0, 2), (2, 0), (1, 3), (3, 1)])).unwrap(),
            Motif::DoublePair
        );
        assert_eq!(
            classify_motif(&net(&[(1, 2), (2, 1), (2, 3), (3, 2), (1, 3), (3, 1)])).unwrap(),
            Motif::Triad
        );
        assert_eq!(
            classify_motif(&net(&[(0, 2), (2, 1), (1, 3), (3, 0)])).unwrap(),
            Motif::Cycle
        );
        assert_eq!(
            classify_motif(&net(&[(0, 1), (1, 2), (2, 0)])).unwrap(),
            Motif::Other
        );
        assert!(matches!(
            classify_motif(&NetworkState::empty(3).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    fn arb_state() -> impl Strategy<Value = CrossSection> {
        (
            proptest::collection::vec(0u32..16, 4),
            proptest::collection::vec(0usize..21, 4),
        )
            .prop_map(|(bits, levels)| {
                let links = bits
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| LinkSet::from_bits(b).without(i))
                    .collect();
                CrossSection::new(
                    NetworkState::from_links(links).unwrap(),
                    ContributionProfile::new(Grid::new(21).unwrap(), levels).unwrap(),
                )
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn behavioral_stability_refines_topological(s in arb_state(), treat in any::<bool>()) {
            let regime = if treat { Regime::Treatment } else { Regime::Baseline };
            let r = check(&s, regime);
            prop_assert!(!r.stable || r.topological.stable);
            for i in 0..4 {
                if s.contributions.level(i) == 0 {
                    prop_assert_eq!(r.topological.gaps[i], 0.0);
                }
            }
        }

        #[test]
        fn relabeling_preserves_flags(s in arb_state(), k in 0usize..24, treat in any::<bool>()) {
            let regime = if treat { Regime::Treatment } else { Regime::Baseline };
            let perm = permutations4()[k];
            let moved = s.permuted(&perm);
            let (a, b) = (check(&s, regime), check(&moved, regime));
            prop_assert_eq!(a.stable, b.stable);
            prop_assert_eq!(a.topological.stable, b.topological.stable);
            for (i, &p) in perm.iter().enumerate() {
                prop_assert!((a.topological.gaps[i] - b.topological.gaps[p]).abs() < 1e-9);
            }
            prop_assert_eq!(
                classify_motif(&s.network).unwrap(),
                classify_motif(&moved.network).unwrap()
            );
        }
    }
}
