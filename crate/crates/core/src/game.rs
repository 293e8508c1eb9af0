//! Domain types of the resource-sharing game and the per-player potential.
//!
//! Adjacency orientation: `adj(i, j) == true` means sender `j` shares with
//! receiver `i`. A player's strategy is therefore a column of the adjacency
//! matrix, stored here as the sender's outgoing [`LinkSet`]. Self-links are
//! implicit and always present.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported group size (out-degree enumeration cap).
pub const MAX_PLAYERS: usize = 24;

/// Endowment in experimental tokens; contributions are normalized by it.
pub const ENDOWMENT_TOKENS: u32 = 20;

/// Information regime a player decides under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Only the anonymous lagged incoming total is observed.
    Baseline,
    /// Lagged incoming benefit is observed per sender.
    Treatment,
}

impl Regime {
    pub fn is_treatment(self) -> bool {
        matches!(self, Regime::Treatment)
    }
}

/// Outgoing links of one player, as a bitmask over player ids.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LinkSet(u32);

impl LinkSet {
    pub const EMPTY: LinkSet = LinkSet(0);

    pub fn from_bits(bits: u32) -> Self {
        LinkSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_players<I: IntoIterator<Item = usize>>(players: I) -> Self {
        LinkSet(players.into_iter().fold(0, |acc, j| acc | (1 << j)))
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn with(self, j: usize) -> Self {
        LinkSet(self.0 | 1 << j)
    }

    pub fn without(self, j: usize) -> Self {
        LinkSet(self.0 & !(1 << j))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(j)
            }
        })
    }
}

impl fmt::Debug for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Directed sharing network of one cross-section.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkState {
    out: Vec<LinkSet>,
}

impl NetworkState {
    /// Network with self-links only.
    pub fn empty(n: usize) -> Result<Self> {
        check_group_size(n)?;
        Ok(NetworkState {
            out: vec![LinkSet::EMPTY; n],
        })
    }

    /// Builds a state from each player's outgoing link set.
    pub fn from_links(out: Vec<LinkSet>) -> Result<Self> {
        let n = out.len();
        check_group_size(n)?;
        for (i, links) in out.iter().enumerate() {
            if links.contains(i) {
                return Err(Error::Domain(format!("player {i} links to itself")));
            }
            if links.bits() >> n != 0 {
                return Err(Error::Domain(format!(
                    "player {i} links to a player outside the group of {n}"
                )));
            }
        }
        Ok(NetworkState { out })
    }

    /// Builds a state from directed `(sender, receiver)` edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut out = vec![LinkSet::EMPTY; n];
        for &(s, r) in edges {
            if s >= n || r >= n {
                return Err(Error::Domain(format!("edge ({s}, {r}) out of range")));
            }
            out[s] = out[s].with(r);
        }
        Self::from_links(out)
    }

    /// Builds a state from a receiver-row adjacency matrix. The diagonal must be 1.
    pub fn from_adjacency(adj: &[Vec<u8>]) -> Result<Self> {
        let n = adj.len();
        check_group_size(n)?;
        let mut out = vec![LinkSet::EMPTY; n];
        for (i, row) in adj.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain("adjacency matrix is not square".into()));
            }
            for (j, &a) in row.iter().enumerate() {
                match (i == j, a) {
                    (true, 1) | (false, 0) => {}
                    (true, _) => return Err(Error::Domain(format!("adj[{i}][{i}] must be 1"))),
                    (false, 1) => out[j] = out[j].with(i),
                    (false, v) => {
                        return Err(Error::Domain(format!("adj[{i}][{j}] = {v} is not binary")))
                    }
                }
            }
        }
        Ok(NetworkState { out })
    }

    pub fn n(&self) -> usize {
        self.out.len()
    }

    /// True when sender `j` shares with receiver `i` (always true on the diagonal).
    pub fn adj(&self, i: usize, j: usize) -> bool {
        i == j || self.out[j].contains(i)
    }

    pub fn out_links(&self, i: usize) -> LinkSet {
        self.out[i]
    }

    pub fn set_out_links(&mut self, i: usize, links: LinkSet) -> Result<()> {
        if links.contains(i) || links.bits() >> self.n() != 0 {
            return Err(Error::Domain(format!(
                "invalid link set {links:?} for player {i}"
            )));
        }
        self.out[i] = links;
        Ok(())
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out[i].len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.out.iter().filter(|l| l.contains(i)).count()
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.adj(i, j) as u8).collect())
            .collect()
    }

    /// Relabels players: player `i` becomes player `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = vec![LinkSet::EMPTY; self.n()];
        for (i, links) in self.out.iter().enumerate() {
            out[perm[i]] = LinkSet::from_players(links.iter().map(|j| perm[j]));
        }
        NetworkState { out }
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(|l| l.len()).sum()
    }
}

fn check_group_size(n: usize) -> Result<()> {
    if !(2..=MAX_PLAYERS).contains(&n) {
        return Err(Error::Domain(format!(
            "group size {n} outside supported range 2..={MAX_PLAYERS}"
        )));
    }
    Ok(())
}

/// Equally spaced contribution levels on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    q: usize,
}

impl Grid {
    pub fn new(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::Domain(format!(
                "contribution grid needs q >= 2, got {q}"
            )));
        }
        Ok(Grid { q })
    }

    pub fn q(self) -> usize {
        self.q
    }

    pub fn value(self, level: usize) -> f64 {
        level as f64 / (self.q - 1) as f64
    }

    /// Grid level for an endowment share given in tokens, if it lies on the grid.
    pub fn level_of_tokens(self, tokens: u32) -> Option<usize> {
        let scaled = tokens as usize * (self.q - 1);
        let e = ENDOWMENT_TOKENS as usize;
        (tokens <= ENDOWMENT_TOKENS && scaled.is_multiple_of(e)).then_some(scaled / e)
    }

    /// Token count of a grid level, if it is a whole number of tokens.
    pub fn tokens_of_level(self, level: usize) -> Option<u32> {
        let scaled = level * ENDOWMENT_TOKENS as usize;
        (level < self.q && scaled.is_multiple_of(self.q - 1))
            .then_some((scaled / (self.q - 1)) as u32)
    }
}

/// Contributions of every player, as levels on a [`Grid`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ContributionProfile {
    q: usize,
    levels: Vec<usize>,
}

impl ContributionProfile {
    pub fn new(grid: Grid, levels: Vec<usize>) -> Result<Self> {
        if let Some((i, &l)) = levels.iter().enumerate().find(|(_, &l)| l >= grid.q) {
            return Err(Error::Domain(format!(
                "player {i}: level {l} off a grid of {} points",
                grid.q
            )));
        }
        Ok(ContributionProfile { q: grid.q, levels })
    }

    pub fn zeros(grid: Grid, n: usize) -> Self {
        ContributionProfile {
            q: grid.q,
            levels: vec![0; n],
        }
    }

    /// Every player contributes the full endowment.
    pub fn full(grid: Grid, n: usize) -> Self {
        ContributionProfile {
            q: grid.q,
            levels: vec![grid.q - 1; n],
        }
    }

    pub fn grid(&self) -> Grid {
        Grid { q: self.q }
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> usize {
        self.levels[i]
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn set_level(&mut self, i: usize, level: usize) -> Result<()> {
        if level >= self.q {
            return Err(Error::Domain(format!("level {level} off grid")));
        }
        self.levels[i] = level;
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        self.grid().value(self.levels[i])
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.value(i)).collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut levels = vec![0; self.n()];
        for (i, &l) in self.levels.iter().enumerate() {
            levels[perm[i]] = l;
        }
        ContributionProfile { q: self.q, levels }
    }
}

/// One period's network and contributions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CrossSection {
    pub network: NetworkState,
    pub contributions: ContributionProfile,
}

impl CrossSection {
    pub fn new(network: NetworkState, contributions: ContributionProfile) -> Result<Self> {
        if network.n() != contributions.n() {
            return Err(Error::Domain(format!(
                "network has {} players, contribution profile {}",
                network.n(),
                contributions.n()
            )));
        }
        Ok(CrossSection {
            network,
            contributions,
        })
    }

    /// No links and no contributions.
    pub fn empty(n: usize, grid: Grid) -> Result<Self> {
        Ok(CrossSection {
            network: NetworkState::empty(n)?,
            contributions: ContributionProfile::zeros(grid, n),
        })
    }

    pub fn n(&self) -> usize {
        self.network.n()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        CrossSection {
            network: self.network.permuted(perm),
            contributions: self.contributions.permuted(perm),
        }
    }

    /// What player `i` observes about this cross-section under `regime`.
    pub fn info_for(&self, mpcr: &MpcrTable, i: usize, regime: Regime) -> InfoSet {
        InfoSet::observe(&self.network, &self.contributions, mpcr, i, regime)
    }
}

/// Marginal per-capita return family.
///
/// `k` values index out-degrees: for the tabulated variants `k[d - 1]` is the
/// efficiency multiplier at out-degree `d`, so a table of `n - 1` entries
/// determines the group size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "k", rename_all = "snake_case")]
pub enum MpcrSpec {
    PurelyCongestive(f64),
    Subcongestive(Vec<f64>),
    Supercongestive(Vec<f64>),
    /// Raw return table `m(0..=n-1)` with no validation; a test fixture for
    /// degenerate settings such as `m == 1`.
    Unchecked(Vec<f64>),
}

impl Default for MpcrSpec {
    fn default() -> Self {
        MpcrSpec::PurelyCongestive(1.6)
    }
}

impl MpcrSpec {
    /// Validates the variant for a group of `n` and tabulates `m(0..=n-1)`.
    pub fn table(&self, n: usize) -> Result<MpcrTable> {
        check_group_size(n)?;
        let m = match self {
            MpcrSpec::PurelyCongestive(k) => {
                if !(*k > 1.0 && *k < 2.0) {
                    return Err(Error::Config(format!(
                        "purely congestive multiplier must lie in (1, 2), got {k}"
                    )));
                }
                (0..n)
                    .map(|d| if d == 0 { 1.0 } else { k / (d + 1) as f64 })
                    .collect()
            }
            MpcrSpec::Subcongestive(k) | MpcrSpec::Supercongestive(k) => {
                if k.len() != n - 1 {
                    return Err(Error::Config(format!(
                        "multiplier table has {} entries, group of {n} needs {}",
                        k.len(),
                        n - 1
                    )));
                }
                let decreasing = matches!(self, MpcrSpec::Subcongestive(_));
                for w in k.windows(2) {
                    let ok = if decreasing { w[1] < w[0] } else { w[1] > w[0] };
                    if !ok {
                        return Err(Error::Config(format!(
                            "multiplier table must be strictly {}",
                            if decreasing {
                                "decreasing"
                            } else {
                                "increasing"
                            }
                        )));
                    }
                }
                if !(k[0] > 1.0 && k[0] < 2.0) {
                    return Err(Error::Config(format!(
                        "k(1) must lie in (1, 2), got {}",
                        k[0]
                    )));
                }
                for (idx, &kd) in k.iter().enumerate() {
                    let d = idx + 1;
                    if !(kd > 1.0 && kd < (d + 1) as f64) {
                        return Err(Error::Config(format!(
                            "k({d}) = {kd} must lie in (1, {})",
                            d + 1
                        )));
                    }
                }
                std::iter::once(1.0)
                    .chain(k.iter().enumerate().map(|(idx, kd)| kd / (idx + 2) as f64))
                    .collect()
            }
            MpcrSpec::Unchecked(m) => {
                if m.len() != n {
                    return Err(Error::Config(format!(
                        "return table has {} entries, group of {n} needs {n}",
                        m.len()
                    )));
                }
                m.clone()
            }
        };
        Ok(MpcrTable { m })
    }
}

/// `m(d)` tabulated for every out-degree of one group size.
#[derive(Clone, Debug, PartialEq)]
pub struct MpcrTable {
    m: Vec<f64>,
}

impl MpcrTable {
    pub fn n(&self) -> usize {
        self.m.len()
    }

    /// Return fraction at out-degree `d`. Panics when `d >= n`.
    #[inline]
    pub fn at(&self, d: usize) -> f64 {
        self.m[d]
    }

    pub fn get(&self, d: usize) -> Result<f64> {
        self.m.get(d).copied().ok_or_else(|| {
            Error::Domain(format!("out-degree {d} outside 0..={}", self.m.len() - 1))
        })
    }

    /// Total return per contributed unit, `m(d)·(d+1)`.
    pub fn multiplier(&self, d: usize) -> f64 {
        self.m[d] * (d + 1) as f64
    }
}

/// Return fraction `m(d)` for a group of `n`.
pub fn mpcr(spec: &MpcrSpec, d: usize, n: usize) -> Result<f64> {
    spec.table(n)?.get(d)
}

/// Observed player characteristics used by the heterogeneity interactions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlayerCovariates {
    pub trust: f64,
    pub rec1: f64,
    pub rec2: f64,
}

impl PlayerCovariates {
    pub fn as_array(&self) -> [f64; 3] {
        [self.trust, self.rec1, self.rec2]
    }
}

/// Structural parameters.
///
/// `base` = (cost, generalized reciprocity, treatment × generalized,
/// treatment × direct). The optional `het` block holds covariate
/// interactions in blocks of (trust, rec1, rec2) for, in order: cost,
/// treatment × direct, generalized, treatment × generalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub base: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub het: Option<[f64; 12]>,
}

pub const BASE_PARAM_NAMES: [&str; 4] = [
    "contribution_costs",
    "generalized_reciprocity",
    "treatment_x_generalized_reciprocity",
    "treatment_x_direct_reciprocity",
];

pub const HET_PARAM_NAMES: [&str; 12] = [
    "trust_x_contribution_costs",
    "rec1_x_contribution_costs",
    "rec2_x_contribution_costs",
    "trust_x_treatment_x_direct_reciprocity",
    "rec1_x_treatment_x_direct_reciprocity",
    "rec2_x_treatment_x_direct_reciprocity",
    "trust_x_generalized_reciprocity",
    "rec1_x_generalized_reciprocity",
    "rec2_x_generalized_reciprocity",
    "trust_x_treatment_x_generalized_reciprocity",
    "rec1_x_treatment_x_generalized_reciprocity",
    "rec2_x_treatment_x_generalized_reciprocity",
];

/// Base-parameter slot each heterogeneity block shifts.
pub(crate) const HET_BLOCK_TARGET: [usize; 4] = [0, 3, 1, 2];

impl ThetaParams {
    pub fn new(cost: f64, generalized: f64, treat_generalized: f64, treat_direct: f64) -> Self {
        ThetaParams {
            base: [cost, generalized, treat_generalized, treat_direct],
            het: None,
        }
    }

    pub fn zeros(heterogeneous: bool) -> Self {
        ThetaParams {
            base: [0.0; 4],
            het: heterogeneous.then_some([0.0; 12]),
        }
    }

    pub fn with_het(mut self, het: [f64; 12]) -> Self {
        self.het = Some(het);
        self
    }

    pub fn len(&self) -> usize {
        if self.het.is_some() {
            16
        } else {
            4
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_heterogeneous(&self) -> bool {
        self.het.is_some()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.base.to_vec();
        if let Some(h) = &self.het {
            v.extend_from_slice(h);
        }
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        let mut base = [0.0; 4];
        match v.len() {
            4 => {
                base.copy_from_slice(v);
                Ok(ThetaParams { base, het: None })
            }
            16 => {
                base.copy_from_slice(&v[..4]);
                let mut het = [0.0; 12];
                het.copy_from_slice(&v[4..]);
                Ok(ThetaParams {
                    base,
                    het: Some(het),
                })
            }
            k => Err(Error::Domain(format!(
                "expected 4 or 16 parameters, got {k}"
            ))),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut names = BASE_PARAM_NAMES.to_vec();
        if self.het.is_some() {
            names.extend_from_slice(&HET_PARAM_NAMES);
        }
        names
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }

    /// Player-specific base coefficients after adding covariate shifts.
    pub fn effective(&self, x: Option<&PlayerCovariates>) -> Result<[f64; 4]> {
        let mut eff = self.base;
        if let Some(het) = &self.het {
            let x = x.ok_or_else(|| {
                Error::Config("heterogeneity parameters require player covariates".into())
            })?;
            let xs = x.as_array();
            for (block, &target) in HET_BLOCK_TARGET.iter().enumerate() {
                for (k, xk) in xs.iter().enumerate() {
                    eff[target] += het[3 * block + k] * xk;
                }
            }
        }
        Ok(eff)
    }
}

/// What a player observed about the previous period.
///
/// `incoming_by_sender` is indexed by player id (the player's own slot is
/// zero) and is present only under the treatment regime.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoSet {
    pub regime: Regime,
    pub incoming_total: f64,
    pub incoming_by_sender: Option<Vec<f64>>,
}

impl InfoSet {
    /// No history: zero incoming benefit.
    pub fn empty(n: usize, regime: Regime) -> Self {
        InfoSet {
            regime,
            incoming_total: 0.0,
            incoming_by_sender: regime.is_treatment().then(|| vec![0.0; n]),
        }
    }

    /// Benefit flows player `i` received in `(net, c)`, at the granularity of `regime`.
    pub fn observe(
        net: &NetworkState,
        c: &ContributionProfile,
        mpcr: &MpcrTable,
        i: usize,
        regime: Regime,
    ) -> Self {
        let by_sender = incoming_flows(net, c, mpcr, i);
        InfoSet {
            regime,
            incoming_total: by_sender.iter().sum(),
            incoming_by_sender: regime.is_treatment().then_some(by_sender),
        }
    }

    /// Builds a treatment-regime info set from per-sender flows.
    pub fn treatment(by_sender: Vec<f64>) -> Self {
        InfoSet {
            regime: Regime::Treatment,
            incoming_total: by_sender.iter().sum(),
            incoming_by_sender: Some(by_sender),
        }
    }

    pub fn baseline(incoming_total: f64) -> Self {
        InfoSet {
            regime: Regime::Baseline,
            incoming_total,
            incoming_by_sender: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.regime, &self.incoming_by_sender) {
            (Regime::Baseline, Some(_)) => Err(Error::Domain(
                "baseline information cannot expose per-sender flows".into(),
            )),
            (Regime::Treatment, None) => Err(Error::Domain(
                "treatment information requires per-sender flows".into(),
            )),
            (Regime::Treatment, Some(v)) => {
                let total: f64 = v.iter().sum();
                if (total - self.incoming_total).abs() > 1e-12 {
                    Err(Error::Domain(format!(
                        "per-sender flows sum to {total}, total is {}",
                        self.incoming_total
                    )))
                } else {
                    Ok(())
                }
            }
            (Regime::Baseline, None) => Ok(()),
        }
    }

    /// Lagged benefit from `j`; zero when per-sender flows are not observed.
    pub fn from_sender(&self, j: usize) -> f64 {
        self.incoming_by_sender.as_ref().map_or(0.0, |v| v[j])
    }
}

/// Benefit each other player sends to `i`: `adj[i][j]·c[j]·m(d_j)`.
pub fn incoming_flows(
    net: &NetworkState,
    c: &ContributionProfile,
    mpcr: &MpcrTable,
    i: usize,
) -> Vec<f64> {
    (0..net.n())
        .map(|j| {
            if j != i && net.adj(i, j) {
                c.value(j) * mpcr.at(net.out_degree(j))
            } else {
                0.0
            }
        })
        .collect()
}

/// Net monetary payoff of player `i` (earnings minus endowment).
pub fn payoff(net: &NetworkState, c: &ContributionProfile, mpcr: &MpcrTable, i: usize) -> f64 {
    (0..net.n())
        .filter(|&j| net.adj(i, j))
        .map(|j| c.value(j) * mpcr.at(net.out_degree(j)))
        .sum::<f64>()
        - c.value(i)
}

/// Benefit `i` receives from others; the part of the payoff `i` cannot affect.
pub fn externality(net: &NetworkState, c: &ContributionProfile, mpcr: &MpcrTable, i: usize) -> f64 {
    incoming_flows(net, c, mpcr, i).iter().sum()
}

/// Social-preference component of the potential.
///
/// Generalized reciprocity scales total benefit dispensed by the lagged
/// incoming total; direct reciprocity (treatment only) scales benefit sent to
/// each recipient by what that recipient sent last period.
pub fn behavioral_beta(
    links: LinkSet,
    c_i: f64,
    info: &InfoSet,
    theta: &ThetaParams,
    mpcr: &MpcrTable,
    x: Option<&PlayerCovariates>,
) -> Result<f64> {
    let eff = theta.effective(x)?;
    let n = mpcr.n();
    let d = links.len();
    let m = mpcr.get(d)?;
    let others = (n - 1) as f64;
    let treat = if info.regime.is_treatment() { 1.0 } else { 0.0 };

    let outgoing = d as f64 * m * c_i;
    let generalized =
        (eff[1] + eff[2] * treat) / (others * others) * outgoing * info.incoming_total;
    let direct = if info.regime.is_treatment() {
        let reciprocated: f64 = links.iter().map(|j| info.from_sender(j)).sum();
        eff[3] * treat / others * m * c_i * reciprocated
    } else {
        0.0
    };
    Ok(generalized + direct)
}

/// Individual potential: cost-weighted private return plus the behavioral term.
pub fn potential(
    links: LinkSet,
    c_i: f64,
    info: &InfoSet,
    theta: &ThetaParams,
    mpcr: &MpcrTable,
    x: Option<&PlayerCovariates>,
) -> Result<f64> {
    let eff = theta.effective(x)?;
    let m = mpcr.get(links.len())?;
    Ok(eff[0] * (m - 1.0) * c_i + behavioral_beta(links, c_i, info, theta, mpcr, x)?)
}
