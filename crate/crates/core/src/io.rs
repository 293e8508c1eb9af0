//! Panel and covariate CSV files, survey principal components, and JSON
//! run configurations.
//!
//! Panel files have one row per (group, period, player):
//!
//! ```text
//! group_id,period,player_id,treatment,contribution_tokens,targets
//! 7,1,1,0,20,2;3
//! ```
//!
//! Player ids are 1-based; `targets` lists recipients separated by `;`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::{GroupPanel, SimConfig};
use crate::error::{Error, Result};
use crate::estimation::FitOptions;
use crate::game::{
    ContributionProfile, CrossSection, Grid, LinkSet, NetworkState, PlayerCovariates,
    ENDOWMENT_TOKENS, MAX_PLAYERS,
};
use crate::uncertainty::BootstrapOptions;

pub const PANEL_HEADER: [&str; 6] = [
    "group_id",
    "period",
    "player_id",
    "treatment",
    "contribution_tokens",
    "targets",
];

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// How contribution tokens map onto the contribution grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSchema {
    /// Grid size of the panels produced; tokens must land on it.
    pub q: usize,
    pub endowment_tokens: usize,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            q: ENDOWMENT_TOKENS as usize + 1,
            endowment_tokens: ENDOWMENT_TOKENS as usize,
        }
    }
}

impl PanelSchema {
    fn level_of(&self, tokens: usize) -> Option<usize> {
        let scaled = tokens * (self.q - 1);
        scaled
            .is_multiple_of(self.endowment_tokens)
            .then_some(scaled / self.endowment_tokens)
    }

    fn tokens_of(&self, grid: Grid, level: usize) -> Option<usize> {
        let scaled = level * self.endowment_tokens;
        scaled
            .is_multiple_of(grid.q() - 1)
            .then_some(scaled / (grid.q() - 1))
    }
}

struct Row {
    line: u64,
    treatment: bool,
    level: usize,
    targets: Vec<usize>,
}

fn field(rec: &csv::StringRecord, k: usize) -> &str {
    rec.get(k).unwrap_or("")
}

fn parse_number(raw: &str, name: &str, line: u64) -> Result<i64> {
    raw.parse::<i64>()
        .map_err(|_| Error::Data(format!("row {line}: {name} {raw:?} is not an integer")))
}

fn parse_targets(raw: &str, player: usize, line: u64) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for part in raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let t = parse_number(part, "target", line)?;
        if t < 1 {
            return Err(Error::Data(format!(
                "row {line}: target {t} is not a player id"
            )));
        }
        let t = t as usize;
        if t == player {
            return Err(Error::Data(format!(
                "row {line}: player {player} lists itself as a target; self-links are implicit"
            )));
        }
        if out.contains(&t) {
            return Err(Error::Data(format!("row {line}: duplicate target {t}")));
        }
        out.push(t);
    }
    Ok(out)
}

/// Reads and validates a panel file.
pub fn read_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<Vec<GroupPanel>> {
    let path = path.as_ref();
    let grid = Grid::new(schema.q)?;
    if schema.endowment_tokens == 0 {
        return Err(Error::Config("endowment must be positive".into()));
    }
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PANEL_HEADER {
        return Err(Error::Data(format!(
            "{}: expected header {}",
            path.display(),
            PANEL_HEADER.join(",")
        )));
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, BTreeMap<usize, BTreeMap<usize, Row>>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let group = field(&rec, 0).to_string();
        if group.is_empty() {
            return Err(Error::Data(format!("row {line}: empty group id")));
        }
        let period = parse_number(field(&rec, 1), "period", line)?;
        let player = parse_number(field(&rec, 2), "player_id", line)?;
        if period < 1 || player < 1 || player as usize > MAX_PLAYERS {
            return Err(Error::Data(format!(
                "row {line}: period and player ids start at 1 (got period {period}, player {player})"
            )));
        }
        let treatment = match field(&rec, 3) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Data(format!(
                    "row {line}: treatment {other:?} is not 0 or 1"
                )))
            }
        };
        let tokens = parse_number(field(&rec, 4), "contribution_tokens", line)?;
        if tokens < 0 || tokens as usize > schema.endowment_tokens {
            return Err(Error::Data(format!(
                "row {line}: contribution {tokens} outside 0..={}",
                schema.endowment_tokens
            )));
        }
        let level = schema.level_of(tokens as usize).ok_or_else(|| {
            Error::Data(format!(
                "row {line}: contribution {tokens} is off the {}-point grid",
                schema.q
            ))
        })?;
        let targets = parse_targets(field(&rec, 5), player as usize, line)?;
        if !groups.contains_key(&group) {
            order.push(group.clone());
        }
        let periods = groups.entry(group.clone()).or_default();
        let slot = periods.entry(period as usize).or_default();
        if slot.contains_key(&(player as usize)) {
            return Err(Error::Data(format!(
                "row {line}: duplicate row for group {group}, period {period}, player {player}"
            )));
        }
        slot.insert(
            player as usize,
            Row {
                line,
                treatment,
                level,
                targets,
            },
        );
    }

    order
        .into_iter()
        .map(|g| {
            let periods = groups.remove(&g).expect("recorded group");
            build_group(g, periods, grid)
        })
        .collect()
}

fn build_group(
    group: String,
    periods: BTreeMap<usize, BTreeMap<usize, Row>>,
    grid: Grid,
) -> Result<GroupPanel> {
    let n = periods.values().next().map_or(0, |p| p.len());
    if n < 2 {
        return Err(Error::Data(format!(
            "group {group}: needs at least two players"
        )));
    }
    let mut states = Vec::with_capacity(periods.len());
    let mut treatment_start = 0;
    for (expect, (&t, players)) in (1..).zip(&periods) {
        if t != expect {
            return Err(Error::Data(format!(
                "group {group}: period {expect} is missing"
            )));
        }
        if players.len() != n || players.keys().copied().ne(1..=n) {
            return Err(Error::Data(format!(
                "group {group}, period {t}: expected players 1..={n}"
            )));
        }
        let first = players.values().next().expect("non-empty period");
        if let Some(r) = players.values().find(|r| r.treatment != first.treatment) {
            return Err(Error::Data(format!(
                "row {}: treatment differs within group {group}, period {t}",
                r.line
            )));
        }
        match (first.treatment, treatment_start) {
            (true, 0) => treatment_start = t,
            (false, s) if s > 0 => {
                return Err(Error::Data(format!(
                    "row {}: group {group} leaves the treatment in period {t}",
                    first.line
                )))
            }
            _ => {}
        }
        let mut links = Vec::with_capacity(n);
        let mut levels = Vec::with_capacity(n);
        for r in players.values() {
            if let Some(&bad) = r.targets.iter().find(|&&j| j > n) {
                return Err(Error::Data(format!(
                    "row {}: target {bad} outside a group of {n}",
                    r.line
                )));
            }
            links.push(LinkSet::from_players(r.targets.iter().map(|j| j - 1)));
            levels.push(r.level);
        }
        states.push(CrossSection::new(
            NetworkState::from_links(links)?,
            ContributionProfile::new(grid, levels)?,
        )?);
    }
    GroupPanel::new(group, treatment_start, states, None)
}

/// Writes panels in `(group, period, player)` order.
pub fn write_panel(panels: &[GroupPanel], path: impl AsRef<Path>) -> Result<()> {
    write_panel_with(panels, path, &PanelSchema::default())
}

pub fn write_panel_with(
    panels: &[GroupPanel],
    path: impl AsRef<Path>,
    schema: &PanelSchema,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(PANEL_HEADER)?;
    for p in panels {
        for t in 1..=p.periods() {
            let s = p.state(t);
            let treat = if p.regime(t).is_treatment() { "1" } else { "0" };
            for i in 0..p.n() {
                let level = s.contributions.level(i);
                let tokens = schema
                    .tokens_of(s.contributions.grid(), level)
                    .ok_or_else(|| {
                        Error::Data(format!(
                        "group {}, period {t}, player {}: level {level} is not a whole token count",
                        p.group_id,
                        i + 1
                    ))
                    })?;
                let targets: Vec<String> = s
                    .network
                    .out_links(i)
                    .iter()
                    .map(|j| (j + 1).to_string())
                    .collect();
                w.write_record([
                    p.group_id.as_str(),
                    &t.to_string(),
                    &(i + 1).to_string(),
                    treat,
                    &tokens.to_string(),
                    &targets.join(";"),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Principal components of standardized survey items.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PcaResult {
    /// Eigenvalues of the item correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues divided by the number of items.
    pub explained_variance_ratios: Vec<f64>,
    /// Loadings of the retained components, one vector per component.
    pub loadings: Vec<Vec<f64>>,
    /// Subject scores on the retained components.
    pub scores: Vec<Vec<f64>>,
}

fn column_moments(data: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().map(|r| r[j]).sum::<f64>() / n;
    let var = data.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Correlation-matrix PCA. Each component's largest-magnitude loading is
/// made positive.
pub fn pca_covariates(data: &[Vec<f64>], n_components: usize) -> Result<PcaResult> {
    let subjects = data.len();
    let items = data.first().map_or(0, Vec::len);
    if subjects < 2 || items < 2 {
        return Err(Error::Data(format!(
            "principal components need at least 2 subjects and 2 items, got {subjects}×{items}"
        )));
    }
    if data
        .iter()
        .any(|r| r.len() != items || r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Data(
            "survey matrix is ragged or has missing values".into(),
        ));
    }
    if n_components > items {
        return Err(Error::Config(format!(
            "{n_components} components from {items} items"
        )));
    }
    let mut z = DMatrix::zeros(subjects, items);
    for j in 0..items {
        let (mean, sd) = column_moments(data, j);
        if sd.is_nan() || sd <= 1e-12 * mean.abs().max(1.0) {
            return Err(Error::Data(format!("item_{} has zero variance", j + 1)));
        }
        for (s, row) in data.iter().enumerate() {
            z[(s, j)] = (row[j] - mean) / sd;
        }
    }
    let corr = z.transpose() * &z / (subjects as f64 - 1.0);
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..items).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let loadings: Vec<Vec<f64>> = order[..n_components]
        .iter()
        .map(|&k| {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            v.iter().map(|x| sign * x).collect()
        })
        .collect();
    let scores = (0..subjects)
        .map(|s| {
            loadings
                .iter()
                .map(|l| (0..items).map(|j| z[(s, j)] * l[j]).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        explained_variance_ratios: eigenvalues.iter().map(|e| e / items as f64).collect(),
        eigenvalues,
        loadings,
        scores,
    })
}

/// Scree data: component, eigenvalue, ratio and cumulative ratio.
pub fn write_scree(pca: &PcaResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["component", "eigenvalue", "ratio", "cumulative"])?;
    let mut cum = 0.0;
    for (k, (e, r)) in pca
        .eigenvalues
        .iter()
        .zip(&pca.explained_variance_ratios)
        .enumerate()
    {
        cum += r;
        w.write_record([
            (k + 1).to_string(),
            e.to_string(),
            r.to_string(),
            cum.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Standardized player covariates keyed by group and 1-based player id.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateTable {
    pub players: BTreeMap<(String, usize), PlayerCovariates>,
    /// Present when reciprocity scores were derived from survey items.
    pub pca: Option<PcaResult>,
}

fn standardize(values: &mut [f64], name: &str) -> Result<()> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::Data(format!("covariate {name} has zero variance")));
    }
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok(())
}

/// Reads `group_id,player_id,trust,rec1,rec2` or
/// `group_id,player_id,trust,item_1,…,item_k`; item files are reduced to
/// their first two principal components. All three covariates are then
/// standardized over the file's rows.
pub fn read_covariates(path: impl AsRef<Path>) -> Result<CovariateTable> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let bad_header = || {
        Error::Data(format!(
            "{}: expected group_id,player_id,trust followed by rec1,rec2 or item_1..item_k",
            path.display()
        ))
    };
    if header.len() < 5
        || header[0] != "group_id"
        || header[1] != "player_id"
        || header[2] != "trust"
    {
        return Err(bad_header());
    }
    let precomputed = header.len() == 5 && header[3] == "rec1" && header[4] == "rec2";
    let items = header[3..]
        .iter()
        .enumerate()
        .all(|(k, h)| *h == format!("item_{}", k + 1));
    if !precomputed && !items {
        return Err(bad_header());
    }

    let mut keys = Vec::new();
    let mut trust = Vec::new();
    let mut rest: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let player = parse_number(field(&rec, 1), "player_id", line)?;
        if player < 1 {
            return Err(Error::Data(format!("row {line}: player ids start at 1")));
        }
        let key = (field(&rec, 0).to_string(), player as usize);
        if keys.contains(&key) {
            return Err(Error::Data(format!(
                "row {line}: duplicate covariates for group {}, player {}",
                key.0, key.1
            )));
        }
        let parse = |k: usize| -> Result<f64> {
            field(&rec, k).parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "row {line}: {} {:?} is not a number",
                    header[k],
                    field(&rec, k)
                ))
            })
        };
        trust.push(parse(2)?);
        rest.push((3..header.len()).map(parse).collect::<Result<_>>()?);
        keys.push(key);
    }
    if keys.len() < 2 {
        return Err(Error::Data("covariates need at least two players".into()));
    }

    let (mut rec1, mut rec2, pca) = if precomputed {
        (
            rest.iter().map(|r| r[0]).collect::<Vec<_>>(),
            rest.iter().map(|r| r[1]).collect::<Vec<_>>(),
            None,
        )
    } else {
        let p = pca_covariates(&rest, 2)?;
        (
            p.scores.iter().map(|s| s[0]).collect(),
            p.scores.iter().map(|s| s[1]).collect(),
            Some(p),
        )
    };
    standardize(&mut trust, "trust")?;
    standardize(&mut rec1, "rec1")?;
    standardize(&mut rec2, "rec2")?;
    let players = keys
        .into_iter()
        .enumerate()
        .map(|(k, key)| {
            (
                key,
                PlayerCovariates {
                    trust: trust[k],
                    rec1: rec1[k],
                    rec2: rec2[k],
                },
            )
        })
        .collect();
    Ok(CovariateTable { players, pca })
}

/// Attaches covariates to every player of every panel.
pub fn attach_covariates(panels: &mut [GroupPanel], table: &CovariateTable) -> Result<()> {
    for p in panels.iter_mut() {
        let x = (1..=p.n())
            .map(|i| {
                table
                    .players
                    .get(&(p.group_id.clone(), i))
                    .copied()
                    .ok_or_else(|| {
                        Error::Data(format!(
                            "no covariates for group {}, player {i}",
                            p.group_id
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        p.covariates = Some(x);
    }
    Ok(())
}

/// Settings for a complete run; echoed into every output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub simulation: SimConfig,
    pub estimation: FitOptions,
    pub bootstrap: BootstrapOptions,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
