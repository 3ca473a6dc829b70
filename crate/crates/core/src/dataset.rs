//! Tabular RD samples, the design (cutoff and assignment rule) and CSV ingestion.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RdError, Result};

/// Geometric side of the cutoff. `Below` is `x < c`, `AtOrAbove` is `x >= c`,
/// independent of which side receives treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    AtOrAbove,
}

impl Side {
    pub fn of(x: f64, cutoff: f64) -> Side {
        if x < cutoff {
            Side::Below
        } else {
            Side::AtOrAbove
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Below => Side::AtOrAbove,
            Side::AtOrAbove => Side::Below,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Below => f.write_str("below"),
            Side::AtOrAbove => f.write_str("at or above"),
        }
    }
}

/// Which side of the cutoff is assigned to treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TreatedSide {
    /// `T = 1(x >= c)`.
    #[default]
    AtOrAbove,
    /// `T = 1(x < c)`; a unit exactly at the cutoff is a control.
    Below,
}

impl TreatedSide {
    pub fn side(self) -> Side {
        match self {
            TreatedSide::AtOrAbove => Side::AtOrAbove,
            TreatedSide::Below => Side::Below,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Compliance {
    #[default]
    Sharp,
    Fuzzy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RDDesign {
    pub cutoff: f64,
    pub treated_side: TreatedSide,
    pub compliance: Compliance,
}

impl RDDesign {
    pub fn sharp(cutoff: f64) -> Self {
        RDDesign {
            cutoff,
            treated_side: TreatedSide::AtOrAbove,
            compliance: Compliance::Sharp,
        }
    }

    pub fn with_treated_side(mut self, treated_side: TreatedSide) -> Self {
        self.treated_side = treated_side;
        self
    }

    pub fn fuzzy(mut self) -> Self {
        self.compliance = Compliance::Fuzzy;
        self
    }

    pub fn side_of(&self, x: f64) -> Side {
        Side::of(x, self.cutoff)
    }

    pub fn is_treated_side(&self, side: Side) -> bool {
        side == self.treated_side.side()
    }

    pub fn assigned(&self, x: f64) -> bool {
        self.is_treated_side(self.side_of(x))
    }
}

/// Which column of the data set plays the role of the response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Outcome,
    Received,
    Covariate(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Outcome => f.write_str("outcome"),
            Target::Received => f.write_str("received"),
            Target::Covariate(name) => write!(f, "covariate `{name}`"),
        }
    }
}

/// An RD sample: score, outcome, optional received treatment and covariates.
///
/// Covariate cells may be `NaN` (missing); everything else is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RDDataset {
    score: Vec<f64>,
    outcome: Vec<f64>,
    received: Option<Vec<f64>>,
    covariates: Vec<(String, Vec<f64>)>,
    dropped_rows: usize,
}

impl RDDataset {
    pub fn new(score: Vec<f64>, outcome: Vec<f64>) -> Result<Self> {
        if score.is_empty() {
            return Err(RdError::InvalidData("data set has no rows".into()));
        }
        if score.len() != outcome.len() {
            return Err(RdError::InvalidData(format!(
                "score has {} rows but outcome has {}",
                score.len(),
                outcome.len()
            )));
        }
        if let Some(i) = score.iter().position(|v| !v.is_finite()) {
            return Err(RdError::InvalidData(format!("non-finite score at row {i}")));
        }
        if let Some(i) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(RdError::InvalidData(format!(
                "non-finite outcome at row {i}"
            )));
        }
        Ok(RDDataset {
            score,
            outcome,
            received: None,
            covariates: Vec::new(),
            dropped_rows: 0,
        })
    }

    pub fn with_received(mut self, received: Vec<f64>) -> Result<Self> {
        if received.len() != self.len() {
            return Err(RdError::InvalidData(format!(
                "received has {} rows, expected {}",
                received.len(),
                self.len()
            )));
        }
        if let Some(i) = received.iter().position(|&d| d != 0.0 && d != 1.0) {
            return Err(RdError::InvalidData(format!(
                "received treatment must be 0 or 1, found {} at row {i}",
                received[i]
            )));
        }
        self.received = Some(received);
        Ok(self)
    }

    pub fn with_covariate(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(RdError::InvalidData(format!(
                "covariate `{name}` has {} rows, expected {}",
                values.len(),
                self.len()
            )));
        }
        if self.covariates.iter().any(|(n, _)| *n == name) {
            return Err(RdError::DuplicateColumn(name));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(RdError::InvalidData(format!(
                "infinite value in covariate `{name}`"
            )));
        }
        self.covariates.push((name, values));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }

    pub fn score(&self) -> &[f64] {
        &self.score
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn received(&self) -> Option<&[f64]> {
        self.received.as_deref()
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.iter().map(|(n, _)| n.as_str())
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Rows discarded at ingestion because the score, outcome or received
    /// treatment was missing.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Column used as the response for `target`. Covariate columns may contain `NaN`.
    pub fn column(&self, target: &Target) -> Result<&[f64]> {
        match target {
            Target::Outcome => Ok(&self.outcome),
            Target::Received => self.received().ok_or(RdError::MissingReceived),
            Target::Covariate(name) => self
                .covariate(name)
                .ok_or_else(|| RdError::MissingColumn(name.clone())),
        }
    }

    /// Keeps the rows for which `keep(i)` holds. Dropped-row bookkeeping is carried over.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> RDDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        RDDataset {
            score: pick(&self.score),
            outcome: pick(&self.outcome),
            received: self.received.as_deref().map(pick),
            covariates: self
                .covariates
                .iter()
                .map(|(n, v)| (n.clone(), pick(v)))
                .collect(),
            dropped_rows: self.dropped_rows,
        }
    }

    /// Copy of the data set with `target` moved into the outcome slot and rows
    /// where it is missing removed. Used to rerun an analysis on a covariate
    /// or on the received-treatment indicator.
    pub fn retarget(&self, target: &Target) -> Result<RDDataset> {
        if *target == Target::Outcome {
            return Ok(self.clone());
        }
        let col = self.column(target)?.to_vec();
        let mut out = self.filter_rows(|i| col[i].is_finite());
        out.outcome = col.into_iter().filter(|v| v.is_finite()).collect();
        if out.is_empty() {
            return Err(RdError::InvalidData(format!(
                "{target} has no observed values"
            )));
        }
        Ok(out)
    }

    /// Replaces the outcome column.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<RDDataset> {
        if outcome.len() != self.len() {
            return Err(RdError::InvalidData("outcome length mismatch".into()));
        }
        if outcome.iter().any(|v| !v.is_finite()) {
            return Err(RdError::InvalidData("non-finite outcome".into()));
        }
        let mut out = self.clone();
        out.outcome = outcome;
        Ok(out)
    }

    /// Writes the retained rows as CSV, using the column names in `map`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, map: &ColumnMap) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![map.score.clone(), map.outcome.clone()];
        if self.received.is_some() {
            header.push(map.received.clone().unwrap_or_else(|| "received".into()));
        }
        header.extend(self.covariates.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)
            .map_err(|e| RdError::Csv(e.to_string()))?;
        let fmt = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        };
        for i in 0..self.len() {
            let mut rec = vec![fmt(self.score[i]), fmt(self.outcome[i])];
            if let Some(d) = &self.received {
                rec.push(fmt(d[i]));
            }
            rec.extend(self.covariates.iter().map(|(_, v)| fmt(v[i])));
            w.write_record(&rec)
                .map_err(|e| RdError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| RdError::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Bindings from roles to CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub score: String,
    pub outcome: String,
    #[serde(default)]
    pub received: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl ColumnMap {
    pub fn new(score: impl Into<String>, outcome: impl Into<String>) -> Self {
        ColumnMap {
            score: score.into(),
            outcome: outcome.into(),
            received: None,
            covariates: Vec::new(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | ".")
}

fn parse_cell(cell: &str, column: &str, row: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(RdError::NonNumeric {
            column: column.to_string(),
            row,
            value: cell.to_string(),
        }),
    }
}

/// Reads a header-row CSV file. Rows with a missing score, outcome or (when
/// bound) received value are dropped and counted; missing covariate cells
/// are kept as `NaN`.
pub fn load_csv(path: impl AsRef<Path>, map: &ColumnMap) -> Result<RDDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| RdError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, map)
}

pub fn read_csv<R: std::io::Read>(reader: R, map: &ColumnMap) -> Result<RDDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| RdError::Csv(e.to_string()))?
        .clone();

    let mut seen = HashSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(RdError::DuplicateColumn(h.to_string()));
        }
    }
    let mut bound = HashSet::new();
    let mut all_bound: Vec<&str> = vec![&map.score, &map.outcome];
    all_bound.extend(map.received.as_deref());
    all_bound.extend(map.covariates.iter().map(String::as_str));
    for name in &all_bound {
        if !bound.insert(*name) {
            return Err(RdError::DuplicateColumn(name.to_string()));
        }
    }
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RdError::MissingColumn(name.to_string()))
    };
    let score_ix = index_of(&map.score)?;
    let outcome_ix = index_of(&map.outcome)?;
    let received_ix = map.received.as_deref().map(index_of).transpose()?;
    let cov_ix = map
        .covariates
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<Vec<_>>>()?;

    let mut score = Vec::new();
    let mut outcome = Vec::new();
    let mut received = Vec::new();
    let mut covs = vec![Vec::new(); cov_ix.len()];
    let mut dropped = 0;

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| RdError::Csv(e.to_string()))?;
        let get = |ix: usize| rec.get(ix).unwrap_or("");
        let x = parse_cell(get(score_ix), &map.score, row)?;
        let y = parse_cell(get(outcome_ix), &map.outcome, row)?;
        let d = match (received_ix, &map.received) {
            (Some(ix), Some(name)) => Some(parse_cell(get(ix), name, row)?),
            _ => None,
        };
        let zs = cov_ix
            .iter()
            .zip(&map.covariates)
            .map(|(&ix, name)| parse_cell(get(ix), name, row))
            .collect::<Result<Vec<_>>>()?;
        let (Some(x), Some(y)) = (x, y) else {
            dropped += 1;
            continue;
        };
        if let Some(d) = d {
            match d {
                Some(v) => received.push(v),
                None => {
                    dropped += 1;
                    continue;
                }
            }
        }
        score.push(x);
        outcome.push(y);
        for (col, z) in covs.iter_mut().zip(zs) {
            col.push(z.unwrap_or(f64::NAN));
        }
    }

    let mut data = RDDataset::new(score, outcome)?;
    if received_ix.is_some() {
        data = data.with_received(received)?;
    }
    for (name, col) in map.covariates.iter().zip(covs) {
        data = data.with_covariate(name.clone(), col)?;
    }
    data.dropped_rows = dropped;
    Ok(data)
}

/// `T_i` for every row: 1 when the score lies on the treated side.
pub fn derive_assignment(data: &RDDataset, design: &RDDesign) -> Vec<u8> {
    data.score()
        .iter()
        .map(|&x| u8::from(design.assigned(x)))
        .collect()
}

/// Support summary of the score: distinct values and multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreProfile {
    pub distinct_values: Vec<f64>,
    pub k: usize,
    pub k_minus: usize,
    pub k_plus: usize,
    pub max_multiplicity: usize,
    pub n: usize,
}

impl ScoreProfile {
    pub fn has_mass_points(&self) -> bool {
        self.max_multiplicity > 1
    }

    /// A score with repeated values and few enough support points that each
    /// one can be treated as its own bin or window step.
    pub fn is_discrete(&self) -> bool {
        self.has_mass_points() && self.k <= DISCRETE_SUPPORT_MAX
    }
}

/// Largest support size for which a score with ties is handled mass point by mass point.
pub const DISCRETE_SUPPORT_MAX: usize = 60;

pub fn score_profile(data: &RDDataset, design: &RDDesign) -> ScoreProfile {
    profile_of(data.score(), design.cutoff)
}

pub(crate) fn profile_of(score: &[f64], cutoff: f64) -> ScoreProfile {
    let mut sorted = score.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut max_mult = 0;
    let mut run = 0;
    for (i, &v) in sorted.iter().enumerate() {
        if i > 0 && v == sorted[i - 1] {
            run += 1;
        } else {
            distinct.push(v);
            run = 1;
        }
        max_mult = max_mult.max(run);
    }
    let k_minus = distinct.iter().filter(|&&v| v < cutoff).count();
    ScoreProfile {
        k: distinct.len(),
        k_minus,
        k_plus: distinct.len() - k_minus,
        distinct_values: distinct,
        max_multiplicity: max_mult,
        n: score.len(),
    }
}
