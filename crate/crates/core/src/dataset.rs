//! Categorical data: CSV ingestion against a schema, cleaning rules,
//! simple imputation, contingency counting and fold splitting.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved cell value for a missing observation. Never a state index.
pub const MISSING: u16 = u16::MAX;

/// Tokens read as missing without being recorded as unmapped values.
const NA_TOKENS: [&str; 3] = ["", "NA", "NaN"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: &[&str]) -> Self {
        Variable { name: name.into(), states: states.iter().map(|s| s.to_string()).collect() }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<u16> {
        self.states.iter().position(|s| s == label).map(|i| i as u16)
    }
}

/// Declaration of one CSV column. With non-empty `bins`, numeric cells are
/// discretised: a value `x` gets state index `#{c in bins : x >= c}`, so
/// `states.len()` must equal `bins.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bins: Vec<f64>,
}

/// Schema and cleaning configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub cleaning: Vec<CleaningRule>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_variables(variables: &[Variable]) -> Self {
        Schema {
            variables: variables
                .iter()
                .map(|v| VariableSpec { name: v.name.clone(), states: v.states.clone(), bins: Vec::new() })
                .collect(),
            cleaning: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.states.is_empty() {
                return Err(Error::Schema(format!("variable `{}` has no states", v.name)));
            }
            if v.states.len() >= MISSING as usize {
                return Err(Error::Schema(format!("variable `{}` has too many states", v.name)));
            }
            if !v.bins.is_empty() {
                if v.bins.len() + 1 != v.states.len() {
                    return Err(Error::Schema(format!(
                        "variable `{}`: {} bin edges need {} states, found {}",
                        v.name,
                        v.bins.len(),
                        v.bins.len() + 1,
                        v.states.len()
                    )));
                }
                if v.bins.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!("variable `{}`: bins must increase", v.name)));
                }
            }
        }
        for rule in &self.cleaning {
            let spec = self
                .variables
                .iter()
                .find(|v| v.name == rule.variable)
                .ok_or_else(|| Error::Schema(format!("cleaning rule for unknown variable `{}`", rule.variable)))?;
            if let Action::MapToState(s) | Action::ZeroFill(s) = &rule.action {
                if !spec.states.contains(s) {
                    return Err(Error::Schema(format!(
                        "cleaning rule maps `{}` to unknown state `{s}`",
                        rule.variable
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Cell predicate of a cleaning rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Any,
    Missing,
    GreaterThan(f64),
    LessThan(f64),
    Equals(String),
    EndsWith(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    SetMissing,
    MapToState(String),
    /// Replaces a missing cell with the given absence state.
    ZeroFill(String),
    /// Strips any of the given trailing characters from the raw token and
    /// keeps the result when it names a state.
    StripTrailing(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningRule {
    pub variable: String,
    pub when: Predicate,
    pub action: Action,
}

/// Original values kept alongside the state indices so cleaning rules can
/// look at what was actually in the file.
#[derive(Debug, Clone, Default)]
struct RawValues {
    /// Per column, the parsed number for binned columns (NaN when absent).
    numeric: Vec<Option<Vec<f64>>>,
    /// `(column, row)` -> token that matched no state.
    unmapped: BTreeMap<(usize, usize), String>,
}

#[derive(Debug, Clone)]
pub struct CategoricalDataset {
    variables: Vec<Variable>,
    /// Column-major state indices.
    columns: Vec<Vec<u16>>,
    rows: usize,
    raw: RawValues,
}

/// Equality over variables and cells; raw side values are ignored.
impl PartialEq for CategoricalDataset {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables && self.columns == other.columns
    }
}

impl CategoricalDataset {
    pub fn from_columns(variables: Vec<Variable>, columns: Vec<Vec<u16>>) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        let mut seen = std::collections::HashSet::new();
        for (var, col) in variables.iter().zip(&columns) {
            if !seen.insert(var.name.as_str()) {
                return Err(Error::DuplicateVariable(var.name.clone()));
            }
            if var.states.is_empty() {
                return Err(Error::Schema(format!("variable `{}` has no states", var.name)));
            }
            if col.len() != rows {
                return Err(Error::InvalidArgument(format!("column `{}` has {} rows, expected {rows}", var.name, col.len())));
            }
            if let Some(bad) = col.iter().find(|&&c| c != MISSING && c as usize >= var.states.len()) {
                return Err(Error::InvalidArgument(format!("column `{}` holds invalid state {bad}", var.name)));
            }
        }
        let raw = RawValues { numeric: vec![None; variables.len()], unmapped: BTreeMap::new() };
        Ok(CategoricalDataset { variables, columns, rows, raw })
    }

    /// Builds a dataset from rows of state labels; unknown labels become missing.
    pub fn from_rows(variables: Vec<Variable>, rows: &[Vec<&str>]) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); variables.len()];
        for row in rows {
            if row.len() != variables.len() {
                return Err(Error::InvalidArgument("row width differs from variable count".into()));
            }
            for (j, token) in row.iter().enumerate() {
                columns[j].push(variables[j].state_index(token).unwrap_or(MISSING));
            }
        }
        CategoricalDataset::from_columns(variables, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].states.len()
    }

    pub fn column(&self, var: usize) -> &[u16] {
        &self.columns[var]
    }

    pub fn cell(&self, row: usize, var: usize) -> Option<u16> {
        let c = self.columns[var][row];
        (c != MISSING).then_some(c)
    }

    pub fn missing_count(&self) -> usize {
        self.columns.iter().map(|c| c.iter().filter(|&&x| x == MISSING).count()).sum()
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.contains(&MISSING))
    }

    pub(crate) fn require_complete(&self, what: &'static str) -> Result<()> {
        if self.has_missing() {
            Err(Error::MissingData(what))
        } else {
            Ok(())
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> CategoricalDataset {
        let columns = self.columns.iter().map(|c| indices.iter().map(|&r| c[r]).collect()).collect();
        CategoricalDataset {
            variables: self.variables.clone(),
            columns,
            rows: indices.len(),
            raw: RawValues { numeric: vec![None; self.variables.len()], unmapped: BTreeMap::new() },
        }
    }

    /// Columns at `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> CategoricalDataset {
        CategoricalDataset {
            variables: indices.iter().map(|&i| self.variables[i].clone()).collect(),
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows,
            raw: RawValues { numeric: vec![None; indices.len()], unmapped: BTreeMap::new() },
        }
    }

    /// Proportion of rows in `state` for `var`, ignoring missing cells.
    pub fn proportion(&self, var: usize, state: u16) -> f64 {
        let col = &self.columns[var];
        let observed = col.iter().filter(|&&c| c != MISSING).count();
        if observed == 0 {
            return 0.0;
        }
        col.iter().filter(|&&c| c == state).count() as f64 / observed as f64
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        let mut record = Vec::with_capacity(self.variables.len());
        for r in 0..self.rows {
            record.clear();
            for (v, col) in self.variables.iter().zip(&self.columns) {
                let c = col[r];
                record.push(if c == MISSING { "NA" } else { v.states[c as usize].as_str() });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Textual view of a cell: its state label, or the raw token when the
    /// token matched no state.
    fn token(&self, var: usize, row: usize) -> Option<&str> {
        let c = self.columns[var][row];
        if c != MISSING {
            return Some(&self.variables[var].states[c as usize]);
        }
        self.raw.unmapped.get(&(var, row)).map(String::as_str)
    }

    fn numeric(&self, var: usize, row: usize) -> Option<f64> {
        if let Some(values) = &self.raw.numeric[var] {
            let x = values[row];
            if !x.is_nan() {
                return Some(x);
            }
        }
        self.token(var, row).and_then(|t| t.trim().parse::<f64>().ok())
    }

    fn clear_raw(&mut self, var: usize, row: usize) {
        self.raw.unmapped.remove(&(var, row));
        if let Some(values) = &mut self.raw.numeric[var] {
            values[row] = f64::NAN;
        }
    }
}

/// Reads a CSV file, mapping each declared column onto its states.
/// Undeclared columns are ignored; tokens that match no state become missing.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<CategoricalDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &Schema) -> Result<CategoricalDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Schema("empty file: no header row".into()));
    }
    let positions: Vec<usize> = schema
        .variables
        .iter()
        .map(|v| {
            header
                .iter()
                .position(|h| h == &v.name)
                .ok_or_else(|| Error::Schema(format!("declared column `{}` not in header", v.name)))
        })
        .collect::<Result<_>>()?;

    let p = schema.variables.len();
    let mut columns: Vec<Vec<u16>> = vec![Vec::new(); p];
    let mut numeric: Vec<Option<Vec<f64>>> =
        schema.variables.iter().map(|v| (!v.bins.is_empty()).then(Vec::new)).collect();
    let mut unmapped = BTreeMap::new();
    let mut row = 0usize;
    for record in reader.records() {
        let record = record?;
        for (j, spec) in schema.variables.iter().enumerate() {
            let token = record.get(positions[j]).unwrap_or("");
            let mut value = f64::NAN;
            let state = if NA_TOKENS.contains(&token) {
                MISSING
            } else if let Some(s) = spec.states.iter().position(|s| s == token) {
                s as u16
            } else if !spec.bins.is_empty() {
                match token.parse::<f64>() {
                    Ok(x) if x.is_finite() => {
                        value = x;
                        spec.bins.iter().filter(|&&c| x >= c).count() as u16
                    }
                    _ => {
                        unmapped.insert((j, row), token.to_string());
                        MISSING
                    }
                }
            } else {
                unmapped.insert((j, row), token.to_string());
                MISSING
            };
            columns[j].push(state);
            if let Some(values) = &mut numeric[j] {
                values.push(value);
            }
        }
        row += 1;
    }
    if row == 0 {
        return Err(Error::Schema("file has a header but no data rows".into()));
    }
    let variables =
        schema.variables.iter().map(|v| Variable { name: v.name.clone(), states: v.states.clone() }).collect();
    let mut d = CategoricalDataset::from_columns(variables, columns)?;
    d.raw = RawValues { numeric, unmapped };
    Ok(d)
}

/// Reads a CSV without a schema: every column becomes a variable whose
/// states are its distinct non-missing tokens in sorted order.
pub fn load_csv_inferred(path: impl AsRef<Path>) -> Result<CategoricalDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut states: Vec<std::collections::BTreeSet<String>> = vec![Default::default(); header.len()];
    for record in reader.records() {
        let record = record?;
        for (j, token) in record.iter().enumerate().take(header.len()) {
            if !NA_TOKENS.contains(&token) {
                states[j].insert(token.to_string());
            }
        }
    }
    let schema = Schema {
        variables: header
            .into_iter()
            .zip(states)
            .map(|(name, s)| VariableSpec { name, states: s.into_iter().collect(), bins: Vec::new() })
            .collect(),
        cleaning: Vec::new(),
    };
    parse_csv(&text, &schema)
}

/// Applies cleaning rules in declaration order.
pub fn apply_cleaning(d: &CategoricalDataset, rules: &[CleaningRule]) -> Result<CategoricalDataset> {
    let mut out = d.clone();
    for rule in rules {
        let var = out.require_index(&rule.variable)?;
        let resolve = |s: &str| {
            out.variables[var]
                .state_index(s)
                .ok_or_else(|| Error::Schema(format!("`{}` has no state `{s}`", rule.variable)))
        };
        let target = match &rule.action {
            Action::MapToState(s) | Action::ZeroFill(s) => Some(resolve(s)?),
            _ => None,
        };
        for row in 0..out.rows {
            if !matches_predicate(&out, var, row, &rule.when) {
                continue;
            }
            match &rule.action {
                Action::SetMissing => {
                    out.columns[var][row] = MISSING;
                    out.clear_raw(var, row);
                }
                Action::MapToState(_) => {
                    out.columns[var][row] = target.unwrap();
                    out.raw.unmapped.remove(&(var, row));
                }
                Action::ZeroFill(_) => {
                    if out.columns[var][row] == MISSING {
                        out.columns[var][row] = target.unwrap();
                        out.clear_raw(var, row);
                    }
                }
                Action::StripTrailing(chars) => {
                    let stripped = out
                        .token(var, row)
                        .map(|t| t.trim_end_matches(|c| chars.contains(c)).to_string());
                    if let Some(s) = stripped.and_then(|t| out.variables[var].state_index(&t)) {
                        out.columns[var][row] = s;
                        out.raw.unmapped.remove(&(var, row));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn matches_predicate(d: &CategoricalDataset, var: usize, row: usize, p: &Predicate) -> bool {
    match p {
        Predicate::Any => true,
        Predicate::Missing => d.columns[var][row] == MISSING,
        Predicate::GreaterThan(x) => d.numeric(var, row).is_some_and(|v| v > *x),
        Predicate::LessThan(x) => d.numeric(var, row).is_some_and(|v| v < *x),
        Predicate::Equals(s) => d.token(var, row) == Some(s.as_str()),
        Predicate::EndsWith(s) => d.token(var, row).is_some_and(|t| t.ends_with(s.as_str())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Imputation {
    ListwiseDelete,
    ColumnMode,
}

/// Removes every missing cell, either by dropping rows or by filling each
/// column's most frequent state (smallest label on ties).
pub fn impute(d: &CategoricalDataset, method: Imputation) -> Result<CategoricalDataset> {
    if !d.has_missing() {
        return Ok(d.clone());
    }
    match method {
        Imputation::ListwiseDelete => {
            let keep: Vec<usize> =
                (0..d.rows).filter(|&r| d.columns.iter().all(|c| c[r] != MISSING)).collect();
            if keep.is_empty() {
                return Err(Error::InvalidArgument("listwise deletion removed every row".into()));
            }
            Ok(d.select_rows(&keep))
        }
        Imputation::ColumnMode => {
            let mut out = d.clone();
            for (j, col) in out.columns.iter_mut().enumerate() {
                if !col.contains(&MISSING) {
                    continue;
                }
                let mut freq = vec![0usize; d.variables[j].states.len()];
                for &c in col.iter().filter(|&&c| c != MISSING) {
                    freq[c as usize] += 1;
                }
                // ties go to the lexicographically smallest state label
                let labels = &d.variables[j].states;
                let mode = (0..freq.len())
                    .max_by(|&a, &b| freq[a].cmp(&freq[b]).then_with(|| labels[b].cmp(&labels[a])))
                    .unwrap_or(0) as u16;
                for c in col.iter_mut().filter(|c| **c == MISSING) {
                    *c = mode;
                }
            }
            Ok(out)
        }
    }
}

/// Largest dense table allocated before switching to sorted sparse counting.
const DENSE_LIMIT: u64 = 1 << 22;

/// Joint frequencies of a target over the configurations of its
/// conditioning variables. Configurations are enumerated with the
/// last-listed conditioning variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub target_states: usize,
    pub conditioning: Vec<usize>,
    pub conditioning_cards: Vec<usize>,
    /// Number of conditioning configurations (1 when unconditioned).
    pub config_count: u64,
    /// Non-empty configurations as `(config index, counts per target state)`,
    /// sorted by config index.
    rows: Vec<(u64, Vec<u32>)>,
    total: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Counts for one configuration (zeros when unobserved).
    pub fn row(&self, config: u64) -> Vec<u32> {
        match self.rows.binary_search_by_key(&config, |(c, _)| *c) {
            Ok(i) => self.rows[i].1.clone(),
            Err(_) => vec![0; self.target_states],
        }
    }

    pub fn get(&self, config: u64, state: usize) -> u32 {
        self.row(config)[state]
    }

    /// Observed configurations with their counts.
    pub fn observed(&self) -> impl Iterator<Item = (u64, &[u32])> {
        self.rows.iter().map(|(c, r)| (*c, r.as_slice()))
    }

    /// Maximised log-likelihood `sum N_jk ln(N_jk / N_j)` with `0 ln 0 = 0`.
    pub fn log_likelihood(&self) -> f64 {
        let mut ll = 0.0;
        for (_, row) in &self.rows {
            let nj: u64 = row.iter().map(|&x| x as u64).sum();
            if nj == 0 {
                continue;
            }
            let ln_nj = (nj as f64).ln();
            for &njk in row {
                if njk > 0 {
                    ll += njk as f64 * ((njk as f64).ln() - ln_nj);
                }
            }
        }
        ll
    }

    /// Sums out the conditioning variable at `position`.
    pub fn marginalize(&self, position: usize) -> ContingencyTable {
        let card = self.conditioning_cards[position] as u64;
        let stride: u64 = self.conditioning_cards[position + 1..].iter().map(|&c| c as u64).product();
        let mut merged: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for (config, row) in &self.rows {
            let high = config / (stride * card);
            let low = config % stride;
            let key = high * stride + low;
            let entry = merged.entry(key).or_insert_with(|| vec![0; self.target_states]);
            for (e, &x) in entry.iter_mut().zip(row) {
                *e += x;
            }
        }
        let mut conditioning = self.conditioning.clone();
        conditioning.remove(position);
        let mut cards = self.conditioning_cards.clone();
        cards.remove(position);
        ContingencyTable {
            target_states: self.target_states,
            conditioning,
            config_count: self.config_count / card,
            conditioning_cards: cards,
            rows: merged.into_iter().collect(),
            total: self.total,
        }
    }
}

/// Joint counts of `target` against `conditioning`.
pub fn counts(d: &CategoricalDataset, target: usize, conditioning: &[usize]) -> Result<ContingencyTable> {
    let p = d.n_vars();
    if target >= p {
        return Err(Error::UnknownVariable(format!("#{target}")));
    }
    if let Some(&bad) = conditioning.iter().find(|&&c| c >= p) {
        return Err(Error::UnknownVariable(format!("#{bad}")));
    }
    if conditioning.contains(&target) {
        return Err(Error::InvalidArgument(format!(
            "`{}` cannot be conditioned on itself",
            d.variables[target].name
        )));
    }
    for &c in conditioning.iter().chain(std::iter::once(&target)) {
        if d.columns[c].contains(&MISSING) {
            return Err(Error::MissingData("counting"));
        }
    }
    Ok(counts_unchecked(d, target, conditioning))
}

pub(crate) fn counts_unchecked(d: &CategoricalDataset, target: usize, conditioning: &[usize]) -> ContingencyTable {
    let r = d.cardinality(target);
    let cards: Vec<usize> = conditioning.iter().map(|&c| d.cardinality(c)).collect();
    let q: u64 = cards.iter().map(|&c| c as u64).product();
    let n = d.rows;
    let tcol = &d.columns[target];

    let mut config = vec![0u64; n];
    for &c in conditioning {
        let card = d.cardinality(c) as u64;
        let col = &d.columns[c];
        for (k, &s) in config.iter_mut().zip(col) {
            *k = *k * card + s as u64;
        }
    }

    let cells = q.saturating_mul(r as u64);
    let rows = if cells <= DENSE_LIMIT && cells <= (4 * n as u64).max(1 << 16) {
        let mut dense = vec![0u32; q as usize * r];
        for (k, &s) in config.iter().zip(tcol) {
            dense[*k as usize * r + s as usize] += 1;
        }
        dense
            .chunks(r)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&x| x > 0))
            .map(|(j, row)| (j as u64, row.to_vec()))
            .collect()
    } else {
        let mut keyed: Vec<(u64, u16)> = config.iter().copied().zip(tcol.iter().copied()).collect();
        keyed.sort_unstable();
        let mut rows: Vec<(u64, Vec<u32>)> = Vec::new();
        for (k, s) in keyed {
            match rows.last_mut() {
                Some((last, row)) if *last == k => row[s as usize] += 1,
                _ => {
                    let mut row = vec![0; r];
                    row[s as usize] = 1;
                    rows.push((k, row));
                }
            }
        }
        rows
    };
    ContingencyTable {
        target_states: r,
        conditioning: conditioning.to_vec(),
        conditioning_cards: cards,
        config_count: q,
        rows,
        total: n as u64,
    }
}

/// One cross-validation split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles row indices with `seed` and cuts them into `k` test folds whose
/// sizes differ by at most one (larger folds first).
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in [2, {n}]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut test = order[start..start + len].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += len;
    }
    Ok(folds)
}

pub fn kfold_split(
    d: &CategoricalDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<(CategoricalDataset, CategoricalDataset)>> {
    Ok(kfold_indices(d.n_rows(), k, seed)?
        .into_iter()
        .map(|f| (d.select_rows(&f.train), d.select_rows(&f.test)))
        .collect())
}
