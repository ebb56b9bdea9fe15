//! Discrete causal Bayesian networks: parameter fitting, exact inference by
//! variable elimination, forward sampling, and interventions by graph
//! surgery.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{counts_unchecked, CategoricalDataset, Variable};
use crate::error::{Error, Result};
use crate::graph::{check_same_nodes, Dag};
use crate::par::Exec;

/// Largest intermediate factor variable elimination will build.
pub const MAX_FACTOR_ENTRIES: u128 = 1 << 24;

const ROW_TOLERANCE: f64 = 1e-9;

/// P(node | parents); rows follow parent configurations with the last
/// listed parent varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    card: usize,
    table: Vec<f64>,
}

impl Cpt {
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn row_count(&self) -> usize {
        self.table.len() / self.card
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.table[config * self.card..(config + 1) * self.card]
    }

    /// Row index of the parent configuration found in `assignment`
    /// (indexed by node).
    pub fn config_of(&self, assignment: &[u16]) -> usize {
        self.parents
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&p, &c)| acc * c + assignment[p] as usize)
    }

    pub fn prob(&self, state: u16, assignment: &[u16]) -> f64 {
        self.table[self.config_of(assignment) * self.card + state as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBayesNet {
    dag: Dag,
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetJson {
    nodes: Vec<NodeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeJson {
    name: String,
    states: Vec<String>,
    parents: Vec<String>,
    cpt: Vec<Vec<f64>>,
}

impl DiscreteBayesNet {
    /// Builds a network from explicit tables. `tables[v]` lists the rows of
    /// node `v` over its parents in index order; rows are checked to sum to
    /// one and then renormalised.
    pub fn new(dag: Dag, variables: Vec<Variable>, tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let parents: Vec<Vec<usize>> = (0..dag.node_count()).map(|v| dag.parents(v).iter().copied().collect()).collect();
        Self::with_parent_order(dag, variables, parents, tables)
    }

    fn with_parent_order(
        dag: Dag,
        variables: Vec<Variable>,
        parents: Vec<Vec<usize>>,
        tables: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
        if names != dag.names() {
            return Err(Error::Schema("network variables must match the DAG's nodes in order".into()));
        }
        if tables.len() != names.len() {
            return Err(Error::Schema(format!("expected {} tables, got {}", names.len(), tables.len())));
        }
        let mut cpts = Vec::with_capacity(names.len());
        for (v, (rows, pa)) in tables.into_iter().zip(parents).enumerate() {
            let card = variables[v].cardinality();
            let parent_cards: Vec<usize> = pa.iter().map(|&p| variables[p].cardinality()).collect();
            let q: usize = parent_cards.iter().product();
            if rows.len() != q {
                return Err(Error::Schema(format!("`{}` needs {q} CPT rows, got {}", names[v], rows.len())));
            }
            let mut table = Vec::with_capacity(q * card);
            for (j, row) in rows.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.len() != card || row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::Schema(format!("`{}` CPT row {j} is not a distribution over {card} states", names[v])));
                }
                table.extend(row.iter().map(|p| p / sum));
            }
            cpts.push(Cpt { parents: pa, parent_cards, card, table });
        }
        Ok(DiscreteBayesNet { dag, variables, cpts })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: usize) -> &Variable {
        &self.variables[v]
    }

    pub fn node_count(&self) -> usize {
        self.variables.len()
    }

    pub fn names(&self) -> &[String] {
        self.dag.names()
    }

    pub fn cpt(&self, v: usize) -> &Cpt {
        &self.cpts[v]
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.dag.require_index(name)
    }

    pub fn state_of(&self, v: usize, label: &str) -> Result<u16> {
        self.variables[v].state_index(label).ok_or_else(|| {
            Error::InvalidArgument(format!("`{label}` is not a state of `{}`", self.variables[v].name))
        })
    }

    /// P(assignment) for a full assignment indexed by node.
    pub fn joint(&self, assignment: &[u16]) -> f64 {
        self.cpts.iter().enumerate().map(|(v, c)| c.prob(assignment[v], assignment)).product()
    }

    /// Replaces the CPT rows of `v` (same parents).
    pub fn set_rows(&mut self, v: usize, rows: &[Vec<f64>]) -> Result<()> {
        let cpt = &self.cpts[v];
        if rows.len() != cpt.row_count() || rows.iter().any(|r| r.len() != cpt.card) {
            return Err(Error::Schema(format!("wrong CPT shape for `{}`", self.variables[v].name)));
        }
        for (j, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Schema(format!("`{}` CPT row {j} is not a distribution", self.variables[v].name)));
            }
        }
        let card = cpt.card;
        self.cpts[v].table = rows.iter().flat_map(|r| r.iter().copied()).collect();
        debug_assert_eq!(self.cpts[v].table.len() % card, 0);
        Ok(())
    }

    // ---- inference ---------------------------------------------------------

    /// Exact posterior distribution of `target` given evidence by variable
    /// elimination over the ancestors of the query variables.
    pub fn posterior(&self, target: usize, evidence: &[(usize, u16)]) -> Result<Vec<f64>> {
        let n = self.node_count();
        let mut ev: Vec<Option<u16>> = vec![None; n];
        for &(v, s) in evidence {
            if v >= n || s as usize >= self.variables[v].cardinality() {
                return Err(Error::InvalidArgument(format!("invalid evidence on node #{v}")));
            }
            if ev[v].is_some_and(|old| old != s) {
                return Err(Error::ZeroProbabilityEvidence);
            }
            ev[v] = Some(s);
        }

        // barren nodes (not ancestors of the query) sum out to one
        let mut relevant = vec![false; n];
        let mut stack: Vec<usize> = evidence.iter().map(|&(v, _)| v).chain([target]).collect();
        while let Some(v) = stack.pop() {
            if !relevant[v] {
                relevant[v] = true;
                stack.extend(self.dag.parents(v).iter().copied());
            }
        }

        let mut factors: Vec<Factor> = (0..n)
            .filter(|&v| relevant[v])
            .map(|v| Factor::from_cpt(v, &self.cpts[v], &self.variables).reduce(&ev))
            .collect();
        let mut hidden: BTreeSet<usize> = (0..n).filter(|&v| relevant[v] && v != target && ev[v].is_none()).collect();

        while !hidden.is_empty() {
            // min-degree, ties by name
            let pick = *hidden
                .iter()
                .min_by_key(|&&h| {
                    let mut nb = BTreeSet::new();
                    for f in factors.iter().filter(|f| f.vars.contains(&h)) {
                        nb.extend(f.vars.iter().copied());
                    }
                    (nb.len(), &self.variables[h].name)
                })
                .expect("non-empty");
            hidden.remove(&pick);
            let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&pick));
            factors = without;
            let mut vars = BTreeSet::new();
            for f in &with {
                vars.extend(f.vars.iter().copied());
            }
            let entries: u128 = vars.iter().map(|&v| self.variables[v].cardinality() as u128).product();
            if entries > MAX_FACTOR_ENTRIES {
                return Err(Error::TreewidthTooLarge { entries, limit: MAX_FACTOR_ENTRIES });
            }
            let prod = Factor::product_all(&with, &self.variables);
            factors.push(prod.sum_out(pick));
        }

        let joint = Factor::product_all(&factors, &self.variables);
        let card = self.variables[target].cardinality();
        let mut dist = match ev[target] {
            Some(s) => {
                let mut d = vec![0.0; card];
                d[s as usize] = joint.values.iter().sum();
                d
            }
            None => {
                debug_assert_eq!(joint.vars, vec![target]);
                joint.values
            }
        };
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroProbabilityEvidence);
        }
        for p in &mut dist {
            *p /= total;
        }
        Ok(dist)
    }

    /// P(target | every other variable as given in `row`), using only the
    /// target's Markov blanket.
    pub fn posterior_given_all(&self, target: usize, row: &[u16]) -> Result<Vec<f64>> {
        let card = self.variables[target].cardinality();
        let mut a = row.to_vec();
        let mut dist = Vec::with_capacity(card);
        for s in 0..card {
            a[target] = s as u16;
            let mut p = self.cpts[target].prob(s as u16, &a);
            for &c in self.dag.children(target) {
                p *= self.cpts[c].prob(a[c], &a);
            }
            dist.push(p);
        }
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroProbabilityEvidence);
        }
        Ok(dist.into_iter().map(|p| p / total).collect())
    }

    pub fn infer(&self, q: &Query) -> Result<f64> {
        if !q.interventions.is_empty() {
            return self.intervene(q);
        }
        let (t, s) = self.resolve(&q.target, &q.state)?;
        let ev = self.resolve_map(&q.evidence)?;
        Ok(self.posterior(t, &ev)?[s as usize])
    }

    /// P(target | do(interventions), evidence) on the mutilated network.
    pub fn intervene(&self, q: &Query) -> Result<f64> {
        let (t, s) = self.resolve(&q.target, &q.state)?;
        let dos = self.resolve_map(&q.interventions)?;
        if dos.iter().any(|&(v, _)| v == t) {
            return Err(Error::InvalidArgument("the target cannot be intervened on".into()));
        }
        let ev = self.resolve_map(&q.evidence)?;
        if ev.iter().any(|(v, _)| dos.iter().any(|(d, _)| d == v)) {
            return Err(Error::InvalidArgument("a variable cannot be both observed and intervened on".into()));
        }
        let m = self.mutilate(&dos);
        // the intervened values enter as evidence on parentless point masses
        let all: Vec<(usize, u16)> = ev.into_iter().chain(dos).collect();
        Ok(m.posterior(t, &all)?[s as usize])
    }

    /// Network with each intervened node's incoming edges removed and its CPT
    /// replaced by a point mass.
    pub fn mutilate(&self, dos: &[(usize, u16)]) -> DiscreteBayesNet {
        let mut out = self.clone();
        for &(v, s) in dos {
            for p in self.dag.parents(v).clone() {
                out.dag.remove_edge(p, v);
            }
            let card = self.variables[v].cardinality();
            let mut table = vec![0.0; card];
            table[s as usize] = 1.0;
            out.cpts[v] = Cpt { parents: Vec::new(), parent_cards: Vec::new(), card, table };
        }
        out
    }

    fn resolve(&self, name: &str, state: &str) -> Result<(usize, u16)> {
        let v = self.require_index(name)?;
        Ok((v, self.state_of(v, state)?))
    }

    fn resolve_map(&self, m: &BTreeMap<String, String>) -> Result<Vec<(usize, u16)>> {
        m.iter().map(|(k, s)| self.resolve(k, s)).collect()
    }

    // ---- sampling ----------------------------------------------------------

    /// Forward sampling in topological order. Rows are generated in blocks,
    /// each with its own ChaCha stream, so results do not depend on threads.
    pub fn sample(&self, n: usize, seed: u64, exec: Exec) -> Result<CategoricalDataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        const BLOCK: usize = 4096;
        let order = self.dag.topological_order();
        let blocks = n.div_ceil(BLOCK);
        let parts = exec.map_range(0..blocks, |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let rows = BLOCK.min(n - b * BLOCK);
            let mut out = vec![vec![0u16; rows]; self.node_count()];
            let mut a = vec![0u16; self.node_count()];
            for r in 0..rows {
                for &v in &order {
                    let cpt = &self.cpts[v];
                    let row = cpt.row(cpt.config_of(&a));
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut s = row.len() - 1;
                    for (k, &p) in row.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            s = k;
                            break;
                        }
                    }
                    // never draw a zero-probability state through rounding
                    while row[s] == 0.0 && s > 0 {
                        s -= 1;
                    }
                    a[v] = s as u16;
                    out[v][r] = s as u16;
                }
            }
            out
        });
        let mut cols = vec![Vec::with_capacity(n); self.node_count()];
        for part in parts {
            for (c, p) in cols.iter_mut().zip(part) {
                c.extend(p);
            }
        }
        CategoricalDataset::from_columns(self.variables.clone(), cols)
    }

    // ---- serialisation -----------------------------------------------------

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<NodeJson> = (0..self.node_count())
            .map(|v| {
                let c = &self.cpts[v];
                NodeJson {
                    name: self.variables[v].name.clone(),
                    states: self.variables[v].states.clone(),
                    parents: c.parents.iter().map(|&p| self.variables[p].name.clone()).collect(),
                    cpt: c.table.chunks(c.card).map(|r| r.to_vec()).collect(),
                }
            })
            .collect();
        serde_json::to_value(NetJson { nodes }).expect("serialisable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let net: NetJson = serde_json::from_value(value.clone()).map_err(|e| Error::json("network", e))?;
        let variables: Vec<Variable> = net
            .nodes
            .iter()
            .map(|n| Variable { name: n.name.clone(), states: n.states.clone() })
            .collect();
        let mut dag = Dag::new(variables.iter().map(|v| v.name.clone()))?;
        let mut parents = Vec::new();
        for (v, n) in net.nodes.iter().enumerate() {
            let mut pa = Vec::new();
            for p in &n.parents {
                let pi = dag.require_index(p)?;
                dag.add_edge(pi, v)?;
                pa.push(pi);
            }
            parents.push(pa);
        }
        Self::with_parent_order(dag, variables, parents, net.nodes.into_iter().map(|n| n.cpt).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_json()).map_err(|e| Error::json("network", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_json(&v)
    }
}

/// Maximum-likelihood CPTs with additive smoothing:
/// `(count + s) / (total + s·r)`. With `s = 0` unseen parent configurations
/// get the uniform distribution.
pub fn fit(g: &Dag, d: &CategoricalDataset, smoothing: f64) -> Result<DiscreteBayesNet> {
    if !(smoothing >= 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing {smoothing} must be non-negative")));
    }
    d.require_complete("parameter fitting")?;
    let names = d.names();
    check_same_nodes(g.names(), &names)?;
    let g = g.aligned_to(&names)?;
    let mut tables = Vec::with_capacity(names.len());
    for v in 0..names.len() {
        let pa: Vec<usize> = g.parents(v).iter().copied().collect();
        let r = d.cardinality(v);
        let q: u128 = pa.iter().map(|&p| d.cardinality(p) as u128).product();
        if q * r as u128 > MAX_FACTOR_ENTRIES {
            return Err(Error::TreewidthTooLarge { entries: q * r as u128, limit: MAX_FACTOR_ENTRIES });
        }
        let counts = counts_unchecked(d, v, &pa);
        let mut rows = vec![vec![1.0 / r as f64; r]; q as usize];
        for (config, row) in counts.observed() {
            let total: u64 = row.iter().map(|&c| c as u64).sum();
            let denom = total as f64 + smoothing * r as f64;
            rows[config as usize] = row.iter().map(|&c| (c as f64 + smoothing) / denom).collect();
        }
        tables.push(rows);
    }
    DiscreteBayesNet::new(g, d.variables().to_vec(), tables)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub target: String,
    pub state: String,
    #[serde(default)]
    pub evidence: BTreeMap<String, String>,
    #[serde(default)]
    pub interventions: BTreeMap<String, String>,
}

impl Query {
    pub fn new(target: &str, state: &str) -> Self {
        Query { target: target.into(), state: state.into(), ..Default::default() }
    }

    pub fn given(mut self, var: &str, state: &str) -> Self {
        self.evidence.insert(var.into(), state.into());
        self
    }

    pub fn doing(mut self, var: &str, state: &str) -> Self {
        self.interventions.insert(var.into(), state.into());
        self
    }
}

/// The "positive" state of a binary variable: `1` when present, else the
/// second state.
pub fn positive_state(v: &Variable) -> Result<u16> {
    if v.cardinality() != 2 {
        return Err(Error::InvalidArgument(format!("`{}` is not binary", v.name)));
    }
    Ok(v.state_index("1").unwrap_or(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub exposure: String,
    pub target: String,
    pub exposure_on: String,
    pub exposure_off: String,
    pub target_state: String,
    /// P(target | do(exposure = on)).
    pub p1: f64,
    /// P(target | do(exposure = off)).
    pub p0: f64,
    pub absolute: f64,
    /// `(p1 - p0) / p1`; `None` when `p1 = 0`.
    pub relative: Option<f64>,
}

impl EffectReport {
    /// Change from `p1` to `p0` in percent, e.g.
    /// `decrease of 2.1% (38.2% relative decrease)`.
    pub fn describe(&self, decimals: usize) -> String {
        describe_change(self.p1, self.p0, decimals)
    }

    pub fn summary(&self, decimals: usize) -> String {
        format!(
            "P({t}={s} | do({e}={on})) = {p1:.d$}%, P({t}={s} | do({e}={off})) = {p0:.d$}%: {c}",
            t = self.target,
            s = self.target_state,
            e = self.exposure,
            on = self.exposure_on,
            off = self.exposure_off,
            p1 = self.p1 * 100.0,
            p0 = self.p0 * 100.0,
            c = self.describe(decimals),
            d = decimals,
        )
    }
}

pub fn describe_change(p1: f64, p0: f64, decimals: usize) -> String {
    let diff = p1 - p0;
    let word = if diff > 0.0 {
        "decrease"
    } else if diff < 0.0 {
        "increase"
    } else {
        return "no change".into();
    };
    let abs = format!("{:.d$}", diff.abs() * 100.0, d = decimals);
    if p1 == 0.0 {
        return format!("{word} of {abs}% (relative change undefined)");
    }
    format!("{word} of {abs}% ({:.d$}% relative {word})", (diff / p1).abs() * 100.0, d = decimals)
}

/// Effect of switching a binary exposure off, on the positive state of a
/// binary target, both computed by intervention.
pub fn effect_report(net: &DiscreteBayesNet, exposure: &str, target: &str) -> Result<EffectReport> {
    let e = net.require_index(exposure)?;
    let t = net.require_index(target)?;
    if e == t {
        return Err(Error::InvalidArgument("exposure and target must differ".into()));
    }
    let on = positive_state(net.variable(e))?;
    let off = 1 - on;
    let ts = positive_state(net.variable(t))?;
    let p = |s: u16| -> Result<f64> { Ok(net.mutilate(&[(e, s)]).posterior(t, &[(e, s)])?[ts as usize]) };
    let (p1, p0) = (p(on)?, p(off)?);
    let absolute = p1 - p0;
    let state = |v: usize, s: u16| net.variable(v).states[s as usize].clone();
    Ok(EffectReport {
        exposure: exposure.into(),
        target: target.into(),
        exposure_on: state(e, on),
        exposure_off: state(e, off),
        target_state: state(t, ts),
        p1,
        p0,
        absolute,
        relative: if p1 == 0.0 { None } else { Some(absolute / p1) },
    })
}

/// Dense factor over `vars` (ascending), last variable fastest.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn from_cpt(v: usize, cpt: &Cpt, variables: &[Variable]) -> Factor {
        let mut scope: Vec<usize> = cpt.parents.iter().copied().chain([v]).collect();
        scope.sort_unstable();
        let cards: Vec<usize> = scope.iter().map(|&u| variables[u].cardinality()).collect();
        let size: usize = cards.iter().product();
        let mut values = vec![0.0; size];
        let mut a = vec![0u16; variables.len()];
        for (idx, val) in values.iter_mut().enumerate() {
            let mut rem = idx;
            for (k, &u) in scope.iter().enumerate().rev() {
                a[u] = (rem % cards[k]) as u16;
                rem /= cards[k];
            }
            *val = cpt.prob(a[v], &a);
        }
        Factor { vars: scope, cards, values }
    }

    /// Fixes evidence variables, dropping them from the scope.
    fn reduce(self, ev: &[Option<u16>]) -> Factor {
        if !self.vars.iter().any(|&v| ev[v].is_some()) {
            return self;
        }
        let keep: Vec<usize> = (0..self.vars.len()).filter(|&k| ev[self.vars[k]].is_none()).collect();
        let vars: Vec<usize> = keep.iter().map(|&k| self.vars[k]).collect();
        let cards: Vec<usize> = keep.iter().map(|&k| self.cards[k]).collect();
        let strides = strides(&self.cards);
        let base: usize = self
            .vars
            .iter()
            .enumerate()
            .filter_map(|(k, &v)| ev[v].map(|s| s as usize * strides[k]))
            .sum();
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0usize; keep.len()];
        for _ in 0..size {
            let off: usize = digits.iter().zip(&keep).map(|(&d, &k)| d * strides[k]).sum();
            values.push(self.values[base + off]);
            increment(&mut digits, &cards);
        }
        Factor { vars, cards, values }
    }

    fn product_all(fs: &[Factor], variables: &[Variable]) -> Factor {
        let mut vars = BTreeSet::new();
        for f in fs {
            vars.extend(f.vars.iter().copied());
        }
        let vars: Vec<usize> = vars.into_iter().collect();
        let cards: Vec<usize> = vars.iter().map(|&v| variables[v].cardinality()).collect();
        let size: usize = cards.iter().product();
        // stride of each result variable within each operand
        let maps: Vec<Vec<usize>> = fs
            .iter()
            .map(|f| {
                let st = strides(&f.cards);
                vars.iter().map(|v| f.vars.iter().position(|u| u == v).map_or(0, |k| st[k])).collect()
            })
            .collect();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0usize; vars.len()];
        for _ in 0..size {
            let mut p = 1.0;
            for (f, m) in fs.iter().zip(&maps) {
                let idx: usize = digits.iter().zip(m).map(|(&d, &s)| d * s).sum();
                p *= f.values[idx];
            }
            values.push(p);
            increment(&mut digits, &cards);
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, v: usize) -> Factor {
        let k = self.vars.iter().position(|&u| u == v).expect("variable in scope");
        let inner: usize = self.cards[k + 1..].iter().product();
        let card = self.cards[k];
        let outer = self.values.len() / (inner * card);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                for i in 0..inner {
                    values[o * inner + i] += self.values[(o * card + s) * inner + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(k);
        cards.remove(k);
        Factor { vars, cards, values }
    }
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut st = vec![1; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        st[k] = st[k + 1] * cards[k + 1];
    }
    st
}

fn increment(digits: &mut [usize], cards: &[usize]) {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < cards[k] {
            return;
        }
        digits[k] = 0;
    }
}
