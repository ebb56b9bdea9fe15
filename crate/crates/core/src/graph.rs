//! Graph algebra shared by every learner: DAGs, partially directed graphs,
//! CPDAG conversion, structural Hamming distance, fragment counting,
//! consistent extension and DOT/JSON export.
//!
//! Nodes are addressed by index internally. Wherever an ordering choice has
//! to be made, ties are broken by node name so results do not depend on the
//! column order of the input data.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn build_index(names: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if index.insert(n.clone(), i).is_some() {
            return Err(Error::DuplicateVariable(n.clone()));
        }
    }
    Ok(index)
}

/// Directed acyclic graph over named nodes.
///
/// Every mutation checks acyclicity; a mutation that would close a cycle is
/// rejected and leaves the graph untouched.
#[derive(Debug, Clone)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

impl PartialEq for Dag {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.parents == other.parents
    }
}

impl Eq for Dag {}

impl Dag {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let index = build_index(&names)?;
        let n = names.len();
        Ok(Dag { names, index, parents: vec![BTreeSet::new(); n], children: vec![BTreeSet::new(); n] })
    }

    /// Builds a DAG from `(parent, child)` name pairs.
    pub fn from_edges<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        edges: &[(&str, &str)],
    ) -> Result<Self> {
        let mut dag = Dag::new(names)?;
        for (from, to) in edges {
            dag.add_edge_by_name(from, to)?;
        }
        Ok(dag)
    }

    /// Same node set, no edges.
    pub fn empty_like(&self) -> Self {
        let n = self.names.len();
        Dag {
            names: self.names.clone(),
            index: self.index.clone(),
            parents: vec![BTreeSet::new(); n],
            children: vec![BTreeSet::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, v: usize) -> &BTreeSet<usize> {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &BTreeSet<usize> {
        &self.children[v]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].contains(&to)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(BTreeSet::len).sum()
    }

    /// All edges as `(parent, child)` index pairs in index order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(u, ch)| ch.iter().map(move |&v| (u, v)))
            .collect()
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges().into_iter().map(|(u, v)| (self.names[u].clone(), self.names[v].clone())).collect()
    }

    /// True when a directed path `from ~> to` exists (a node reaches itself).
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        self.has_path_avoiding(from, to, None)
    }

    /// Path search that ignores one specific edge.
    pub fn has_path_avoiding(&self, from: usize, to: usize, skip: Option<(usize, usize)>) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &w in &self.children[u] {
                if skip == Some((u, w)) || seen[w] {
                    continue;
                }
                if w == to {
                    return true;
                }
                seen[w] = true;
                stack.push(w);
            }
        }
        false
    }

    pub fn would_create_cycle(&self, from: usize, to: usize) -> bool {
        self.has_path(to, from)
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<()> {
        if from == to {
            return Err(Error::SelfLoop(self.names[from].clone()));
        }
        if self.has_edge(from, to) {
            return Ok(());
        }
        if self.would_create_cycle(from, to) {
            return Err(Error::Cycle { from: self.names[from].clone(), to: self.names[to].clone() });
        }
        self.children[from].insert(to);
        self.parents[to].insert(from);
        Ok(())
    }

    pub fn add_edge_by_name(&mut self, from: &str, to: &str) -> Result<()> {
        let u = self.require_index(from)?;
        let v = self.require_index(to)?;
        self.add_edge(u, v)
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        let removed = self.children[from].remove(&to);
        self.parents[to].remove(&from);
        removed
    }

    /// Replaces `from -> to` by `to -> from`; fails without change on a cycle.
    pub fn reverse_edge(&mut self, from: usize, to: usize) -> Result<()> {
        if !self.has_edge(from, to) {
            return Err(Error::InvalidArgument(format!(
                "no edge {} -> {} to reverse",
                self.names[from], self.names[to]
            )));
        }
        if self.has_path_avoiding(from, to, Some((from, to))) {
            return Err(Error::Cycle { from: self.names[to].clone(), to: self.names[from].clone() });
        }
        self.remove_edge(from, to);
        self.children[to].insert(from);
        self.parents[from].insert(to);
        Ok(())
    }

    /// Topological order; among available nodes the lexicographically
    /// smallest name goes first.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = self.parents.iter().map(BTreeSet::len).collect();
        let mut ready: BinaryHeap<Reverse<(&str, usize)>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse((self.names[i].as_str(), i)))
            .collect();
        let mut order = Vec::with_capacity(self.names.len());
        while let Some(Reverse((_, u))) = ready.pop() {
            order.push(u);
            for &w in &self.children[u] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.push(Reverse((self.names[w].as_str(), w)));
                }
            }
        }
        debug_assert_eq!(order.len(), self.names.len());
        order
    }

    pub fn topological_sort(&self) -> Vec<String> {
        self.topological_order().into_iter().map(|i| self.names[i].clone()).collect()
    }

    /// Unshielded colliders `(a, c, b)` with `a < b`, meaning `a -> c <- b`.
    pub fn v_structures(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for c in 0..self.names.len() {
            let pa: Vec<usize> = self.parents[c].iter().copied().collect();
            for (i, &a) in pa.iter().enumerate() {
                for &b in &pa[i + 1..] {
                    if !self.adjacent(a, b) {
                        out.push((a, c, b));
                    }
                }
            }
        }
        out
    }

    pub fn to_pdag(&self) -> Pdag {
        let mut p = Pdag::with_index(self.names.clone(), self.index.clone());
        for (u, v) in self.edges() {
            p.directed.insert((u, v));
        }
        p
    }

    /// Completed PDAG of this DAG's Markov equivalence class.
    pub fn to_cpdag(&self) -> Pdag {
        let mut p = Pdag::with_index(self.names.clone(), self.index.clone());
        for (u, v) in self.edges() {
            p.undirected.insert(ordered(u, v));
        }
        for (a, c, b) in self.v_structures() {
            p.orient(a, c);
            p.orient(b, c);
        }
        apply_meek_rules(&mut p, &|_, _| true);
        p
    }

    pub fn to_json(&self) -> GraphJson {
        self.to_pdag().to_json()
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let mut dag = Dag::new(json.nodes.iter().cloned())?;
        for e in &json.edges {
            if !e.directed {
                return Err(Error::InvalidArgument(format!(
                    "undirected edge {} -- {} in a DAG",
                    e.from, e.to
                )));
            }
            dag.add_edge_by_name(&e.from, &e.to)?;
        }
        Ok(dag)
    }

    /// Relabels this DAG onto `names`, which must hold the same node set.
    pub fn aligned_to(&self, names: &[String]) -> Result<Dag> {
        check_same_nodes(&self.names, names)?;
        let mut out = Dag::new(names.iter().cloned())?;
        for (u, v) in self.edges() {
            out.add_edge_by_name(&self.names[u], &self.names[v])?;
        }
        Ok(out)
    }
}

#[inline]
fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn check_same_nodes(a: &[String], b: &[String]) -> Result<()> {
    let sa: BTreeSet<&String> = a.iter().collect();
    let sb: BTreeSet<&String> = b.iter().collect();
    if sa == sb {
        return Ok(());
    }
    let only_a: Vec<&str> = sa.difference(&sb).map(|s| s.as_str()).collect();
    let only_b: Vec<&str> = sb.difference(&sa).map(|s| s.as_str()).collect();
    Err(Error::NodeSetMismatch(format!(
        "only in first: [{}]; only in second: [{}]",
        only_a.join(", "),
        only_b.join(", ")
    )))
}

/// Status of an unordered node pair `(i, j)` read with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairStatus {
    Absent,
    Undirected,
    /// `i -> j`
    Forward,
    /// `j -> i`
    Backward,
}

/// Graph with directed and undirected edges. A pair carries at most one edge.
#[derive(Debug, Clone)]
pub struct Pdag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    directed: BTreeSet<(usize, usize)>,
    /// Stored as `(min, max)`.
    undirected: BTreeSet<(usize, usize)>,
}

impl PartialEq for Pdag {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.directed == other.directed && self.undirected == other.undirected
    }
}

impl Eq for Pdag {}

impl Pdag {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let index = build_index(&names)?;
        Ok(Pdag::with_index(names, index))
    }

    fn with_index(names: Vec<String>, index: HashMap<String, usize>) -> Self {
        Pdag { names, index, directed: BTreeSet::new(), undirected: BTreeSet::new() }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn directed_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn edge_count(&self) -> usize {
        self.directed.len() + self.undirected.len()
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.directed.contains(&(from, to))
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&ordered(a, b))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_undirected(a, b) || self.has_directed(a, b) || self.has_directed(b, a)
    }

    pub fn status(&self, i: usize, j: usize) -> PairStatus {
        let (i, j) = ordered(i, j);
        if self.undirected.contains(&(i, j)) {
            PairStatus::Undirected
        } else if self.directed.contains(&(i, j)) {
            PairStatus::Forward
        } else if self.directed.contains(&(j, i)) {
            PairStatus::Backward
        } else {
            PairStatus::Absent
        }
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::SelfLoop(self.names[a].clone()));
        }
        Ok(())
    }

    /// Sets the pair's edge to `from -> to`, replacing any existing edge.
    pub fn set_directed(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_pair(from, to)?;
        self.remove_pair(from, to);
        self.directed.insert((from, to));
        Ok(())
    }

    /// Sets the pair's edge to `a -- b`, replacing any existing edge.
    pub fn set_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        self.remove_pair(a, b);
        self.undirected.insert(ordered(a, b));
        Ok(())
    }

    pub fn add_directed_by_name(&mut self, from: &str, to: &str) -> Result<()> {
        let (u, v) = (self.require_index(from)?, self.require_index(to)?);
        self.set_directed(u, v)
    }

    pub fn add_undirected_by_name(&mut self, a: &str, b: &str) -> Result<()> {
        let (u, v) = (self.require_index(a)?, self.require_index(b)?);
        self.set_undirected(u, v)
    }

    /// Turns an undirected `a -- b` into `a -> b`. Returns false when the
    /// pair was not undirected.
    pub fn orient(&mut self, from: usize, to: usize) -> bool {
        if self.undirected.remove(&ordered(from, to)) {
            self.directed.insert((from, to));
            true
        } else {
            false
        }
    }

    pub fn remove_pair(&mut self, a: usize, b: usize) {
        self.undirected.remove(&ordered(a, b));
        self.directed.remove(&(a, b));
        self.directed.remove(&(b, a));
    }

    /// Nodes sharing any edge with `v`.
    pub fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        (0..self.names.len()).filter(|&u| u != v && self.adjacent(u, v)).collect()
    }

    pub fn undirected_neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.undirected
            .iter()
            .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
            .collect()
    }

    pub fn directed_parents(&self, v: usize) -> BTreeSet<usize> {
        self.directed.iter().filter(|&&(_, b)| b == v).map(|&(a, _)| a).collect()
    }

    pub fn directed_children(&self, v: usize) -> BTreeSet<usize> {
        self.directed.iter().filter(|&&(a, _)| a == v).map(|&(_, b)| b).collect()
    }

    pub fn to_json(&self) -> GraphJson {
        let mut edges: Vec<EdgeJson> = self
            .directed
            .iter()
            .map(|&(u, v)| EdgeJson { from: self.names[u].clone(), to: self.names[v].clone(), directed: true })
            .chain(self.undirected.iter().map(|&(u, v)| EdgeJson {
                from: self.names[u].clone(),
                to: self.names[v].clone(),
                directed: false,
            }))
            .collect();
        edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        GraphJson { nodes: self.names.clone(), edges }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let mut p = Pdag::new(json.nodes.iter().cloned())?;
        for e in &json.edges {
            let (u, v) = (p.require_index(&e.from)?, p.require_index(&e.to)?);
            if p.adjacent(u, v) {
                return Err(Error::InvalidArgument(format!("pair {} / {} listed twice", e.from, e.to)));
            }
            if e.directed {
                p.set_directed(u, v)?;
            } else {
                p.set_undirected(u, v)?;
            }
        }
        Ok(p)
    }
}

impl From<&Dag> for Pdag {
    fn from(d: &Dag) -> Self {
        d.to_pdag()
    }
}

/// Serialised graph: `{"nodes":[..],"edges":[{"from","to","directed"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: String,
    pub to: String,
    pub directed: bool,
}

/// Applies the four Meek orientation rules until nothing changes. `allow`
/// vetoes individual orientations (used for forbidden edges).
pub fn apply_meek_rules(p: &mut Pdag, allow: &dyn Fn(usize, usize) -> bool) {
    loop {
        let mut changed = false;
        let pairs: Vec<(usize, usize)> = p.undirected.iter().copied().collect();
        for (x, y) in pairs {
            if !p.has_undirected(x, y) {
                continue;
            }
            for (a, b) in [(x, y), (y, x)] {
                if allow(a, b) && meek_implies(p, a, b) {
                    p.orient(a, b);
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Whether one of the Meek rules orients the undirected `a -- b` as `a -> b`.
fn meek_implies(p: &Pdag, a: usize, b: usize) -> bool {
    let n = p.node_count();
    // R1: c -> a -- b, c and b non-adjacent.
    for c in 0..n {
        if p.has_directed(c, a) && c != b && !p.adjacent(c, b) {
            return true;
        }
    }
    // R2: a -> c -> b.
    for c in 0..n {
        if p.has_directed(a, c) && p.has_directed(c, b) {
            return true;
        }
    }
    // R3: a -- c -> b, a -- d -> b, c and d non-adjacent.
    let und_a = p.undirected_neighbors(a);
    let into_b: Vec<usize> = und_a.iter().copied().filter(|&c| c != b && p.has_directed(c, b)).collect();
    for (i, &c) in into_b.iter().enumerate() {
        for &d in &into_b[i + 1..] {
            if !p.adjacent(c, d) {
                return true;
            }
        }
    }
    // R4: a -- d -> c -> b, a adjacent to c, d and b non-adjacent.
    for &d in &und_a {
        if d == b || p.adjacent(d, b) {
            continue;
        }
        for c in 0..n {
            if c != a && p.has_directed(d, c) && p.has_directed(c, b) && p.adjacent(a, c) {
                return true;
            }
        }
    }
    false
}

/// Structural Hamming distance: number of node pairs whose status differs.
/// A reversed edge counts once.
pub fn shd(a: &Pdag, b: &Pdag) -> Result<usize> {
    check_same_nodes(&a.names, &b.names)?;
    let map: Vec<usize> = a.names.iter().map(|n| b.index[n]).collect();
    let n = a.names.len();
    let mut count = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a.status(i, j);
            let (bi, bj) = (map[i], map[j]);
            let sb = match b.status(bi, bj) {
                // b's status is relative to its own index order
                PairStatus::Forward if bi > bj => PairStatus::Backward,
                PairStatus::Backward if bi > bj => PairStatus::Forward,
                s => s,
            };
            if sa != sb {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Connected components of the skeleton; isolated nodes count.
pub fn count_fragments(g: &Pdag) -> usize {
    let n = g.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(u, v) in g.directed.iter().chain(g.undirected.iter()) {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            components -= 1;
        }
    }
    components
}

/// Result of orienting a PDAG into a DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub dag: Dag,
    /// True when no extension preserving skeleton, v-structures and
    /// directed edges exists and a fallback orientation was used.
    pub forced: bool,
}

/// Orients the undirected edges of `p` without introducing cycles or new
/// v-structures (Dor–Tarsi sink elimination). When several nodes qualify as
/// the next sink, the one with the greatest name is taken, which orients an
/// isolated `A -- B` as `A -> B`.
pub fn consistent_extension(p: &Pdag) -> Extension {
    match dor_tarsi(p) {
        Some(dag) => Extension { dag, forced: false },
        None => Extension { dag: forced_extension(p), forced: true },
    }
}

fn dor_tarsi(p: &Pdag) -> Option<Dag> {
    let n = p.node_count();
    let mut work = p.clone();
    let mut alive = vec![true; n];
    let mut dag = Dag::with_parts(p.names.clone(), p.index.clone());
    for &(u, v) in &p.directed {
        dag.insert_unchecked(u, v);
    }
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for x in 0..n {
            if !alive[x] || !is_sink_candidate(&work, x, &alive) {
                continue;
            }
            if best.is_none_or(|b| p.names[x] > p.names[b]) {
                best = Some(x);
            }
        }
        let x = best?;
        for y in work.undirected_neighbors(x) {
            if alive[y] {
                work.orient(y, x);
                dag.insert_unchecked(y, x);
            }
        }
        alive[x] = false;
    }
    Some(dag)
}

fn is_sink_candidate(p: &Pdag, x: usize, alive: &[bool]) -> bool {
    let n = p.node_count();
    if (0..n).any(|w| alive[w] && p.has_directed(x, w)) {
        return false;
    }
    let neighbors: Vec<usize> = (0..n).filter(|&w| w != x && alive[w] && p.adjacent(x, w)).collect();
    for &y in &neighbors {
        if !p.has_undirected(x, y) {
            continue;
        }
        if neighbors.iter().any(|&z| z != y && !p.adjacent(y, z)) {
            return false;
        }
    }
    true
}

/// Keeps what it can: directed edges in name order (reversed or dropped on a
/// cycle), then undirected edges from the smaller to the larger name where
/// acyclic.
fn forced_extension(p: &Pdag) -> Dag {
    let mut dag = Dag::with_parts(p.names.clone(), p.index.clone());
    let by_name = |&(u, v): &(usize, usize)| (p.names[u].clone(), p.names[v].clone());
    let mut directed: Vec<(usize, usize)> = p.directed.iter().copied().collect();
    directed.sort_by_key(by_name);
    for (u, v) in directed {
        if dag.add_edge(u, v).is_err() {
            let _ = dag.add_edge(v, u);
        }
    }
    let mut undirected: Vec<(usize, usize)> = p
        .undirected
        .iter()
        .map(|&(u, v)| if p.names[u] <= p.names[v] { (u, v) } else { (v, u) })
        .collect();
    undirected.sort_by_key(by_name);
    for (u, v) in undirected {
        if dag.add_edge(u, v).is_err() {
            let _ = dag.add_edge(v, u);
        }
    }
    dag
}

impl Dag {
    fn with_parts(names: Vec<String>, index: HashMap<String, usize>) -> Self {
        let n = names.len();
        Dag { names, index, parents: vec![BTreeSet::new(); n], children: vec![BTreeSet::new(); n] }
    }

    fn insert_unchecked(&mut self, from: usize, to: usize) {
        self.children[from].insert(to);
        self.parents[to].insert(from);
    }
}

fn dot_id(name: &str) -> String {
    let plain = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit());
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// DOT rendering; undirected edges carry `dir=none`. Edges listed in
/// `highlight` as `(from, to)` names are drawn red.
pub fn to_dot(g: &Pdag, highlight: Option<&BTreeSet<(String, String)>>) -> String {
    let mut out = String::from("digraph {\n");
    for name in &g.names {
        let _ = writeln!(out, "  {};", dot_id(name));
    }
    let marked = |u: usize, v: usize| {
        highlight.is_some_and(|h| {
            h.contains(&(g.names[u].clone(), g.names[v].clone()))
        })
    };
    for e in g.to_json().edges {
        let (u, v) = (g.index[&e.from], g.index[&e.to]);
        let mut attrs = Vec::new();
        if !e.directed {
            attrs.push("dir=none");
        }
        if marked(u, v) || (!e.directed && marked(v, u)) {
            attrs.push("color=red");
        }
        let _ = write!(out, "  {} -> {}", dot_id(&e.from), dot_id(&e.to));
        if !attrs.is_empty() {
            let _ = write!(out, " [{}]", attrs.join(", "));
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(names: &[&str], edges: &[(&str, &str)]) -> Dag {
        Dag::from_edges(names.iter().copied(), edges).unwrap()
    }

    #[test]
    fn topological_sort_examples() {
        assert_eq!(dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).topological_sort(), ["A", "B", "C"]);
        assert_eq!(dag(&["C", "B", "A"], &[]).topological_sort(), ["A", "B", "C"]);
        let diamond = dag(&["D", "C", "B", "A"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]);
        assert_eq!(diamond.topological_sort(), ["A", "B", "C", "D"]);
    }

    #[test]
    fn cycles_and_self_loops_rejected() {
        let mut g = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert!(matches!(g.add_edge_by_name("C", "A"), Err(Error::Cycle { .. })));
        assert!(matches!(g.add_edge_by_name("A", "A"), Err(Error::SelfLoop(_))));
        assert_eq!(g.edge_count(), 2);
        assert!(g.reverse_edge(0, 1).is_ok());
        assert!(g.has_edge(1, 0));
        // reversing A->C style edge with an alternative path must fail
        let mut h = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("A", "C")]);
        assert!(h.reverse_edge(0, 2).is_err());
        assert!(h.has_edge(0, 2));
        assert!(Dag::new(["A", "A"]).is_err());
    }

    #[test]
    fn cpdag_examples() {
        let names = ["A", "B", "C"];
        let collider = dag(&names, &[("A", "C"), ("B", "C")]).to_cpdag();
        assert!(collider.has_directed(0, 2) && collider.has_directed(1, 2));
        assert!(collider.undirected_edges().is_empty());

        let chain = dag(&names, &[("A", "B"), ("B", "C")]).to_cpdag();
        assert!(chain.has_undirected(0, 1) && chain.has_undirected(1, 2));
        assert!(chain.directed_edges().is_empty());

        let single = dag(&["A", "B"], &[("A", "B")]).to_cpdag();
        assert!(single.has_undirected(0, 1));
    }

    #[test]
    fn shd_examples() {
        let names = ["A", "B", "C"];
        let chain = dag(&names, &[("A", "B"), ("B", "C")]).to_cpdag();
        assert_eq!(shd(&chain, &chain).unwrap(), 0);
        let one = dag(&["A", "B"], &[("A", "B")]).to_cpdag();
        let empty = dag(&["A", "B"], &[]).to_cpdag();
        assert_eq!(shd(&one, &empty).unwrap(), 1);
        let collider = dag(&names, &[("A", "C"), ("B", "C")]).to_cpdag();
        assert_eq!(shd(&chain, &collider).unwrap(), 3);
        assert_eq!(shd(&collider, &chain).unwrap(), 3);
    }

    #[test]
    fn shd_aligns_by_name_and_reports_mismatch() {
        let a = dag(&["A", "B"], &[("A", "B")]).to_pdag();
        let b = dag(&["B", "A"], &[("A", "B")]).to_pdag();
        assert_eq!(shd(&a, &b).unwrap(), 0);
        let c = dag(&["B", "A"], &[("B", "A")]).to_pdag();
        assert_eq!(shd(&a, &c).unwrap(), 1);
        let err = shd(&a, &dag(&["A", "Z"], &[]).to_pdag()).unwrap_err().to_string();
        assert!(err.contains('B') && err.contains('Z'), "{err}");
    }

    #[test]
    fn fragments() {
        assert_eq!(count_fragments(&dag(&["A", "B", "C"], &[]).to_pdag()), 3);
        assert_eq!(count_fragments(&dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).to_pdag()), 1);
        assert_eq!(count_fragments(&dag(&["A", "B", "C"], &[("A", "B")]).to_pdag()), 2);
    }

    #[test]
    fn extension_examples() {
        let mut p = Pdag::new(["A", "B", "C"]).unwrap();
        p.add_directed_by_name("A", "B").unwrap();
        p.add_undirected_by_name("B", "C").unwrap();
        let ext = consistent_extension(&p);
        assert!(!ext.forced);
        assert_eq!(ext.dag, dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]));

        let mut single = Pdag::new(["A", "B"]).unwrap();
        single.add_undirected_by_name("A", "B").unwrap();
        assert_eq!(consistent_extension(&single).dag, dag(&["A", "B"], &[("A", "B")]));

        let d = dag(&["A", "B", "C", "D"], &[("A", "B"), ("C", "B"), ("B", "D")]);
        let ext = consistent_extension(&d.to_pdag());
        assert_eq!(ext.dag, d);
        assert!(!ext.forced);
    }

    #[test]
    fn extension_of_inconsistent_pdag_is_forced() {
        // A -- B -- C -- D -- A with no chords has no consistent extension.
        let mut p = Pdag::new(["A", "B", "C", "D"]).unwrap();
        for (a, b) in [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")] {
            p.add_undirected_by_name(a, b).unwrap();
        }
        let ext = consistent_extension(&p);
        assert!(ext.forced);
        assert_eq!(ext.dag.edge_count(), 4);

        let mut cyclic = Pdag::new(["A", "B", "C"]).unwrap();
        for (a, b) in [("A", "B"), ("B", "C"), ("C", "A")] {
            cyclic.add_directed_by_name(a, b).unwrap();
        }
        let ext = consistent_extension(&cyclic);
        assert!(ext.forced);
        assert_eq!(ext.dag.edge_count(), 3);
    }

    #[test]
    fn dot_output() {
        let empty = Pdag::new(["A", "B"]).unwrap();
        let text = to_dot(&empty, None);
        assert!(text.contains("A;") && text.contains("B;") && !text.contains("->"));
        let d = dag(&["A", "B"], &[("A", "B")]).to_pdag();
        assert!(to_dot(&d, None).contains("A -> B"));
        let mut u = Pdag::new(["A", "B"]).unwrap();
        u.add_undirected_by_name("A", "B").unwrap();
        assert!(to_dot(&u, None).contains("A -> B [dir=none]"));
        let spaced = dag(&["Ethnic Group", "B"], &[("Ethnic Group", "B")]).to_pdag();
        let hl = BTreeSet::from([("Ethnic Group".to_string(), "B".to_string())]);
        assert!(to_dot(&spaced, Some(&hl)).contains("\"Ethnic Group\" -> B [color=red]"));
    }

    #[test]
    fn json_round_trip() {
        let mut p = Pdag::new(["A", "B", "C"]).unwrap();
        p.add_directed_by_name("A", "B").unwrap();
        p.add_undirected_by_name("C", "B").unwrap();
        let text = serde_json::to_string(&p.to_json()).unwrap();
        assert!(text.contains(r#""directed":false"#));
        let back = Pdag::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(Dag::from_json(&p.to_json()).is_err());
    }
}
