//! Knowledge-based constraints: required and forbidden directed edges,
//! temporal tiers and orientation preferences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Directed edge by variable name, `(from, to)`.
pub type NamedEdge = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub level: u32,
    pub variables: BTreeSet<String>,
    /// When false every edge between two members of the tier is forbidden.
    pub intra_tier_edges: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeConstraints {
    pub required: BTreeSet<NamedEdge>,
    pub forbidden: BTreeSet<NamedEdge>,
    pub tiers: Vec<Tier>,
    /// Unordered pair `(min, max)` -> preferred `(from, to)`.
    pub orientation_preferences: BTreeMap<(String, String), NamedEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnknownVariable { name: String, context: &'static str },
    SelfLoop(String),
    /// A required edge is forbidden, explicitly or through the tiers.
    Contradiction { edge: NamedEdge, by_tier: bool },
    RequiredCycle(Vec<String>),
    VariableInSeveralTiers(String),
    DuplicateTierLevel(u32),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnknownVariable { name, context } => write!(f, "unknown variable `{name}` in {context}"),
            Diagnostic::SelfLoop(v) => write!(f, "self-loop on `{v}`"),
            Diagnostic::Contradiction { edge, by_tier } => write!(
                f,
                "required edge {} -> {} is forbidden{}",
                edge.0,
                edge.1,
                if *by_tier { " by the temporal tiers" } else { "" }
            ),
            Diagnostic::RequiredCycle(path) => write!(f, "required edges form a cycle: {}", path.join(" -> ")),
            Diagnostic::VariableInSeveralTiers(v) => write!(f, "`{v}` appears in more than one tier"),
            Diagnostic::DuplicateTierLevel(l) => write!(f, "tier level {l} declared twice"),
        }
    }
}

impl KnowledgeConstraints {
    pub fn is_empty(&self) -> bool {
        self.required.is_empty()
            && self.forbidden.is_empty()
            && self.tiers.is_empty()
            && self.orientation_preferences.is_empty()
    }

    pub fn require(&mut self, from: &str, to: &str) -> &mut Self {
        self.required.insert((from.to_string(), to.to_string()));
        self
    }

    pub fn forbid(&mut self, from: &str, to: &str) -> &mut Self {
        self.forbidden.insert((from.to_string(), to.to_string()));
        self
    }

    pub fn prefer(&mut self, from: &str, to: &str) -> &mut Self {
        self.orientation_preferences.insert(unordered(from, to), (from.to_string(), to.to_string()));
        self
    }

    /// Preferred orientation for the pair, if one was declared.
    pub fn preference(&self, a: &str, b: &str) -> Option<&NamedEdge> {
        self.orientation_preferences.get(&unordered(a, b))
    }

    pub fn variables_mentioned(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (a, b) in self.required.iter().chain(&self.forbidden) {
            out.insert(a.clone());
            out.insert(b.clone());
        }
        for t in &self.tiers {
            out.extend(t.variables.iter().cloned());
        }
        for (a, b) in self.orientation_preferences.keys() {
            out.insert(a.clone());
            out.insert(b.clone());
        }
        out
    }

    fn tier_of(&self) -> BTreeMap<&str, (u32, bool)> {
        let mut map = BTreeMap::new();
        for t in &self.tiers {
            for v in &t.variables {
                map.entry(v.as_str()).or_insert((t.level, t.intra_tier_edges));
            }
        }
        map
    }

    /// Checks constraints against a variable roster; an empty result means valid.
    pub fn validate(&self, all_variables: &[String]) -> Vec<Diagnostic> {
        let known: BTreeSet<&str> = all_variables.iter().map(String::as_str).collect();
        let mut out = self.intrinsic_diagnostics();
        let mut unknown = |name: &str, context: &'static str| {
            if !known.contains(name) {
                out.push(Diagnostic::UnknownVariable { name: name.to_string(), context });
            }
        };
        for (a, b) in &self.required {
            unknown(a, "required edges");
            unknown(b, "required edges");
        }
        for (a, b) in &self.forbidden {
            unknown(a, "forbidden edges");
            unknown(b, "forbidden edges");
        }
        for t in &self.tiers {
            for v in &t.variables {
                unknown(v, "tiers");
            }
        }
        for (a, b) in self.orientation_preferences.keys() {
            unknown(a, "orientation preferences");
            unknown(b, "orientation preferences");
        }
        dedup(out)
    }

    /// Diagnostics that do not depend on the variable roster.
    pub fn intrinsic_diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (a, b) in self.required.iter().chain(&self.forbidden) {
            if a == b {
                out.push(Diagnostic::SelfLoop(a.clone()));
            }
        }
        for e in &self.required {
            if self.forbidden.contains(e) {
                out.push(Diagnostic::Contradiction { edge: e.clone(), by_tier: false });
            }
        }
        let mut seen = BTreeSet::new();
        let mut levels = BTreeSet::new();
        for t in &self.tiers {
            if !levels.insert(t.level) {
                out.push(Diagnostic::DuplicateTierLevel(t.level));
            }
            for v in &t.variables {
                if !seen.insert(v.as_str()) {
                    out.push(Diagnostic::VariableInSeveralTiers(v.clone()));
                }
            }
        }
        let tiers = self.tier_of();
        for e in &self.required {
            if tier_forbids(&tiers, &e.0, &e.1) {
                out.push(Diagnostic::Contradiction { edge: e.clone(), by_tier: true });
            }
        }
        if let Some(cycle) = find_cycle(&self.required) {
            out.push(Diagnostic::RequiredCycle(cycle));
        }
        dedup(out)
    }

    /// Explicit forbidden edges plus those implied by the tiers. Untiered
    /// variables form an implicit last tier with intra-tier edges allowed.
    pub fn expand_tiers(&self, all_variables: &[String]) -> Result<BTreeSet<NamedEdge>> {
        let known: BTreeSet<&str> = all_variables.iter().map(String::as_str).collect();
        for t in &self.tiers {
            if let Some(v) = t.variables.iter().find(|v| !known.contains(v.as_str())) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
        let tiers = self.tier_of();
        let mut out = self.forbidden.clone();
        for a in all_variables {
            for b in all_variables {
                if a != b && tier_forbids(&tiers, a, b) {
                    out.insert((a.clone(), b.clone()));
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let k = Self::from_json_str(&text)?;
        let diagnostics = k.intrinsic_diagnostics();
        if !diagnostics.is_empty() {
            return Err(Error::Constraint(join(&diagnostics)));
        }
        Ok(k)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::json("constraints", e))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Constraint("constraint file must hold a JSON object".into()))?;
        let mut k = KnowledgeConstraints::default();
        for (field, target) in [("required", &mut k.required), ("forbidden", &mut k.forbidden)] {
            for (i, entry) in array(obj.get(field), field)?.iter().enumerate() {
                let e: EdgeEntry = serde_json::from_value(entry.clone())
                    .map_err(|e| Error::json(format!("{field}[{i}] = {entry}"), e))?;
                target.insert((e.from, e.to));
            }
        }
        for (i, entry) in array(obj.get("tiers"), "tiers")?.iter().enumerate() {
            let t: Tier = serde_json::from_value(entry.clone())
                .map_err(|e| Error::json(format!("tiers[{i}] = {entry}"), e))?;
            k.tiers.push(t);
        }
        k.tiers.sort_by_key(|t| t.level);
        for (i, entry) in array(obj.get("orientation_preferences"), "orientation_preferences")?.iter().enumerate() {
            let p: PreferenceEntry = serde_json::from_value(entry.clone())
                .map_err(|e| Error::json(format!("orientation_preferences[{i}] = {entry}"), e))?;
            let edge = match p.prefer.replace(' ', "").as_str() {
                "a->b" => (p.a.clone(), p.b.clone()),
                "b->a" => (p.b.clone(), p.a.clone()),
                other => {
                    return Err(Error::Constraint(format!(
                        "orientation_preferences[{i}]: prefer must be \"a->b\" or \"b->a\", got {other:?}"
                    )))
                }
            };
            k.orientation_preferences.insert(unordered(&p.a, &p.b), edge);
        }
        Ok(k)
    }

    pub fn to_json(&self) -> Value {
        let edges = |set: &BTreeSet<NamedEdge>| -> Vec<EdgeEntry> {
            set.iter().map(|(a, b)| EdgeEntry { from: a.clone(), to: b.clone() }).collect()
        };
        let prefs: Vec<PreferenceEntry> = self
            .orientation_preferences
            .iter()
            .map(|((a, b), (from, _))| PreferenceEntry {
                a: a.clone(),
                b: b.clone(),
                prefer: if from == a { "a->b".into() } else { "b->a".into() },
            })
            .collect();
        serde_json::json!({
            "required": edges(&self.required),
            "forbidden": edges(&self.forbidden),
            "tiers": self.tiers,
            "orientation_preferences": prefs,
        })
    }

    /// Index-based view over `names`, rejecting invalid constraint sets.
    pub fn resolve(&self, names: &[String]) -> Result<ResolvedConstraints> {
        let diagnostics = self.validate(names);
        if !diagnostics.is_empty() {
            return Err(Error::Constraint(join(&diagnostics)));
        }
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let n = names.len();
        let mut forbidden = vec![false; n * n];
        for (a, b) in self.expand_tiers(names)? {
            forbidden[index[a.as_str()] * n + index[b.as_str()]] = true;
        }
        let mut required: Vec<(usize, usize)> =
            self.required.iter().map(|(a, b)| (index[a.as_str()], index[b.as_str()])).collect();
        required.sort_unstable();
        let mut required_matrix = vec![false; n * n];
        for &(a, b) in &required {
            required_matrix[a * n + b] = true;
        }
        Ok(ResolvedConstraints { n, required, required_matrix, forbidden })
    }
}

fn tier_forbids(tiers: &BTreeMap<&str, (u32, bool)>, from: &str, to: &str) -> bool {
    if tiers.is_empty() {
        return false;
    }
    let implicit = (u32::MAX, true);
    let (lf, _) = tiers.get(from).copied().unwrap_or(implicit);
    let (lt, intra) = tiers.get(to).copied().unwrap_or(implicit);
    lf > lt || (lf == lt && !intra)
}

fn find_cycle(edges: &BTreeSet<NamedEdge>) -> Option<Vec<String>> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a.as_str()).or_default().push(b.as_str());
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn dfs<'a>(
        u: &'a str,
        adj: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        state.insert(u, 1);
        stack.push(u);
        for &w in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
            match state.get(w).copied().unwrap_or(0) {
                1 => {
                    let start = stack.iter().position(|&s| s == w).unwrap();
                    let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(w.to_string());
                    return Some(cycle);
                }
                0 => {
                    if let Some(c) = dfs(w, adj, state, stack) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        stack.pop();
        state.insert(u, 2);
        None
    }
    let nodes: Vec<&str> = adj.keys().copied().collect();
    for u in nodes {
        if state.get(u).copied().unwrap_or(0) == 0 {
            if let Some(c) = dfs(u, &adj, &mut state, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn dedup(mut v: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let mut seen = Vec::new();
    v.retain(|d| {
        if seen.contains(d) {
            false
        } else {
            seen.push(d.clone());
            true
        }
    });
    v
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn array<'a>(v: Option<&'a Value>, field: &str) -> Result<&'a [Value]> {
    match v {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(Error::Constraint(format!("`{field}` must be an array"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    from: String,
    to: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreferenceEntry {
    a: String,
    b: String,
    prefer: String,
}

/// Constraints mapped onto node indices of one variable roster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedConstraints {
    n: usize,
    required: Vec<(usize, usize)>,
    required_matrix: Vec<bool>,
    forbidden: Vec<bool>,
}

impl ResolvedConstraints {
    pub fn none(n: usize) -> Self {
        ResolvedConstraints { n, required: Vec::new(), required_matrix: vec![false; n * n], forbidden: vec![false; n * n] }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn required_edges(&self) -> &[(usize, usize)] {
        &self.required
    }

    pub fn is_required(&self, from: usize, to: usize) -> bool {
        self.required_matrix[from * self.n + to]
    }

    /// Either orientation of the pair is required.
    pub fn pair_required(&self, a: usize, b: usize) -> bool {
        self.is_required(a, b) || self.is_required(b, a)
    }

    pub fn is_forbidden(&self, from: usize, to: usize) -> bool {
        self.forbidden[from * self.n + to]
    }

    pub fn both_forbidden(&self, a: usize, b: usize) -> bool {
        self.is_forbidden(a, b) && self.is_forbidden(b, a)
    }
}

/// The constraint set shipped with the crate: the 21 clinically elicited
/// directed edges and the demographic first tier.
pub fn sepsis_constraints() -> KnowledgeConstraints {
    KnowledgeConstraints::from_json_str(include_str!("../data/sepsis_constraints.json"))
        .expect("bundled constraint file parses")
}
