//! Decomposable BIC / log-likelihood scoring and the G² conditional
//! independence test. All logarithms are natural.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::{counts_unchecked, CategoricalDataset};
use crate::error::{Error, Result};
use crate::graph::Dag;

/// Column index in `d` of every node of `g`.
pub(crate) fn column_map(g: &Dag, d: &CategoricalDataset) -> Result<Vec<usize>> {
    g.names().iter().map(|n| d.require_index(n)).collect()
}

fn parent_columns(g: &Dag, map: &[usize], node: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = g.parents(node).iter().map(|&p| map[p]).collect();
    cols.sort_unstable();
    cols
}

/// `sum_i (r_i - 1) * q_i` over the nodes of `g`.
pub fn free_parameters(g: &Dag, d: &CategoricalDataset) -> Result<u64> {
    let map = column_map(g, d)?;
    Ok((0..g.node_count())
        .map(|v| {
            let q: u64 = g.parents(v).iter().map(|&p| d.cardinality(map[p]) as u64).product();
            (d.cardinality(map[v]) as u64 - 1).saturating_mul(q)
        })
        .sum())
}

/// Maximised log-likelihood of `d` under `g`.
pub fn log_likelihood(g: &Dag, d: &CategoricalDataset) -> Result<f64> {
    d.require_complete("scoring")?;
    let map = column_map(g, d)?;
    Ok((0..g.node_count())
        .map(|v| counts_unchecked(d, map[v], &parent_columns(g, &map, v)).log_likelihood())
        .sum())
}

/// `LL - (k / 2) ln n`; higher is better.
pub fn bic(g: &Dag, d: &CategoricalDataset) -> Result<f64> {
    d.require_complete("scoring")?;
    let map = column_map(g, d)?;
    Ok((0..g.node_count()).map(|v| local_bic_unchecked(d, map[v], &parent_columns(g, &map, v))).sum())
}

/// BIC term of one node given a parent set, both as dataset column indices.
pub fn local_bic(node: usize, parents: &[usize], d: &CategoricalDataset) -> Result<f64> {
    check_family(node, parents, d)?;
    d.require_complete("scoring")?;
    let mut sorted = parents.to_vec();
    sorted.sort_unstable();
    Ok(local_bic_unchecked(d, node, &sorted))
}

fn check_family(node: usize, parents: &[usize], d: &CategoricalDataset) -> Result<()> {
    if let Some(&bad) = parents.iter().chain(std::iter::once(&node)).find(|&&c| c >= d.n_vars()) {
        return Err(Error::UnknownVariable(format!("#{bad}")));
    }
    if parents.contains(&node) {
        return Err(Error::InvalidArgument(format!("`{}` listed as its own parent", d.variable(node).name)));
    }
    Ok(())
}

fn local_bic_unchecked(d: &CategoricalDataset, node: usize, parents: &[usize]) -> f64 {
    let table = counts_unchecked(d, node, parents);
    let r = d.cardinality(node) as f64;
    let q: f64 = parents.iter().map(|&p| d.cardinality(p) as f64).product();
    table.log_likelihood() - 0.5 * (r - 1.0) * q * (d.n_rows() as f64).ln()
}

/// Memo of local scores keyed by `(node, sorted parent set)`. Safe to share
/// between threads.
#[derive(Debug, Default)]
pub struct LocalScoreCache {
    map: RwLock<HashMap<(usize, Vec<usize>), f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl LocalScoreCache {
    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// BIC scorer bound to one complete dataset, with a local score cache.
#[derive(Debug)]
pub struct BicScorer<'a> {
    data: &'a CategoricalDataset,
    cache: LocalScoreCache,
}

impl<'a> BicScorer<'a> {
    pub fn new(data: &'a CategoricalDataset) -> Result<Self> {
        data.require_complete("scoring")?;
        Ok(BicScorer { data, cache: LocalScoreCache::default() })
    }

    pub fn data(&self) -> &'a CategoricalDataset {
        self.data
    }

    pub fn cache(&self) -> &LocalScoreCache {
        &self.cache
    }

    /// Cached local BIC; `parents` need not be sorted.
    pub fn local(&self, node: usize, parents: &[usize]) -> f64 {
        let mut key_parents = parents.to_vec();
        key_parents.sort_unstable();
        let key = (node, key_parents);
        if let Some(&v) = self.cache.map.read().get(&key) {
            self.cache.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        self.cache.misses.fetch_add(1, Ordering::Relaxed);
        let v = local_bic_unchecked(self.data, node, &key.1);
        self.cache.map.write().insert(key, v);
        v
    }

    /// Whole-graph score through the cache; `g` must use dataset column order.
    pub fn score(&self, g: &Dag) -> f64 {
        (0..g.node_count())
            .map(|v| self.local(v, &g.parents(v).iter().copied().collect::<Vec<_>>()))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    /// G² statistic, `2 n MI(x; y | z)` in nats.
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub independent: bool,
    /// Set when `x` or `y` shows a single observed state.
    pub degenerate: bool,
}

/// G² likelihood-ratio test of `x ⟂ y | z` with an asymptotic chi-squared
/// p-value. Degrees of freedom are not adjusted for empty cells.
pub fn ci_test(x: usize, y: usize, z: &[usize], d: &CategoricalDataset, alpha: f64) -> Result<CiTestResult> {
    let p = d.n_vars();
    if let Some(&bad) = z.iter().chain([x, y].iter()).find(|&&c| c >= p) {
        return Err(Error::UnknownVariable(format!("#{bad}")));
    }
    if x == y || z.contains(&x) || z.contains(&y) {
        return Err(Error::InvalidArgument("ci_test needs distinct x, y outside z".into()));
    }
    d.require_complete("independence testing")?;
    Ok(g2_test(d, x, y, z, alpha))
}

pub(crate) fn observed_states(d: &CategoricalDataset, var: usize) -> usize {
    let mut seen = vec![false; d.cardinality(var)];
    for &c in d.column(var) {
        seen[c as usize] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

pub(crate) fn g2_test(d: &CategoricalDataset, x: usize, y: usize, z: &[usize], alpha: f64) -> CiTestResult {
    let (rx, ry) = (d.cardinality(x), d.cardinality(y));
    let rz: u64 = z.iter().map(|&v| d.cardinality(v) as u64).product();
    let dof = (rx as u64 - 1).saturating_mul(ry as u64 - 1).saturating_mul(rz);
    if dof == 0 || observed_states(d, x) < 2 || observed_states(d, y) < 2 {
        return CiTestResult { statistic: 0.0, dof: dof.max(1), p_value: 1.0, independent: true, degenerate: true };
    }

    let mut conditioning = z.to_vec();
    conditioning.push(y);
    let table = counts_unchecked(d, x, &conditioning);
    let mut g2 = 0.0;
    let mut group: Vec<(u64, &[u32])> = Vec::new();
    let mut flush = |group: &mut Vec<(u64, &[u32])>| {
        if group.is_empty() {
            return;
        }
        let mut n_xz = vec![0u64; rx];
        let mut n_z = 0u64;
        for (_, row) in group.iter() {
            for (acc, &c) in n_xz.iter_mut().zip(row.iter()) {
                *acc += c as u64;
                n_z += c as u64;
            }
        }
        for (_, row) in group.iter() {
            let n_yz: u64 = row.iter().map(|&c| c as u64).sum();
            for (k, &n_xyz) in row.iter().enumerate() {
                if n_xyz > 0 {
                    let n_xyz = n_xyz as f64;
                    g2 += n_xyz * (n_xyz * n_z as f64 / (n_xz[k] as f64 * n_yz as f64)).ln();
                }
            }
        }
        group.clear();
    };
    for (config, row) in table.observed() {
        if group.first().is_some_and(|(c, _)| c / ry as u64 != config / ry as u64) {
            flush(&mut group);
        }
        group.push((config, row));
    }
    flush(&mut group);

    let statistic = (2.0 * g2).max(0.0);
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|c| c.sf(statistic)).unwrap_or(0.0).clamp(0.0, 1.0)
    };
    CiTestResult { statistic, dof, p_value, independent: p_value > alpha, degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Variable;
    use approx::assert_abs_diff_eq;

    fn binary_data(cols: Vec<Vec<u16>>) -> CategoricalDataset {
        let vars = (0..cols.len()).map(|i| Variable::new(format!("V{i}"), &["0", "1"])).collect();
        CategoricalDataset::from_columns(vars, cols).unwrap()
    }

    #[test]
    fn free_parameter_examples() {
        let vars = vec![
            Variable::new("A", &["0", "1"]),
            Variable::new("B", &["0", "1"]),
            Variable::new("C", &["0", "1"]),
            Variable::new("T", &["a", "b", "c"]),
            Variable::new("F", &["1", "2", "3", "4"]),
        ];
        let d = CategoricalDataset::from_columns(vars, vec![vec![0]; 5]).unwrap();
        let names = ["A", "B", "C", "T", "F"];
        assert_eq!(free_parameters(&Dag::from_edges(["A"], &[]).unwrap(), &d).unwrap(), 1);
        let two = Dag::from_edges(["A", "B", "C"], &[("A", "C"), ("B", "C")]).unwrap();
        assert_eq!(free_parameters(&two, &d).unwrap(), 1 + 1 + 4);
        let multi = Dag::from_edges(names, &[("F", "T")]).unwrap();
        // A, B, C: 1 each; F: 3; T: (3-1)*4 = 8
        assert_eq!(free_parameters(&multi, &d).unwrap(), 3 + 3 + 8);
        assert!(free_parameters(&Dag::new(["Z"]).unwrap(), &d).is_err());
    }

    #[test]
    fn likelihood_and_bic_examples() {
        let d = binary_data(vec![vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]]);
        let g = Dag::new(["V0"]).unwrap();
        assert_abs_diff_eq!(log_likelihood(&g, &d).unwrap(), 10.0 * 0.5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bic(&g, &d).unwrap(), -8.0828, epsilon = 1e-4);
        let constant = binary_data(vec![vec![1; 10]]);
        assert_eq!(log_likelihood(&g, &constant).unwrap(), 0.0);
    }

    #[test]
    fn parentless_local_score_is_entropy_term() {
        let col = vec![0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 1];
        let d = binary_data(vec![col.clone()]);
        let n = col.len() as f64;
        let ones = col.iter().filter(|&&c| c == 1).count() as f64;
        let direct = ones * (ones / n).ln() + (n - ones) * ((n - ones) / n).ln() - 0.5 * n.ln();
        assert_abs_diff_eq!(local_bic(0, &[], &d).unwrap(), direct, epsilon = 1e-12);
    }

    #[test]
    fn cache_returns_identical_values() {
        let d = binary_data(vec![vec![0, 1, 1, 0, 1], vec![1, 1, 0, 0, 1], vec![0, 0, 1, 1, 1]]);
        let s = BicScorer::new(&d).unwrap();
        let a = s.local(2, &[1, 0]);
        let b = s.local(2, &[0, 1]);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!((s.cache().hits(), s.cache().misses()), (1, 1));
        assert_eq!(a.to_bits(), local_bic(2, &[0, 1], &d).unwrap().to_bits());
    }

    #[test]
    fn ci_test_examples() {
        // 2x2 table [[25,25],[25,25]]
        let x: Vec<u16> = (0..100).map(|i| (i / 50) as u16).collect();
        let y: Vec<u16> = (0..100).map(|i| ((i / 25) % 2) as u16).collect();
        let d = binary_data(vec![x, y]);
        let r = ci_test(0, 1, &[], &d, 0.05).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_eq!(r.p_value, 1.0);
        assert!(r.independent && !r.degenerate);

        let x: Vec<u16> = (0..1000).map(|i| (i % 2) as u16).collect();
        let d = binary_data(vec![x.clone(), x]);
        let r = ci_test(0, 1, &[], &d, 0.05).unwrap();
        assert_abs_diff_eq!(r.statistic, 2000.0 * 2f64.ln(), epsilon = 1e-6);
        assert_eq!(r.dof, 1);
        assert!(!r.independent);

        // x and y both copies of z: independent given z
        let z: Vec<u16> = (0..200).map(|i| (i % 2) as u16).collect();
        let d = binary_data(vec![z.clone(), z.clone(), z]);
        let r = ci_test(0, 1, &[2], &d, 0.05).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert!(r.independent);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn degenerate_variable_tests_independent() {
        let d = binary_data(vec![vec![0; 20], (0..20).map(|i| (i % 2) as u16).collect()]);
        let r = ci_test(0, 1, &[], &d, 0.05).unwrap();
        assert!(r.independent && r.degenerate);
        assert!(ci_test(0, 0, &[], &d, 0.05).is_err());
        assert!(ci_test(0, 1, &[1], &d, 0.05).is_err());
    }
}
