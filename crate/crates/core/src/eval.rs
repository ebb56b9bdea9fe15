//! Structure comparison and predictive validation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cbn::{fit, positive_state, DiscreteBayesNet};
use crate::dataset::{kfold_indices, CategoricalDataset};
use crate::error::{Error, Result};
use crate::graph::{check_same_nodes, count_fragments, shd, Dag};
use crate::par::Exec;
use crate::scoring::{free_parameters, log_likelihood};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub name: String,
    pub shd: usize,
    pub fragments: usize,
    pub free_parameters: u64,
    pub edges: usize,
    pub bic: f64,
    pub log_likelihood: f64,
}

/// One row per structure; SHD is taken between CPDAGs.
pub fn structure_report(structures: &[(String, Dag)], reference: &Dag, d: &CategoricalDataset) -> Result<Vec<StructureRow>> {
    let ref_cpdag = reference.to_cpdag();
    structures
        .iter()
        .map(|(name, g)| {
            check_same_nodes(g.names(), reference.names())?;
            let ll = log_likelihood(g, d)?;
            let k = free_parameters(g, d)?;
            let bic = ll - 0.5 * k as f64 * (d.n_rows() as f64).ln();
            Ok(StructureRow {
                name: name.clone(),
                shd: shd(&g.to_cpdag(), &ref_cpdag)?,
                fragments: count_fragments(&g.to_pdag()),
                free_parameters: k,
                edges: g.edge_count(),
                bic,
                log_likelihood: ll,
            })
        })
        .collect()
}

pub fn structure_report_csv(rows: &[StructureRow]) -> String {
    let mut out = String::from("structure,shd,fragments,free_parameters,edges,bic,log_likelihood\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.4},{:.4}",
            csv_field(&r.name),
            r.shd,
            r.fragments,
            r.free_parameters,
            r.edges,
            r.bic,
            r.log_likelihood
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    /// Set when the training data hold a single class.
    pub degenerate: bool,
}

/// Proportion of rows in `state` of `target` (default: the positive state).
pub fn threshold_from_prevalence(train: &CategoricalDataset, target: &str, state: Option<&str>) -> Result<Threshold> {
    let t = train.require_index(target)?;
    let var = train.variable(t);
    if var.cardinality() != 2 {
        return Err(Error::InvalidArgument(format!("`{target}` is not binary")));
    }
    let s = match state {
        Some(label) => var
            .state_index(label)
            .ok_or_else(|| Error::InvalidArgument(format!("`{label}` is not a state of `{target}`")))?,
        None => positive_state(var)?,
    };
    if train.n_rows() == 0 {
        return Err(Error::InvalidArgument("empty training data".into()));
    }
    let value = train.proportion(t, s);
    Ok(Threshold { value, degenerate: value == 0.0 || value == 1.0 })
}

/// Confusion-matrix counts with `positive iff score > threshold`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl Confusion {
    pub fn from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Confusion {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s > threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    /// (TN, FP, FN, TP) as proportions of the total.
    pub fn proportions(&self) -> [f64; 4] {
        let n = self.total() as f64;
        [self.tn as f64 / n, self.fp as f64 / n, self.fn_ as f64 / n, self.tp as f64 / n]
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Rank-based AUC; tied scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows scoring at least this value are called positive.
    pub threshold: f64,
}

/// Empirical ROC curve from (0, 0) to (1, 1), one point per distinct score.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Vec<RocPoint> {
    let pos = labels.iter().filter(|&&y| y).count().max(1) as f64;
    let neg = labels.iter().filter(|&&y| !y).count().max(1) as f64;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint { fpr: fp as f64 / neg, tpr: tp as f64 / pos, threshold: s });
    }
    out
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub threshold: f64,
    pub confusion: Confusion,
    /// TN, FP, FN, TP as proportions.
    pub proportions: [f64; 4],
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
}

impl PredictionReport {
    pub fn from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> PredictionReport {
        let confusion = Confusion::from_scores(scores, labels, threshold);
        PredictionReport {
            threshold,
            confusion,
            proportions: confusion.proportions(),
            accuracy: confusion.accuracy(),
            sensitivity: confusion.sensitivity(),
            specificity: confusion.specificity(),
            auc: roc_auc(scores, labels).ok(),
        }
    }
}

/// P(target = positive | all other variables) for every row of `test`.
pub fn predict(net: &DiscreteBayesNet, test: &CategoricalDataset, target: &str) -> Result<(Vec<f64>, Vec<bool>)> {
    test.require_complete("prediction")?;
    check_same_nodes(net.names(), &test.names())?;
    let t = net.require_index(target)?;
    let pos = positive_state(net.variable(t))?;
    let map: Vec<usize> = net.names().iter().map(|n| test.index_of(n).expect("same nodes")).collect();
    let mut row = vec![0u16; net.node_count()];
    let mut scores = Vec::with_capacity(test.n_rows());
    let mut labels = Vec::with_capacity(test.n_rows());
    for r in 0..test.n_rows() {
        for (v, &c) in map.iter().enumerate() {
            row[v] = test.column(c)[r];
        }
        let dist = net.posterior_given_all(t, &row).map_err(|_| {
            Error::InvalidArgument(format!("test row {r} has zero probability; fit with positive smoothing"))
        })?;
        scores.push(dist[pos as usize]);
        labels.push(row[t] == pos);
    }
    Ok((scores, labels))
}

pub fn classify_and_score(
    net: &DiscreteBayesNet,
    test: &CategoricalDataset,
    target: &str,
    threshold: f64,
) -> Result<PredictionReport> {
    let (scores, labels) = predict(net, test, target)?;
    Ok(PredictionReport::from_scores(&scores, &labels, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub report: Option<PredictionReport>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub folds_used: usize,
    pub threshold: f64,
    pub proportions: [f64; 4],
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub target: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub mean: MeanMetrics,
    /// ROC over all test rows pooled across folds.
    #[serde(skip)]
    pub roc: Vec<RocPoint>,
    pub pooled_auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub smoothing: f64,
    pub exec: Exec,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { k: 10, seed: 0, smoothing: 1.0, exec: Exec::Parallel }
    }
}

/// k-fold cross-validation: per fold, fit on the training rows, take the
/// training prevalence as threshold and score the test rows.
pub fn cross_validate(g: &Dag, d: &CategoricalDataset, target: &str, opts: &CvOptions) -> Result<CvReport> {
    if !(opts.smoothing > 0.0) {
        return Err(Error::InvalidArgument("prediction needs positive smoothing".into()));
    }
    d.require_complete("cross-validation")?;
    check_same_nodes(g.names(), &d.names())?;
    let t = d.require_index(target)?;
    positive_state(d.variable(t))?;
    let folds = kfold_indices(d.n_rows(), opts.k, opts.seed)?;
    let results = opts.exec.map_range(0..folds.len(), |f| -> Result<(FoldReport, Vec<f64>, Vec<bool>)> {
        let train = d.select_rows(&folds[f].train);
        let test = d.select_rows(&folds[f].test);
        let mut fr =
            FoldReport { fold: f, train_rows: train.n_rows(), test_rows: test.n_rows(), report: None, skipped: None };
        let th = threshold_from_prevalence(&train, target, None)?;
        if th.degenerate {
            fr.skipped = Some("training fold holds a single class".into());
            return Ok((fr, Vec::new(), Vec::new()));
        }
        let net = fit(g, &train, opts.smoothing)?;
        let (scores, labels) = predict(&net, &test, target)?;
        fr.report = Some(PredictionReport::from_scores(&scores, &labels, th.value));
        Ok((fr, scores, labels))
    });
    let mut fold_reports = Vec::new();
    let (mut all_scores, mut all_labels) = (Vec::new(), Vec::new());
    for r in results {
        let (fr, s, l) = r?;
        fold_reports.push(fr);
        all_scores.extend(s);
        all_labels.extend(l);
    }
    let used: Vec<&PredictionReport> = fold_reports.iter().filter_map(|f| f.report.as_ref()).collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument(format!("every training fold has a single class of `{target}`")));
    }
    let mean_of = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let m = used.len() as f64;
    let mut proportions = [0.0; 4];
    for r in &used {
        for (acc, p) in proportions.iter_mut().zip(r.proportions) {
            *acc += p / m;
        }
    }
    let mean = MeanMetrics {
        folds_used: used.len(),
        threshold: used.iter().map(|r| r.threshold).sum::<f64>() / m,
        proportions,
        accuracy: used.iter().map(|r| r.accuracy).sum::<f64>() / m,
        sensitivity: mean_of(used.iter().filter_map(|r| r.sensitivity).collect()),
        specificity: mean_of(used.iter().filter_map(|r| r.specificity).collect()),
        auc: mean_of(used.iter().filter_map(|r| r.auc).collect()),
    };
    Ok(CvReport {
        target: target.into(),
        k: opts.k,
        seed: opts.seed,
        folds: fold_reports,
        mean,
        roc: roc_points(&all_scores, &all_labels),
        pooled_auc: roc_auc(&all_scores, &all_labels).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Variable;
    use crate::graph::Dag;

    #[test]
    fn confusion_example() {
        let s = [0.9, 0.1, 0.6, 0.2];
        let y = [true, false, true, false];
        let r = PredictionReport::from_scores(&s, &y, 0.5);
        assert_eq!((r.confusion.tp, r.confusion.tn), (2, 2));
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.proportions.iter().sum::<f64>(), 1.0);
        let all_pos = PredictionReport::from_scores(&s, &y, 0.0);
        assert_eq!(all_pos.specificity, Some(0.0));
        let all_neg = PredictionReport::from_scores(&s, &y, 1.0);
        assert_eq!(all_neg.sensitivity, Some(0.0));
    }

    #[test]
    fn auc_examples() {
        let y = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 4], &y).unwrap(), 0.5);
        assert!(roc_auc(&[0.5, 0.6], &[true, true]).is_err());
        // area under the step curve agrees
        let s = [0.3, 0.7, 0.7, 0.1, 0.9, 0.4];
        let l = [false, true, false, false, true, true];
        let pts = roc_points(&s, &l);
        let area: f64 = pts.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
        assert!((area - roc_auc(&s, &l).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn prevalence_threshold() {
        let vars = vec![Variable::new("S", &["0", "1"])];
        let col: Vec<u16> = (0..10_000).map(|i| u16::from(i < 356)).collect();
        let d = CategoricalDataset::from_columns(vars.clone(), vec![col]).unwrap();
        let t = threshold_from_prevalence(&d, "S", None).unwrap();
        assert!((t.value - 0.0356).abs() < 1e-12 && !t.degenerate);
        let swapped = threshold_from_prevalence(&d, "S", Some("0")).unwrap();
        assert!((t.value - (1.0 - swapped.value)).abs() < 1e-12);
        let none = CategoricalDataset::from_columns(vars, vec![vec![0; 10]]).unwrap();
        let z = threshold_from_prevalence(&none, "S", None).unwrap();
        assert!(z.value == 0.0 && z.degenerate);
    }

    #[test]
    fn structure_report_rows() {
        let vars: Vec<Variable> = ["A", "B", "C"].iter().map(|&n| Variable::new(n, &["0", "1"])).collect();
        let cols: Vec<Vec<u16>> = (0..3).map(|j| (0..40).map(|i| ((i * (j + 1) / 3) % 2) as u16).collect()).collect();
        let d = CategoricalDataset::from_columns(vars, cols).unwrap();
        let reference = Dag::from_edges(["A", "B", "C"], &[("A", "B"), ("B", "C")]).unwrap();
        let empty = reference.empty_like();
        let rows = structure_report(&[("ref".into(), reference.clone()), ("empty".into(), empty)], &reference, &d).unwrap();
        assert_eq!(rows[0].shd, 0);
        assert_eq!(rows[0].fragments, 1);
        assert_eq!(rows[1].shd, 2);
        assert_eq!(rows[1].fragments, 3);
        assert!((rows[0].bic - crate::scoring::bic(&reference, &d).unwrap()).abs() < 1e-9);
        assert!(structure_report_csv(&rows).starts_with("structure,shd,fragments,free_parameters,edges,bic,log_likelihood\n"));
    }
}
