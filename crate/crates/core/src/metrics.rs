//! Multi-label evaluation: ROC-AUC and average precision, macro-averaged
//! over tags.
//!
//! Ties are handled deterministically: ROC-AUC credits tied
//! positive/negative pairs with one half, and average precision groups
//! equal scores into a single threshold.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RocAuc,
    PrAuc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::RocAuc => "roc_auc",
            Metric::PrAuc => "pr_auc",
        }
    }

    pub fn compute(self, scores: &[f64], labels: &[bool]) -> Result<f64> {
        match self {
            Metric::RocAuc => roc_auc(scores, labels),
            Metric::PrAuc => pr_auc(scores, labels),
        }
    }
}

/// Indices sorted by descending score, grouped into runs of equal scores.
fn descending_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            block: "scores".into(),
            index: i,
        });
    }
    Ok(())
}

/// Probability that a random positive outranks a random negative.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC-AUC needs both classes ({n_pos} positives, {n_neg} negatives)"
        )));
    }
    // doubled credit keeps the numerator integral
    let mut credit2: u64 = 0;
    let mut neg_below: u64 = n_neg;
    for group in descending_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i]).count() as u64;
        let neg = group.len() as u64 - pos;
        neg_below -= neg;
        credit2 += pos * (2 * neg_below + neg);
    }
    Ok(credit2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Average precision over a descending-score sweep.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("PR-AUC needs at least one positive".into()));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for group in descending_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i]).count();
        tp += pos;
        fp += group.len() - pos;
        if pos == 0 {
            continue;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_pos as f64;
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Scores and binary labels for `N` examples and `C` tags, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    scores: Vec<f64>,
    labels: Vec<bool>,
    class_names: Vec<String>,
}

impl PredictionTable {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>, class_names: Vec<String>) -> Result<Self> {
        let c = class_names.len();
        if c == 0 {
            return Err(Error::Shape("no classes".into()));
        }
        if scores.len() != labels.len() || !scores.len().is_multiple_of(c) {
            return Err(Error::Shape(format!(
                "{} scores and {} labels do not form N x {c} tables",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !(s.is_finite() && (0.0..=1.0).contains(s))) {
            return Err(Error::Shape(format!(
                "score {} at row {}, column {} is outside [0, 1]",
                scores[i],
                i / c,
                i % c
            )));
        }
        Ok(Self {
            scores,
            labels,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.scores.len() / self.class_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn column(&self, c: usize) -> (Vec<f64>, Vec<bool>) {
        let n = self.n_classes();
        let scores = self.scores.iter().skip(c).step_by(n).copied().collect();
        let labels = self.labels.iter().skip(c).step_by(n).copied().collect();
        (scores, labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroAverage {
    pub overall: f64,
    /// One entry per class in table order; `None` when undefined for that tag.
    pub per_class: Vec<Option<f64>>,
}

impl MacroAverage {
    pub fn undefined_classes(&self) -> Vec<usize> {
        self.per_class
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.is_none().then_some(i))
            .collect()
    }
}

/// Unweighted mean of `metric` over the classes where it is defined.
pub fn macro_average(table: &PredictionTable, metric: Metric) -> Result<MacroAverage> {
    let mut per_class = Vec::with_capacity(table.n_classes());
    for c in 0..table.n_classes() {
        let (scores, labels) = table.column(c);
        per_class.push(match metric.compute(&scores, &labels) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        });
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "{} undefined for every class",
            metric.name()
        )));
    }
    let overall = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(MacroAverage { overall, per_class })
}
