//! Classifier metrics in the layout of a covariate table: AUC, Gini,
//! balanced accuracy, precision and false detection rate.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::rank_transform;
use crate::error::{Error, Result};

/// Area under the ROC curve by the Mann–Whitney rank statistic. Tied scores
/// share their mid-rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    // rank_transform returns mid-rank / (N + 1)
    let scale = (labels.len() + 1) as f64;
    let rank_sum: f64 = rank_transform(scores)
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l)
        .map(|(r, _)| r * scale)
        .sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok(((rank_sum - p * (p + 1.0) / 2.0) / (p * q)).clamp(0.0, 1.0))
}

pub fn gini(auc: f64) -> f64 {
    2.0 * auc - 1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Predicted positive when `score >= threshold`.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Self::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn balanced_accuracy(&self) -> f64 {
        let rate = |hit: usize, miss: usize| {
            if hit + miss == 0 {
                0.0
            } else {
                hit as f64 / (hit + miss) as f64
            }
        };
        0.5 * (rate(self.tp, self.fn_) + rate(self.tn, self.fp))
    }

    /// 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// 1 when nothing is predicted positive.
    pub fn fdr(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.fp as f64 / (self.tp + self.fp) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub covariate: String,
    pub auc: f64,
    pub gini: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub fdr: f64,
    pub starred: bool,
    /// Set when the covariate could not be fitted; metrics are then NaN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn compute_metrics(scores: &[f64], labels: &[bool], decision_threshold: f64) -> Result<MetricsRow> {
    let a = auc(scores, labels)?;
    let c = Confusion::at(scores, labels, decision_threshold);
    Ok(MetricsRow {
        covariate: String::new(),
        auc: a,
        gini: gini(a),
        balanced_accuracy: c.balanced_accuracy(),
        precision: c.precision(),
        fdr: c.fdr(),
        starred: false,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    /// How labels were produced, e.g. `both KPIs >= quantile 0.5`.
    pub labeling_rule: String,
    /// `in-sample` or `k-fold cross-validation (k = 5)`.
    pub evaluation: String,
    pub decision_threshold: f64,
    pub star_threshold: f64,
}

impl MetricsReport {
    pub fn starred(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.starred)
            .map(|r| r.covariate.as_str())
            .collect()
    }

    /// Columns: Covariate, AUC, Gini, Bacc, Prec, FDR, starred.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["Covariate", "AUC", "Gini", "Bacc", "Prec", "FDR", "starred"])?;
        for r in &self.rows {
            w.write_record([
                r.covariate.clone(),
                format!("{:.4}", r.auc),
                format!("{:.4}", r.gini),
                format!("{:.4}", r.balanced_accuracy),
                format!("{:.4}", r.precision),
                format!("{:.4}", r.fdr),
                if r.starred { "*".into() } else { String::new() },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
