//! Probabilistic benchmarks: success probabilities from the copula, success
//! labels, RVM probability surfaces with isolines, and the covariate screen.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{linspace, Grid, Isoline};
use crate::copula::ClaytonCopula;
use crate::dataset::KpiDataset;
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsReport, MetricsRow};
use crate::rng;
use crate::rvm::{median_distance, KernelSpec, RvmFitConfig, RvmModel};

/// Probability that at least one KPI falls at or below its threshold,
/// `u₁ + u₂ − C(u₁, u₂)`, where `u` are the marginal CDF values of the
/// thresholds.
pub fn success_probability(copula: &ClaytonCopula, u: [f64; 2]) -> Result<f64> {
    if copula.dimension() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: copula.dimension(),
        });
    }
    let c = copula.cdf(&u)?;
    Ok((u[0] + u[1] - c).clamp(0.0, 1.0))
}

/// Monte Carlo estimate and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn bernoulli_estimate(hits: usize, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate {
        value: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        samples: n,
    }
}

fn check_unit(u: &[f64], d: usize) -> Result<()> {
    if u.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u.len(),
        });
    }
    if let Some(bad) = u.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(Error::Domain(format!("threshold level {bad} outside [0, 1]")));
    }
    Ok(())
}

/// `P(U ≤ u)` in any dimension by sampling the copula.
pub fn monte_carlo_cdf(copula: &ClaytonCopula, u: &[f64], n: usize, seed: u64) -> Result<Estimate> {
    check_unit(u, copula.dimension())?;
    if n == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs n >= 1".into()));
    }
    let hits = copula
        .sample_rows(n, seed)
        .iter()
        .filter(|row| row.iter().zip(u).all(|(x, t)| x <= t))
        .count();
    Ok(bernoulli_estimate(hits, n))
}

/// `P(U₁ ≤ u₁ or … or U_d ≤ u_d)` by sampling the copula.
pub fn monte_carlo_success(copula: &ClaytonCopula, u: &[f64], n: usize, seed: u64) -> Result<Estimate> {
    check_unit(u, copula.dimension())?;
    if n == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs n >= 1".into()));
    }
    let hits = copula
        .sample_rows(n, seed)
        .iter()
        .filter(|row| row.iter().zip(u).any(|(x, t)| x <= t))
        .count();
    Ok(bernoulli_estimate(hits, n))
}

/// Linearly interpolated empirical quantile of the finite values.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("quantile level {q} outside [0, 1]")));
    }
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkThreshold {
    /// Thresholds in KPI units.
    pub tau: Vec<f64>,
    /// Quantile levels the thresholds were derived from, when they were.
    pub tau_quantiles: Vec<f64>,
}

impl BenchmarkThreshold {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("thresholds must be finite".into()));
        }
        Ok(Self {
            tau,
            tau_quantiles: Vec::new(),
        })
    }

    /// Empirical quantiles of each KPI column.
    pub fn from_quantiles(data: &KpiDataset, quantiles: &[f64]) -> Result<Self> {
        if quantiles.len() != data.kpi_names().len() {
            return Err(Error::DimensionMismatch {
                expected: data.kpi_names().len(),
                got: quantiles.len(),
            });
        }
        if let Some(q) = quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "quantile level {q} must lie in (0, 1)"
            )));
        }
        let tau = quantiles
            .iter()
            .enumerate()
            .map(|(c, &q)| quantile(&data.kpi_column(c), q))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            tau,
            tau_quantiles: quantiles.to_vec(),
        })
    }

    pub fn describe(&self, kpi_names: &[String]) -> String {
        let parts: Vec<String> = kpi_names
            .iter()
            .zip(&self.tau)
            .enumerate()
            .map(|(c, (name, t))| match self.tau_quantiles.get(c) {
                Some(q) => format!("{name} >= {t} (quantile {q})"),
                None => format!("{name} >= {t}"),
            })
            .collect();
        parts.join(" and ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<bool>,
    pub positives: usize,
    pub rule: String,
    /// Set when every unit received the same label.
    pub warning: Option<String>,
}

/// A unit succeeds when every KPI is at or above its threshold.
pub fn label_units(data: &KpiDataset, threshold: &BenchmarkThreshold) -> Result<Labeling> {
    let d = data.kpi_names().len();
    if threshold.tau.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: threshold.tau.len(),
        });
    }
    let labels: Vec<bool> = data
        .kpis()
        .iter()
        .map(|row| row.iter().zip(&threshold.tau).all(|(y, t)| y >= t))
        .collect();
    let positives = labels.iter().filter(|l| **l).count();
    let warning = if positives == 0 {
        Some("no unit reaches the benchmark; every label is false".to_string())
    } else if positives == labels.len() {
        Some("every unit reaches the benchmark; every label is true".to_string())
    } else {
        None
    };
    Ok(Labeling {
        labels,
        positives,
        rule: threshold.describe(data.kpi_names()),
        warning,
    })
}

/// Per-feature centring and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        let n = rows.len().max(1) as f64;
        let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scales = (0..p)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, scales }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSettings {
    /// RBF width on standardized inputs; `None` uses the median distance.
    pub kernel_width: Option<f64>,
    /// Training rows are subsampled to at most this many.
    pub max_rows: usize,
    pub fit: RvmFitConfig,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            kernel_width: None,
            max_rows: 300,
            fit: RvmFitConfig::default(),
        }
    }
}

/// An RVM classifier on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedClassifier {
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    /// Per-feature training range, used to flag extrapolation.
    pub support: Vec<(f64, f64)>,
    pub model: RvmModel,
}

impl StandardizedClassifier {
    /// Fits on at most `settings.max_rows` rows drawn without replacement.
    pub fn fit(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: &[bool],
        settings: &ClassifierSettings,
        seed: u64,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: rows.len(),
            });
        }
        if settings.max_rows < 2 {
            return Err(Error::InvalidParameter("max_rows must be >= 2".into()));
        }
        let picked: Vec<usize> = if rows.len() > settings.max_rows {
            let mut idx = rand::seq::index::sample(&mut rng::rng(seed), rows.len(), settings.max_rows).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..rows.len()).collect()
        };
        let train: Vec<Vec<f64>> = picked.iter().map(|&i| rows[i].clone()).collect();
        let y: Vec<bool> = picked.iter().map(|&i| labels[i]).collect();
        let standardizer = Standardizer::fit(&train);
        let z: Vec<Vec<f64>> = train.iter().map(|r| standardizer.apply(r)).collect();
        let width = match settings.kernel_width {
            Some(w) => w,
            None => median_distance(&z),
        };
        let p = feature_names.len();
        let support = (0..p)
            .map(|j| {
                rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                })
            })
            .collect();
        let model = RvmModel::classifier(&z, &y, KernelSpec::rbf(width)?, &settings.fit)?;
        Ok(Self {
            feature_names,
            standardizer,
            support,
            model,
        })
    }

    pub fn probability(&self, row: &[f64]) -> Result<f64> {
        Ok(self.model.predict_one(&self.standardizer.apply(row))?.score())
    }
}

/// Lattice over the two KPIs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y1: (f64, f64),
    pub y2: (f64, f64),
    pub points: usize,
}

impl GridSpec {
    /// Spans the observed range of both KPIs.
    pub fn from_data(data: &KpiDataset, points: usize) -> Self {
        let range = |c: usize| {
            data.kpi_column(c)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        };
        Self {
            y1: range(0),
            y2: range(1),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSurface {
    /// Covariates held fixed while the KPIs vary.
    pub conditioning: Vec<(String, f64)>,
    /// Probability on the grid, made non-decreasing along both axes.
    pub grid: Grid,
    /// Classifier output before the monotone envelope.
    pub raw_probability: Vec<Vec<f64>>,
    pub levels: Vec<f64>,
    pub isolines: Vec<Isoline>,
    /// Set when the grid or conditioning leaves the training support.
    pub extrapolated: bool,
}

/// Running maximum along both grid axes: the smallest surface above the
/// input that never decreases as either KPI grows.
pub fn monotone_envelope(values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = values.to_vec();
    for row in out.iter_mut() {
        for i in 1..row.len() {
            row[i] = row[i].max(row[i - 1]);
        }
    }
    for j in 1..out.len() {
        for i in 0..out[j].len() {
            out[j][i] = out[j][i].max(out[j - 1][i]);
        }
    }
    out
}

/// Success probability over the KPI lattice with the other features held at
/// `conditioning`. The classifier's first two features must be the KPIs.
pub fn probability_surface(
    model: &StandardizedClassifier,
    grid: &GridSpec,
    conditioning: &[(String, f64)],
    levels: &[f64],
) -> Result<BenchmarkSurface> {
    if grid.points < 2 {
        return Err(Error::InvalidParameter(
            "surface grid needs >= 2 points per axis".into(),
        ));
    }
    let p = model.feature_names.len();
    if p < 2 || conditioning.len() != p - 2 {
        return Err(Error::DimensionMismatch {
            expected: p.saturating_sub(2),
            got: conditioning.len(),
        });
    }
    for ((name, _), expected) in conditioning.iter().zip(&model.feature_names[2..]) {
        if name != expected {
            return Err(Error::InvalidParameter(format!(
                "conditioning on {name}, but the model expects {expected}"
            )));
        }
    }
    let xs = linspace(grid.y1.0, grid.y1.1, grid.points);
    let ys = linspace(grid.y2.0, grid.y2.1, grid.points);
    let fixed: Vec<f64> = conditioning.iter().map(|(_, v)| *v).collect();
    let raw: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y2| {
            xs.iter()
                .map(|&y1| {
                    let mut row = vec![y1, y2];
                    row.extend_from_slice(&fixed);
                    model.probability(&row)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let outside = |j: usize, lo: f64, hi: f64| {
        let (a, b) = model.support[j];
        lo < a || hi > b
    };
    let extrapolated = outside(0, grid.y1.0, grid.y1.1)
        || outside(1, grid.y2.0, grid.y2.1)
        || fixed.iter().enumerate().any(|(k, &v)| outside(k + 2, v, v));
    let surface = Grid::new(xs, ys, monotone_envelope(&raw))?;
    let isolines = surface.isolines(levels);
    Ok(BenchmarkSurface {
        conditioning: conditioning.to_vec(),
        grid: surface,
        raw_probability: raw,
        levels: levels.to_vec(),
        isolines,
        extrapolated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    /// Cross-validation folds; 0 or 1 scores in sample.
    pub folds: usize,
    pub star_threshold: f64,
    pub decision_threshold: f64,
    pub classifier: ClassifierSettings,
    pub seed: u64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            star_threshold: 0.75,
            decision_threshold: 0.5,
            classifier: ClassifierSettings {
                max_rows: 60,
                ..ClassifierSettings::default()
            },
            seed: 0,
        }
    }
}

impl ScreenConfig {
    pub fn evaluation(&self) -> String {
        if self.folds > 1 {
            format!("{}-fold cross-validation", self.folds)
        } else {
            "in-sample".into()
        }
    }
}

fn screen_one(name: &str, values: &[f64], labels: &[bool], config: &ScreenConfig, seed: u64) -> Result<MetricsRow> {
    let rows: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|&i| vec![values[i]]).collect();
    let y: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
    let names = vec![name.to_string()];
    let scores: Vec<f64> = if config.folds > 1 {
        if x.len() < config.folds {
            return Err(Error::TooFewRows(x.len()));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.shuffle(&mut rng::rng(rng::derive_seed(seed, "folds")));
        let mut fold_of = vec![0; x.len()];
        for (rank, &i) in order.iter().enumerate() {
            fold_of[i] = rank % config.folds;
        }
        let mut scores = vec![f64::NAN; x.len()];
        for fold in 0..config.folds {
            let train: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] != fold).collect();
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let model = StandardizedClassifier::fit(
                names.clone(),
                &tx,
                &ty,
                &config.classifier,
                rng::indexed_seed(seed, fold as u64),
            )?;
            for i in (0..x.len()).filter(|&i| fold_of[i] == fold) {
                scores[i] = model.probability(&x[i])?;
            }
        }
        scores
    } else {
        let model = StandardizedClassifier::fit(names, &x, &y, &config.classifier, seed)?;
        x.iter().map(|r| model.probability(r)).collect::<Result<_>>()?
    };
    let mut row = compute_metrics(&scores, &y, config.decision_threshold)?;
    row.covariate = name.to_string();
    row.starred = row.auc >= config.star_threshold;
    Ok(row)
}

/// One single-covariate classifier and metric row per covariate. Failures
/// are reported in the row instead of aborting the screen.
pub fn covariate_screen(data: &KpiDataset, labels: &[bool], config: &ScreenConfig) -> Result<MetricsReport> {
    if data.covariate_names().is_empty() {
        return Err(Error::InvalidParameter(
            "covariate screen needs at least one covariate".into(),
        ));
    }
    if labels.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: labels.len(),
        });
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let rows: Vec<MetricsRow> = data
        .covariate_names()
        .par_iter()
        .enumerate()
        .map(|(c, name)| {
            let seed = rng::indexed_seed(config.seed, c as u64);
            screen_one(name, &data.covariate_column(c), labels, config, seed).unwrap_or_else(|e| MetricsRow {
                covariate: name.clone(),
                auc: f64::NAN,
                gini: f64::NAN,
                balanced_accuracy: f64::NAN,
                precision: f64::NAN,
                fdr: f64::NAN,
                starred: false,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(MetricsReport {
        rows,
        labeling_rule: String::new(),
        evaluation: config.evaluation(),
        decision_threshold: config.decision_threshold,
        star_threshold: config.star_threshold,
    })
}
