//! KPI datasets: CSV loading and saving, rank transforms, descriptive
//! statistics and a seeded synthetic generator.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::copula::ClaytonCopula;
use crate::error::{Error, Result};
use crate::rng;

const MISSING_TOKENS: &[&str] = &["", "NA", "N/A", "NaN", "nan", "null", "NULL"];

/// Units with KPI values and covariates. Missing covariates are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiDataset {
    units: Vec<String>,
    kpi_names: Vec<String>,
    kpis: Vec<Vec<f64>>,
    covariate_names: Vec<String>,
    covariates: Vec<Vec<f64>>,
    categorical: Vec<bool>,
}

impl KpiDataset {
    pub fn new(
        units: Vec<String>,
        kpi_names: Vec<String>,
        kpis: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
        categorical: Vec<bool>,
    ) -> Result<Self> {
        let n = kpis.len();
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        if kpi_names.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 KPI columns, got {}",
                kpi_names.len()
            )));
        }
        if units.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: units.len(),
            });
        }
        if covariates.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariates.len(),
            });
        }
        if categorical.len() != covariate_names.len() {
            return Err(Error::DimensionMismatch {
                expected: covariate_names.len(),
                got: categorical.len(),
            });
        }
        for row in &kpis {
            if row.len() != kpi_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: kpi_names.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("KPI values must be finite".into()));
            }
        }
        for row in &covariates {
            if row.len() != covariate_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: covariate_names.len(),
                    got: row.len(),
                });
            }
        }
        for (c, _) in categorical.iter().enumerate().filter(|(_, flag)| **flag) {
            for row in &covariates {
                let v = row[c];
                if !v.is_nan() && v != 0.0 && v != 1.0 {
                    return Err(Error::NotCategorical {
                        column: covariate_names[c].clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            units,
            kpi_names,
            kpis,
            covariate_names,
            covariates,
            categorical,
        })
    }

    pub fn len(&self) -> usize {
        self.kpis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kpis.is_empty()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn kpi_names(&self) -> &[String] {
        &self.kpi_names
    }

    pub fn kpis(&self) -> &[Vec<f64>] {
        &self.kpis
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn categorical_flags(&self) -> &[bool] {
        &self.categorical
    }

    pub fn kpi_column(&self, c: usize) -> Vec<f64> {
        self.kpis.iter().map(|row| row[c]).collect()
    }

    pub fn covariate_column(&self, c: usize) -> Vec<f64> {
        self.covariates.iter().map(|row| row[c]).collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// The first two KPIs as points in the plane.
    pub fn kpi_pairs(&self) -> Vec<[f64; 2]> {
        self.kpis.iter().map(|row| [row[0], row[1]]).collect()
    }

    /// Rows whose mask entry is true, in the original order.
    pub fn select(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: mask.len(),
            });
        }
        let pick = |i: &usize| mask[*i];
        let idx: Vec<usize> = (0..self.len()).filter(pick).collect();
        Self::new(
            idx.iter().map(|&i| self.units[i].clone()).collect(),
            self.kpi_names.clone(),
            idx.iter().map(|&i| self.kpis[i].clone()).collect(),
            self.covariate_names.clone(),
            idx.iter().map(|&i| self.covariates[i].clone()).collect(),
            self.categorical.clone(),
        )
    }
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub unit: Option<String>,
    pub kpis: Vec<String>,
    /// `None` takes every remaining column.
    pub covariates: Option<Vec<String>>,
    pub categorical: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            unit: Some("unit".into()),
            kpis: vec!["returns_on_savings".into(), "equity_per_member".into()],
            covariates: None,
            categorical: vec!["rural".into()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: KpiDataset,
    pub dropped_rows: usize,
}

fn parse_cell(raw: &str, column: &str, row: usize) -> Result<f64> {
    let trimmed = raw.trim();
    if MISSING_TOKENS.contains(&trimmed) {
        return Ok(f64::NAN);
    }
    trimmed.parse::<f64>().map_err(|_| Error::NonNumeric {
        column: column.to_string(),
        row,
        value: raw.to_string(),
    })
}

/// Reads a header-row CSV. Lines starting with `#` are skipped, and rows
/// with a missing KPI are dropped.
pub fn load_csv(path: &Path, mapping: &ColumnMapping) -> Result<LoadReport> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let find = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let unit_col = mapping.unit.as_deref().map(find).transpose()?;
    let kpi_cols = mapping.kpis.iter().map(|k| find(k)).collect::<Result<Vec<_>>>()?;
    let covariate_names: Vec<String> = match &mapping.covariates {
        Some(names) => names.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != unit_col && !kpi_cols.contains(i))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_cols = covariate_names.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    for name in &mapping.categorical {
        if !covariate_names.contains(name) && mapping.covariates.is_some() {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let categorical: Vec<bool> = covariate_names
        .iter()
        .map(|c| mapping.categorical.contains(c))
        .collect();

    let mut units = Vec::new();
    let mut kpis = Vec::new();
    let mut covariates = Vec::new();
    let mut dropped = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 2;
        let kpi_row = kpi_cols
            .iter()
            .zip(&mapping.kpis)
            .map(|(&c, name)| parse_cell(record.get(c).unwrap_or(""), name, row_no))
            .collect::<Result<Vec<f64>>>()?;
        let cov_row = cov_cols
            .iter()
            .zip(&covariate_names)
            .map(|(&c, name)| parse_cell(record.get(c).unwrap_or(""), name, row_no))
            .collect::<Result<Vec<f64>>>()?;
        if kpi_row.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        units.push(match unit_col {
            Some(c) => record.get(c).unwrap_or("").to_string(),
            None => format!("row_{row_no}"),
        });
        kpis.push(kpi_row);
        covariates.push(cov_row);
    }
    if kpis.len() < 2 {
        return Err(Error::TooFewRows(kpis.len()));
    }
    let dataset = KpiDataset::new(
        units,
        mapping.kpis.clone(),
        kpis,
        covariate_names,
        covariates,
        categorical,
    )?;
    Ok(LoadReport {
        dataset,
        dropped_rows: dropped,
    })
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes `unit, <kpis>, <covariates>` with shortest round-trip decimals.
pub fn save_csv(data: &KpiDataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["unit".to_string()];
    header.extend(data.kpi_names.iter().cloned());
    header.extend(data.covariate_names.iter().cloned());
    writer.write_record(&header)?;
    for i in 0..data.len() {
        let mut record = vec![data.units[i].clone()];
        record.extend(data.kpis[i].iter().map(|&v| format_value(v)));
        record.extend(data.covariates[i].iter().map(|&v| format_value(v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

impl ColumnMapping {
    /// Mapping that reads back a file written by [`save_csv`].
    pub fn for_dataset(data: &KpiDataset) -> Self {
        Self {
            unit: Some("unit".into()),
            kpis: data.kpi_names.clone(),
            covariates: Some(data.covariate_names.clone()),
            categorical: data
                .covariate_names
                .iter()
                .zip(&data.categorical)
                .filter(|(_, flag)| **flag)
                .map(|(n, _)| n.clone())
                .collect(),
        }
    }
}

/// Rank transform `rank / (N + 1)` with mid-ranks for ties.
pub fn rank_transform(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their average
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = mid_rank / (n as f64 + 1.0);
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservations {
    /// Row-major `N × j`.
    pub u: Vec<Vec<f64>>,
    pub source_rank_method: String,
}

impl PseudoObservations {
    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.u.iter().map(|row| [row[0], row[1]]).collect()
    }
}

pub fn pseudo_observations(data: &KpiDataset) -> PseudoObservations {
    let columns: Vec<Vec<f64>> = (0..data.kpi_names.len())
        .map(|c| rank_transform(&data.kpi_column(c)))
        .collect();
    let u = (0..data.len())
        .map(|i| columns.iter().map(|col| col[i]).collect())
        .collect();
    PseudoObservations {
        u,
        source_rank_method: "rank/(N+1), mid-ranks for ties".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub variable: String,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub variables: Vec<VariableStats>,
}

/// Mean, sample standard deviation, min and max of the non-missing values.
pub fn summarize(name: &str, values: &[f64]) -> VariableStats {
    let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let n = present.len();
    if n == 0 {
        return VariableStats {
            variable: name.to_string(),
            n,
            mean: f64::NAN,
            std_dev: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
        };
    }
    let mean = present.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        (present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let min = present.iter().copied().fold(f64::INFINITY, f64::min);
    let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    VariableStats {
        variable: name.to_string(),
        n,
        mean: mean.clamp(min, max),
        std_dev,
        min,
        max,
    }
}

pub fn descriptive_stats(data: &KpiDataset) -> DescriptiveStats {
    let mut variables: Vec<VariableStats> = data
        .kpi_names
        .iter()
        .enumerate()
        .map(|(c, name)| summarize(name, &data.kpi_column(c)))
        .collect();
    variables.extend(
        data.covariate_names
            .iter()
            .enumerate()
            .map(|(c, name)| summarize(name, &data.covariate_column(c))),
    );
    DescriptiveStats { variables }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBox {
    pub y1: (f64, f64),
    pub y2: (f64, f64),
}

impl Default for NoiseBox {
    fn default() -> Self {
        Self {
            y1: (0.0, 200.0),
            y2: (0.0, 270.0),
        }
    }
}

impl NoiseBox {
    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.y1, self.y2] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "noise box side ({lo}, {hi}) must be finite with lo < hi"
                )));
            }
        }
        Ok(())
    }
}

/// Settings for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub theta: f64,
    pub noise_fraction: f64,
    pub noise_box: NoiseBox,
    /// Means of the exponential marginals of the two KPIs.
    pub marginal_means: [f64; 2],
    pub informative_covariates: usize,
    pub noise_covariates: usize,
    /// Adds a 0/1 `rural` column; rural units have a smaller second KPI.
    pub rural: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            theta: 4.0,
            noise_fraction: 0.2,
            noise_box: NoiseBox::default(),
            marginal_means: [48.63, 40.41],
            informative_covariates: 0,
            noise_covariates: 0,
            rural: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: KpiDataset,
    /// Ground truth: rows drawn from the uniform noise box.
    pub is_noise: Vec<bool>,
}

const RURAL_SHARE: f64 = 0.43;
const RURAL_EQUITY_FACTOR: f64 = 0.7;
const INFORMATIVE_NOISE_SD: f64 = 0.1;

/// Mixture of a Clayton copula (exponential marginals) and uniform box noise.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    if config.n < 10 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs n >= 10, got {}",
            config.n
        )));
    }
    if !(0.0..1.0).contains(&config.noise_fraction) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction must lie in [0, 1), got {}",
            config.noise_fraction
        )));
    }
    config.noise_box.validate()?;
    if config.marginal_means.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidParameter("marginal means must be positive".into()));
    }
    let copula = ClaytonCopula::bivariate(config.theta)?;

    let n_noise = (config.noise_fraction * config.n as f64).round() as usize;
    let n_clean = config.n - n_noise;
    let clean = copula.sample(n_clean, rng::derive_seed(config.seed, "synthetic/copula"));
    let mut rng = rng::rng(rng::derive_seed(config.seed, "synthetic/rows"));

    let [m1, m2] = config.marginal_means;
    let quantile = |u: f64, mean: f64| -mean * (-u).ln_1p();
    let cdf = |y: f64, mean: f64| {
        if y <= 0.0 {
            0.0
        } else {
            -(-y / mean).exp_m1()
        }
    };

    struct Row {
        kpis: [f64; 2],
        latent: [f64; 2],
        rural: f64,
        noise: bool,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(config.n);
    for u in clean {
        let rural = if config.rural && rng.random::<f64>() < RURAL_SHARE {
            1.0
        } else {
            0.0
        };
        let equity_scale = if rural == 1.0 { RURAL_EQUITY_FACTOR } else { 1.0 };
        rows.push(Row {
            kpis: [quantile(u[0], m1), quantile(u[1], m2) * equity_scale],
            latent: u,
            rural,
            noise: false,
        });
    }
    let b = config.noise_box;
    for _ in 0..n_noise {
        let y1 = rng.random_range(b.y1.0..b.y1.1);
        let y2 = rng.random_range(b.y2.0..b.y2.1);
        let rural = if config.rural && rng.random::<f64>() < RURAL_SHARE {
            1.0
        } else {
            0.0
        };
        rows.push(Row {
            kpis: [y1, y2],
            latent: [cdf(y1, m1), cdf(y2, m2)],
            rural,
            noise: true,
        });
    }
    rows.shuffle(&mut rng);

    let mut covariate_names = Vec::new();
    for i in 0..config.informative_covariates {
        covariate_names.push(format!("informative_{}", i + 1));
    }
    for i in 0..config.noise_covariates {
        covariate_names.push(format!("noise_{}", i + 1));
    }
    if config.rural {
        covariate_names.push("rural".into());
    }
    let mut categorical = vec![false; covariate_names.len()];
    if config.rural {
        *categorical.last_mut().expect("rural column present") = true;
    }

    let jitter = Normal::new(0.0, INFORMATIVE_NOISE_SD).expect("positive sd");
    let standard = Normal::new(0.0, 1.0).expect("positive sd");
    let mut covariates = Vec::with_capacity(rows.len());
    for row in &rows {
        let signal = row.latent[0].min(row.latent[1]);
        let mut values = Vec::with_capacity(covariate_names.len());
        for i in 0..config.informative_covariates {
            // distinct affine maps so the columns are not copies of each other
            let scale = 1.0 + i as f64;
            values.push(scale * (signal + jitter.sample(&mut rng)) + i as f64);
        }
        for _ in 0..config.noise_covariates {
            values.push(standard.sample(&mut rng));
        }
        if config.rural {
            values.push(row.rural);
        }
        covariates.push(values);
    }

    let width = config.n.to_string().len();
    let dataset = KpiDataset::new(
        (1..=rows.len()).map(|i| format!("unit_{i:0width$}")).collect(),
        vec!["returns_on_savings".into(), "equity_per_member".into()],
        rows.iter().map(|r| r.kpis.to_vec()).collect(),
        covariate_names,
        covariates,
        categorical,
    )?;
    Ok(SyntheticData {
        dataset,
        is_noise: rows.iter().map(|r| r.noise).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::kendall_tau_pairwise;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            unit: Some("id".into()),
            kpis: vec!["ros".into(), "epm".into()],
            covariates: Some(vec!["rural".into()]),
            categorical: vec!["rural".into()],
        }
    }

    #[test]
    fn drops_rows_with_missing_kpi() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "a.csv", "id,ros,epm,rural\na,1.5,2,0\nb,3,,1\nc,4,5.25,1\n");
        let report = load_csv(&path, &mapping()).unwrap();
        assert_eq!(report.dataset.len(), 2);
        assert_eq!(report.dropped_rows, 1);
        assert_eq!(report.dataset.units(), &["a".to_string(), "c".to_string()]);
        assert_eq!(report.dataset.kpis()[1], vec![4.0, 5.25]);
    }

    #[test]
    fn keeps_missing_covariates_as_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "a.csv", "id,ros,epm,rural\na,1,2,NA\nb,3,4,1\n");
        let data = load_csv(&path, &mapping()).unwrap().dataset;
        assert!(data.covariates()[0][0].is_nan());
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(load_csv(&missing, &mapping()), Err(Error::MissingFile(_))));

        let one_row = write_file(&dir, "b.csv", "id,ros,epm,rural\na,1,2,0\nb,,3,1\n");
        assert!(matches!(load_csv(&one_row, &mapping()), Err(Error::TooFewRows(1))));

        let no_col = write_file(&dir, "c.csv", "id,ros,rural\na,1,0\nb,2,1\n");
        assert!(matches!(load_csv(&no_col, &mapping()), Err(Error::MissingColumn(c)) if c == "epm"));

        let text = write_file(&dir, "d.csv", "id,ros,epm,rural\na,1,abc,0\nb,2,3,1\n");
        assert!(matches!(load_csv(&text, &mapping()), Err(Error::NonNumeric { .. })));

        let bad_cat = write_file(&dir, "e.csv", "id,ros,epm,rural\na,1,2,0.5\nb,2,3,1\n");
        assert!(matches!(
            load_csv(&bad_cat, &mapping()),
            Err(Error::NotCategorical { .. })
        ));
    }

    #[test]
    fn covariates_default_to_remaining_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "a.csv", "id,ros,x,epm,rural\na,1,9,2,0\nb,3,8,4,1\n");
        let m = ColumnMapping {
            covariates: None,
            ..mapping()
        };
        let data = load_csv(&path, &m).unwrap().dataset;
        assert_eq!(data.covariate_names(), &["x".to_string(), "rural".to_string()]);
        assert_eq!(data.categorical_flags(), &[false, true]);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_transform(&[10.0, 20.0, 30.0]), vec![0.25, 0.5, 0.75]);
        assert_eq!(rank_transform(&[5.0, 5.0]), vec![0.5, 0.5]);
        let column: Vec<f64> = (0..99).map(|i| (i as f64).sin() * 100.0 + i as f64).collect();
        let u = rank_transform(&column);
        let lo = u.iter().copied().fold(1.0, f64::min);
        let hi = u.iter().copied().fold(0.0, f64::max);
        assert!((lo - 0.01).abs() < 1e-15);
        assert!((hi - 0.99).abs() < 1e-15);
    }

    #[test]
    fn stats_examples() {
        let s = summarize("x", &[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std_dev, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
        assert_eq!(summarize("c", &[4.0, 4.0, 4.0]).std_dev, 0.0);
        let with_gap = summarize("g", &[1.0, f64::NAN, 3.0]);
        assert_eq!(with_gap.n, 2);
        assert_eq!(with_gap.mean, 2.0);
    }

    #[test]
    fn synthetic_without_noise() {
        let cfg = SyntheticConfig {
            n: 1000,
            noise_fraction: 0.0,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        assert_eq!(data.dataset.len(), 1000);
        assert!(data.is_noise.iter().all(|n| !n));
    }

    #[test]
    fn synthetic_rejects_bad_settings() {
        let full = SyntheticConfig {
            noise_fraction: 1.0,
            ..Default::default()
        };
        assert!(generate_synthetic(&full).is_err());
        let tiny = SyntheticConfig {
            n: 9,
            ..Default::default()
        };
        assert!(generate_synthetic(&tiny).is_err());
        let bad_box = SyntheticConfig {
            noise_box: NoiseBox {
                y1: (5.0, 1.0),
                y2: (0.0, 1.0),
            },
            ..Default::default()
        };
        assert!(generate_synthetic(&bad_box).is_err());
    }

    #[test]
    fn synthetic_is_seeded() {
        let cfg = SyntheticConfig {
            n: 300,
            informative_covariates: 2,
            noise_covariates: 2,
            rural: true,
            seed: 9,
            ..Default::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.is_noise, b.is_noise);
        let c = generate_synthetic(&SyntheticConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn noise_lowers_kendall_tau() {
        let cfg = SyntheticConfig {
            n: 10_000,
            theta: 4.0,
            noise_fraction: 0.2,
            seed: 1,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let points = data.dataset.kpi_pairs();
        let clean: Vec<[f64; 2]> = points
            .iter()
            .zip(&data.is_noise)
            .filter(|(_, n)| !**n)
            .map(|(p, _)| *p)
            .collect();
        let raw = kendall_tau_pairwise(&points).unwrap().tau;
        let truth = kendall_tau_pairwise(&clean).unwrap().tau;
        assert!(raw < truth, "raw {raw} clean {truth}");
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let cfg = SyntheticConfig {
            n: 50,
            informative_covariates: 1,
            noise_covariates: 1,
            rural: true,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg).unwrap().dataset;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        save_csv(&data, &path).unwrap();
        let back = load_csv(&path, &ColumnMapping::for_dataset(&data)).unwrap();
        assert_eq!(back.dropped_rows, 0);
        assert_eq!(back.dataset, data);
    }

    proptest! {
        #[test]
        fn ranks_are_monotone_and_transform_invariant(
            values in prop::collection::vec(-1e3f64..1e3, 2..200)
        ) {
            let u = rank_transform(&values);
            for i in 0..values.len() {
                prop_assert!(u[i] > 0.0 && u[i] < 1.0);
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(u[i] < u[j]);
                    }
                }
            }
            let warped: Vec<f64> = values.iter().map(|v| (v / 100.0).exp() * 2.0 - 7.0).collect();
            prop_assert_eq!(rank_transform(&warped), u);
        }
    }
}
