//! Relevance vector machine: sparse Bayesian regression and binary
//! classification over kernel design matrices.
//!
//! Each weight `w_i` carries its own Gaussian prior precision `α_i`. The
//! hyperparameters are re-estimated from the posterior (`γ_i = 1 − α_i Σ_ii`,
//! `α_i ← γ_i / μ_i²`) and bases whose precision diverges are pruned, which
//! leaves a handful of relevant vectors.
//!
//! Regression re-estimation is guarded: when a fixed-point step would lower
//! the log evidence, the expectation-maximization step is taken instead, so
//! the evidence never decreases across iterations. Classification finds the
//! posterior mode by Newton (IRLS) steps and uses the Laplace approximation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EVIDENCE_SLACK: f64 = 1e-9;
const IRLS_MAX_STEPS: usize = 100;
const IRLS_MAX_HALVINGS: usize = 30;
const IRLS_GRADIENT_TOL: f64 = 1e-8;
const IRLS_DECREMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    Linear,
    GaussianRbf { width: f64 },
}

impl KernelSpec {
    pub fn rbf(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rbf width must be finite and > 0, got {width}"
            )));
        }
        Ok(Self::GaussianRbf { width })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Self::GaussianRbf { width } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Median pairwise Euclidean distance over at most 1000 evenly strided rows.
pub fn median_distance(inputs: &[Vec<f64>]) -> f64 {
    let stride = inputs.len().div_ceil(1000).max(1);
    let rows: Vec<&Vec<f64>> = inputs.iter().step_by(stride).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len() / 2);
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            d.push(a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let m = if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `n × (m + 1)` matrix with a leading bias column.
pub fn design_matrix(inputs: &[Vec<f64>], basis_points: &[Vec<f64>], kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    let p = inputs.first().or(basis_points.first()).map(Vec::len).unwrap_or(0);
    for row in inputs.iter().chain(basis_points) {
        if row.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: row.len(),
            });
        }
    }
    let n = inputs.len();
    let m = basis_points.len();
    Ok(DMatrix::from_fn(n, m + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            kernel.eval(&inputs[i], &basis_points[j - 1])
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RvmFitConfig {
    pub max_iterations: usize,
    pub alpha_init: f64,
    /// `None` uses a tenth of the target variance.
    pub sigma2_init: Option<f64>,
    pub prune_threshold: f64,
    /// Largest tolerated `|Δ ln α|` at convergence.
    pub convergence_tol: f64,
    /// Keep `α` and `σ²` at their initial values (plain Bayesian ridge).
    pub fixed_hyperparameters: bool,
}

impl Default for RvmFitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            alpha_init: 1.0,
            sigma2_init: None,
            prune_threshold: 1e12,
            convergence_tol: 1e-3,
            fixed_hyperparameters: false,
        }
    }
}

impl RvmFitConfig {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.max_iterations == 0
            || !positive(self.alpha_init)
            || !positive(self.prune_threshold)
            || !positive(self.convergence_tol)
            || self.sigma2_init.is_some_and(|s| !positive(s))
        {
            return Err(Error::InvalidParameter(format!("invalid RVM fit config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Largest diagonal jitter needed to factorize the posterior precision.
    pub max_jitter: f64,
    /// Log evidence after each hyperparameter update (regression only).
    pub log_evidence: Vec<f64>,
    /// Updates where the fixed-point step was replaced by the EM step.
    pub em_fallbacks: usize,
    /// Active basis count after each iteration.
    pub active_counts: Vec<usize>,
}

/// Posterior over the surviving columns of a design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvmFit {
    pub task: Task,
    /// Surviving design columns, ascending (0 is the bias).
    pub relevance_indices: Vec<usize>,
    pub mu: Vec<f64>,
    /// Row-major posterior covariance on the surviving columns.
    pub sigma_post: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub sigma2: Option<f64>,
    pub diagnostics: FitDiagnostics,
}

impl RvmFit {
    pub fn covariance(&self) -> DMatrix<f64> {
        let k = self.mu.len();
        DMatrix::from_fn(k, k, |i, j| self.sigma_post[i][j])
    }
}

/// Gaussian posterior for fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub sigma: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub log_evidence: f64,
    pub jitter: f64,
}

fn factorize(mut precision: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let k = precision.nrows();
    let scale = (0..k).map(|i| precision[(i, i)].abs()).sum::<f64>() / k.max(1) as f64;
    let mut jitter = 0.0;
    let mut step = 1e-10 * scale.max(f64::MIN_POSITIVE);
    for _ in 0..12 {
        if let Some(chol) = Cholesky::new(precision.clone()) {
            return Ok((chol, jitter));
        }
        for i in 0..k {
            precision[(i, i)] += step;
        }
        jitter += step;
        step *= 10.0;
    }
    let diag: Vec<f64> = (0..k).map(|i| precision[(i, i)].abs()).collect();
    let hi = diag.iter().copied().fold(0.0, f64::max);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    Err(Error::Singular {
        condition: hi / lo.max(f64::MIN_POSITIVE),
    })
}

/// `Σ = (σ⁻² ΦᵀΦ + A)⁻¹`, `μ = σ⁻² Σ Φᵀ t` and the log marginal likelihood.
pub fn posterior(design: &DMatrix<f64>, targets: &DVector<f64>, alphas: &[f64], sigma2: f64) -> Result<Posterior> {
    let n = design.nrows();
    let k = design.ncols();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    if alphas.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: alphas.len(),
        });
    }
    let beta = 1.0 / sigma2;
    let mut precision = design.tr_mul(design) * beta;
    for (i, a) in alphas.iter().enumerate() {
        precision[(i, i)] += a;
    }
    let (chol, jitter) = factorize(precision)?;
    let rhs = design.tr_mul(targets) * beta;
    let mu = chol.solve(&rhs);
    let sigma = chol.inverse();
    let residual = targets - design * &mu;
    let log_det_precision: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_c = n as f64 * sigma2.ln() - alphas.iter().map(|a| a.ln()).sum::<f64>() + log_det_precision;
    let quad = beta * residual.norm_squared() + mu.iter().zip(alphas).map(|(m, a)| a * m * m).sum::<f64>();
    let log_evidence = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_c + quad);
    Ok(Posterior {
        sigma,
        mu,
        log_evidence,
        jitter,
    })
}

fn select_columns(design: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    design.select_columns(active)
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn pack(
    task: Task,
    active: Vec<usize>,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    alphas: Vec<f64>,
    sigma2: Option<f64>,
    diagnostics: FitDiagnostics,
) -> RvmFit {
    let k = active.len();
    RvmFit {
        task,
        relevance_indices: active,
        mu: mu.iter().copied().collect(),
        sigma_post: (0..k).map(|i| (0..k).map(|j| sigma[(i, j)]).collect()).collect(),
        alphas,
        sigma2,
        diagnostics,
    }
}

/// Keeps entries whose precision stays finite and below the threshold.
fn prune(active: &mut Vec<usize>, alphas: &mut Vec<f64>, threshold: f64) {
    let keep: Vec<bool> = alphas.iter().map(|a| a.is_finite() && *a <= threshold).collect();
    let mut i = 0;
    active.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    alphas.retain(|a| a.is_finite() && *a <= threshold);
}

fn max_log_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max)
}

struct RegressionState {
    active: Vec<usize>,
    alphas: Vec<f64>,
    sigma2: f64,
    phi: DMatrix<f64>,
    post: Posterior,
}

impl RegressionState {
    fn new(design: &DMatrix<f64>, t: &DVector<f64>, active: Vec<usize>, alphas: Vec<f64>, sigma2: f64) -> Result<Self> {
        let phi = select_columns(design, &active);
        let post = posterior(&phi, t, &alphas, sigma2)?;
        Ok(Self {
            active,
            alphas,
            sigma2,
            phi,
            post,
        })
    }
}

/// Runs hyperparameter updates until convergence, recording every accepted
/// state into `diag` when `record` is set.
fn reestimate(
    design: &DMatrix<f64>,
    t: &DVector<f64>,
    mut state: RegressionState,
    config: &RvmFitConfig,
    diag: &mut FitDiagnostics,
    record: bool,
) -> Result<(RegressionState, bool)> {
    let n = design.nrows();
    for _ in 0..config.max_iterations {
        if record {
            diag.iterations += 1;
        }
        let RegressionState {
            active,
            alphas,
            sigma2,
            phi,
            post,
        } = &state;
        let gamma: Vec<f64> = (0..active.len())
            .map(|i| 1.0 - alphas[i] * post.sigma[(i, i)])
            .collect();
        let residual = (t - phi * &post.mu).norm_squared();
        let gamma_sum: f64 = gamma.iter().sum();

        // fixed-point proposal
        let mut next_active = active.clone();
        let mut next_alphas: Vec<f64> = gamma
            .iter()
            .zip(post.mu.iter())
            .map(|(g, m)| g.max(0.0) / (m * m))
            .collect();
        let dof = n as f64 - gamma_sum;
        let next_sigma2 = if dof > 0.0 {
            (residual / dof).max(1e-12)
        } else {
            *sigma2
        };
        prune(&mut next_active, &mut next_alphas, config.prune_threshold);
        let mut proposal = if next_active.is_empty() {
            None
        } else {
            RegressionState::new(design, t, next_active, next_alphas, next_sigma2).ok()
        };

        let improved = proposal
            .as_ref()
            .is_some_and(|p| p.post.log_evidence >= post.log_evidence - EVIDENCE_SLACK);
        if !improved {
            diag.em_fallbacks += 1;
            let mut em_active = active.clone();
            let mut em_alphas: Vec<f64> = (0..active.len())
                .map(|i| 1.0 / (post.mu[i] * post.mu[i] + post.sigma[(i, i)]))
                .collect();
            let em_sigma2 = ((residual + sigma2 * gamma_sum) / n as f64).max(1e-12);
            prune(&mut em_active, &mut em_alphas, config.prune_threshold);
            if em_active.is_empty() {
                return Err(Error::NoRelevantVectors);
            }
            proposal = Some(RegressionState::new(design, t, em_active, em_alphas, em_sigma2)?);
        }
        let next = proposal.expect("proposal set above");

        let old_alphas: Vec<f64> = active
            .iter()
            .zip(alphas)
            .filter(|(c, _)| next.active.contains(c))
            .map(|(_, a)| *a)
            .collect();
        let change = max_log_change(&old_alphas, &next.alphas).max((sigma2.ln() - next.sigma2.ln()).abs());
        let pruned_any = next.active.len() < active.len();

        state = next;
        diag.max_jitter = diag.max_jitter.max(state.post.jitter);
        if record {
            diag.log_evidence.push(state.post.log_evidence);
            diag.active_counts.push(state.active.len());
        }
        if !pruned_any && change < config.convergence_tol {
            return Ok((state, true));
        }
    }
    Ok((state, false))
}

pub fn fit_regression(targets: &[f64], design: &DMatrix<f64>, config: &RvmFitConfig) -> Result<RvmFit> {
    config.validate()?;
    let n = design.nrows();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("regression targets must be finite".into()));
    }
    let t = DVector::from_column_slice(targets);
    let sigma2 = config
        .sigma2_init
        .unwrap_or_else(|| (0.1 * variance(targets)).max(1e-12));
    let active: Vec<usize> = (0..design.ncols()).collect();
    let alphas = vec![config.alpha_init; active.len()];
    let mut diag = FitDiagnostics::default();

    let mut state = RegressionState::new(design, &t, active, alphas, sigma2)?;
    diag.max_jitter = state.post.jitter;
    diag.log_evidence.push(state.post.log_evidence);
    diag.active_counts.push(state.active.len());

    if config.fixed_hyperparameters {
        diag.converged = true;
    } else {
        let (next, converged) = reestimate(design, &t, state, config, &mut diag, true)?;
        state = next;
        diag.converged = converged;
        if converged {
            state = drop_redundant(design, &t, state, config, &mut diag)?;
        }
    }

    Ok(pack(
        Task::Regression,
        state.active,
        &state.post.mu,
        &state.post.sigma,
        state.alphas,
        Some(state.sigma2),
        diag,
    ))
}

/// Backward pass over the converged bases: a basis is removed when refitting
/// without it leaves the evidence no lower. Exactly collinear columns leave
/// the evidence flat, so the fixed-point updates alone never separate them.
fn drop_redundant(
    design: &DMatrix<f64>,
    t: &DVector<f64>,
    mut state: RegressionState,
    config: &RvmFitConfig,
    diag: &mut FitDiagnostics,
) -> Result<RegressionState> {
    let mut order: Vec<usize> = state.active.clone();
    order.sort_by(|a, b| {
        let ia = state.active.iter().position(|c| c == a).expect("active");
        let ib = state.active.iter().position(|c| c == b).expect("active");
        state.alphas[ib].total_cmp(&state.alphas[ia])
    });
    for column in order {
        let Some(pos) = state.active.iter().position(|&c| c == column) else {
            continue;
        };
        if state.active.len() == 1 {
            break;
        }
        let mut active = state.active.clone();
        let mut alphas = state.alphas.clone();
        active.remove(pos);
        alphas.remove(pos);
        let Ok(trial) = RegressionState::new(design, t, active, alphas, state.sigma2) else {
            continue;
        };
        let mut scratch = FitDiagnostics::default();
        let Ok((trial, true)) = reestimate(design, t, trial, config, &mut scratch, false) else {
            continue;
        };
        if trial.post.log_evidence >= state.post.log_evidence - EVIDENCE_SLACK {
            state = trial;
            diag.em_fallbacks += scratch.em_fallbacks;
            diag.max_jitter = diag.max_jitter.max(scratch.max_jitter);
            diag.log_evidence.push(state.post.log_evidence);
            diag.active_counts.push(state.active.len());
        }
    }
    Ok(state)
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^a)` without overflow.
fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// Bernoulli log likelihood minus `½ wᵀAw`.
pub fn penalized_log_likelihood(design: &DMatrix<f64>, labels: &[bool], alphas: &[f64], w: &DVector<f64>) -> f64 {
    let a = design * w;
    let ll: f64 = a
        .iter()
        .zip(labels)
        .map(|(&ai, &t)| if t { -softplus(-ai) } else { -softplus(ai) })
        .sum();
    ll - 0.5 * w.iter().zip(alphas).map(|(wi, al)| al * wi * wi).sum::<f64>()
}

/// `Φᵀ(t − y) − Aw`.
pub fn penalized_gradient(design: &DMatrix<f64>, labels: &[bool], alphas: &[f64], w: &DVector<f64>) -> DVector<f64> {
    let a = design * w;
    let err = DVector::from_iterator(
        labels.len(),
        a.iter()
            .zip(labels)
            .map(|(&ai, &t)| if t { 1.0 } else { 0.0 } - sigmoid(ai)),
    );
    let mut g = design.tr_mul(&err);
    for (i, al) in alphas.iter().enumerate() {
        g[i] -= al * w[i];
    }
    g
}

/// Posterior mode by Newton steps with step halving. Returns the mode, the
/// factorized Hessian and the jitter used.
fn irls(
    design: &DMatrix<f64>,
    labels: &[bool],
    alphas: &[f64],
    start: DVector<f64>,
) -> Result<(DVector<f64>, Cholesky<f64, Dyn>, f64)> {
    let hessian = |w: &DVector<f64>| {
        let a = design * w;
        let mut weighted = design.clone();
        for (i, ai) in a.iter().enumerate() {
            let y = sigmoid(*ai);
            let b = (y * (1.0 - y)).max(1e-12);
            weighted.row_mut(i).scale_mut(b);
        }
        let mut h = design.tr_mul(&weighted);
        for (i, al) in alphas.iter().enumerate() {
            h[(i, i)] += al;
        }
        h
    };
    let mut w = start;
    let mut objective = penalized_log_likelihood(design, labels, alphas, &w);
    let mut max_jitter = 0.0_f64;
    for _ in 0..IRLS_MAX_STEPS {
        let g = penalized_gradient(design, labels, alphas, &w);
        let (chol, jitter) = factorize(hessian(&w))?;
        max_jitter = max_jitter.max(jitter);
        if g.norm() < IRLS_GRADIENT_TOL {
            return Ok((w, chol, max_jitter));
        }
        let step = chol.solve(&g);
        // predicted gain of the full Newton step is half the decrement; below
        // this the objective cannot resolve the improvement
        let decrement = g.dot(&step);
        let resolution = IRLS_DECREMENT_TOL * (1.0 + objective.abs());
        if decrement <= resolution {
            // inside the quadratic basin: one last full step, kept unless it
            // loses more than the objective can resolve
            let trial = &w + &step;
            if penalized_log_likelihood(design, labels, alphas, &trial) >= objective - resolution {
                w = trial;
            }
            let (chol, jitter) = factorize(hessian(&w))?;
            return Ok((w, chol, max_jitter.max(jitter)));
        }
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..=IRLS_MAX_HALVINGS {
            let trial = &w + &step * scale;
            let value = penalized_log_likelihood(design, labels, alphas, &trial);
            if value >= objective {
                w = trial;
                objective = value;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            return Err(Error::IrlsDivergence(IRLS_MAX_HALVINGS));
        }
    }
    let (chol, jitter) = factorize(hessian(&w))?;
    Ok((w, chol, max_jitter.max(jitter)))
}

pub fn fit_classifier(labels: &[bool], design: &DMatrix<f64>, config: &RvmFitConfig) -> Result<RvmFit> {
    config.validate()?;
    let n = design.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    let mut active: Vec<usize> = (0..design.ncols()).collect();
    let mut alphas = vec![config.alpha_init; active.len()];
    let mut w = DVector::zeros(active.len());
    let mut diag = FitDiagnostics::default();

    loop {
        let phi = select_columns(design, &active);
        let (mode, chol, jitter) = irls(&phi, labels, &alphas, w.clone())?;
        diag.max_jitter = diag.max_jitter.max(jitter);
        let sigma = chol.inverse();
        diag.active_counts.push(active.len());

        if config.fixed_hyperparameters || diag.iterations >= config.max_iterations {
            diag.converged = config.fixed_hyperparameters;
            return Ok(pack(Task::Classification, active, &mode, &sigma, alphas, None, diag));
        }
        diag.iterations += 1;

        let mut next_active = active.clone();
        let mut next_alphas: Vec<f64> = (0..active.len())
            .map(|i| (1.0 - alphas[i] * sigma[(i, i)]).max(0.0) / (mode[i] * mode[i]))
            .collect();
        prune(&mut next_active, &mut next_alphas, config.prune_threshold);
        if next_active.is_empty() {
            return Err(Error::NoRelevantVectors);
        }
        let kept: Vec<usize> = (0..active.len())
            .filter(|i| next_active.contains(&active[*i]))
            .collect();
        let old: Vec<f64> = kept.iter().map(|&i| alphas[i]).collect();
        let change = max_log_change(&old, &next_alphas);
        let pruned_any = next_active.len() < active.len();
        w = DVector::from_iterator(kept.len(), kept.iter().map(|&i| mode[i]));
        active = next_active;
        alphas = next_alphas;

        if !pruned_any && change < config.convergence_tol {
            diag.converged = true;
            // final mode and covariance for the converged hyperparameters
            let phi = select_columns(design, &active);
            let (mode, chol, jitter) = irls(&phi, labels, &alphas, w)?;
            diag.max_jitter = diag.max_jitter.max(jitter);
            diag.active_counts.push(active.len());
            return Ok(pack(
                Task::Classification,
                active,
                &mode,
                &chol.inverse(),
                alphas,
                None,
                diag,
            ));
        }
    }
}

/// Rows in first-seen order with exact duplicates removed. Duplicate inputs
/// would give identical design columns.
pub fn distinct_rows(inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut seen = std::collections::HashSet::new();
    inputs
        .iter()
        .filter(|row| seen.insert(row.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .cloned()
        .collect()
}

/// Output of [`RvmModel::predict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Regression { mean: f64, variance: f64 },
    Classification { probability: f64, latent_variance: f64 },
}

impl Prediction {
    /// Regression mean or class probability.
    pub fn score(&self) -> f64 {
        match *self {
            Self::Regression { mean, .. } => mean,
            Self::Classification { probability, .. } => probability,
        }
    }
}

/// Logistic output moderated by the latent predictive variance.
pub fn moderated_probability(latent_mean: f64, latent_variance: f64) -> f64 {
    let kappa = (1.0 + std::f64::consts::PI * latent_variance / 8.0).sqrt().recip();
    sigmoid(kappa * latent_mean)
}

/// A fitted machine together with its kernel and relevant basis points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvmModel {
    pub kernel: KernelSpec,
    pub task: Task,
    /// Surviving columns of `[bias, K(·, b_1), …]` over the distinct
    /// training inputs `b_i`.
    pub relevance_indices: Vec<usize>,
    /// Training inputs behind the relevant kernel columns, in the order of
    /// `relevance_indices` (the bias column has no basis point).
    pub basis_points: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub sigma_post: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub sigma2: Option<f64>,
    pub input_dim: usize,
    pub diagnostics: FitDiagnostics,
}

impl RvmModel {
    fn from_fit(fit: RvmFit, kernel: KernelSpec, basis: &[Vec<f64>]) -> Self {
        let basis_points = fit
            .relevance_indices
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| basis[c - 1].clone())
            .collect();
        Self {
            kernel,
            task: fit.task,
            relevance_indices: fit.relevance_indices,
            basis_points,
            mu: fit.mu,
            sigma_post: fit.sigma_post,
            alphas: fit.alphas,
            sigma2: fit.sigma2,
            input_dim: basis.first().map(Vec::len).unwrap_or(0),
            diagnostics: fit.diagnostics,
        }
    }

    /// Regression with every distinct training input as a basis point.
    pub fn regression(inputs: &[Vec<f64>], targets: &[f64], kernel: KernelSpec, config: &RvmFitConfig) -> Result<Self> {
        let basis = distinct_rows(inputs);
        let design = design_matrix(inputs, &basis, &kernel)?;
        let fit = fit_regression(targets, &design, config)?;
        Ok(Self::from_fit(fit, kernel, &basis))
    }

    /// Binary classification with every distinct training input as a basis
    /// point.
    pub fn classifier(inputs: &[Vec<f64>], labels: &[bool], kernel: KernelSpec, config: &RvmFitConfig) -> Result<Self> {
        let basis = distinct_rows(inputs);
        let design = design_matrix(inputs, &basis, &kernel)?;
        let fit = fit_classifier(labels, &design, config)?;
        Ok(Self::from_fit(fit, kernel, &basis))
    }

    pub fn relevant_vectors(&self) -> usize {
        self.basis_points.len()
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut basis = self.basis_points.iter();
        self.relevance_indices
            .iter()
            .map(|&c| {
                if c == 0 {
                    1.0
                } else {
                    self.kernel
                        .eval(x, basis.next().expect("one basis point per kernel column"))
                }
            })
            .collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let phi = self.features(x);
        let mean: f64 = phi.iter().zip(&self.mu).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for (i, pi) in phi.iter().enumerate() {
            for (j, pj) in phi.iter().enumerate() {
                quad += pi * self.sigma_post[i][j] * pj;
            }
        }
        let quad = quad.max(0.0);
        Ok(match self.task {
            Task::Regression => Prediction::Regression {
                mean,
                variance: self.sigma2.unwrap_or(0.0) + quad,
            },
            Task::Classification => Prediction::Classification {
                probability: moderated_probability(mean, quad),
                latent_variance: quad,
            },
        })
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        inputs.iter().map(|x| self.predict_one(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn kernel_values() {
        let rbf = KernelSpec::rbf(1.5).unwrap();
        assert_eq!(rbf.eval(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert!(KernelSpec::rbf(0.0).is_err());
    }

    #[test]
    fn design_has_bias_column() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let d = design_matrix(&x, &x, &KernelSpec::rbf(1.0).unwrap()).unwrap();
        assert_eq!(d.shape(), (3, 4));
        assert!(d.column(0).iter().all(|v| *v == 1.0));
        assert_eq!(d[(1, 2)], 1.0);
        assert!(design_matrix(&x, &[vec![1.0, 2.0]], &KernelSpec::Linear).is_err());
    }

    #[test]
    fn posterior_hand_example() {
        let t = DVector::from_vec(vec![2.0, -4.0, 6.0]);
        let post = posterior(&DMatrix::identity(3, 3), &t, &[1.0; 3], 1.0).unwrap();
        assert!((post.sigma.clone() - DMatrix::identity(3, 3) * 0.5).abs().max() < 1e-15);
        assert!((post.mu - t * 0.5).abs().max() < 1e-15);
    }

    #[test]
    fn log_evidence_matches_direct_gaussian() {
        // log N(t | 0, σ²I + Φ A⁻¹ Φᵀ) computed from the n×n covariance
        let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 1.0, -1.0, 1.0, 2.0, 1.0, 0.0]);
        let t = DVector::from_vec(vec![0.3, -1.2, 2.2, 0.1]);
        let alphas = [0.7, 2.5];
        let sigma2: f64 = 0.4;
        let a_inv = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 0.7, 1.0 / 2.5]));
        let c = DMatrix::identity(4, 4) * sigma2 + &phi * a_inv * phi.transpose();
        let chol = Cholesky::new(c.clone()).unwrap();
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let quad = t.dot(&chol.solve(&t));
        let direct = -0.5 * (4.0 * (2.0 * std::f64::consts::PI).ln() + log_det + quad);
        let post = posterior(&phi, &t, &alphas, sigma2).unwrap();
        assert!((post.log_evidence - direct).abs() < 1e-12);
    }

    #[test]
    fn linear_trend_is_sparse() {
        let mut r = rng::rng(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![-1.0 + 2.0 * i as f64 / 59.0]).collect();
        let t: Vec<f64> = x.iter().map(|v| 2.0 * v[0] + noise.sample(&mut r)).collect();
        let model = RvmModel::regression(&x, &t, KernelSpec::Linear, &RvmFitConfig::default()).unwrap();
        let y0 = model.predict_one(&[0.0]).unwrap().score();
        let y1 = model.predict_one(&[1.0]).unwrap().score();
        assert!(((y1 - y0) - 2.0).abs() < 0.05, "slope {}", y1 - y0);
        assert!(model.relevance_indices.len() <= 3, "{:?}", model.relevance_indices);
    }

    #[test]
    fn evidence_never_decreases() {
        let mut r = rng::rng(9);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![r.random_range(-5.0..5.0)]).collect();
        let t: Vec<f64> = x.iter().map(|v| v[0].cos() + 0.2 * r.random::<f64>()).collect();
        let kernel = KernelSpec::rbf(1.0).unwrap();
        let model = RvmModel::regression(&x, &t, kernel, &RvmFitConfig::default()).unwrap();
        for w in model.diagnostics.log_evidence.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{} -> {}", w[0], w[1]);
        }
        for w in model.diagnostics.active_counts.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn predictive_variance_exceeds_noise() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 3.0]).collect();
        let t: Vec<f64> = x.iter().map(|v| v[0].sin()).collect();
        let model = RvmModel::regression(&x, &t, KernelSpec::rbf(1.0).unwrap(), &RvmFitConfig::default()).unwrap();
        let s2 = model.sigma2.unwrap();
        for q in [-3.0, 0.0, 2.2, 5.0, 40.0] {
            match model.predict_one(&[q]).unwrap() {
                Prediction::Regression { variance, .. } => assert!(variance >= s2),
                _ => unreachable!(),
            }
        }
        assert!(model.predict_one(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn interpolates_training_points() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 4.0]).collect();
        let t: Vec<f64> = x.iter().map(|v| (v[0] * 0.8).sin()).collect();
        let model = RvmModel::regression(&x, &t, KernelSpec::rbf(1.0).unwrap(), &RvmFitConfig::default()).unwrap();
        for (xi, ti) in x.iter().zip(&t) {
            if let Prediction::Regression { mean, variance } = model.predict_one(xi).unwrap() {
                assert!((mean - ti).abs() <= 2.0 * variance.sqrt() + 1e-9);
            }
        }
    }

    #[test]
    fn classification_midpoint_is_half() {
        assert_eq!(moderated_probability(0.0, 3.0), 0.5);
        assert!(moderated_probability(2.0, 10.0) < sigmoid(2.0));
        assert!(moderated_probability(2.0, 10.0) > 0.5);
    }

    #[test]
    fn classifier_rejects_single_class() {
        let x = vec![vec![0.0], vec![1.0]];
        let d = design_matrix(&x, &x, &KernelSpec::Linear).unwrap();
        assert!(matches!(
            fit_classifier(&[true, true], &d, &RvmFitConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn irls_mode_has_small_gradient() {
        let mut r = rng::rng(1);
        let x: Vec<Vec<f64>> = (0..50).map(|_| vec![r.random_range(-2.0..2.0)]).collect();
        let labels: Vec<bool> = x.iter().map(|v| v[0] + 0.8 * r.random::<f64>() > 0.4).collect();
        let d = design_matrix(&x, &x, &KernelSpec::rbf(1.0).unwrap()).unwrap();
        let alphas = vec![1.0; d.ncols()];
        let (w, _, _) = irls(&d, &labels, &alphas, DVector::zeros(d.ncols())).unwrap();
        assert!(penalized_gradient(&d, &labels, &alphas, &w).norm() < 1e-6);
    }
}
