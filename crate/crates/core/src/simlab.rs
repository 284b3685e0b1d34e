//! Simulation designs for heavy-tailed regression and their aggregation.
//!
//! Case 1 compares the 16 intercept-containing subsets of four Student-t
//! covariates under Cauchy noise. Case 2 selects the penalty of a Huber lasso
//! over a 50-point path under AR(1) Gaussian designs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{
    enumerate_subsets, fit_huber_lasso, lambda_fold_correction, lambda_path_with_tau,
    null_model_tau, AdaptiveHuber, Dataset, Learner, LossFn, SubsetLearner,
};
use crate::ranksum::Projection;
use crate::rng::{derive_seed, domain, keyed_rng};
use crate::select::{
    build_vfold_panel, cv_from_panel, cvc_style_select_reference_tau, pcv_select_masked,
    rsr_from_panel_masked, BuiltPanel, ConfidenceSet, LassoPathSuite, LearnerSuite, Method,
    SelectionConfig,
};

/// Case 1 coefficients: intercept first, then the four covariates.
pub const CASE1_BETA: [f64; 5] = [1.0, 0.0, 3.0, 4.0, 0.0];
/// Subset mask of the true model (covariates with coefficients 3 and 4).
pub const CASE1_TRUE_MASK: usize = 0b0110;
/// Nonzero positions of the Case 2 coefficient vector.
pub const CASE2_SUPPORT: [usize; 4] = [0, 1, 5, 6];
/// Supported `(n, p)` pairs of the Case 2 design.
pub const CASE2_DIMS: [(usize, usize); 2] = [(200, 200), (400, 2000)];

/// Student-t draw as `Z / sqrt(V / df)` with `V ~ chi^2_df`.
pub fn sample_student_t<R: Rng + ?Sized>(df: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let chi = ChiSquared::new(df).expect("degrees of freedom must be positive");
    let v: f64 = chi.sample(rng);
    z / (v / df).sqrt()
}

/// One draw from `N(0, Sigma)` with `Sigma_ij = rho^|i-j|`.
pub fn sample_ar1_gaussian<R: Rng + ?Sized>(p: usize, rho: f64, rng: &mut R) -> Vec<f64> {
    assert!(rho.abs() < 1.0, "rho must lie in (-1, 1)");
    let innov = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(p);
    let mut prev: f64 = 0.0;
    for j in 0..p {
        let z: f64 = StandardNormal.sample(rng);
        prev = if j == 0 { z } else { rho * prev + innov * z };
        out.push(prev);
    }
    out
}

/// Methods a simulation can run; `Rsr` is the V-fold rank-sum procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    Cv,
    CvcStyle,
    Pcv,
    Rsr,
}

impl SimMethod {
    pub const ALL: [SimMethod; 4] = [Self::Cv, Self::CvcStyle, Self::Pcv, Self::Rsr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cv => "cv",
            Self::CvcStyle => "cvc_style",
            Self::Pcv => "pcv",
            Self::Rsr => "rsr",
        }
    }
}

impl std::str::FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cv" => Ok(Self::Cv),
            "cvc_style" | "cvc" => Ok(Self::CvcStyle),
            "pcv" => Ok(Self::Pcv),
            "rsr" => Ok(Self::Rsr),
            other => Err(invalid(format!(
                "unknown method {other:?} (expected cv, cvc_style, pcv, rsr)"
            ))),
        }
    }
}

impl std::fmt::Display for SimMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case1Config {
    pub n: usize,
    pub x_df: f64,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub methods: Vec<SimMethod>,
    pub folds: usize,
    pub draws: usize,
    pub screening: bool,
    pub projection: Projection,
}

impl Default for Case1Config {
    fn default() -> Self {
        Self {
            n: 320,
            x_df: 3.0,
            reps: 100,
            alpha: 0.1,
            seed: 1,
            methods: SimMethod::ALL.to_vec(),
            folds: 5,
            draws: 500,
            screening: false,
            projection: Projection::Symmetrized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case2Config {
    pub n: usize,
    pub p: usize,
    pub noise_df: f64,
    pub rho: f64,
    pub reps: usize,
    pub folds: usize,
    pub k_path: usize,
    pub alpha: f64,
    pub seed: u64,
    pub methods: Vec<SimMethod>,
    pub draws: usize,
    pub screening: bool,
    pub projection: Projection,
}

impl Default for Case2Config {
    fn default() -> Self {
        Self {
            n: 200,
            p: 200,
            noise_df: 3.0,
            rho: 0.25,
            reps: 50,
            folds: 5,
            k_path: 50,
            alpha: 0.1,
            seed: 1,
            methods: SimMethod::ALL.to_vec(),
            draws: 500,
            screening: false,
            projection: Projection::Symmetrized,
        }
    }
}

fn check_common(reps: usize, methods: &[SimMethod], sel: &SelectionConfig) -> Result<()> {
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if methods.is_empty() {
        return Err(invalid("at least one method is required"));
    }
    sel.validate()
}

impl Case1Config {
    fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            alpha: self.alpha,
            draws: self.draws,
            folds: self.folds,
            seed: self.seed,
            projection: self.projection,
            screening: self.screening,
            ..SelectionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_df > 0.0 && self.x_df.is_finite()) {
            return Err(invalid(format!("x_df must be positive, got {}", self.x_df)));
        }
        if self.folds < 2 {
            return Err(invalid("case 1 runs V-fold selection; folds must be at least 2"));
        }
        if self.n < 2 * self.folds.max(5) {
            return Err(invalid(format!("n = {} is too small for {} folds", self.n, self.folds)));
        }
        check_common(self.reps, &self.methods, &self.selection())
    }
}

impl Case2Config {
    fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            alpha: self.alpha,
            draws: self.draws,
            folds: self.folds,
            seed: self.seed,
            projection: self.projection,
            screening: self.screening,
            ..SelectionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_df > 0.0 && self.noise_df.is_finite()) {
            return Err(invalid(format!("noise_df must be positive, got {}", self.noise_df)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(invalid(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if self.p < 7 {
            return Err(invalid(format!("p must be at least 7 to hold the true support, got {}", self.p)));
        }
        if self.folds < 2 || self.n < 2 * self.folds {
            return Err(invalid(format!(
                "need folds >= 2 and n >= 2 * folds, got n = {}, folds = {}",
                self.n, self.folds
            )));
        }
        if self.k_path < 2 {
            return Err(invalid("k_path must be at least 2"));
        }
        check_common(self.reps, &self.methods, &self.selection())
    }

    /// Whether `(n, p)` is one of the published design sizes.
    pub fn has_standard_dims(&self) -> bool {
        CASE2_DIMS.contains(&(self.n, self.p))
    }
}

/// One method's outcome on one replicate. Case-specific fields are `None`
/// where they do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: SimMethod,
    pub set_size: usize,
    /// Case 1: the true subset model is in the set.
    pub correct: Option<bool>,
    pub chosen_index: Option<usize>,
    pub chosen_lambda: Option<f64>,
    pub nonzeros: Option<usize>,
    pub covered: Option<bool>,
    pub oracle: Option<bool>,
    pub cv_error: Option<f64>,
    /// The confidence set was empty and the highest p-value was used instead.
    pub empty_set: bool,
    pub bootstrap_columns: usize,
    /// Bootstrap columns the same run would use with screening off.
    pub bootstrap_columns_unscreened: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: usize,
    pub n: usize,
    pub failed_candidates: usize,
    pub error: Option<String>,
    pub outcomes: Vec<MethodOutcome>,
}

/// Mean with its Monte-Carlo standard error over the replicates that report it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            se,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: SimMethod,
    pub set_size: Option<Estimate>,
    pub correct_rate: Option<Estimate>,
    pub nonzeros: Option<Estimate>,
    pub coverage_rate: Option<Estimate>,
    pub oracle_rate: Option<Estimate>,
    pub cv_error: Option<Estimate>,
    pub chosen_lambda: Option<Estimate>,
    pub empty_sets: usize,
    pub bootstrap_columns: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub case: String,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub failed_replicates: usize,
    pub methods: Vec<MethodSummary>,
}

impl AggregateReport {
    pub fn method(&self, m: SimMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Result of a simulation run: the aggregate plus every replicate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub aggregate: AggregateReport,
    pub replicates: Vec<ReplicateReport>,
}

fn summarize(methods: &[SimMethod], reps: &[ReplicateReport]) -> Vec<MethodSummary> {
    let ok: Vec<&ReplicateReport> = reps.iter().filter(|r| r.error.is_none()).collect();
    methods
        .iter()
        .map(|&m| {
            let outs: Vec<&MethodOutcome> = ok
                .iter()
                .filter_map(|r| r.outcomes.iter().find(|o| o.method == m))
                .collect();
            let num = |f: &dyn Fn(&MethodOutcome) -> Option<f64>| {
                Estimate::from_values(&outs.iter().filter_map(|o| f(o)).collect::<Vec<_>>())
            };
            let flag = |b: Option<bool>| b.map(|v| if v { 1.0 } else { 0.0 });
            MethodSummary {
                method: m,
                set_size: num(&|o| Some(o.set_size as f64)),
                correct_rate: num(&|o| flag(o.correct)),
                nonzeros: num(&|o| o.nonzeros.map(|v| v as f64)),
                coverage_rate: num(&|o| flag(o.covered)),
                oracle_rate: num(&|o| flag(o.oracle)),
                cv_error: num(&|o| o.cv_error),
                chosen_lambda: num(&|o| o.chosen_lambda),
                empty_sets: outs.iter().filter(|o| o.empty_set).count(),
                bootstrap_columns: num(&|o| Some(o.bootstrap_columns as f64)),
            }
        })
        .collect()
}

fn unscreened_columns(failed: &[bool]) -> usize {
    let ok = failed.iter().filter(|f| !**f).count();
    ok * ok.saturating_sub(1)
}

fn run_method(method: SimMethod, built: &BuiltPanel, sel: &SelectionConfig) -> Result<ConfidenceSet> {
    match method {
        SimMethod::Cv => cv_from_panel(&built.panel, &built.failed),
        SimMethod::CvcStyle => cvc_style_select_reference_tau(built, sel),
        SimMethod::Pcv => pcv_select_masked(&built.panel, &built.failed, sel),
        SimMethod::Rsr => rsr_from_panel_masked(&built.panel, &built.failed, sel, Method::RsrVfold),
    }
}

fn replicate_seed(seed: u64, case: u64, n: usize, rep: usize) -> u64 {
    derive_seed(seed, &[domain::REPLICATE, case, n as u64, rep as u64])
}

fn run_replicates<F>(reps: usize, n: usize, label: &str, one: F) -> Vec<ReplicateReport>
where
    F: Fn(usize) -> Result<ReplicateReport> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let r = one(rep).unwrap_or_else(|e| ReplicateReport {
                replicate: rep,
                n,
                failed_candidates: 0,
                error: Some(e.to_string()),
                outcomes: Vec::new(),
            });
            match &r.error {
                None => log::info!("{label} n={n} replicate {rep} done"),
                Some(e) => log::warn!("{label} n={n} replicate {rep} failed: {e}"),
            }
            r
        })
        .collect()
}

/// Draws one Case 1 dataset.
pub fn case1_data(n: usize, x_df: f64, seed: u64) -> Result<Dataset> {
    let mut rng = keyed_rng(seed, &[1]);
    let d = CASE1_BETA.len() - 1;
    let x = DMatrix::from_fn(n, d, |_, _| sample_student_t(x_df, &mut rng));
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = CASE1_BETA[0] + (0..d).map(|j| CASE1_BETA[j + 1] * x[(i, j)]).sum::<f64>();
        signal + sample_student_t(1.0, &mut rng)
    });
    Dataset::new(x, y)
}

fn case1_suite() -> Result<LearnerSuite> {
    let learners: Vec<Box<dyn Learner>> = enumerate_subsets(CASE1_BETA.len() - 1)?
        .into_iter()
        .map(|spec| Box::new(SubsetLearner { spec, inner: AdaptiveHuber }) as Box<dyn Learner>)
        .collect();
    Ok(LearnerSuite::new(learners))
}

fn case1_replicate(config: &Case1Config, rep: usize) -> Result<ReplicateReport> {
    let rseed = replicate_seed(config.seed, 1, config.n, rep);
    let data = case1_data(config.n, config.x_df, rseed)?;
    let loss = LossFn::huber(null_model_tau(&data))?;
    let built = build_vfold_panel(&case1_suite()?, &data, &loss, config.folds, rseed)?;
    let sel = SelectionConfig {
        seed: rseed,
        ..config.selection()
    };
    let mut outcomes = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let set = run_method(method, &built, &sel)?;
        outcomes.push(MethodOutcome {
            method,
            set_size: set.size(),
            correct: Some(set.contains(CASE1_TRUE_MASK)),
            chosen_index: None,
            chosen_lambda: None,
            nonzeros: None,
            covered: None,
            oracle: None,
            cv_error: None,
            empty_set: set.size() == 0,
            bootstrap_columns: set.bootstrap_columns,
            bootstrap_columns_unscreened: if method == SimMethod::Cv {
                0
            } else {
                unscreened_columns(&built.failed)
            },
        });
    }
    Ok(ReplicateReport {
        replicate: rep,
        n: config.n,
        failed_candidates: built.failed.iter().filter(|f| **f).count(),
        error: None,
        outcomes,
    })
}

pub fn run_case1(config: &Case1Config) -> Result<SimulationRun> {
    config.validate()?;
    let replicates = run_replicates(config.reps, config.n, "case1", |rep| case1_replicate(config, rep));
    let aggregate = AggregateReport {
        case: "case1".into(),
        n: config.n,
        p: CASE1_BETA.len() - 1,
        reps: config.reps,
        alpha: config.alpha,
        seed: config.seed,
        failed_replicates: replicates.iter().filter(|r| r.error.is_some()).count(),
        methods: summarize(&config.methods, &replicates),
    };
    Ok(SimulationRun { aggregate, replicates })
}

/// Case 1 at several sample sizes, same seed and settings otherwise.
pub fn run_case1_sweep(config: &Case1Config, ns: &[usize]) -> Result<Vec<SimulationRun>> {
    if ns.is_empty() {
        return Err(invalid("at least one sample size is required"));
    }
    ns.iter()
        .map(|&n| run_case1(&Case1Config { n, ..config.clone() }))
        .collect()
}

/// Draws one Case 2 dataset.
pub fn case2_data(n: usize, p: usize, rho: f64, noise_df: f64, seed: u64) -> Result<Dataset> {
    let mut rng = keyed_rng(seed, &[2]);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for (j, v) in sample_ar1_gaussian(p, rho, &mut rng).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = CASE2_SUPPORT.iter().map(|&j| x[(i, j)]).sum();
        signal + sample_student_t(noise_df, &mut rng)
    });
    Dataset::new(x, y)
}

/// Largest-lambda member of the set (smallest path index); falls back to the
/// highest p-value when the set is empty.
fn sparsest_choice(set: &ConfidenceSet) -> (usize, bool) {
    if let Some(&k) = set.selected.first() {
        return (k, false);
    }
    let mut best = 0;
    for (k, &p) in set.p_values.iter().enumerate() {
        if p > set.p_values[best] {
            best = k;
        }
    }
    (best, true)
}

fn case2_replicate(config: &Case2Config, rep: usize) -> Result<ReplicateReport> {
    let rseed = replicate_seed(config.seed, 2, config.n, rep);
    let data = case2_data(config.n, config.p, config.rho, config.noise_df, rseed)?;
    let tau = null_model_tau(&data);
    let path = lambda_path_with_tau(&data, tau, config.k_path)?;
    let suite = LassoPathSuite { path: path.clone(), tau };
    let loss = LossFn::huber(tau)?;
    let built = build_vfold_panel(&suite, &data, &loss, config.folds, rseed)?;
    let sel = SelectionConfig {
        seed: rseed,
        ..config.selection()
    };
    let mut outcomes = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let set = run_method(method, &built, &sel)?;
        let (k, empty) = sparsest_choice(&set);
        if built.failed[k] {
            return Err(Error::Numerical(format!("chosen path index {k} failed to fit")));
        }
        let lambda = lambda_fold_correction(path.values()[k], config.folds)?;
        let fit = fit_huber_lasso(&data, lambda, tau)?;
        let support = fit.support();
        let covered = CASE2_SUPPORT.iter().all(|j| support.contains(j));
        outcomes.push(MethodOutcome {
            method,
            set_size: set.size(),
            correct: None,
            chosen_index: Some(k),
            chosen_lambda: Some(lambda),
            nonzeros: Some(support.len()),
            covered: Some(covered),
            oracle: Some(covered && support.len() == CASE2_SUPPORT.len()),
            cv_error: Some(built.mean_squared_error(k)),
            empty_set: empty,
            bootstrap_columns: set.bootstrap_columns,
            bootstrap_columns_unscreened: if method == SimMethod::Cv {
                0
            } else {
                unscreened_columns(&built.failed)
            },
        });
    }
    Ok(ReplicateReport {
        replicate: rep,
        n: config.n,
        failed_candidates: built.failed.iter().filter(|f| **f).count(),
        error: None,
        outcomes,
    })
}

pub fn run_case2(config: &Case2Config) -> Result<SimulationRun> {
    config.validate()?;
    let replicates = run_replicates(config.reps, config.n, "case2", |rep| case2_replicate(config, rep));
    let aggregate = AggregateReport {
        case: "case2".into(),
        n: config.n,
        p: config.p,
        reps: config.reps,
        alpha: config.alpha,
        seed: config.seed,
        failed_replicates: replicates.iter().filter(|r| r.error.is_some()).count(),
        methods: summarize(&config.methods, &replicates),
    };
    Ok(SimulationRun { aggregate, replicates })
}
