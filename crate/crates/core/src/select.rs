//! Confidence sets of candidate models.
//!
//! The rank-sum procedure tests, for every reference model `m`,
//! `H0: min_j mu_{m,j} >= 0` and keeps `m` when its bootstrap p-value is at
//! least `alpha`. The same panel can also be fed to three baselines: plain
//! cross-validation (argmin of mean loss), a pairwise-indicator test and a
//! mean-difference test in the style of cross-validation with confidence.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{min_statistic_test, normal_quantile, BootstrapConfig, ScoreMatrix};
use crate::error::{contract, invalid, Result};
use crate::models::{Dataset, FittedLinear, LambdaPath, Learner, LossFn, WarmStart};
use crate::ranksum::{pair_stats_against, LossPanel, Projection};
use crate::rng::{derive_seed, domain, keyed_rng, TieStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RsrSplit,
    RsrVfold,
    Cv,
    Pcv,
    CvcStyle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RsrSplit => "rsr_split",
            Self::RsrVfold => "rsr_vfold",
            Self::Cv => "cv",
            Self::Pcv => "pcv",
            Self::CvcStyle => "cvc_style",
        }
    }

    fn key(&self) -> u64 {
        match self {
            Self::RsrSplit | Self::RsrVfold => 1,
            Self::Cv => 2,
            Self::Pcv => 3,
            Self::CvcStyle => 4,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Confidence-set level: keep `m` when `p_m >= alpha`.
    pub alpha: f64,
    /// Screening level `alpha'`.
    pub alpha_screen: f64,
    /// Screening exponent `s` in `alpha' / (M - 1)^(1 + s)`.
    pub s: f64,
    /// Bootstrap draws `B`.
    pub draws: usize,
    /// Number of folds; 0 selects plain sample splitting.
    pub folds: usize,
    pub seed: u64,
    pub projection: Projection,
    pub screening: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            alpha_screen: 0.1,
            s: 0.01,
            draws: 500,
            folds: 5,
            seed: 0,
            projection: Projection::Symmetrized,
            screening: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.alpha) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !unit(self.alpha_screen) {
            return Err(invalid(format!(
                "alpha_screen must lie in (0, 1), got {}",
                self.alpha_screen
            )));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(invalid(format!("screening exponent s must be positive, got {}", self.s)));
        }
        if self.folds == 1 {
            return Err(invalid("folds must be 0 (sample splitting) or at least 2"));
        }
        self.bootstrap(0).validate()
    }

    fn bootstrap(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            draws: self.draws,
            seed,
            projection: self.projection,
        }
    }
}

/// Rank-sum diagnostics for one reference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDetail {
    pub reference: usize,
    pub competitors: Vec<usize>,
    pub mu: Vec<f64>,
    pub se: Vec<f64>,
    /// Competitors kept by screening (all competitors when screening is off).
    pub survivors: Vec<usize>,
    pub t_obs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub method: Method,
    pub alpha: f64,
    pub model_ids: Vec<String>,
    pub selected: Vec<usize>,
    pub p_values: Vec<f64>,
    /// Per reference model, the competitors removed by screening.
    pub screened_out: Vec<Vec<usize>>,
    /// Candidates whose fit failed; their p-value is 0.
    pub failed: Vec<usize>,
    /// Total number of bootstrap columns over all reference models.
    pub bootstrap_columns: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<ReferenceDetail>,
}

impl ConfidenceSet {
    pub fn contains(&self, m: usize) -> bool {
        self.selected.binary_search(&m).is_ok()
    }

    pub fn size(&self) -> usize {
        self.selected.len()
    }

    fn from_p_values(
        method: Method,
        alpha: f64,
        model_ids: Vec<String>,
        p_values: Vec<f64>,
        failed: &[bool],
    ) -> Self {
        let selected = p_values
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= alpha)
            .map(|(m, _)| m)
            .collect();
        let m_total = p_values.len();
        Self {
            method,
            alpha,
            model_ids,
            selected,
            p_values,
            screened_out: vec![Vec::new(); m_total],
            failed: failed_list(failed),
            bootstrap_columns: 0,
            details: Vec::new(),
        }
    }
}

fn failed_list(failed: &[bool]) -> Vec<usize> {
    failed.iter().enumerate().filter(|(_, &f)| f).map(|(m, _)| m).collect()
}

/// `2 * Phi^{-1}(1 - alpha' / (M - 1)^(1 + s))`.
pub fn screening_threshold(m_total: usize, alpha_screen: f64, s: f64) -> Result<f64> {
    if m_total < 2 {
        return Err(contract("screening needs at least 2 models"));
    }
    let q = 1.0 - alpha_screen / ((m_total - 1) as f64).powf(1.0 + s);
    Ok(2.0 * normal_quantile(q)?)
}

/// Positions `j` with `mu[j] / se[j] <= 2 c_{alpha'}`.
pub fn screen(mu: &[f64], se: &[f64], m_total: usize, alpha_screen: f64, s: f64) -> Result<Vec<usize>> {
    if mu.len() != se.len() {
        return Err(contract("screening inputs differ in length"));
    }
    if se.iter().any(|&v| !(v > 0.0)) {
        return Err(contract("screening needs positive standard errors"));
    }
    let thr = screening_threshold(m_total, alpha_screen, s)?;
    Ok((0..mu.len()).filter(|&j| mu[j] / se[j] <= thr).collect())
}

fn usable_competitors(m: usize, failed: &[bool]) -> Vec<usize> {
    (0..failed.len()).filter(|&j| j != m && !failed[j]).collect()
}

fn check_mask(panel: &LossPanel, failed: &[bool]) -> Result<()> {
    if failed.len() != panel.n_models() {
        return Err(contract(format!(
            "failure mask has {} entries for {} models",
            failed.len(),
            panel.n_models()
        )));
    }
    Ok(())
}

/// Rank-sum confidence set from a loss panel.
pub fn rsr_from_panel(panel: &LossPanel, config: &SelectionConfig) -> Result<ConfidenceSet> {
    rsr_from_panel_masked(panel, &vec![false; panel.n_models()], config, Method::RsrSplit)
}

/// As [`rsr_from_panel`], skipping candidates flagged in `failed`.
pub fn rsr_from_panel_masked(
    panel: &LossPanel,
    failed: &[bool],
    config: &SelectionConfig,
    method: Method,
) -> Result<ConfidenceSet> {
    config.validate()?;
    check_mask(panel, failed)?;
    let m_total = panel.n_models();
    let tie_seed = derive_seed(config.seed, &[domain::TIES, method.key()]);

    let per_ref: Vec<Result<(f64, Vec<usize>, usize, Option<ReferenceDetail>)>> = (0..m_total)
        .into_par_iter()
        .map(|m| {
            if failed[m] {
                return Ok((0.0, Vec::new(), 0, None));
            }
            let competitors = usable_competitors(m, failed);
            if competitors.is_empty() {
                return Ok((1.0, Vec::new(), 0, None));
            }
            let stats = pair_stats_against(panel, m, &competitors, config.projection, tie_seed)?;
            let keep: Vec<usize> = if config.screening {
                screen(&stats.mu, &stats.se, m_total, config.alpha_screen, config.s)?
            } else {
                (0..competitors.len()).collect()
            };
            let dropped: Vec<usize> = (0..competitors.len())
                .filter(|i| !keep.contains(i))
                .map(|i| competitors[i])
                .collect();
            let survivors: Vec<usize> = keep.iter().map(|&i| competitors[i]).collect();
            let mut detail = ReferenceDetail {
                reference: m,
                competitors: competitors.clone(),
                mu: stats.mu.clone(),
                se: stats.se.clone(),
                survivors: survivors.clone(),
                t_obs: f64::NAN,
            };
            if keep.is_empty() {
                // every competitor is already decisively worse than m
                detail.t_obs = f64::INFINITY;
                return Ok((1.0, dropped, 0, Some(detail)));
            }
            let kept = stats.select(&keep);
            let boot_seed = derive_seed(config.seed, &[domain::BOOTSTRAP, method.key(), m as u64]);
            let res = min_statistic_test(&kept.mu, &kept.psi, &config.bootstrap(boot_seed))?;
            detail.t_obs = res.t_obs;
            Ok((res.p_value, dropped, keep.len(), Some(detail)))
        })
        .collect();

    let mut p_values = Vec::with_capacity(m_total);
    let mut screened_out = Vec::with_capacity(m_total);
    let mut columns = 0;
    let mut details = Vec::new();
    for r in per_ref {
        let (p, dropped, cols, detail) = r?;
        p_values.push(p);
        screened_out.push(dropped);
        columns += cols;
        details.extend(detail);
    }
    let mut set = ConfidenceSet::from_p_values(
        method,
        config.alpha,
        panel.model_ids().to_vec(),
        p_values,
        failed,
    );
    set.screened_out = screened_out;
    set.bootstrap_columns = columns;
    set.details = details;
    Ok(set)
}

/// Singleton set holding the smallest risk; ties go to the smallest index.
pub fn cv_select(risks: &[f64]) -> Result<ConfidenceSet> {
    if risks.is_empty() {
        return Err(contract("no candidate risks"));
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(invalid("NaN candidate risk"));
    }
    let ids = (0..risks.len()).map(|j| j.to_string()).collect();
    Ok(cv_with_ids(risks, ids, &vec![false; risks.len()]))
}

fn cv_with_ids(risks: &[f64], ids: Vec<String>, failed: &[bool]) -> ConfidenceSet {
    let mut best: Option<usize> = None;
    for (j, &r) in risks.iter().enumerate() {
        if failed[j] || !r.is_finite() {
            continue;
        }
        if best.is_none_or(|b| r < risks[b]) {
            best = Some(j);
        }
    }
    let p_values = (0..risks.len())
        .map(|j| if Some(j) == best { 1.0 } else { 0.0 })
        .collect();
    ConfidenceSet::from_p_values(Method::Cv, 1.0, ids, p_values, failed)
}

/// Cross-validation choice from a panel's mean losses.
pub fn cv_from_panel(panel: &LossPanel, failed: &[bool]) -> Result<ConfidenceSet> {
    check_mask(panel, failed)?;
    Ok(cv_with_ids(&panel.mean_losses(), panel.model_ids().to_vec(), failed))
}

/// Shared driver for the two paired (same-observation) baselines.
///
/// `scores(m, j, ties)` returns per-observation values whose mean is the
/// statistic for the pair; `None` marks a competitor that carries no
/// information, `Err(())` marks the reference as rejected outright.
fn paired_min_test<F>(
    panel: &LossPanel,
    failed: &[bool],
    config: &SelectionConfig,
    method: Method,
    pair_scores: F,
) -> Result<ConfidenceSet>
where
    F: Fn(usize, usize, u64) -> PairedScores + Sync,
{
    config.validate()?;
    check_mask(panel, failed)?;
    let m_total = panel.n_models();
    let n = panel.n_obs();
    let tie_seed = derive_seed(config.seed, &[domain::TIES, method.key()]);

    let per_ref: Vec<Result<(f64, usize)>> = (0..m_total)
        .into_par_iter()
        .map(|m| {
            if failed[m] {
                return Ok((0.0, 0));
            }
            let mut stats = Vec::new();
            let mut cols = Vec::new();
            for j in usable_competitors(m, failed) {
                match pair_scores(m, j, tie_seed) {
                    PairedScores::Scores { stat, psi } => {
                        stats.push(stat);
                        cols.push(psi);
                    }
                    PairedScores::Uninformative => {}
                    PairedScores::Reject => return Ok((0.0, 0)),
                }
            }
            if cols.is_empty() {
                return Ok((1.0, 0));
            }
            let psi = ScoreMatrix::from_columns(&cols)?;
            debug_assert_eq!(psi.n_rows(), n);
            let boot_seed = derive_seed(config.seed, &[domain::BOOTSTRAP, method.key(), m as u64]);
            let res = min_statistic_test(&stats, &psi, &config.bootstrap(boot_seed))?;
            Ok((res.p_value, cols.len()))
        })
        .collect();

    let mut p_values = Vec::with_capacity(m_total);
    let mut columns = 0;
    for r in per_ref {
        let (p, c) = r?;
        p_values.push(p);
        columns += c;
    }
    let mut set =
        ConfidenceSet::from_p_values(method, config.alpha, panel.model_ids().to_vec(), p_values, failed);
    set.bootstrap_columns = columns;
    Ok(set)
}

enum PairedScores {
    Scores { stat: f64, psi: Vec<f64> },
    Uninformative,
    Reject,
}

/// Pairwise-comparison baseline: `mean_i 1{l_m(i) < l_j(i)} - 0.5` per competitor.
pub fn pcv_select(panel: &LossPanel, config: &SelectionConfig) -> Result<ConfidenceSet> {
    pcv_select_masked(panel, &vec![false; panel.n_models()], config)
}

pub fn pcv_select_masked(
    panel: &LossPanel,
    failed: &[bool],
    config: &SelectionConfig,
) -> Result<ConfidenceSet> {
    let nf = panel.n_obs() as f64;
    paired_min_test(panel, failed, config, Method::Pcv, |m, j, seed| {
        let mut ties = TieStream::for_pair(seed, m, j);
        let ind: Vec<f64> = panel
            .column(m)
            .iter()
            .zip(panel.column(j))
            .map(|(&a, &b)| {
                let win = if a == b { ties.coin() } else { a < b };
                if win {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let mean = ind.iter().sum::<f64>() / nf;
        PairedScores::Scores {
            stat: mean - 0.5,
            psi: ind.into_iter().map(|v| v - mean).collect(),
        }
    })
}

/// Mean-difference baseline on raw losses, studentized per competitor.
///
/// The statistic for competitor `j` is `mean(l_j - l_m) / sd(l_j - l_m)`, so
/// positive values favour the reference as in the rank-sum test. A competitor
/// whose difference is constant carries no sampling variability: a positive or
/// zero constant is ignored, a negative one rejects the reference.
pub fn cvc_style_select(panel: &LossPanel, config: &SelectionConfig) -> Result<ConfidenceSet> {
    cvc_style_select_masked(panel, &vec![false; panel.n_models()], config)
}

pub fn cvc_style_select_masked(
    panel: &LossPanel,
    failed: &[bool],
    config: &SelectionConfig,
) -> Result<ConfidenceSet> {
    paired_min_test(panel, failed, config, Method::CvcStyle, |m, j, _| {
        mean_difference_scores(panel.column(m), panel.column(j))
    })
}

/// As [`cvc_style_select_masked`], but the losses behind each reference `m`
/// are Huber losses at the robustification parameter `m` was fitted with in
/// that fold. Candidates without a fitted `tau` keep the panel's losses.
pub fn cvc_style_select_reference_tau(
    built: &BuiltPanel,
    config: &SelectionConfig,
) -> Result<ConfidenceSet> {
    let panel = &built.panel;
    paired_min_test(panel, &built.failed, config, Method::CvcStyle, |m, j, _| {
        match built.reference_losses(m, &[m, j]) {
            Some(cols) => mean_difference_scores(&cols[0], &cols[1]),
            None => mean_difference_scores(panel.column(m), panel.column(j)),
        }
    })
}

fn mean_difference_scores(lm: &[f64], lj: &[f64]) -> PairedScores {
    let nf = lm.len() as f64;
    let d: Vec<f64> = lj.iter().zip(lm).map(|(b, a)| b - a).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return PairedScores::Reject;
    }
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let sd = var.sqrt();
    let scale = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return if mean < 0.0 {
            PairedScores::Reject
        } else {
            PairedScores::Uninformative
        };
    }
    if !(mean / sd).is_finite() {
        return PairedScores::Reject;
    }
    PairedScores::Scores {
        stat: mean / sd,
        psi: d.into_iter().map(|v| (v - mean) / sd).collect(),
    }
}

/// A family of candidate models that can be trained together.
pub trait CandidateSuite: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn ids(&self) -> Vec<String>;

    /// Fits every candidate on `train`; one result per candidate, in order.
    fn fit_all(&self, train: &Dataset) -> Vec<Result<FittedLinear>>;
}

/// Independent learners fitted one by one.
pub struct LearnerSuite {
    learners: Vec<Box<dyn Learner>>,
}

impl LearnerSuite {
    pub fn new(learners: Vec<Box<dyn Learner>>) -> Self {
        Self { learners }
    }
}

impl CandidateSuite for LearnerSuite {
    fn len(&self) -> usize {
        self.learners.len()
    }

    fn ids(&self) -> Vec<String> {
        let names: Vec<String> = self.learners.iter().map(|l| l.name()).collect();
        let unique = names
            .iter()
            .collect::<std::collections::HashSet<_>>()
            .len()
            == names.len();
        if unique {
            names
        } else {
            names
                .into_iter()
                .enumerate()
                .map(|(j, n)| format!("{j}_{n}"))
                .collect()
        }
    }

    fn fit_all(&self, train: &Dataset) -> Vec<Result<FittedLinear>> {
        self.learners.iter().map(|l| l.fit(train)).collect()
    }
}

/// Penalized Huber fits along a decreasing lambda path, warm-started.
pub struct LassoPathSuite {
    pub path: LambdaPath,
    pub tau: f64,
}

impl CandidateSuite for LassoPathSuite {
    fn len(&self) -> usize {
        self.path.len()
    }

    fn ids(&self) -> Vec<String> {
        (0..self.path.len()).map(|k| format!("lambda{k:02}")).collect()
    }

    fn fit_all(&self, train: &Dataset) -> Vec<Result<FittedLinear>> {
        let mut warm: Option<WarmStart> = None;
        self.path
            .values()
            .iter()
            .map(|&lambda| {
                let tr = crate::models::fit_huber_lasso_traced(train, lambda, self.tau, warm.as_ref())?;
                warm = Some(WarmStart {
                    intercept: tr.fit.intercept,
                    coef: tr.fit.coef.clone(),
                    step_scale: tr.step_scale,
                });
                Ok(tr.fit)
            })
            .collect()
    }
}

/// Loss panel assembled from out-of-sample predictions.
#[derive(Debug, Clone)]
pub struct BuiltPanel {
    /// Rows follow `eval_rows`; failed candidates hold zeros.
    pub panel: LossPanel,
    pub failed: Vec<bool>,
    /// Original observation index of each panel row.
    pub eval_rows: Vec<usize>,
    /// Fold of each panel row (all zero for a single split).
    pub fold_of_row: Vec<usize>,
    /// Prediction residuals, same layout as `panel`.
    pub residuals: Vec<Vec<f64>>,
    /// Fitted Huber `tau` of each candidate in each fold, where the learner has one.
    pub fold_tau: Vec<Vec<Option<f64>>>,
}

impl BuiltPanel {
    /// Mean squared prediction error of candidate `j`.
    pub fn mean_squared_error(&self, j: usize) -> f64 {
        let r = &self.residuals[j];
        r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
    }

    /// Huber losses of `models` at the per-fold `tau` of `reference`; `None`
    /// when the reference has no fitted `tau`.
    pub fn reference_losses(&self, reference: usize, models: &[usize]) -> Option<Vec<Vec<f64>>> {
        let taus: Vec<f64> = self.fold_tau[reference].iter().copied().collect::<Option<_>>()?;
        Some(
            models
                .iter()
                .map(|&j| {
                    self.residuals[j]
                        .iter()
                        .zip(&self.fold_of_row)
                        .map(|(&r, &v)| LossFn::Huber { tau: taus[v] }.eval(r))
                        .collect()
                })
                .collect(),
        )
    }
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut keyed_rng(seed, &[domain::SPLIT]));
    idx
}

/// Seeded halving: the first `ceil(N/2)` permuted points train, the rest evaluate.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let perm = permutation(n, seed);
    let n_train = n - n / 2;
    let mut train = perm[..n_train].to_vec();
    let mut eval = perm[n_train..].to_vec();
    train.sort_unstable();
    eval.sort_unstable();
    (train, eval)
}

/// Fold label per observation; earlier folds take the remainder.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let perm = permutation(n, seed);
    let base = n / folds;
    let extra = n % folds;
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for v in 0..folds {
        let size = base + usize::from(v < extra);
        for &i in &perm[pos..pos + size] {
            fold_of[i] = v;
        }
        pos += size;
    }
    fold_of
}

struct FoldEval {
    rows: Vec<usize>,
    losses: Vec<Option<Vec<f64>>>,
    resid: Vec<Option<Vec<f64>>>,
    taus: Vec<Option<f64>>,
}

fn evaluate_fold<S: CandidateSuite + ?Sized>(
    suite: &S,
    data: &Dataset,
    loss: &LossFn,
    train_rows: &[usize],
    eval_rows: Vec<usize>,
) -> FoldEval {
    let train = data.subset_rows(train_rows);
    let eval = data.subset_rows(&eval_rows);
    let fits = suite.fit_all(&train);
    let mut out = FoldEval {
        rows: eval_rows,
        losses: Vec::with_capacity(fits.len()),
        resid: Vec::with_capacity(fits.len()),
        taus: Vec::with_capacity(fits.len()),
    };
    for fit in fits {
        let usable = match fit {
            Ok(f) => {
                let resid = f.residuals(&eval);
                let l: Vec<f64> = resid.iter().map(|&r| loss.eval(r)).collect();
                l.iter().all(|v| v.is_finite()).then(|| (l, resid, f.tau))
            }
            Err(e) => {
                log::debug!("candidate fit failed: {e}");
                None
            }
        };
        match usable {
            Some((l, r, tau)) => {
                out.losses.push(Some(l));
                out.resid.push(Some(r));
                out.taus.push(tau);
            }
            None => {
                out.losses.push(None);
                out.resid.push(None);
                out.taus.push(None);
            }
        }
    }
    out
}

fn assemble<S: CandidateSuite + ?Sized>(suite: &S, folds: Vec<FoldEval>) -> Result<BuiltPanel> {
    let m_total = suite.len();
    let mut order: Vec<(usize, usize, usize)> = Vec::new();
    for (v, f) in folds.iter().enumerate() {
        for (pos, &row) in f.rows.iter().enumerate() {
            order.push((row, v, pos));
        }
    }
    order.sort_unstable();
    let failed: Vec<bool> = (0..m_total)
        .map(|j| folds.iter().any(|f| f.losses[j].is_none()))
        .collect();
    let mut columns = vec![Vec::with_capacity(order.len()); m_total];
    let mut residuals = vec![Vec::with_capacity(order.len()); m_total];
    for j in 0..m_total {
        for &(_, v, pos) in &order {
            let (l, r) = match (&folds[v].losses[j], &folds[v].resid[j]) {
                (Some(l), Some(r)) if !failed[j] => (l[pos], r[pos]),
                _ => (0.0, 0.0),
            };
            columns[j].push(l);
            residuals[j].push(r);
        }
    }
    let fold_tau = (0..m_total)
        .map(|j| folds.iter().map(|f| f.taus[j]).collect())
        .collect();
    Ok(BuiltPanel {
        panel: LossPanel::new(columns, suite.ids())?,
        failed,
        eval_rows: order.iter().map(|o| o.0).collect(),
        fold_of_row: order.iter().map(|o| o.1).collect(),
        residuals,
        fold_tau,
    })
}

/// Trains on one seeded half and evaluates every candidate on the other.
pub fn build_split_panel<S: CandidateSuite + ?Sized>(
    suite: &S,
    data: &Dataset,
    loss: &LossFn,
    seed: u64,
) -> Result<BuiltPanel> {
    if data.n() < 8 {
        return Err(invalid(format!("sample splitting needs at least 8 observations, got {}", data.n())));
    }
    if suite.len() < 2 {
        return Err(invalid("at least 2 candidate models are required"));
    }
    let (train, eval) = split_indices(data.n(), seed);
    assemble(suite, vec![evaluate_fold(suite, data, loss, &train, eval)])
}

/// Out-of-fold losses for every observation over `folds` seeded folds.
pub fn build_vfold_panel<S: CandidateSuite + ?Sized>(
    suite: &S,
    data: &Dataset,
    loss: &LossFn,
    folds: usize,
    seed: u64,
) -> Result<BuiltPanel> {
    if folds < 2 {
        return Err(invalid(format!("V-fold needs at least 2 folds, got {folds}")));
    }
    if data.n() < 2 * folds {
        return Err(invalid(format!(
            "V-fold with {folds} folds needs at least {} observations, got {}",
            2 * folds,
            data.n()
        )));
    }
    if suite.len() < 2 {
        return Err(invalid("at least 2 candidate models are required"));
    }
    let fold_of = fold_assignment(data.n(), folds, seed);
    build_panel_from_folds(suite, data, loss, &fold_of)
}

/// Out-of-fold panel for an explicit fold labelling.
pub fn build_panel_from_folds<S: CandidateSuite + ?Sized>(
    suite: &S,
    data: &Dataset,
    loss: &LossFn,
    fold_of: &[usize],
) -> Result<BuiltPanel> {
    if fold_of.len() != data.n() {
        return Err(contract("fold labels do not match the dataset"));
    }
    let folds = fold_of.iter().max().map_or(0, |v| v + 1);
    let evals: Vec<FoldEval> = (0..folds)
        .into_par_iter()
        .map(|v| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| fold_of[i] != v).collect();
            let eval: Vec<usize> = (0..data.n()).filter(|&i| fold_of[i] == v).collect();
            evaluate_fold(suite, data, loss, &train, eval)
        })
        .collect();
    assemble(suite, evals)
}

/// Sample-splitting rank-sum selection.
pub fn rsr_split<S: CandidateSuite + ?Sized>(
    suite: &S,
    data: &Dataset,
    loss: &LossFn,
    config: &SelectionConfig,
) -> Result<ConfidenceSet> {
    config.validate()?;
    let built = build_split_panel(suite, data, loss, config.seed)?;
    rsr_from_panel_masked(&built.panel, &built.failed, config, Method::RsrSplit)
}

/// V-fold rank-sum selection over all observations.
pub fn rsr_vfold<S: CandidateSuite + ?Sized>(
    suite: &S,
    data: &Dataset,
    loss: &LossFn,
    config: &SelectionConfig,
) -> Result<ConfidenceSet> {
    config.validate()?;
    let built = build_vfold_panel(suite, data, loss, config.folds, config.seed)?;
    rsr_from_panel_masked(&built.panel, &built.failed, config, Method::RsrVfold)
}
