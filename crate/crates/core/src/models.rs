//! Losses and linear learners used to build loss panels.
//!
//! All learners fit an unpenalized intercept plus a coefficient per covariate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Error, Result};

/// Classical 95%-efficiency Huber constant.
pub const HUBER_EFFICIENCY: f64 = 1.345;
/// MAD to standard deviation under normality.
pub const MAD_SCALE: f64 = 1.4826;

const IRLS_MAX_ITER: usize = 200;
const IRLS_TOL: f64 = 1e-8;
const PROX_MAX_ITER: usize = 2000;
const PROX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(contract(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        if y.len() < 2 {
            return Err(invalid(format!("dataset needs n >= 2, got {}", y.len())));
        }
        if x.ncols() < 1 {
            return Err(invalid("dataset needs at least one covariate"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        Ok(Self { x, y })
    }

    /// From row-major covariate rows.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(contract("covariate rows differ in length"));
        }
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(x, DVector::from_vec(y))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFn {
    Squared,
    Absolute,
    Huber { tau: f64 },
}

impl LossFn {
    pub fn huber(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid(format!("Huber tau must be finite and positive, got {tau}")));
        }
        Ok(Self::Huber { tau })
    }

    #[inline]
    pub fn eval(&self, residual: f64) -> f64 {
        loss_eval(self, residual)
    }
}

#[inline]
pub fn loss_eval(loss: &LossFn, r: f64) -> f64 {
    match *loss {
        LossFn::Squared => r * r,
        LossFn::Absolute => r.abs(),
        LossFn::Huber { tau } => huber(r, tau),
    }
}

#[inline]
fn huber(r: f64, tau: f64) -> f64 {
    let a = r.abs();
    if a <= tau {
        0.5 * r * r
    } else {
        tau * a - 0.5 * tau * tau
    }
}

#[inline]
fn huber_score(r: f64, tau: f64) -> f64 {
    r.clamp(-tau, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerTag {
    Ols,
    Huber,
    HuberAdaptive,
    HuberLasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLinear {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub learner: LearnerTag,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FittedLinear {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![self.intercept; x.nrows()];
        for (j, &b) in self.coef.iter().enumerate() {
            if b != 0.0 {
                for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
                    *o += b * v;
                }
            }
        }
        out
    }

    pub fn residuals(&self, data: &Dataset) -> Vec<f64> {
        self.predict(data.x())
            .into_iter()
            .zip(data.y().iter())
            .map(|(f, y)| y - f)
            .collect()
    }

    pub fn support(&self) -> Vec<usize> {
        self.coef
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn nonzeros(&self) -> usize {
        self.coef.iter().filter(|&&b| b != 0.0).count()
    }

    fn check_finite(self) -> Result<Self> {
        if self.intercept.is_finite() && self.coef.iter().all(|b| b.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Numerical("fit produced non-finite parameters".into()))
        }
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    d.columns_mut(1, x.ncols()).copy_from(x);
    d
}

/// Weighted least squares via Householder QR of `diag(sqrt(w)) * design`.
fn weighted_lstsq(design: &DMatrix<f64>, y: &DVector<f64>, w: Option<&[f64]>) -> Result<DVector<f64>> {
    let (a, b) = match w {
        Some(w) => {
            let mut a = design.clone();
            let mut b = y.clone();
            for (i, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                a.row_mut(i).scale_mut(s);
                b[i] *= s;
            }
            (a, b)
        }
        None => (design.clone(), y.clone()),
    };
    let p = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let rmax = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if rmax == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * rmax) {
        return Err(Error::Numerical("design is rank deficient".into()));
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))
}

fn split_params(beta: &DVector<f64>) -> (f64, Vec<f64>) {
    (beta[0], beta.iter().skip(1).copied().collect())
}

/// Ordinary least squares with intercept.
pub fn fit_ols(data: &Dataset) -> Result<FittedLinear> {
    ols_design(data.x(), data.y())
}

fn ols_design(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear> {
    let (n, d) = (y.len(), x.ncols());
    if n <= d + 1 {
        return Err(invalid(format!("OLS needs n > d + 1 (n = {n}, d = {d})")));
    }
    let beta = weighted_lstsq(&with_intercept(x), y, None)?;
    let (intercept, coef) = split_params(&beta);
    FittedLinear {
        intercept,
        coef,
        learner: LearnerTag::Ols,
        tau: None,
        lambda: None,
        converged: true,
        iterations: 1,
    }
    .check_finite()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Normal-consistent median absolute deviation about the median.
pub fn mad_scale(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    MAD_SCALE * median(&dev)
}

/// `1.345 * scale * sqrt(n / (d + ln n))`, with the scale floored away from 0.
pub fn adaptive_tau(scale: f64, n: usize, d: usize, magnitude: f64) -> f64 {
    let floor = 1e-8 * (1.0 + magnitude);
    let nf = n as f64;
    HUBER_EFFICIENCY * scale.max(floor) * (nf / (d as f64 + nf.ln())).sqrt()
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Huber robustification for the null (intercept-only) model of `data`.
pub fn null_model_tau(data: &Dataset) -> f64 {
    let y = data.y().as_slice();
    adaptive_tau(mad_scale(y), data.n(), data.d(), max_abs(y))
}

fn irls_huber(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau_rule: impl Fn(&[f64]) -> f64,
    tag: LearnerTag,
) -> Result<FittedLinear> {
    let (n, d) = (y.len(), x.ncols());
    if n <= d + 1 {
        return Err(invalid(format!("Huber regression needs n > d + 1 (n = {n}, d = {d})")));
    }
    let design = with_intercept(x);
    let mut beta = weighted_lstsq(&design, y, None)?;
    let mut w = vec![1.0; n];
    let mut tau = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=IRLS_MAX_ITER {
        iterations = it;
        let resid: Vec<f64> = (y - &design * &beta).iter().copied().collect();
        tau = tau_rule(&resid);
        for (wi, r) in w.iter_mut().zip(&resid) {
            *wi = if r.abs() <= tau { 1.0 } else { tau / r.abs() };
        }
        let next = weighted_lstsq(&design, y, Some(&w))?;
        let step = (&next - &beta).norm();
        beta = next;
        if step <= IRLS_TOL * beta.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("Huber IRLS stopped after {IRLS_MAX_ITER} iterations without converging");
    }
    let (intercept, coef) = split_params(&beta);
    FittedLinear {
        intercept,
        coef,
        learner: tag,
        tau: Some(tau),
        lambda: None,
        converged,
        iterations,
    }
    .check_finite()
}

/// Huber regression with a fixed robustification parameter, by IRLS.
pub fn fit_huber(data: &Dataset, tau: f64) -> Result<FittedLinear> {
    LossFn::huber(tau)?;
    irls_huber(data.x(), data.y(), |_| tau, LearnerTag::Huber)
}

/// Huber regression whose `tau` follows the residual scale.
///
/// Each IRLS iteration resets `tau = 1.345 * MAD(r) * sqrt(n / (d + ln n))`
/// from the current residuals. A fit that hits the iteration cap is returned
/// with `converged = false`.
pub fn fit_huber_adaptive(data: &Dataset) -> Result<FittedLinear> {
    huber_adaptive_design(data.x(), data.y())
}

fn huber_adaptive_design(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear> {
    let (n, d) = (y.len(), x.ncols());
    let mag = max_abs(y.as_slice());
    irls_huber(
        x,
        y,
        |resid| adaptive_tau(mad_scale(resid), n, d, mag),
        LearnerTag::HuberAdaptive,
    )
}

/// Minimizer of `sum_i huber(y_i - b)` by bisection on the monotone score.
pub fn huber_location(y: &[f64], tau: f64) -> f64 {
    let score = |b: f64| y.iter().map(|&v| huber_score(v - b, tau)).sum::<f64>();
    let (mut lo, mut hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// State of the penalized Huber problem at one parameter vector.
struct HuberLassoProblem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    tau: f64,
    lambda: f64,
}

impl HuberLassoProblem<'_> {
    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    fn residuals(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.y.iter().map(|v| v - b0).collect();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, xv) in r.iter_mut().zip(self.x.column(j).iter()) {
                    *ri -= b * xv;
                }
            }
        }
        r
    }

    fn smooth(&self, r: &[f64]) -> f64 {
        r.iter().map(|&v| huber(v, self.tau)).sum::<f64>() / self.n()
    }

    fn penalty(&self, beta: &[f64]) -> f64 {
        self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Gradient of the smooth part with respect to `(b0, beta)`.
    fn gradient(&self, r: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n();
        let psi: Vec<f64> = r.iter().map(|&v| huber_score(v, self.tau)).collect();
        let g0 = -psi.iter().sum::<f64>() / n;
        let g = self
            .x
            .column_iter()
            .map(|c| -c.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>() / n)
            .collect();
        (g0, g)
    }
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Warm-start state carried along a lambda path.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub step_scale: f64,
}

/// Penalized Huber fit plus the per-iteration objective trace.
#[derive(Debug, Clone)]
pub struct LassoTrace {
    pub fit: FittedLinear,
    pub objective: Vec<f64>,
    pub step_scale: f64,
}

/// `min (1/n) sum huber_tau(y - b0 - x'beta) + lambda |beta|_1`, intercept
/// unpenalized.
pub fn fit_huber_lasso(data: &Dataset, lambda: f64, tau: f64) -> Result<FittedLinear> {
    Ok(fit_huber_lasso_traced(data, lambda, tau, None)?.fit)
}

/// Accelerated proximal gradient with backtracking.
///
/// Momentum is reset whenever an extrapolated step would raise the objective,
/// so accepted iterates have non-increasing objective. Stops when the relative
/// objective change drops to `1e-9` or after 2000 iterations.
pub fn fit_huber_lasso_traced(
    data: &Dataset,
    lambda: f64,
    tau: f64,
    warm: Option<&WarmStart>,
) -> Result<LassoTrace> {
    huber_lasso_design(data.x(), data.y(), lambda, tau, warm)
}

fn huber_lasso_design(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    tau: f64,
    warm: Option<&WarmStart>,
) -> Result<LassoTrace> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    LossFn::huber(tau)?;
    let prob = HuberLassoProblem { x, y, tau, lambda };
    let p = x.ncols();

    let (mut b0, mut beta, mut lip) = match warm {
        Some(w) if w.coef.len() == p => (w.intercept, w.coef.clone(), w.step_scale),
        _ => (huber_location(y.as_slice(), tau), vec![0.0; p], 1.0),
    };
    let mut r = prob.residuals(b0, &beta);
    let mut obj = prob.smooth(&r) + prob.penalty(&beta);
    let mut trace = vec![obj];

    // extrapolated point and the previous iterate
    let (mut zb0, mut zbeta, mut zr) = (b0, beta.clone(), r.clone());
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=PROX_MAX_ITER {
        iterations = it;
        let fz = prob.smooth(&zr);
        let (g0, g) = prob.gradient(&zr);
        lip = (lip * 0.9).max(1e-12);
        let (nb0, nbeta, nr, nf) = loop {
            let nb0 = zb0 - g0 / lip;
            let nbeta: Vec<f64> = zbeta
                .iter()
                .zip(&g)
                .map(|(&z, &gj)| soft_threshold(z - gj / lip, lambda / lip))
                .collect();
            let nr = prob.residuals(nb0, &nbeta);
            let nf = prob.smooth(&nr);
            let mut lin = g0 * (nb0 - zb0);
            let mut sq = (nb0 - zb0).powi(2);
            for ((a, b), gj) in nbeta.iter().zip(&zbeta).zip(&g) {
                let dlt = a - b;
                lin += gj * dlt;
                sq += dlt * dlt;
            }
            if nf <= fz + lin + 0.5 * lip * sq + 1e-15 * fz.abs().max(1.0) {
                break (nb0, nbeta, nr, nf);
            }
            lip *= 2.0;
            if !lip.is_finite() {
                return Err(Error::Numerical("line search diverged".into()));
            }
        };
        let new_obj = nf + prob.penalty(&nbeta);

        if new_obj > obj {
            // momentum overshoot: restart from the current iterate
            if t > 1.0 {
                t = 1.0;
                zb0 = b0;
                zbeta.clone_from(&beta);
                zr.clone_from(&r);
                continue;
            }
            // a plain step cannot increase the objective beyond rounding
            converged = true;
            break;
        }

        let prev_b0 = b0;
        let prev_beta = std::mem::replace(&mut beta, nbeta);
        let prev_r = std::mem::replace(&mut r, nr);
        b0 = nb0;
        let change = (obj - new_obj).abs();
        obj = new_obj;
        trace.push(obj);
        if change <= PROX_TOL * obj.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        t = t_next;
        zb0 = b0 + mom * (b0 - prev_b0);
        for ((z, &c), &pv) in zbeta.iter_mut().zip(&beta).zip(&prev_beta) {
            *z = c + mom * (c - pv);
        }
        for ((z, &c), &pv) in zr.iter_mut().zip(&r).zip(&prev_r) {
            *z = c + mom * (c - pv);
        }
    }

    let fit = FittedLinear {
        intercept: b0,
        coef: beta,
        learner: LearnerTag::HuberLasso,
        tau: Some(tau),
        lambda: Some(lambda),
        converged,
        iterations,
    }
    .check_finite()?;
    Ok(LassoTrace {
        fit,
        objective: trace,
        step_scale: lip,
    })
}

/// Strictly decreasing penalty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    values: Vec<f64>,
}

impl LambdaPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty lambda path"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("lambda path values must be finite and positive"));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("lambda path must be strictly decreasing"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Smallest penalty at which the all-zero coefficient vector is optimal.
pub fn lambda_max(data: &Dataset, tau: f64) -> Result<f64> {
    LossFn::huber(tau)?;
    let prob = HuberLassoProblem {
        x: data.x(),
        y: data.y(),
        tau,
        lambda: 1.0,
    };
    let b0 = huber_location(data.y().as_slice(), tau);
    let r = prob.residuals(b0, &vec![0.0; data.d()]);
    let (_, g) = prob.gradient(&r);
    let lmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lmax <= 0.0 {
        return Err(invalid("lambda_max is zero (degenerate design or response)"));
    }
    Ok(lmax)
}

/// `k_path` log-spaced values from `lambda_max` down to `0.01 * lambda_max`.
pub fn lambda_path_with_tau(data: &Dataset, tau: f64, k_path: usize) -> Result<LambdaPath> {
    if k_path == 0 {
        return Err(invalid("lambda path needs at least one value"));
    }
    if data.x().iter().all(|&v| v == 0.0) {
        return Err(invalid("all-zero design"));
    }
    let lmax = lambda_max(data, tau)?;
    if k_path == 1 {
        return LambdaPath::new(vec![lmax]);
    }
    let last = (k_path - 1) as f64;
    let values = (0..k_path)
        .map(|i| {
            if i + 1 == k_path {
                lmax * 0.01
            } else {
                lmax * 0.01f64.powf(i as f64 / last)
            }
        })
        .collect();
    LambdaPath::new(values)
}

/// Path using the null-model robustification parameter of `data`.
pub fn lambda_path(data: &Dataset, k_path: usize) -> Result<LambdaPath> {
    lambda_path_with_tau(data, null_model_tau(data), k_path)
}

/// Rescales a penalty tuned on `(K-1)/K` of the data to the full sample.
pub fn lambda_fold_correction(lambda: f64, folds: usize) -> Result<f64> {
    if folds < 2 {
        return Err(invalid(format!("fold correction needs K >= 2, got {folds}")));
    }
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(lambda * (1.0 - 1.0 / folds as f64).sqrt())
}

/// One intercept-containing subset model over the covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub mask: u32,
    pub columns: Vec<usize>,
}

impl SubsetSpec {
    pub fn name(&self) -> String {
        if self.columns.is_empty() {
            "intercept".to_string()
        } else {
            self.columns
                .iter()
                .map(|c| format!("x{}", c + 1))
                .collect::<Vec<_>>()
                .join("+")
        }
    }
}

/// All `2^d` subsets in increasing mask order (bit `j` = covariate `j`).
pub fn enumerate_subsets(d: usize) -> Result<Vec<SubsetSpec>> {
    if d == 0 || d > 20 {
        return Err(invalid(format!("subset enumeration supports 1 <= d <= 20, got {d}")));
    }
    Ok((0u32..(1u32 << d))
        .map(|mask| SubsetSpec {
            mask,
            columns: (0..d).filter(|j| mask & (1 << j) != 0).collect(),
        })
        .collect())
}

/// A training procedure producing a linear predictor.
pub trait Learner: Send + Sync {
    fn name(&self) -> String;

    /// Fits on an explicit design; `x` may have zero columns (intercept only).
    fn fit_design(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear>;

    fn fit(&self, data: &Dataset) -> Result<FittedLinear> {
        self.fit_design(data.x(), data.y())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Ols;

impl Learner for Ols {
    fn name(&self) -> String {
        "ols".into()
    }

    fn fit_design(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear> {
        ols_design(x, y)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AdaptiveHuber;

impl Learner for AdaptiveHuber {
    fn name(&self) -> String {
        "huber".into()
    }

    fn fit_design(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear> {
        huber_adaptive_design(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HuberLasso {
    pub lambda: f64,
    pub tau: f64,
}

impl Learner for HuberLasso {
    fn name(&self) -> String {
        format!("huber_lasso(lambda={:.6e})", self.lambda)
    }

    fn fit_design(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear> {
        Ok(huber_lasso_design(x, y, self.lambda, self.tau, None)?.fit)
    }
}

/// Fits `inner` on a covariate subset and embeds the result in full dimension.
pub struct SubsetLearner<L> {
    pub spec: SubsetSpec,
    pub inner: L,
}

impl<L: Learner> Learner for SubsetLearner<L> {
    fn name(&self) -> String {
        format!("{}[{}]", self.inner.name(), self.spec.name())
    }

    fn fit_design(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedLinear> {
        if let Some(&c) = self.spec.columns.iter().find(|&&c| c >= x.ncols()) {
            return Err(contract(format!("subset column {c} outside a {}-column design", x.ncols())));
        }
        let fit = self.inner.fit_design(&x.select_columns(&self.spec.columns), y)?;
        let mut coef = vec![0.0; x.ncols()];
        for (&c, &b) in self.spec.columns.iter().zip(&fit.coef) {
            coef[c] = b;
        }
        Ok(FittedLinear { coef, ..fit })
    }
}

pub const LEARNER_NAMES: [&str; 3] = ["ols", "huber", "huber_lasso"];

/// Learner lookup for configuration files. `huber_lasso` needs data to place
/// its penalty grid; see [`learners_by_name`].
pub fn learner_by_name(name: &str) -> Result<Box<dyn Learner>> {
    match name {
        "ols" => Ok(Box::new(Ols)),
        "huber" => Ok(Box::new(AdaptiveHuber)),
        "huber_lasso" => Err(invalid("huber_lasso expands to a penalty path; use learners_by_name")),
        other => Err(invalid(format!(
            "unknown learner {other:?} (expected one of {})",
            LEARNER_NAMES.join(", ")
        ))),
    }
}

/// Candidate list for named learners; `huber_lasso` contributes one candidate
/// per value of a `k_path`-point penalty path built on `data`.
pub fn learners_by_name(names: &[&str], data: &Dataset, k_path: usize) -> Result<Vec<Box<dyn Learner>>> {
    let mut out: Vec<Box<dyn Learner>> = Vec::new();
    for &name in names {
        if name == "huber_lasso" {
            let tau = null_model_tau(data);
            for &lambda in lambda_path_with_tau(data, tau, k_path)?.values() {
                out.push(Box::new(HuberLasso { lambda, tau }));
            }
        } else {
            out.push(learner_by_name(name)?);
        }
    }
    Ok(out)
}
