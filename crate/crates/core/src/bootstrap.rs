//! Gaussian multiplier bootstrap for the minimum of a vector of centered
//! statistics.
//!
//! Draw `b` uses multipliers from a stream keyed by `(seed, b)`, so draws are
//! identical for any thread count. The same multiplier vector is applied to
//! every column within one draw.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Result};
use crate::ranksum::Projection;
use crate::rng::{domain, keyed_rng};

/// Dense row-major `n x p` matrix of per-observation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * p],
        }
    }

    /// Builds from `p` columns of equal length `n`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(contract("score columns differ in length"));
        }
        let mut out = Self::zeros(n, p);
        for (j, col) in columns.iter().enumerate() {
            for (k, &v) in col.iter().enumerate() {
                out.set(k, j, v);
            }
        }
        Ok(out)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        self.data[k * self.p + j] = v;
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.p..(k + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.get(k, j)).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.p];
        for k in 0..self.n {
            for (s, v) in sums.iter_mut().zip(self.row(k)) {
                *s += v;
            }
        }
        sums.iter().map(|s| s / self.n as f64).collect()
    }

    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, keep.len());
        for k in 0..self.n {
            for (c, &j) in keep.iter().enumerate() {
                out.set(k, c, self.get(k, j));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of multiplier draws `B`.
    pub draws: usize,
    pub seed: u64,
    pub projection: Projection,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            draws: 500,
            seed: 0,
            projection: Projection::Symmetrized,
        }
    }
}

impl BootstrapConfig {
    pub const MIN_DRAWS: usize = 100;

    pub fn validate(&self) -> Result<()> {
        if self.draws < Self::MIN_DRAWS {
            return Err(invalid(format!(
                "bootstrap needs at least {} draws, got {}",
                Self::MIN_DRAWS,
                self.draws
            )));
        }
        if self.draws < 500 {
            log::warn!("only {} bootstrap draws; 500 or more recommended", self.draws);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// `sqrt(n) * min_j mu_j`.
    pub t_obs: f64,
    pub draws: Vec<f64>,
    pub p_value: f64,
}

/// Draws `T_b = min_j n^{-1/2} sum_k psi[k, j] e_k` for `b = 0..B`.
pub fn multiplier_min_bootstrap(psi: &ScoreMatrix, config: &BootstrapConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let (n, p) = (psi.n_rows(), psi.n_cols());
    if p == 0 {
        return Err(contract("bootstrap needs at least one score column"));
    }
    if n < 2 {
        return Err(contract(format!("bootstrap needs n >= 2, got {n}")));
    }
    if psi.data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite bootstrap score"));
    }
    let scale = psi.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if let Some((j, m)) = psi
        .column_means()
        .into_iter()
        .enumerate()
        .find(|(_, m)| m.abs() > 1e-9 * scale)
    {
        return Err(contract(format!("score column {j} is not centered (mean {m:e})")));
    }

    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let draws = (0..config.draws)
        .into_par_iter()
        .map(|b| {
            let mut rng = keyed_rng(config.seed, &[domain::BOOTSTRAP, b as u64]);
            let mut acc = vec![0.0; p];
            for k in 0..n {
                let e: f64 = StandardNormal.sample(&mut rng);
                for (a, s) in acc.iter_mut().zip(psi.row(k)) {
                    *a += s * e;
                }
            }
            acc.into_iter().fold(f64::INFINITY, f64::min) * inv_sqrt_n
        })
        .collect();
    Ok(draws)
}

/// `#{b : draws[b] < t_obs} / B`.
pub fn p_value(t_obs: f64, draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(contract("p-value from an empty set of draws"));
    }
    let below = draws.iter().filter(|&&t| t < t_obs).count();
    Ok(below as f64 / draws.len() as f64)
}

/// Observed `sqrt(n) * min_j mu_j`, bootstrap draws, and the resulting p-value.
pub fn min_statistic_test(
    mu: &[f64],
    psi: &ScoreMatrix,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if mu.len() != psi.n_cols() {
        return Err(contract(format!(
            "{} statistics for {} score columns",
            mu.len(),
            psi.n_cols()
        )));
    }
    let t_obs = (psi.n_rows() as f64).sqrt() * mu.iter().copied().fold(f64::INFINITY, f64::min);
    let draws = multiplier_min_bootstrap(psi, config)?;
    let p_value = p_value(t_obs, &draws)?;
    Ok(BootstrapResult {
        t_obs,
        draws,
        p_value,
    })
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation followed by one Halley step against the
/// erfc-based CDF. Upper-half arguments are reflected (`1 - q` is exact there)
/// so the refinement always runs in the accurate lower tail.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!("normal quantile needs q in (0, 1), got {q}")));
    }
    if q > 0.5 {
        Ok(-lower_quantile(1.0 - q))
    } else {
        Ok(lower_quantile(q))
    }
}

fn lower_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if q < P_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let t = q - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - q;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
