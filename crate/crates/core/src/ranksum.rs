//! Generalized rank-sum statistics over dependent loss samples.
//!
//! Conventions used throughout:
//!
//! * `u` is the plain fraction of ordered pairs `(k, l)`, diagonal included,
//!   with `a_k < b_l`; `mu = u - 0.5`.
//! * `se` is the standard error of `mu`, i.e. `sqrt((1/6 - 2 cov) / n)`.
//! * The `sqrt(n)` scaling of test statistics is applied once, in
//!   [`crate::bootstrap`].
//!
//! Exact ties are resolved by a fair coin per tied pair. Coins are consumed in
//! `(k, l)` lexicographic order so the sort-based path and a double loop over
//! all pairs agree bit for bit on the same [`TieStream`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::ScoreMatrix;
use crate::error::{contract, invalid, Result};
use crate::rng::TieStream;

/// Floor on `n * se^2` so z-scores stay finite for co-monotone columns.
pub const VARIANCE_FLOOR: f64 = 1e-6;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid(format!("{what}: non-finite value at position {i}"))),
        None => Ok(()),
    }
}

/// Per-observation losses of one fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!(
                "loss vector needs at least 2 values, got {}",
                values.len()
            )));
        }
        check_finite(&values, "loss vector")?;
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for LossVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `n x M` losses, one column per candidate model, evaluated on the same points.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPanel {
    n: usize,
    columns: Vec<Vec<f64>>,
    model_ids: Vec<String>,
}

impl LossPanel {
    pub fn new(columns: Vec<Vec<f64>>, model_ids: Vec<String>) -> Result<Self> {
        if columns.len() < 2 {
            return Err(invalid(format!(
                "loss panel needs at least 2 models, got {}",
                columns.len()
            )));
        }
        if model_ids.len() != columns.len() {
            return Err(contract(format!(
                "{} model ids for {} columns",
                model_ids.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(invalid(format!(
                "loss panel needs at least 2 observations, got {n}"
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(contract(format!(
                    "column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!(
                    "non-finite loss at row {i}, model {}",
                    model_ids[j]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &model_ids {
            if !seen.insert(id.as_str()) {
                return Err(invalid(format!("duplicate model id {id:?}")));
            }
        }
        Ok(Self {
            n,
            columns,
            model_ids,
        })
    }

    /// Panel with ids `0..M`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..columns.len()).map(|j| j.to_string()).collect();
        Self::new(columns, ids)
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn n_models(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn mean_losses(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| c.iter().sum::<f64>() / self.n as f64)
            .collect()
    }

    /// Applies `f` to every loss value. Fails if `f` produces non-finite output.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| c.iter().map(|&v| f(v)).collect())
            .collect();
        Self::new(columns, self.model_ids.clone())
    }
}

/// Right-closed empirical distribution function, `F(x) = #{v <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empirical CDF of an empty sample"));
        }
        check_finite(values, "empirical CDF sample")?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

/// Bootstrap score construction for a rank-sum pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Row means of the pair kernel only.
    RowOnly,
    /// Row plus column means (full Hajek projection).
    #[default]
    Symmetrized,
}

impl std::str::FromStr for Projection {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row_only" => Ok(Self::RowOnly),
            "symmetrized" => Ok(Self::Symmetrized),
            other => Err(invalid(format!(
                "unknown projection {other:?} (expected row_only or symmetrized)"
            ))),
        }
    }
}

impl std::fmt::Display for Projection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RowOnly => "row_only",
            Self::Symmetrized => "symmetrized",
        })
    }
}

/// Win counts for one ordered pair of loss columns.
///
/// `row_wins[k] = #{l : a_k < b_l}`, `col_wins[l] = #{k : a_k < b_l}`, ties
/// resolved by coin flips attributed to the specific `(k, l)` pair.
#[derive(Debug, Clone)]
pub(crate) struct PairCounts {
    pub row_wins: Vec<u32>,
    pub col_wins: Vec<u32>,
    pub total: u64,
}

pub(crate) fn pair_counts(a: &[f64], b: &[f64], ties: &mut TieStream) -> PairCounts {
    let n = a.len();
    debug_assert_eq!(n, b.len());

    let mut b_sorted: Vec<(f64, u32)> = b.iter().enumerate().map(|(l, &v)| (v, l as u32)).collect();
    // finite by construction; equal values (including +-0) ordered by index
    b_sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
    let mut a_sorted = a.to_vec();
    a_sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut row_wins = vec![0u32; n];
    let mut tie_wins = vec![0u32; n];
    let mut total = 0u64;
    for (k, &ak) in a.iter().enumerate() {
        let lo = b_sorted.partition_point(|&(v, _)| v < ak);
        let hi = lo + b_sorted[lo..].partition_point(|&(v, _)| v <= ak);
        let mut wins = (n - hi) as u32;
        for &(_, l) in &b_sorted[lo..hi] {
            if ties.coin() {
                wins += 1;
                tie_wins[l as usize] += 1;
            }
        }
        row_wins[k] = wins;
        total += wins as u64;
    }

    let col_wins = b
        .iter()
        .zip(&tie_wins)
        .map(|(&bl, &t)| a_sorted.partition_point(|&v| v < bl) as u32 + t)
        .collect();

    PairCounts {
        row_wins,
        col_wins,
        total,
    }
}

/// Fraction of ordered pairs `(k, l)` with `a_k < b_l`, in `[0, 1]`.
pub fn ranksum_u(a: &[f64], b: &[f64], ties: &mut TieStream) -> Result<f64> {
    if a.len() != b.len() {
        return Err(contract(format!(
            "rank-sum inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(contract("rank-sum inputs are empty"));
    }
    check_finite(a, "rank-sum first sample")?;
    check_finite(b, "rank-sum second sample")?;
    let n = a.len() as f64;
    Ok(pair_counts(a, b, ties).total as f64 / (n * n))
}

/// Single kernel element `1{a < b} - 0.5` with a coin on equality.
pub fn xi_element(a: f64, b: f64, ties: &mut TieStream) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(invalid("kernel element on non-finite input"));
    }
    let win = if a == b { ties.coin() } else { a < b };
    Ok(if win { 0.5 } else { -0.5 })
}

/// Fraction of reference losses strictly below one held-out loss.
pub fn conformal_pvalue_single(losses: &[f64], holdout: f64, ties: &mut TieStream) -> Result<f64> {
    if losses.is_empty() {
        return Err(contract("conformal p-value needs at least one loss"));
    }
    check_finite(losses, "reference losses")?;
    if !holdout.is_finite() {
        return Err(invalid("non-finite held-out loss"));
    }
    let below = losses
        .iter()
        .filter(|&&v| if v == holdout { ties.coin() } else { v < holdout })
        .count();
    Ok(below as f64 / losses.len() as f64)
}

/// Standard error of `mu` for the pair `(a, b)`:
/// `sqrt(max(floor, 1/6 - 2 cov(F_a(b_i), F_b(a_i))) / n)`.
pub fn se_ranksum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(contract(format!(
            "standard error inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(contract("standard error needs at least 2 observations"));
    }
    let cdf_a = EmpiricalCdf::new(a)?;
    let cdf_b = EmpiricalCdf::new(b)?;
    let nf = n as f64;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for (&ai, &bi) in a.iter().zip(b) {
        let x = cdf_a.eval(bi);
        let y = cdf_b.eval(ai);
        sx += x;
        sy += y;
        sxy += x * y;
    }
    let cov = sxy / nf - (sx / nf) * (sy / nf);
    let v = (1.0 / 6.0 - 2.0 * cov).max(VARIANCE_FLOOR);
    Ok((v / nf).sqrt())
}

/// Rank-sum summaries of a reference model against a list of competitors.
#[derive(Debug, Clone)]
pub struct PairStats {
    pub reference: usize,
    pub competitors: Vec<usize>,
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
    pub se: Vec<f64>,
    /// `n x competitors.len()` bootstrap scores, mean zero per column.
    pub psi: ScoreMatrix,
}

impl PairStats {
    pub fn n_obs(&self) -> usize {
        self.psi.n_rows()
    }

    /// `mu / se` per competitor (already carries the `sqrt(n)` factor).
    pub fn z_scores(&self) -> Vec<f64> {
        self.mu.iter().zip(&self.se).map(|(m, s)| m / s).collect()
    }

    /// Restricts every per-competitor field to the given positions.
    pub fn select(&self, keep: &[usize]) -> PairStats {
        PairStats {
            reference: self.reference,
            competitors: keep.iter().map(|&i| self.competitors[i]).collect(),
            u: keep.iter().map(|&i| self.u[i]).collect(),
            mu: keep.iter().map(|&i| self.mu[i]).collect(),
            se: keep.iter().map(|&i| self.se[i]).collect(),
            psi: self.psi.select_columns(keep),
        }
    }
}

/// [`pair_stats_against`] over every other model in the panel.
pub fn pair_stats(
    panel: &LossPanel,
    reference: usize,
    projection: Projection,
    tie_seed: u64,
) -> Result<PairStats> {
    let competitors: Vec<usize> = (0..panel.n_models()).filter(|&j| j != reference).collect();
    pair_stats_against(panel, reference, &competitors, projection, tie_seed)
}

/// Rank-sum statistics of `reference` against each of `competitors`.
///
/// Each pair `(reference, j)` draws its tie-breaking coins from a stream keyed
/// by `(tie_seed, reference, j)`.
pub fn pair_stats_against(
    panel: &LossPanel,
    reference: usize,
    competitors: &[usize],
    projection: Projection,
    tie_seed: u64,
) -> Result<PairStats> {
    let m_total = panel.n_models();
    if reference >= m_total {
        return Err(contract(format!(
            "reference model {reference} out of range for {m_total} models"
        )));
    }
    if let Some(&j) = competitors.iter().find(|&&j| j >= m_total || j == reference) {
        return Err(contract(format!("invalid competitor index {j}")));
    }
    let n = panel.n_obs();
    if n < 4 {
        return Err(contract(format!("pair statistics need n >= 4, got {n}")));
    }
    let nf = n as f64;
    let a = panel.column(reference);

    let per_pair: Vec<(f64, f64, Vec<f64>)> = competitors
        .par_iter()
        .map(|&j| {
            let b = panel.column(j);
            let mut ties = TieStream::for_pair(tie_seed, reference, j);
            let counts = pair_counts(a, b, &mut ties);
            let u = counts.total as f64 / (nf * nf);
            let mu = u - 0.5;
            let psi: Vec<f64> = match projection {
                Projection::RowOnly => counts
                    .row_wins
                    .iter()
                    .map(|&r| (r as f64 / nf - 0.5) - mu)
                    .collect(),
                Projection::Symmetrized => counts
                    .row_wins
                    .iter()
                    .zip(&counts.col_wins)
                    .map(|(&r, &c)| (r as f64 + c as f64) / nf - 1.0 - 2.0 * mu)
                    .collect(),
            };
            // inputs were validated when the panel was built
            let se = se_ranksum(a, b).expect("validated panel columns");
            (u, se, psi)
        })
        .collect();

    let p = competitors.len();
    let mut psi = ScoreMatrix::zeros(n, p);
    let mut u = Vec::with_capacity(p);
    let mut se = Vec::with_capacity(p);
    for (col, (uj, sej, scores)) in per_pair.into_iter().enumerate() {
        u.push(uj);
        se.push(sej);
        for (k, s) in scores.into_iter().enumerate() {
            psi.set(k, col, s);
        }
    }
    let mu = u.iter().map(|x| x - 0.5).collect();
    Ok(PairStats {
        reference,
        competitors: competitors.to_vec(),
        u,
        mu,
        se,
        psi,
    })
}

/// Estimated first-order projections of a two-sample kernel, from the
/// `n x n` matrix `h(U_k, V_l)`: centered row means and centered column means.
pub fn projection_estimates(kernel: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if !kernel.is_square() || kernel.nrows() == 0 {
        return Err(contract(format!(
            "kernel matrix must be square and non-empty, got {}x{}",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    check_finite(kernel.as_slice(), "kernel matrix")?;
    let n = kernel.nrows() as f64;
    let grand = kernel.sum() / (n * n);
    let g1 = DVector::from_iterator(
        kernel.nrows(),
        kernel.row_iter().map(|r| r.sum() / n - grand),
    );
    let g2 = DVector::from_iterator(
        kernel.ncols(),
        kernel.column_iter().map(|c| c.sum() / n - grand),
    );
    Ok((g1, g2))
}

/// `(1/n) sum_i (g1_i + g2_i)(g1_i + g2_i)^T` for `n x p` projection scores.
pub fn gamma_hat(g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g1.shape() != g2.shape() {
        return Err(contract(format!(
            "projection shapes differ: {:?} vs {:?}",
            g1.shape(),
            g2.shape()
        )));
    }
    if g1.nrows() == 0 {
        return Err(contract("projection scores are empty"));
    }
    let s = g1 + g2;
    Ok(s.transpose() * &s / g1.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ties() -> TieStream {
        TieStream::new(7)
    }

    /// Double loop over all ordered pairs, coins consumed in (k, l) order.
    fn brute_force_u(a: &[f64], b: &[f64], ties: &mut TieStream) -> f64 {
        let n = a.len();
        let mut wins = 0u64;
        for &ak in a {
            for &bl in b {
                if ak < bl || (ak == bl && ties.coin()) {
                    wins += 1;
                }
            }
        }
        wins as f64 / (n * n) as f64
    }

    #[test]
    fn ranksum_examples() {
        assert_eq!(ranksum_u(&[1.0, 2.0], &[3.0, 4.0], &mut ties()).unwrap(), 1.0);
        assert_eq!(ranksum_u(&[3.0, 4.0], &[1.0, 2.0], &mut ties()).unwrap(), 0.0);
        assert_eq!(ranksum_u(&[1.0, 3.0], &[2.0, 4.0], &mut ties()).unwrap(), 0.75);
    }

    #[test]
    fn ranksum_rejects_bad_input() {
        assert!(matches!(
            ranksum_u(&[1.0, 2.0], &[1.0], &mut ties()),
            Err(crate::Error::Contract(_))
        ));
        assert!(matches!(
            ranksum_u(&[1.0, f64::NAN], &[1.0, 2.0], &mut ties()),
            Err(crate::Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ranksum_with_ties_matches_brute_force_stream() {
        let a = [1.0, 2.0, 2.0, 3.0, 0.0, -0.0, 5.0];
        let b = [2.0, 2.0, 1.0, 0.0, 3.0, 3.0, -0.0];
        for seed in 0..50 {
            let fast = ranksum_u(&a, &b, &mut TieStream::new(seed)).unwrap();
            let slow = brute_force_u(&a, &b, &mut TieStream::new(seed));
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn xi_elements() {
        assert_eq!(xi_element(1.0, 2.0, &mut ties()).unwrap(), 0.5);
        assert_eq!(xi_element(2.0, 1.0, &mut ties()).unwrap(), -0.5);
        let mut t = ties();
        let draws: Vec<f64> = (0..2000).map(|_| xi_element(5.0, 5.0, &mut t).unwrap()).collect();
        assert!(draws.iter().all(|&x| x == 0.5 || x == -0.5));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.05, "tie coin mean {mean}");
        assert!(xi_element(f64::INFINITY, 1.0, &mut t).is_err());
    }

    #[test]
    fn conformal_pvalue_examples() {
        assert_eq!(conformal_pvalue_single(&[1.0, 2.0, 3.0], 10.0, &mut ties()).unwrap(), 1.0);
        assert_eq!(conformal_pvalue_single(&[1.0, 2.0, 3.0], 0.0, &mut ties()).unwrap(), 0.0);
        assert_eq!(
            conformal_pvalue_single(&[1.0, 2.0, 3.0, 4.0], 2.5, &mut ties()).unwrap(),
            0.5
        );
    }

    #[test]
    fn ecdf_conventions() {
        let f = EmpiricalCdf::new(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(f.sorted_values(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(f.eval(f64::NEG_INFINITY), 0.0);
        assert_eq!(f.eval(f64::INFINITY), 1.0);
        assert_eq!(f.eval(2.0), 0.75);
        assert_eq!(f.eval(1.5), 0.25);
        assert!(EmpiricalCdf::new(&[]).is_err());
    }

    /// Straight-line evaluation of the variance estimate: explicit double loops
    /// for both empirical CDFs and a two-pass covariance.
    fn se_oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let nf = n as f64;
        let f1: Vec<f64> = b
            .iter()
            .map(|&bi| a.iter().filter(|&&ak| ak <= bi).count() as f64 / nf)
            .collect();
        let f2: Vec<f64> = a
            .iter()
            .map(|&ai| b.iter().filter(|&&bl| bl <= ai).count() as f64 / nf)
            .collect();
        let m1 = f1.iter().sum::<f64>() / nf;
        let m2 = f2.iter().sum::<f64>() / nf;
        let cov = f1.iter().zip(&f2).map(|(x, y)| (x - m1) * (y - m2)).sum::<f64>() / nf;
        ((1.0 / 6.0 - 2.0 * cov).max(VARIANCE_FLOOR) / nf).sqrt()
    }

    fn lcg_uniforms(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn se_matches_direct_evaluation() {
        let a = lcg_uniforms(1, 50);
        let noise = lcg_uniforms(2, 50);
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + 0.7 * e).collect();
        let got = se_ranksum(&a, &b).unwrap();
        let want = se_oracle(&a, &b);
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn se_independent_and_comonotone() {
        let n = 2000;
        let a = lcg_uniforms(11, n);
        let b: Vec<f64> = lcg_uniforms(12, n).iter().map(|x| x * x).collect();
        let v = se_ranksum(&a, &b).unwrap().powi(2) * n as f64;
        assert!((v - 1.0 / 6.0).abs() < 0.02, "n se^2 = {v}");
        let same = se_ranksum(&a, &a).unwrap().powi(2) * n as f64;
        assert!((same - VARIANCE_FLOOR).abs() < 1e-15, "co-monotone n se^2 = {same}");
    }

    /// Monte-Carlo check that the co-monotone covariance term is 1/12.
    #[test]
    fn comonotone_covariance_is_one_twelfth() {
        let n = 5000;
        let a = lcg_uniforms(5, n);
        let f = EmpiricalCdf::new(&a).unwrap();
        let vals: Vec<f64> = a.iter().map(|&x| f.eval(x)).collect();
        let m = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0 / 12.0).abs() < 1e-3, "{var}");
    }

    #[test]
    fn pair_stats_centering_and_identity() {
        // 3 models, n = 10, integer losses with ties
        let cols = vec![
            vec![1., 2., 3., 4., 5., 6., 7., 8., 9., 10.],
            vec![2., 2., 5., 1., 7., 7., 3., 9., 9., 1.],
            vec![4., 4., 4., 4., 4., 4., 4., 4., 4., 4.],
        ];
        let panel = LossPanel::from_columns(cols).unwrap();
        for proj in [Projection::RowOnly, Projection::Symmetrized] {
            let st = pair_stats(&panel, 0, proj, 3).unwrap();
            assert_eq!(st.competitors, vec![1, 2]);
            for (j, (&u, &mu)) in st.u.iter().zip(&st.mu).enumerate() {
                assert_eq!(mu, u - 0.5);
                assert!(st.se[j] > 0.0);
            }
            for c in st.psi.column_means() {
                assert!(c.abs() <= 1e-12 * 10.0, "column mean {c}");
            }
        }
    }

    #[test]
    fn pair_stats_identical_columns_near_zero() {
        let x = lcg_uniforms(99, 400);
        let panel = LossPanel::from_columns(vec![x.clone(), x]).unwrap();
        let st = pair_stats(&panel, 0, Projection::Symmetrized, 5).unwrap();
        assert!(st.mu[0].abs() <= 2.0 / 20.0);
    }

    #[test]
    fn pair_stats_u_matches_double_loop() {
        let n = 20;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| lcg_uniforms(40 + j, n).iter().map(|v| (v * 8.0).floor()).collect())
            .collect();
        let panel = LossPanel::from_columns(cols.clone()).unwrap();
        let st = pair_stats(&panel, 1, Projection::Symmetrized, 77).unwrap();
        for (pos, &j) in st.competitors.iter().enumerate() {
            let mut t = TieStream::for_pair(77, 1, j);
            let want = brute_force_u(&cols[1], &cols[j], &mut t);
            assert_eq!(st.u[pos], want);
        }
    }

    #[test]
    fn symmetrized_scores_match_kernel_projection() {
        // tie-free so the kernel matrix is deterministic
        let n = 30;
        let a = lcg_uniforms(1, n);
        let b: Vec<f64> = lcg_uniforms(2, n).iter().zip(&a).map(|(e, x)| x + e - 0.5).collect();
        let panel = LossPanel::from_columns(vec![a.clone(), b.clone()]).unwrap();
        let st = pair_stats(&panel, 0, Projection::Symmetrized, 0).unwrap();
        let kernel = DMatrix::from_fn(n, n, |k, l| if a[k] < b[l] { 1.0 } else { 0.0 });
        let (g1, g2) = projection_estimates(&kernel).unwrap();
        for k in 0..n {
            assert!((st.psi.get(k, 0) - (g1[k] + g2[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_estimate_examples() {
        let (g1, g2) = projection_estimates(&DMatrix::from_element(3, 3, 2.5)).unwrap();
        assert!(g1.iter().chain(g2.iter()).all(|&v| v == 0.0));

        // h(u, v) = u + v, U = [1, 2], V = [10, 20]
        let k = DMatrix::from_row_slice(2, 2, &[11.0, 21.0, 12.0, 22.0]);
        let (g1, g2) = projection_estimates(&k).unwrap();
        assert_eq!(g1.as_slice(), &[-0.5, 0.5]);
        assert_eq!(g2.as_slice(), &[-5.0, 5.0]);

        let r = DMatrix::from_iterator(5, 5, lcg_uniforms(3, 25));
        let (g1, g2) = projection_estimates(&r).unwrap();
        assert!(g1.sum().abs() < 1e-12 && g2.sum().abs() < 1e-12);
        assert!(projection_estimates(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn gamma_hat_examples() {
        // columns orthonormal scaled by sqrt(n) -> identity
        let n = 4;
        let s = (n as f64).sqrt() / 2.0;
        let g1 = DMatrix::from_row_slice(4, 2, &[s, s, s, -s, -s, s, -s, -s]);
        let g2 = DMatrix::zeros(4, 2);
        let gam = gamma_hat(&g1, &g2).unwrap();
        assert!((gam - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);

        let g1 = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 1.0]);
        let g2 = DMatrix::from_column_slice(3, 1, &[0.5, 0.0, -0.5]);
        let gam = gamma_hat(&g1, &g2).unwrap();
        let pop_var = (1.5f64.powi(2) + 4.0 + 0.25) / 3.0;
        assert!((gam[(0, 0)] - pop_var).abs() < 1e-12);

        // textbook second-moment matrix
        let g1 = DMatrix::from_iterator(20, 3, lcg_uniforms(8, 60));
        let g2 = DMatrix::from_iterator(20, 3, lcg_uniforms(9, 60));
        let gam = gamma_hat(&g1, &g2).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for i in 0..20 {
                    acc += (g1[(i, r)] + g2[(i, r)]) * (g1[(i, c)] + g2[(i, c)]);
                }
                assert!((gam[(r, c)] - acc / 20.0).abs() < 1e-12);
            }
        }
        assert!(gamma_hat(&g1, &DMatrix::zeros(20, 2)).is_err());
    }

    #[test]
    fn panel_validation() {
        assert!(LossPanel::from_columns(vec![vec![1.0, 2.0]]).is_err());
        assert!(LossPanel::from_columns(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(LossPanel::from_columns(vec![vec![1.0, f64::NAN], vec![2.0, 1.0]]).is_err());
        assert!(LossPanel::new(
            vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            vec!["a".into(), "a".into()]
        )
        .is_err());
    }

    fn distinct_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=64).prop_flat_map(|n| {
            proptest::collection::hash_set(-1_000_000i64..1_000_000, 2 * n).prop_map(move |set| {
                let v: Vec<f64> = set.into_iter().map(|x| x as f64 / 7.0).collect();
                (v[..n].to_vec(), v[n..].to_vec())
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fast_equals_brute_force((a, b) in distinct_pair()) {
            let fast = ranksum_u(&a, &b, &mut TieStream::new(1)).unwrap();
            let slow = brute_force_u(&a, &b, &mut TieStream::new(1));
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn swap_sums_to_one((a, b) in distinct_pair()) {
            let ab = ranksum_u(&a, &b, &mut TieStream::new(2)).unwrap();
            let ba = ranksum_u(&b, &a, &mut TieStream::new(2)).unwrap();
            prop_assert_eq!(ab + ba, 1.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn monotone_transform_invariance(
            raw in proptest::collection::vec((0u8..20, 0u8..20), 4..40),
            seed in any::<u64>(),
        ) {
            let a: Vec<f64> = raw.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = raw.iter().map(|p| p.1 as f64).collect();
            let f = |x: f64| (x / 3.0).exp() + 2.0 * x;
            let ta: Vec<f64> = a.iter().map(|&x| f(x)).collect();
            let tb: Vec<f64> = b.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(
                ranksum_u(&a, &b, &mut TieStream::new(seed)).unwrap(),
                ranksum_u(&ta, &tb, &mut TieStream::new(seed)).unwrap()
            );
            prop_assert_eq!(se_ranksum(&a, &b).unwrap(), se_ranksum(&ta, &tb).unwrap());
        }

        #[test]
        fn psi_columns_are_centered(
            cols in proptest::collection::vec(proptest::collection::vec(0u8..6, 12), 3),
            seed in any::<u64>(),
        ) {
            let cols: Vec<Vec<f64>> = cols.into_iter().map(|c| c.into_iter().map(f64::from).collect()).collect();
            let panel = LossPanel::from_columns(cols).unwrap();
            for proj in [Projection::RowOnly, Projection::Symmetrized] {
                let st = pair_stats(&panel, 2, proj, seed).unwrap();
                for c in st.psi.column_means() {
                    prop_assert!(c.abs() <= 1e-12 * 12.0);
                }
            }
        }
    }
}
