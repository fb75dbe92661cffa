//! Knockoff filter: lasso coefficient-difference statistics, knockoff and knockoff+
//! thresholds, the unconditional Gaussian baseline and metrics.

mod lasso;

pub use lasso::{column_order, cv_lasso_path, lambda_grid, lasso_fixed_lambda, Family, LassoFit, LassoOptions, COEF_TOL};

use crate::error::{KnockoffError, Result};
use crate::gaussian_core::check_s_feasible;
use crate::linalg::{chol_solve, cholesky};
use crate::rng::RngStream;
use crate::{KnockoffResult, Matrix};
use serde::{Deserialize, Serialize};

pub const DEFAULT_Q: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Lcd,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WStatistics {
    pub w: Vec<f64>,
    pub kind: StatisticKind,
    pub lambda_selected: f64,
}

impl WStatistics {
    /// Wraps statistics from a user-supplied flip-sign function.
    pub fn custom(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(KnockoffError::InvalidInput("non-finite statistic".into()));
        }
        Ok(WStatistics { w, kind: StatisticKind::Custom, lambda_selected: 0.0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Knockoff,
    KnockoffPlus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    /// `f64::INFINITY` when nothing qualifies.
    pub threshold: f64,
    /// 0-based selected indices, ascending.
    pub selected: Vec<usize>,
    pub mode: ThresholdMode,
    pub q: f64,
}

/// `W_j = |β̂_j| − |β̂_{j+p}|` from the cross-validated lasso of `y` on `[X, X̃]`.
/// Columns identical to their knockoff get `W_j = 0`.
pub fn lcd_statistics(x: &Matrix, x_tilde: &Matrix, y: &[f64], opts: &LassoOptions, rng: &RngStream) -> Result<WStatistics> {
    if x.shape() != x_tilde.shape() {
        return Err(KnockoffError::Dimension(format!("X is {:?} but X̃ is {:?}", x.shape(), x_tilde.shape())));
    }
    let p = x.cols();
    let fit = cv_lasso_path(&Matrix::hstack(&[x, x_tilde]), y, opts, rng)?;
    let w = (0..p)
        .map(|j| if x.col(j) == x_tilde.col(j) { 0.0 } else { fit.coef[j].abs() - fit.coef[j + p].abs() })
        .collect();
    Ok(WStatistics { w, kind: StatisticKind::Lcd, lambda_selected: fit.lambda })
}

/// Knockoff (`plus = false`) or knockoff+ threshold at level `q`, and the selected set.
pub fn knockoff_threshold(w: &WStatistics, q: f64, plus: bool) -> Result<SelectionResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(KnockoffError::InvalidInput(format!("q = {q} is outside (0, 1)")));
    }
    let mut ts: Vec<f64> = w.w.iter().filter(|&&v| v != 0.0).map(|v| v.abs()).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let offset = if plus { 1.0 } else { 0.0 };
    let threshold = ts
        .into_iter()
        .find(|&t| {
            let neg = w.w.iter().filter(|&&v| v <= -t).count() as f64;
            let pos = w.w.iter().filter(|&&v| v >= t).count().max(1) as f64;
            (offset + neg) / pos <= q
        })
        .unwrap_or(f64::INFINITY);
    let selected = (0..w.w.len()).filter(|&j| w.w[j] >= threshold).collect();
    let mode = if plus { ThresholdMode::KnockoffPlus } else { ThresholdMode::Knockoff };
    Ok(SelectionResult { threshold, selected, mode, q })
}

/// Model-X Gaussian knockoffs with known `μ` and `Σ`: each row is drawn from
/// `N(μ + (x − μ)(I − Σ⁻¹D), 2D − DΣ⁻¹D)` with `D = diag(s)`.
pub fn unconditional_gaussian_knockoffs(
    x: &Matrix,
    mu: &[f64],
    sigma: &Matrix,
    s: &[f64],
    rng: &mut RngStream,
) -> Result<KnockoffResult<Matrix>> {
    let (n, p) = x.shape();
    if mu.len() != p || sigma.shape() != (p, p) || s.len() != p {
        return Err(KnockoffError::Dimension("μ, Σ and s must match the column count of X".into()));
    }
    check_s_feasible(sigma, s)?;
    let l_sigma = cholesky(sigma)?;
    let d = Matrix::from_diag(s);
    let sinv_d = chol_solve(&l_sigma, &d);
    let mut v = d.scale(2.0).sub(&d.matmul(&sinv_d));
    v.symmetrize();
    let l = cholesky(&v)?;
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        let xc: Vec<f64> = x.row(i).iter().zip(mu).map(|(a, m)| a - m).collect();
        z.iter_mut().for_each(|v| *v = rng.normal());
        let row = out.row_mut(i);
        for j in 0..p {
            // (x - μ)(I - Σ⁻¹D) = (x - μ) - (x - μ)Σ⁻¹D
            let shift: f64 = (0..p).map(|k| xc[k] * sinv_d[(k, j)]).sum();
            let noise: f64 = (0..=j).map(|k| l[(j, k)] * z[k]).sum();
            row[j] = mu[j] + xc[j] - shift + noise;
        }
    }
    let trivial = vec![false; p];
    Ok(KnockoffResult { knockoffs: out, trivial })
}

/// Runs `generator` on `X` stacked over unlabeled rows `X_u` and keeps the first `n` rows.
pub fn knockoffs_with_unlabeled(
    x: &Matrix,
    x_u: &Matrix,
    generator: impl FnOnce(&Matrix) -> Result<KnockoffResult<Matrix>>,
) -> Result<KnockoffResult<Matrix>> {
    if x_u.rows() == 0 {
        return generator(x);
    }
    if x.cols() != x_u.cols() {
        return Err(KnockoffError::Dimension(format!("X has {} columns but X_u has {}", x.cols(), x_u.cols())));
    }
    let n = x.rows();
    let full = generator(&Matrix::vstack(&[x, x_u]))?;
    let knockoffs = full.knockoffs.row_range(0, n);
    let trivial = (0..x.cols()).map(|j| knockoffs.col(j) == x.col(j)).collect();
    Ok(KnockoffResult { knockoffs, trivial })
}

/// False discovery proportion and power of `selected` against the true support.
pub fn fdp_and_power(selected: &[usize], truth: &[usize], p: usize) -> Result<(f64, f64)> {
    if let Some(&j) = truth.iter().chain(selected).find(|&&j| j >= p) {
        return Err(KnockoffError::InvalidInput(format!("index {} outside 1..={p}", j + 1)));
    }
    let mut is_true = vec![false; p];
    truth.iter().for_each(|&j| is_true[j] = true);
    let hits = selected.iter().filter(|&&j| is_true[j]).count();
    let fdp = (selected.len() - hits) as f64 / selected.len().max(1) as f64;
    let n_true = is_true.iter().filter(|&&t| t).count();
    let power = if n_true == 0 { 0.0 } else { hits as f64 / n_true as f64 };
    Ok((fdp, power))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> WStatistics {
        WStatistics::custom(v.to_vec()).unwrap()
    }

    #[test]
    fn threshold_fixture() {
        let stats = w(&[3.0, 2.0, -1.0, 0.5, -0.25]);
        let t0 = knockoff_threshold(&stats, 0.5, false).unwrap();
        assert_eq!(t0.threshold, 0.5);
        assert_eq!(t0.selected, vec![0, 1, 3]);
        let tp = knockoff_threshold(&stats, 0.5, true).unwrap();
        assert_eq!(tp.threshold, 2.0);
        assert_eq!(tp.selected, vec![0, 1]);
    }

    #[test]
    fn all_negative_selects_nothing() {
        let r = knockoff_threshold(&w(&[-1.0, -2.0, 0.0]), 0.2, false).unwrap();
        assert_eq!(r.threshold, f64::INFINITY);
        assert!(r.selected.is_empty());
    }

    #[test]
    fn q_near_one_uses_smallest() {
        let r = knockoff_threshold(&w(&[0.3, -0.2, 5.0, 1.0]), 0.999, false).unwrap();
        assert_eq!(r.threshold, 0.2);
        assert!(knockoff_threshold(&w(&[1.0]), 1.0, false).is_err());
    }

    #[test]
    fn metrics() {
        assert_eq!(fdp_and_power(&[], &[0, 3], 5).unwrap(), (0.0, 0.0));
        assert_eq!(fdp_and_power(&[0, 3], &[0, 3], 5).unwrap(), (0.0, 1.0));
        let (f, pw) = fdp_and_power(&[0, 1, 2], &[0, 3], 5).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15 && pw == 0.5);
        assert!(fdp_and_power(&[7], &[0], 5).is_err());
    }

    #[test]
    fn identical_knockoffs_give_zero() {
        let mut rng = RngStream::new(1);
        let x = Matrix::from_vec(40, 4, (0..160).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<f64> = (0..40).map(|i| x.row(i)[0] + rng.normal()).collect();
        let stats = lcd_statistics(&x, &x, &y, &LassoOptions::default(), &rng).unwrap();
        assert!(stats.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn swap_negates_statistic() {
        let mut rng = RngStream::new(2);
        let (n, p) = (60, 5);
        let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.normal()).collect()).unwrap();
        let xt = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|i| 1.5 * x.row(i)[0] - x.row(i)[1] + rng.normal()).collect();
        let opts = LassoOptions { n_lambda: 40, ..Default::default() };
        let base = lcd_statistics(&x, &xt, &y, &opts, &rng).unwrap();
        let (mut xs, mut xts) = (x.clone(), xt.clone());
        xs.set_col(0, &xt.col(0));
        xts.set_col(0, &x.col(0));
        let swapped = lcd_statistics(&xs, &xts, &y, &opts, &rng).unwrap();
        assert!((base.w[0] + swapped.w[0]).abs() <= 1e-6);
        for j in 1..p {
            assert!((base.w[j] - swapped.w[j]).abs() <= 1e-6);
        }
    }

    #[test]
    fn unconditional_rejects_zero_s() {
        let x = Matrix::zeros(3, 2);
        let err = unconditional_gaussian_knockoffs(&x, &[0.0; 2], &Matrix::identity(2), &[0.0; 2], &mut RngStream::new(1));
        assert!(err.is_err());
    }

    #[test]
    fn unconditional_identity_uncorrelated() {
        let mut rng = RngStream::new(3);
        let n = 100_000;
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.normal()).collect()).unwrap();
        let ko = unconditional_gaussian_knockoffs(&x, &[0.0; 2], &Matrix::identity(2), &[1.0; 2], &mut rng).unwrap();
        for j in 0..2 {
            let c: f64 = (0..n).map(|i| x.row(i)[j] * ko.knockoffs.row(i)[j]).sum::<f64>() / n as f64;
            assert!(c.abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn unlabeled_wrapper_shapes() {
        let mut rng = RngStream::new(4);
        let x = Matrix::from_vec(5, 2, (0..10).map(|_| rng.normal()).collect()).unwrap();
        let xu = Matrix::from_vec(7, 2, (0..14).map(|_| rng.normal()).collect()).unwrap();
        let gen = |m: &Matrix| Ok(KnockoffResult { knockoffs: m.scale(2.0), trivial: vec![false; 2] });
        let out = knockoffs_with_unlabeled(&x, &xu, gen).unwrap();
        assert_eq!(out.knockoffs, x.scale(2.0));
        let empty = Matrix::zeros(0, 2);
        assert_eq!(knockoffs_with_unlabeled(&x, &empty, gen).unwrap().knockoffs, x.scale(2.0));
        assert!(knockoffs_with_unlabeled(&x, &Matrix::zeros(2, 3), gen).is_err());
    }
}
