//! Conditional knockoffs for multivariate Gaussian models and the s-vector solvers.

mod construct;
mod svector;

pub use construct::{
    gaussian_conditional_knockoffs, gaussian_conditional_knockoffs_known_mean, partial_conditional_knockoffs,
    partial_residual_covariance, CONDITION_LIMIT,
};
pub use svector::{
    check_s_feasible, compute_s, correlation_rescale, s_approx_sdp, s_equicorrelated, s_sdp, SMethod, SParams,
    SVector, DEFAULT_EPSILON,
};

use crate::error::{KnockoffError, Result};
use crate::linalg::RealMatrix;
use crate::scalar::Real;

/// Column means and the covariance `(X − 1μ̂ᵀ)ᵀ(X − 1μ̂ᵀ)/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSuffStats<T> {
    pub mu_hat: Vec<T>,
    pub sigma_hat: RealMatrix<T>,
}

pub fn compute_suff_stats<T: Real>(x: &RealMatrix<T>) -> Result<GaussianSuffStats<T>> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(KnockoffError::Dimension(format!("need at least 2 rows, got {n}")));
    }
    if !x.is_finite() {
        return Err(KnockoffError::InvalidInput("non-finite entries in X".into()));
    }
    let nt = T::from_usize(n).unwrap();
    let mut mu = vec![T::zero(); p];
    for i in 0..n {
        for (m, &v) in mu.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= nt;
    }
    let centered = center_columns(x, &mu);
    let mut sigma = centered.t_matmul(&centered).scale(T::one() / nt);
    sigma.symmetrize();
    Ok(GaussianSuffStats { mu_hat: mu, sigma_hat: sigma })
}

pub(crate) fn center_columns<T: Real>(x: &RealMatrix<T>, mu: &[T]) -> RealMatrix<T> {
    let mut c = x.clone();
    for i in 0..c.rows() {
        for (v, &m) in c.row_mut(i).iter_mut().zip(mu) {
            *v -= m;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn three_point_example() {
        let x = RealMatrix::<f64>::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let st = compute_suff_stats(&x).unwrap();
        assert_eq!(st.mu_hat, vec![1.0]);
        assert!((st.sigma_hat[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_give_zero_covariance() {
        let x = RealMatrix::from_rows(&[vec![1.5, -2.0], vec![1.5, -2.0], vec![1.5, -2.0]]).unwrap();
        let st = compute_suff_stats(&x).unwrap();
        assert_eq!(st.sigma_hat.max_abs(), 0.0);
    }

    #[test]
    fn matches_two_pass_oracle() {
        let mut rng = RngStream::new(5);
        let (n, p) = (10, 3);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.normal() * 3.0 + 1.0).collect()).collect();
        let x = RealMatrix::from_rows(&rows).unwrap();
        let st = compute_suff_stats(&x).unwrap();
        for j in 0..p {
            let m: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            assert!((st.mu_hat[j] - m).abs() < 1e-12);
            for k in 0..p {
                let mk: f64 = rows.iter().map(|r| r[k]).sum::<f64>() / n as f64;
                let c: f64 = rows.iter().map(|r| (r[j] - m) * (r[k] - mk)).sum::<f64>() / n as f64;
                assert!((st.sigma_hat[(j, k)] - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_single_row() {
        let x = RealMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(compute_suff_stats(&x).is_err());
    }
}
