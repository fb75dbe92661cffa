use super::svector::{check_s_feasible, correlation_rescale, SVector};
use super::{center_columns, compute_suff_stats};
use crate::error::{KnockoffError, Result};
use crate::linalg::{cholesky, chol_solve, orthonormalize_columns, symmetric_extreme_eigenvalues, RealMatrix};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::KnockoffResult;

/// Largest accepted condition number of the (correlation-rescaled) residual covariance.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Shared core of the Gaussian constructions: given residuals `R` (n×v) orthogonal to the
/// span of `basis`, returns `R(I − Σ̂⁻¹D) + U L` where `Σ̂ = RᵀR/n`, `LᵀL = n(2D − DΣ̂⁻¹D)` and
/// `U` is orthonormal and orthogonal to `basis` and `R`.
fn residual_knockoffs<T: Real>(
    basis: Vec<Vec<T>>,
    r: &RealMatrix<T>,
    s: &SVector<T>,
    rng: &mut RngStream,
) -> Result<RealMatrix<T>> {
    let (n, v) = r.shape();
    let nt = T::from_usize(n).unwrap();
    let mut sigma = r.t_matmul(r).scale(T::one() / nt);
    sigma.symmetrize();
    let l_sigma = cholesky(&sigma)
        .map_err(|_| KnockoffError::Degenerate("residual covariance is singular".into()))?;
    let (corr, _) = correlation_rescale(&sigma)?;
    let (lo, hi) = symmetric_extreme_eigenvalues(&corr, T::c(1e-12));
    if !(lo > T::zero()) || hi / lo > T::c(CONDITION_LIMIT) {
        return Err(KnockoffError::Degenerate(format!(
            "residual covariance condition number {} exceeds {CONDITION_LIMIT:e}",
            hi / lo
        )));
    }
    check_s_feasible(&sigma, &s.s)?;

    let z = chol_solve(&l_sigma, &RealMatrix::from_diag(&s.s));
    let mut c = RealMatrix::zeros(v, v);
    for i in 0..v {
        for j in 0..v {
            let two_d = if i == j { T::c(2.0) * s.s[i] } else { T::zero() };
            c[(i, j)] = nt * (two_d - s.s[i] * z[(i, j)]);
        }
    }
    c.symmetrize();
    let l_c = cholesky(&c)?;

    let n_basis = basis.len();
    let mut cols = basis;
    cols.extend(r.columns());
    for _ in 0..v {
        cols.push((0..n).map(|_| T::c(rng.normal())).collect());
    }
    let q = orthonormalize_columns(cols).map_err(|idx| {
        KnockoffError::Degenerate(if idx < n_basis {
            format!("conditioning column {} is collinear with earlier ones", idx + 1)
        } else if idx < n_basis + v {
            format!("column {} is collinear with the conditioning columns", idx - n_basis + 1)
        } else {
            "random completion lost rank".into()
        })
    })?;
    let u = &q[n_basis + v..];

    let i_minus_z = RealMatrix::identity(v).sub(&z);
    let mut out = r.matmul(&i_minus_z);
    for i in 0..n {
        for k in 0..v {
            let mut acc = T::zero();
            for m in 0..=k {
                acc += u[m][i] * l_c[(k, m)];
            }
            out[(i, k)] += acc;
        }
    }
    Ok(out)
}

fn ones<T: Real>(n: usize) -> Vec<T> {
    vec![T::one(); n]
}

fn add_row_vector<T: Real>(m: &mut RealMatrix<T>, v: &[T]) {
    for i in 0..m.rows() {
        for (x, &a) in m.row_mut(i).iter_mut().zip(v) {
            *x += a;
        }
    }
}

/// Conditional knockoffs given the sample mean and covariance:
/// `X̃ = 1μ̂ᵀ + (X − 1μ̂ᵀ)(I − Σ̂⁻¹diag(s)) + UL`. Requires `n > 2p`; `s` is on the scale of
/// `Σ̂ = (X − 1μ̂ᵀ)ᵀ(X − 1μ̂ᵀ)/n`.
pub fn gaussian_conditional_knockoffs<T: Real>(
    x: &RealMatrix<T>,
    s: &SVector<T>,
    rng: &mut RngStream,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    let (n, p) = x.shape();
    if n <= 2 * p {
        return Err(KnockoffError::Dimension(format!("need n > 2p, got n = {n}, p = {p}")));
    }
    let stats = compute_suff_stats(x)?;
    let r = center_columns(x, &stats.mu_hat);
    let mut xt = residual_knockoffs(vec![ones(n)], &r, s, rng)?;
    add_row_vector(&mut xt, &stats.mu_hat);
    Ok(KnockoffResult { knockoffs: xt, trivial: vec![false; p] })
}

/// Conditional knockoffs when the mean `μ` is known: preserves `(X − 1μᵀ)ᵀ(X − 1μᵀ)`.
/// Requires `n ≥ 2p`; `s` is on the scale of `(X − 1μᵀ)ᵀ(X − 1μᵀ)/n`.
pub fn gaussian_conditional_knockoffs_known_mean<T: Real>(
    x: &RealMatrix<T>,
    mu: &[T],
    s: &SVector<T>,
    rng: &mut RngStream,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    let (n, p) = x.shape();
    if mu.len() != p {
        return Err(KnockoffError::Dimension(format!("mean has length {}, expected {p}", mu.len())));
    }
    if n < 2 * p {
        return Err(KnockoffError::Dimension(format!("need n >= 2p, got n = {n}, p = {p}")));
    }
    let r = center_columns(x, mu);
    if r.max_abs() == T::zero() {
        return Err(KnockoffError::Degenerate("X equals 1μᵀ; residual covariance is zero".into()));
    }
    let mut xt = residual_knockoffs(Vec::new(), &r, s, rng)?;
    add_row_vector(&mut xt, mu);
    Ok(KnockoffResult { knockoffs: xt, trivial: vec![false; p] })
}

struct PartialFit<T> {
    basis: Vec<Vec<T>>,
    fitted: RealMatrix<T>,
    residuals: RealMatrix<T>,
}

fn partial_fit<T: Real>(x_v: &RealMatrix<T>, x_b: &RealMatrix<T>) -> Result<PartialFit<T>> {
    let n = x_v.rows();
    if x_b.rows() != n {
        return Err(KnockoffError::Dimension(format!("X_V has {n} rows but X_B has {}", x_b.rows())));
    }
    let mut raw = vec![ones(n)];
    raw.extend(x_b.columns());
    let basis = orthonormalize_columns(raw)
        .map_err(|idx| KnockoffError::Degenerate(format!("conditioning column {idx} of [1, X_B] is collinear")))?;
    let mut fitted = RealMatrix::zeros(n, x_v.cols());
    for j in 0..x_v.cols() {
        let col = x_v.col(j);
        let mut f = vec![T::zero(); n];
        for q in &basis {
            let c = crate::linalg::dot(q, &col);
            for (fi, &qi) in f.iter_mut().zip(q) {
                *fi += c * qi;
            }
        }
        fitted.set_col(j, &f);
    }
    let residuals = x_v.sub(&fitted);
    Ok(PartialFit { basis, fitted, residuals })
}

/// `RᵀR/n` for the residuals of `X_V` regressed on `[1, X_B]`; the covariance whose
/// scale `s` must be given in for [`partial_conditional_knockoffs`].
pub fn partial_residual_covariance<T: Real>(x_v: &RealMatrix<T>, x_b: &RealMatrix<T>) -> Result<RealMatrix<T>> {
    let fit = partial_fit(x_v, x_b)?;
    let nt = T::from_usize(x_v.rows()).unwrap();
    let mut c = fit.residuals.t_matmul(&fit.residuals).scale(T::one() / nt);
    c.symmetrize();
    Ok(c)
}

/// Knockoffs for `X_V` conditional on `X_B`: preserves `[1, X_B]ᵀX_V` and `X_VᵀX_V`.
/// Requires `n > 2|V| + |B|`; `s` is on the scale of [`partial_residual_covariance`].
pub fn partial_conditional_knockoffs<T: Real>(
    x_v: &RealMatrix<T>,
    x_b: &RealMatrix<T>,
    s: &SVector<T>,
    rng: &mut RngStream,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    let (n, v) = x_v.shape();
    let b = x_b.cols();
    if n <= 2 * v + b {
        return Err(KnockoffError::Dimension(format!("need n > 2|V| + |B|, got n = {n}, |V| = {v}, |B| = {b}")));
    }
    let fit = partial_fit(x_v, x_b)?;
    let rt = residual_knockoffs(fit.basis, &fit.residuals, s, rng)?;
    Ok(KnockoffResult { knockoffs: fit.fitted.add(&rt), trivial: vec![false; v] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_core::{compute_s, SMethod, SParams};
    use crate::linalg::rel_diff;

    fn random_matrix(n: usize, p: usize, rng: &mut RngStream) -> RealMatrix<f64> {
        let mut m = RealMatrix::zeros(n, p);
        for i in 0..n {
            let mut prev = 0.0;
            for j in 0..p {
                prev = 0.5 * prev + rng.normal();
                m[(i, j)] = prev + j as f64;
            }
        }
        m
    }

    fn check_alg31(x: &RealMatrix<f64>, xt: &RealMatrix<f64>, s: &[f64]) {
        let n = x.rows() as f64;
        let st = compute_suff_stats(x).unwrap();
        let xc = center_columns(x, &st.mu_hat);
        let xtc = center_columns(xt, &st.mu_hat);
        let one = RealMatrix::from_vec(x.rows(), 1, vec![1.0; x.rows()]).unwrap();
        assert!(rel_diff(&xt.t_matmul(&one), &x.t_matmul(&one)) < 1e-8);
        assert!(rel_diff(&xtc.t_matmul(&xtc), &st.sigma_hat.scale(n)) < 1e-8);
        let mut target = st.sigma_hat.clone();
        for (j, &v) in s.iter().enumerate() {
            target[(j, j)] -= v;
        }
        assert!(rel_diff(&xtc.t_matmul(&xc), &target.scale(n)) < 1e-8);
    }

    #[test]
    fn three_point_example() {
        let x = RealMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let s = SVector::fixed(vec![0.5]);
        let mut rng = RngStream::new(1);
        let out = gaussian_conditional_knockoffs(&x, &s, &mut rng).unwrap();
        let xt = out.knockoffs.col(0);
        let sum: f64 = xt.iter().sum();
        let ss: f64 = xt.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
        let cross: f64 = xt.iter().zip([0.0, 1.0, 2.0]).map(|(a, b)| (a - 1.0) * (b - 1.0)).sum();
        assert!((sum - 3.0).abs() < 1e-12);
        assert!((ss - 2.0).abs() < 1e-12);
        assert!((cross - 0.5).abs() < 1e-12);
        assert_eq!(out.trivial, vec![false]);
    }

    #[test]
    fn constraints_hold_on_random_input() {
        let mut rng = RngStream::new(2);
        let x = random_matrix(50, 10, &mut rng);
        let st = compute_suff_stats(&x).unwrap();
        let s = compute_s(&st.sigma_hat, &SParams::new(SMethod::Sdp)).unwrap();
        let out = gaussian_conditional_knockoffs(&x, &s, &mut rng).unwrap();
        check_alg31(&x, &out.knockoffs, &s.s);
    }

    #[test]
    fn deterministic_given_stream() {
        let mut rng = RngStream::new(3);
        let x = random_matrix(50, 10, &mut rng);
        let st = compute_suff_stats(&x).unwrap();
        let s = compute_s(&st.sigma_hat, &SParams::new(SMethod::Equicorrelated)).unwrap();
        let a = gaussian_conditional_knockoffs(&x, &s, &mut RngStream::new(9)).unwrap();
        let b = gaussian_conditional_knockoffs(&x, &s, &mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_n() {
        let mut rng = RngStream::new(4);
        let x = random_matrix(8, 4, &mut rng);
        let s = SVector::fixed(vec![0.1; 4]);
        assert!(matches!(gaussian_conditional_knockoffs(&x, &s, &mut rng), Err(KnockoffError::Dimension(_))));
    }

    #[test]
    fn rejects_infeasible_s() {
        let mut rng = RngStream::new(5);
        let x = random_matrix(30, 3, &mut rng);
        let s = SVector::fixed(vec![100.0; 3]);
        assert!(gaussian_conditional_knockoffs(&x, &s, &mut rng).is_err());
    }

    #[test]
    fn known_mean_hand_example() {
        let x = RealMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let s = SVector::fixed(vec![0.5]);
        let out = gaussian_conditional_knockoffs_known_mean(&x, &[0.0], &s, &mut RngStream::new(6)).unwrap();
        let xt = out.knockoffs.col(0);
        let ss: f64 = xt.iter().map(|v| v * v).sum();
        let cross = -xt[0] + xt[1];
        assert!((ss - 2.0).abs() < 1e-12);
        assert!((cross - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_mean_constraints() {
        let mut rng = RngStream::new(7);
        let x = random_matrix(20, 5, &mut rng);
        let mu = vec![0.3, -1.0, 2.0, 0.0, 1.0];
        let r = center_columns(&x, &mu);
        let sigma = r.t_matmul(&r).scale(1.0 / 20.0);
        let s = compute_s(&sigma, &SParams::new(SMethod::Sdp)).unwrap();
        let out = gaussian_conditional_knockoffs_known_mean(&x, &mu, &s, &mut rng).unwrap();
        let rt = center_columns(&out.knockoffs, &mu);
        assert!(rel_diff(&rt.t_matmul(&rt), &r.t_matmul(&r)) < 1e-8);
        let mut target = sigma.clone();
        for j in 0..5 {
            target[(j, j)] -= s.s[j];
        }
        assert!(rel_diff(&rt.t_matmul(&r), &target.scale(20.0)) < 1e-8);
    }

    #[test]
    fn known_mean_degenerate() {
        let x = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let s = SVector::fixed(vec![0.1, 0.1]);
        let err = gaussian_conditional_knockoffs_known_mean(&x, &[1.0, 2.0], &s, &mut RngStream::new(1));
        assert!(matches!(err, Err(KnockoffError::Degenerate(_))));
    }

    #[test]
    fn partial_constraints() {
        let mut rng = RngStream::new(8);
        let x = random_matrix(20, 7, &mut rng);
        let xv = x.select_cols(&[0, 1, 2]);
        let xb = x.select_cols(&[3, 4, 5, 6]);
        let sigma = partial_residual_covariance(&xv, &xb).unwrap();
        let s = compute_s(&sigma, &SParams::new(SMethod::Sdp)).unwrap();
        let out = partial_conditional_knockoffs(&xv, &xb, &s, &mut rng).unwrap();
        let xt = &out.knockoffs;
        let one = RealMatrix::from_vec(20, 1, vec![1.0; 20]).unwrap();
        let basis = RealMatrix::hstack(&[&one, &xb]);
        assert!(rel_diff(&basis.t_matmul(xt), &basis.t_matmul(&xv)) < 1e-8);
        assert!(rel_diff(&xt.t_matmul(xt), &xv.t_matmul(&xv)) < 1e-8);
        let fit = partial_fit(&xv, &xb).unwrap();
        let rt = xt.sub(&fit.fitted);
        let mut target = sigma.clone();
        for j in 0..3 {
            target[(j, j)] -= s.s[j];
        }
        assert!(rel_diff(&fit.residuals.t_matmul(&rt), &target.scale(20.0)) < 1e-8);
    }

    #[test]
    fn partial_with_empty_b_matches_alg31_constraints() {
        let mut rng = RngStream::new(9);
        let x = random_matrix(15, 3, &mut rng);
        let xb = RealMatrix::zeros(15, 0);
        let sigma = partial_residual_covariance(&x, &xb).unwrap();
        let s = compute_s(&sigma, &SParams::new(SMethod::Equicorrelated)).unwrap();
        let out = partial_conditional_knockoffs(&x, &xb, &s, &mut rng).unwrap();
        check_alg31(&x, &out.knockoffs, &s.s);
    }

    #[test]
    fn partial_collinear_conditioning() {
        let mut rng = RngStream::new(10);
        let xv = random_matrix(5, 1, &mut rng);
        let xb = RealMatrix::from_vec(5, 1, vec![1.0; 5]).unwrap();
        let s = SVector::fixed(vec![0.1]);
        assert!(matches!(
            partial_conditional_knockoffs(&xv, &xb, &s, &mut rng),
            Err(KnockoffError::Degenerate(_))
        ));
    }

    #[test]
    fn single_precision_construction() {
        let mut rng = RngStream::new(11);
        let x64 = random_matrix(30, 3, &mut rng);
        let x = x64.map(|v| v as f32);
        let st = compute_suff_stats(&x).unwrap();
        let s = compute_s(&st.sigma_hat, &SParams::new(SMethod::Equicorrelated)).unwrap();
        let out = gaussian_conditional_knockoffs(&x, &s, &mut rng).unwrap();
        let xtc = center_columns(&out.knockoffs, &st.mu_hat);
        assert!(rel_diff(&xtc.t_matmul(&xtc), &st.sigma_hat.scale(30.0)) < 1e-3);
    }
}
