use crate::error::{KnockoffError, Result};
use crate::linalg::{cholesky, chol_solve, lambda_min, RealMatrix};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

pub const DEFAULT_EPSILON: f64 = 1e-2;
const SDP_SWEEPS: usize = 100;
const SDP_OBJECTIVE_TOL: f64 = 1e-7;
const BISECTION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SMethod {
    Equicorrelated,
    Sdp,
    ApproxSdp,
}

/// A diagonal `s` for a knockoff construction, in the scale of the covariance it was
/// computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct SVector<T> {
    pub s: Vec<T>,
    pub method: SMethod,
    pub epsilon: T,
    pub delta: T,
}

impl<T: Real> SVector<T> {
    /// An s-vector given directly rather than produced by a solver.
    pub fn fixed(s: Vec<T>) -> Self {
        SVector { s, method: SMethod::Equicorrelated, epsilon: T::zero(), delta: T::zero() }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// How to choose `s` for a covariance matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SParams {
    pub method: SMethod,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    /// Block size for the approximate SDP (contiguous blocks).
    #[serde(default)]
    pub block_size: Option<usize>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for SParams {
    fn default() -> Self {
        SParams { method: SMethod::Sdp, epsilon: DEFAULT_EPSILON, delta: None, block_size: None }
    }
}

impl SParams {
    pub fn new(method: SMethod) -> Self {
        SParams { method, ..Default::default() }
    }
}

/// `(D^{-1/2} Σ D^{-1/2}, diag(Σ))`
pub fn correlation_rescale<T: Real>(sigma: &RealMatrix<T>) -> Result<(RealMatrix<T>, Vec<T>)> {
    let d = sigma.diag();
    if let Some(j) = d.iter().position(|&v| !(v > T::zero())) {
        return Err(KnockoffError::Degenerate(format!("variable {} has zero variance", j + 1)));
    }
    let inv: Vec<T> = d.iter().map(|&v| T::one() / v.sqrt()).collect();
    let mut c = sigma.clone();
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            c[(i, j)] = c[(i, j)] * inv[i] * inv[j];
        }
        c[(i, i)] = T::one();
    }
    c.symmetrize();
    Ok((c, d))
}

/// Computes `s` for an arbitrary covariance: rescales to correlations, solves, and maps back
/// with `s = D s⁰`.
pub fn compute_s<T: Real>(sigma: &RealMatrix<T>, params: &SParams) -> Result<SVector<T>> {
    let (c, d) = correlation_rescale(sigma)?;
    let eps = T::c(params.epsilon);
    let mut sv = match params.method {
        SMethod::Equicorrelated => s_equicorrelated(&c, eps)?,
        SMethod::Sdp => s_sdp(&c, eps, params.delta.map(T::c))?,
        SMethod::ApproxSdp => {
            let b = params.block_size.unwrap_or(c.rows()).max(1);
            let blocks: Vec<Vec<usize>> =
                (0..c.rows()).step_by(b).map(|s| (s..(s + b).min(c.rows())).collect()).collect();
            s_approx_sdp(&c, &blocks, eps)?
        }
    };
    for (s, &dj) in sv.s.iter_mut().zip(&d) {
        *s *= dj;
    }
    Ok(sv)
}

/// Checks `s > 0` and `2Σ − diag(s) ≻ 0` by attempted Cholesky.
pub fn check_s_feasible<T: Real>(sigma: &RealMatrix<T>, s: &[T]) -> Result<()> {
    if s.len() != sigma.rows() {
        return Err(KnockoffError::Dimension(format!("s has length {}, expected {}", s.len(), sigma.rows())));
    }
    if let Some(j) = s.iter().position(|&v| !(v > T::zero())) {
        return Err(KnockoffError::Infeasible(format!("s_{} = {} is not strictly positive", j + 1, s[j])));
    }
    let mut m = sigma.scale(T::c(2.0));
    for (j, &v) in s.iter().enumerate() {
        m[(j, j)] -= v;
    }
    cholesky(&m).map(|_| ()).map_err(|_| KnockoffError::NotPositiveDefinite("2Σ − diag(s) is not positive definite".into()))
}

pub fn s_equicorrelated<T: Real>(sigma_corr: &RealMatrix<T>, epsilon: T) -> Result<SVector<T>> {
    if !(epsilon >= T::zero() && epsilon < T::one()) {
        return Err(KnockoffError::InvalidInput(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    let lam = lambda_min(sigma_corr);
    if !(lam > T::zero()) {
        return Err(KnockoffError::NotPositiveDefinite(format!("smallest eigenvalue {lam}")));
    }
    let v = (T::one() - epsilon) * (T::c(2.0) * lam).min(T::one());
    Ok(SVector { s: vec![v; sigma_corr.rows()], method: SMethod::Equicorrelated, epsilon, delta: T::zero() })
}

fn scaled_minus_diag<T: Real>(base: &RealMatrix<T>, s: &[T]) -> RealMatrix<T> {
    let mut m = base.clone();
    for (j, &v) in s.iter().enumerate() {
        m[(j, j)] -= v;
    }
    m
}

fn inverse_via_cholesky<T: Real>(a: &RealMatrix<T>) -> Result<RealMatrix<T>> {
    let l = cholesky(a)?;
    Ok(chol_solve(&l, &RealMatrix::identity(a.rows())))
}

/// Maximizes `Σ s_j` subject to `δ ≤ s_j ≤ 1` and `diag(s) ⪯ (1−ε)·2Σ` by cyclic coordinate
/// ascent, starting from the equicorrelated point.
///
/// Each coordinate step moves `s_j` to within the bisection tolerance of its exact upper
/// limit, `s_j + 1/(A⁻¹)_jj` for `A = (1−ε)2Σ − diag(s)`; `A⁻¹` is refreshed from a
/// Cholesky factorization once per sweep and rank-one updated in between.
pub fn s_sdp<T: Real>(sigma_corr: &RealMatrix<T>, epsilon: T, delta: Option<T>) -> Result<SVector<T>> {
    let p = sigma_corr.rows();
    let eq = s_equicorrelated(sigma_corr, epsilon)?;
    let lam = lambda_min(sigma_corr);
    let delta = delta.unwrap_or(T::c(0.1) * T::c(2.0) * lam);
    let base = sigma_corr.scale((T::one() - epsilon) * T::c(2.0));
    if delta > T::one() || cholesky(&scaled_minus_diag(&base, &vec![delta; p])).is_err() {
        return Err(KnockoffError::Infeasible(format!("lower bound delta = {delta} admits no feasible s")));
    }
    let tol = T::c(BISECTION_TOL);
    let mut s: Vec<T> = eq.s.iter().map(|&v| v.max(delta)).collect();
    // The equicorrelated start can sit exactly on the boundary when ε = 0.
    let mut shrink = 0;
    while cholesky(&scaled_minus_diag(&base, &s)).is_err() {
        for v in s.iter_mut() {
            *v = (*v - tol).max(delta);
        }
        shrink += 1;
        if shrink > 1000 {
            return Err(KnockoffError::Infeasible("could not find a strictly feasible start".into()));
        }
    }
    let mut objective: T = s.iter().copied().sum();
    for _sweep in 0..SDP_SWEEPS {
        let mut a_inv = match inverse_via_cholesky(&scaled_minus_diag(&base, &s)) {
            Ok(m) => m,
            Err(_) => break,
        };
        for j in 0..p {
            let ajj = a_inv[(j, j)];
            if !(ajj > T::zero()) {
                continue;
            }
            let room = T::one() / ajj - tol;
            let step = room.min(T::one() - s[j]);
            if !(step > T::zero()) {
                continue;
            }
            s[j] += step;
            let denom = T::one() - step * ajj;
            let col = a_inv.col(j);
            for r in 0..p {
                for c in 0..p {
                    a_inv[(r, c)] += step * col[r] * col[c] / denom;
                }
            }
        }
        // guard against round-off pushing the iterate out of the cone
        while cholesky(&scaled_minus_diag(&base, &s)).is_err() {
            for v in s.iter_mut() {
                *v = (*v - tol).max(delta);
            }
        }
        let next: T = s.iter().copied().sum();
        let change = next - objective;
        objective = next;
        if change.abs() < T::c(SDP_OBJECTIVE_TOL) {
            break;
        }
    }
    Ok(SVector { s, method: SMethod::Sdp, epsilon, delta })
}

/// Solves the SDP on the block-diagonal part of `Σ` given by `blocks`, then scales the
/// result by the largest `γ ∈ [0, 1]` keeping it feasible for the full matrix.
pub fn s_approx_sdp<T: Real>(sigma_corr: &RealMatrix<T>, blocks: &[Vec<usize>], epsilon: T) -> Result<SVector<T>> {
    let p = sigma_corr.rows();
    let mut seen = vec![false; p];
    for &j in blocks.iter().flatten() {
        if j >= p || seen[j] {
            return Err(KnockoffError::InvalidInput("blocks must partition the variables".into()));
        }
        seen[j] = true;
    }
    if seen.iter().any(|&v| !v) {
        return Err(KnockoffError::InvalidInput("blocks must partition the variables".into()));
    }
    let mut s0 = vec![T::zero(); p];
    for block in blocks {
        let sub = sigma_corr.select_cols(block).transpose().select_cols(block);
        let sv = s_sdp(&sub, epsilon, None)?;
        for (k, &j) in block.iter().enumerate() {
            s0[j] = sv.s[k];
        }
    }
    let base = sigma_corr.scale((T::one() - epsilon) * T::c(2.0));
    let feasible = |g: T| {
        let scaled: Vec<T> = s0.iter().map(|&v| v * g).collect();
        cholesky(&scaled_minus_diag(&base, &scaled)).is_ok()
    };
    let gamma = if feasible(T::one()) {
        T::one()
    } else {
        let (mut lo, mut hi) = (T::zero(), T::one());
        while hi - lo > T::c(BISECTION_TOL) {
            let mid = (lo + hi) / T::c(2.0);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(gamma > T::zero()) {
        return Err(KnockoffError::Infeasible("approximate SDP solution admits no positive scaling".into()));
    }
    let s = s0.iter().map(|&v| v * gamma).collect();
    Ok(SVector { s, method: SMethod::ApproxSdp, epsilon, delta: T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_positive_definite;
    use crate::rng::RngStream;

    fn random_corr(p: usize, rng: &mut RngStream) -> RealMatrix<f64> {
        let mut a = RealMatrix::zeros(p + 2, p);
        for i in 0..p + 2 {
            for j in 0..p {
                a[(i, j)] = rng.normal();
            }
        }
        correlation_rescale(&a.t_matmul(&a)).unwrap().0
    }

    fn max_feasible_coordinate(base: &RealMatrix<f64>, s: &[f64], j: usize) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut trial = s.to_vec();
        trial[j] = hi;
        if is_positive_definite(&scaled_minus_diag(base, &trial)) {
            return 1.0;
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            trial[j] = mid;
            if is_positive_definite(&scaled_minus_diag(base, &trial)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn equicorrelated_identity() {
        let sv = s_equicorrelated(&RealMatrix::<f64>::identity(4), 0.01).unwrap();
        assert!(sv.s.iter().all(|&v| (v - 0.99).abs() < 1e-12));
    }

    #[test]
    fn equicorrelated_two_by_two() {
        let c = RealMatrix::<f64>::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let sv = s_equicorrelated(&c, 0.0).unwrap();
        assert!(sv.s.iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn equicorrelated_matches_eigen_oracle() {
        let mut rng = RngStream::new(21);
        let c = random_corr(8, &mut rng);
        let nc = nalgebra::DMatrix::from_fn(8, 8, |i, j| c[(i, j)]);
        let lam = nc.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        let sv = s_equicorrelated(&c, 0.01).unwrap();
        assert!((sv.s[0] - 0.99 * (2.0 * lam).min(1.0)).abs() < 1e-9);
    }

    #[test]
    fn equicorrelated_rejects_singular() {
        let c = RealMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(s_equicorrelated(&c, 0.01), Err(KnockoffError::NotPositiveDefinite(_))));
    }

    #[test]
    fn sdp_identity_hits_upper_bound() {
        let sv = s_sdp(&RealMatrix::<f64>::identity(5), 0.0, Some(0.1)).unwrap();
        assert!(sv.s.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sdp_dominates_equicorrelated_high_correlation() {
        let c = RealMatrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let sv = s_sdp(&c, 0.0, Some(0.01)).unwrap();
        assert!(sv.s.iter().sum::<f64>() >= 0.2 - 1e-6);
        assert!(is_positive_definite(&scaled_minus_diag(&c.scale(2.0), &sv.s)));
    }

    #[test]
    fn sdp_rejects_infeasible_delta() {
        let c = RealMatrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        assert!(matches!(s_sdp(&c, 0.0, Some(0.5)), Err(KnockoffError::Infeasible(_))));
    }

    #[test]
    fn sdp_is_coordinatewise_maximal() {
        let mut rng = RngStream::new(22);
        for _ in 0..5 {
            let c = random_corr(6, &mut rng);
            let sv = s_sdp(&c, 0.01, None).unwrap();
            let base = c.scale(0.99 * 2.0);
            assert!(is_positive_definite(&scaled_minus_diag(&base, &sv.s)));
            for j in 0..6 {
                let best = max_feasible_coordinate(&base, &sv.s, j);
                assert!(best - sv.s[j] < 1e-3, "coordinate {j}: {} vs {}", sv.s[j], best);
            }
            let eq = s_equicorrelated(&c, 0.01).unwrap();
            assert!(sv.s.iter().sum::<f64>() >= eq.s.iter().sum::<f64>() - 1e-6);
        }
    }

    #[test]
    fn approx_sdp_singletons_on_identity() {
        let c = RealMatrix::<f64>::identity(4);
        let blocks: Vec<Vec<usize>> = (0..4).map(|j| vec![j]).collect();
        let a = s_approx_sdp(&c, &blocks, 0.01).unwrap();
        let b = s_sdp(&c, 0.01, None).unwrap();
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn approx_sdp_single_block_is_sdp() {
        let mut rng = RngStream::new(23);
        let c = random_corr(5, &mut rng);
        let a = s_approx_sdp(&c, &[vec![0, 1, 2, 3, 4]], 0.01).unwrap();
        let b = s_sdp(&c, 0.01, None).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn approx_sdp_exact_on_block_diagonal() {
        let mut rng = RngStream::new(24);
        let c1 = random_corr(3, &mut rng);
        let c2 = random_corr(2, &mut rng);
        let mut c = RealMatrix::<f64>::zeros(5, 5);
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = c1[(i, j)];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                c[(3 + i, 3 + j)] = c2[(i, j)];
            }
        }
        let a = s_approx_sdp(&c, &[vec![0, 1, 2], vec![3, 4]], 0.01).unwrap();
        let s1 = s_sdp(&c1, 0.01, None).unwrap();
        let s2 = s_sdp(&c2, 0.01, None).unwrap();
        let expect: Vec<f64> = s1.s.iter().chain(&s2.s).copied().collect();
        assert_eq!(a.s, expect, "gamma should be exactly 1");
    }

    #[test]
    fn compute_s_rescales() {
        let sigma = RealMatrix::<f64>::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let sv = compute_s(&sigma, &SParams::new(SMethod::Equicorrelated)).unwrap();
        assert!((sv.s[0] - 4.0 * 0.99).abs() < 1e-12 && (sv.s[1] - 9.0 * 0.99).abs() < 1e-12);
        check_s_feasible(&sigma, &sv.s).unwrap();
    }

    #[test]
    fn feasibility_rejects_zero() {
        let sigma = RealMatrix::<f64>::identity(2);
        assert!(check_s_feasible(&sigma, &[0.0, 0.5]).is_err());
        assert!(check_s_feasible(&sigma, &[2.0, 0.5]).is_err());
    }
}
