//! Cross-validated lasso and l1-penalised logistic regression by coordinate descent.
//!
//! Columns are centred and scaled to unit l2 norm; the penalty is `λ‖β‖₁` against
//! `(1/2n)‖y − Aβ‖²` (or the mean negative log-likelihood for the logistic fit).

use crate::error::{KnockoffError, Result};
use crate::linalg::dot;
use crate::rng::RngStream;
use crate::Matrix;
use rand::RngCore;
use sha2::{Digest, Sha256};

pub const COEF_TOL: f64 = 1e-7;
/// Path fits stop once every squared coefficient change in a sweep is below this fraction
/// of the centred response's sum of squares. The selected fit is then polished to [`COEF_TOL`].
pub const PATH_REL_TOL: f64 = 1e-7;
const MAX_PASSES: usize = 100_000;
const PATH_DECADES: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Gaussian,
    Binomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the standardised scale, in input column order.
    pub coef: Vec<f64>,
    /// Coefficients on the original column scale.
    pub coef_original: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    pub cv_error: Vec<f64>,
    /// The response was constant so every coefficient is zero.
    pub constant_response: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoOptions {
    pub family: Family,
    pub folds: usize,
    pub n_lambda: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { family: Family::Gaussian, folds: 10, n_lambda: 100 }
    }
}

/// Columns of `a` restricted to `rows`, centred and scaled to unit norm (zero columns stay zero).
pub(crate) struct Design {
    pub cols: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub norms: Vec<f64>,
}

impl Design {
    pub fn new(cols: &[Vec<f64>], rows: &[usize]) -> Self {
        let m = rows.len() as f64;
        let mut out = Vec::with_capacity(cols.len());
        let mut means = Vec::with_capacity(cols.len());
        let mut norms = Vec::with_capacity(cols.len());
        for c in cols {
            let mean = rows.iter().map(|&i| c[i]).sum::<f64>() / m;
            let mut v: Vec<f64> = rows.iter().map(|&i| c[i] - mean).collect();
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-12 * (1.0 + mean.abs()) * m.sqrt() {
                v.iter_mut().for_each(|x| *x /= norm);
                norms.push(norm);
            } else {
                v.iter_mut().for_each(|x| *x = 0.0);
                norms.push(0.0);
            }
            means.push(mean);
            out.push(v);
        }
        Design { cols: out, means, norms }
    }

    fn predict(&self, raw: &[Vec<f64>], row: usize, intercept: f64, beta: &[f64]) -> f64 {
        let mut eta = intercept;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                eta += b * (raw[j][row] - self.means[j]) / self.norms[j];
            }
        }
        eta
    }
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Gaussian coordinate descent at one penalty, warm-started from `beta` with matching
/// residual `r`. Alternates full sweeps with sweeps over the active set until the largest
/// coefficient change in a full sweep is below `tol`.
pub(crate) fn gaussian_cd(cols: &[Vec<f64>], lambda: f64, beta: &mut [f64], r: &mut [f64], tol: f64) -> bool {
    let t = lambda * r.len() as f64;
    let zero: Vec<bool> = cols.iter().map(|a| a.iter().all(|&v| v == 0.0)).collect();
    let sweep = |idx: &mut dyn Iterator<Item = usize>, beta: &mut [f64], r: &mut [f64]| {
        let mut maxd: f64 = 0.0;
        for j in idx {
            let a = &cols[j];
            let z = beta[j] + dot(a, r);
            let new = if zero[j] { 0.0 } else { soft(z, t) };
            let d = new - beta[j];
            if d != 0.0 {
                r.iter_mut().zip(a).for_each(|(ri, &ai)| *ri -= d * ai);
                beta[j] = new;
                maxd = maxd.max(d.abs());
            }
        }
        maxd
    };
    let mut passes = 0;
    while passes < MAX_PASSES {
        passes += 1;
        if sweep(&mut (0..cols.len()), beta, r) < tol {
            return true;
        }
        let active: Vec<usize> = (0..cols.len()).filter(|&j| beta[j] != 0.0).collect();
        while passes < MAX_PASSES {
            passes += 1;
            if sweep(&mut active.iter().copied(), beta, r) < tol {
                break;
            }
        }
    }
    false
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Proximal Newton for l1-penalised logistic regression with an unpenalised intercept.
pub(crate) fn logistic_cd(
    cols: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    b0: &mut f64,
    beta: &mut [f64],
    tol: f64,
) -> bool {
    let n = y.len();
    let t = lambda * n as f64;
    let mut eta: Vec<f64> = vec![*b0; n];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            eta.iter_mut().zip(&cols[j]).for_each(|(e, &a)| *e += b * a);
        }
    }
    for _ in 0..100 {
        let prob: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = prob.iter().map(|&p| (p * (1.0 - p)).max(1e-5)).collect();
        // working residual r = z - eta
        let mut r: Vec<f64> = (0..n).map(|i| (y[i] - prob[i]) / w[i]).collect();
        let old_b0 = *b0;
        let old_beta = beta.to_vec();
        let sw: f64 = w.iter().sum();
        let curv: Vec<f64> = cols.iter().map(|a| a.iter().zip(&w).map(|(&ai, &wi)| wi * ai * ai).sum()).collect();
        let mut inner = 0;
        loop {
            inner += 1;
            let mut maxd: f64 = 0.0;
            let d0 = r.iter().zip(&w).map(|(&ri, &wi)| wi * ri).sum::<f64>() / sw;
            if d0 != 0.0 {
                *b0 += d0;
                r.iter_mut().for_each(|ri| *ri -= d0);
                maxd = maxd.max(d0.abs());
            }
            for (j, a) in cols.iter().enumerate() {
                if curv[j] == 0.0 {
                    continue;
                }
                let g: f64 = a.iter().zip(&r).zip(&w).map(|((&ai, &ri), &wi)| wi * ai * ri).sum();
                let new = soft(g + curv[j] * beta[j], t) / curv[j];
                let d = new - beta[j];
                if d != 0.0 {
                    r.iter_mut().zip(a).for_each(|(ri, &ai)| *ri -= d * ai);
                    beta[j] = new;
                    maxd = maxd.max(d.abs());
                }
            }
            if maxd < tol || inner > 10_000 {
                break;
            }
        }
        eta = vec![*b0; n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                eta.iter_mut().zip(&cols[j]).for_each(|(e, &a)| *e += b * a);
            }
        }
        let change = beta.iter().zip(&old_beta).map(|(a, b)| (a - b).abs()).fold((*b0 - old_b0).abs(), f64::max);
        if change < tol {
            return true;
        }
    }
    false
}

pub fn lambda_grid(lambda_max: f64, n_lambda: usize) -> Vec<f64> {
    let ratio = 10f64.powf(-PATH_DECADES);
    (0..n_lambda).map(|k| lambda_max * ratio.powf(k as f64 / (n_lambda - 1) as f64)).collect()
}

/// Visit order for the solver: columns sorted by a keyed hash of their contents, ties by
/// index. Swapping two columns swaps their positions in the order, so the solver performs
/// the same arithmetic on the same data.
pub fn column_order(cols: &[Vec<f64>], key: u64) -> Vec<usize> {
    let mut tagged: Vec<([u8; 32], usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut h = Sha256::new();
            h.update(key.to_le_bytes());
            for v in c {
                h.update(v.to_bits().to_le_bytes());
            }
            (h.finalize().into(), j)
        })
        .collect();
    tagged.sort();
    tagged.into_iter().map(|(_, j)| j).collect()
}

struct PathState {
    beta: Vec<f64>,
    b0: f64,
    r: Vec<f64>,
}

fn fit_path(
    design: &Design,
    y: &[f64],
    family: Family,
    lambdas: &[f64],
    mut visit: impl FnMut(usize, f64, &[f64]),
) -> PathState {
    let p = design.cols.len();
    let n = y.len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut st = PathState { beta: vec![0.0; p], b0: 0.0, r: y.iter().map(|v| v - ybar).collect() };
    let tol = (PATH_REL_TOL * dot(&st.r, &st.r)).sqrt();
    if family == Family::Binomial {
        let pbar = ybar.clamp(1e-6, 1.0 - 1e-6);
        st.b0 = (pbar / (1.0 - pbar)).ln();
    }
    for (k, &lam) in lambdas.iter().enumerate() {
        match family {
            Family::Gaussian => {
                gaussian_cd(&design.cols, lam, &mut st.beta, &mut st.r, tol);
                visit(k, ybar, &st.beta);
            }
            Family::Binomial => {
                logistic_cd(&design.cols, y, lam, &mut st.b0, &mut st.beta, tol);
                visit(k, st.b0, &st.beta);
            }
        }
    }
    st
}

fn loss(family: Family, y: f64, eta: f64) -> f64 {
    match family {
        Family::Gaussian => (y - eta).powi(2),
        Family::Binomial => {
            let p = sigmoid(eta).clamp(1e-12, 1.0 - 1e-12);
            -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
    }
}

/// Fits the lasso path on `[A]` and picks the penalty with the smallest mean K-fold CV
/// error (squared error, or deviance for the logistic family), then refits on all rows.
/// Folds and the solver's column order come from `rng`.
pub fn cv_lasso_path(a: &Matrix, y: &[f64], opts: &LassoOptions, rng: &RngStream) -> Result<LassoFit> {
    let (n, p) = a.shape();
    if y.len() != n {
        return Err(KnockoffError::Dimension(format!("y has length {} but A has {n} rows", y.len())));
    }
    if opts.n_lambda < 2 {
        return Err(KnockoffError::InvalidInput("n_lambda must be at least 2".into()));
    }
    if opts.folds < 2 || opts.folds > n {
        return Err(KnockoffError::InvalidInput(format!("cannot make {} folds from {n} rows", opts.folds)));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(KnockoffError::InvalidInput("non-finite response".into()));
    }
    if opts.family == Family::Binomial && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(KnockoffError::InvalidInput("binomial response must be 0/1".into()));
    }
    let raw_input = a.columns();
    let order = column_order(&raw_input, rng.derive("column-order").next_u64());
    let raw: Vec<Vec<f64>> = order.iter().map(|&j| raw_input[j].clone()).collect();
    let all: Vec<usize> = (0..n).collect();
    let full = Design::new(&raw, &all);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let lambda_max = full.cols.iter().map(|c| dot(c, &yc).abs()).fold(0.0, f64::max) / n as f64;
    let unscramble = |beta: &[f64], design: &Design| {
        let mut coef = vec![0.0; p];
        let mut orig = vec![0.0; p];
        for (k, &j) in order.iter().enumerate() {
            coef[j] = beta[k];
            orig[j] = if design.norms[k] > 0.0 { beta[k] / design.norms[k] } else { 0.0 };
        }
        (coef, orig)
    };
    if !(lambda_max > 0.0) {
        let intercept = match opts.family {
            Family::Gaussian => ybar,
            Family::Binomial => {
                let pb = ybar.clamp(1e-6, 1.0 - 1e-6);
                (pb / (1.0 - pb)).ln()
            }
        };
        return Ok(LassoFit {
            coef: vec![0.0; p],
            coef_original: vec![0.0; p],
            intercept,
            lambda: 0.0,
            lambdas: Vec::new(),
            cv_error: Vec::new(),
            constant_response: true,
        });
    }
    let lambdas = lambda_grid(lambda_max, opts.n_lambda);

    let perm = rng.derive("cv-folds").permutation(n);
    let mut fold_of = vec![0usize; n];
    for (t, &i) in perm.iter().enumerate() {
        fold_of[i] = t % opts.folds;
    }
    let mut cv = vec![0.0; lambdas.len()];
    for f in 0..opts.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let design = Design::new(&raw, &train);
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        fit_path(&design, &ytr, opts.family, &lambdas, |k, b0, beta| {
            let err: f64 =
                test.iter().map(|&i| loss(opts.family, y[i], design.predict(&raw, i, b0, beta))).sum::<f64>();
            cv[k] += err / test.len() as f64 / opts.folds as f64;
        });
    }
    let best = (0..cv.len()).fold(0, |b, k| if cv[k] < cv[b] { k } else { b });
    let mut st = fit_path(&full, y, opts.family, &lambdas[..=best], |_, _, _| {});
    let b0 = match opts.family {
        Family::Gaussian => {
            gaussian_cd(&full.cols, lambdas[best], &mut st.beta, &mut st.r, COEF_TOL);
            ybar
        }
        Family::Binomial => {
            logistic_cd(&full.cols, y, lambdas[best], &mut st.b0, &mut st.beta, COEF_TOL);
            st.b0
        }
    };
    let beta = st.beta;
    let (coef, coef_original) = unscramble(&beta, &full);
    let intercept = b0 - coef_original.iter().zip(&order_means(&full, &order, p)).map(|(b, m)| b * m).sum::<f64>();
    Ok(LassoFit {
        coef,
        coef_original,
        intercept,
        lambda: lambdas[best],
        lambdas,
        cv_error: cv,
        constant_response: false,
    })
}

fn order_means(design: &Design, order: &[usize], p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p];
    for (k, &j) in order.iter().enumerate() {
        m[j] = design.means[k];
    }
    m
}

/// Lasso at a single penalty on an already standardised design (columns centred, unit
/// norm) with centred `y`; used for checking the solver.
pub fn lasso_fixed_lambda(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let mut beta = vec![0.0; cols.len()];
    let mut r = y.to_vec();
    gaussian_cd(cols, lambda, &mut beta, &mut r, COEF_TOL);
    beta
}
