//! Conditional knockoffs for Gaussian graphical models: blocking and data splitting.

use crate::error::{KnockoffError, Result};
use crate::folds::fold_rows;
use crate::gaussian_core::{compute_s, partial_conditional_knockoffs, partial_residual_covariance, SParams};
use crate::graph_tools::{blocked_neighbors, components_after_deletion, separation_violation, BlockingPlan, UndirectedGraph};
use crate::linalg::RealMatrix;
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::KnockoffResult;

fn check_vertices(g: &UndirectedGraph, p: usize, b: &[usize]) -> Result<Vec<bool>> {
    if g.p() != p {
        return Err(KnockoffError::Dimension(format!("graph has {} vertices but X has {p} columns", g.p())));
    }
    let mut m = vec![false; p];
    for &v in b {
        if v >= p {
            return Err(KnockoffError::InvalidInput(format!("blocked vertex {} out of range", v + 1)));
        }
        m[v] = true;
    }
    Ok(m)
}

/// Keeps `X_B` fixed and, for every component `V` of the graph with `B` deleted, draws
/// partial knockoffs for `X_V` conditional on its blocked neighbours. Each component uses its
/// own stream derived from `rng` and its own s-vector on the residual covariance.
pub fn ggm_blocked_knockoffs<T: Real>(
    x: &RealMatrix<T>,
    g: &UndirectedGraph,
    b: &[usize],
    s_params: &SParams,
    rng: &RngStream,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    let (n, p) = x.shape();
    let b_mask = check_vertices(g, p, b)?;
    if let Some(comp) = separation_violation(g, b, n) {
        return Err(KnockoffError::Precondition(format!(
            "component {:?} is not {n}-separated by the blocking set",
            comp.iter().map(|v| v + 1).collect::<Vec<_>>()
        )));
    }
    let mut out = x.clone();
    for (k, comp) in components_after_deletion(g, b).iter().enumerate() {
        let cond = blocked_neighbors(g, comp, &b_mask);
        let x_v = x.select_cols(comp);
        let x_b = x.select_cols(&cond);
        let sigma = partial_residual_covariance(&x_v, &x_b)?;
        let s = compute_s(&sigma, s_params)?;
        let mut stream = rng.derive_index("component", k as u64);
        let ko = partial_conditional_knockoffs(&x_v, &x_b, &s, &mut stream)?;
        for (jj, &j) in comp.iter().enumerate() {
            out.set_col(j, &ko.knockoffs.col(jj));
        }
    }
    Ok(KnockoffResult { knockoffs: out, trivial: b_mask })
}

/// Splits rows into the plan's folds (contiguous, in input order) and runs
/// [`ggm_blocked_knockoffs`] in fold `i` with blocking set `B_i`.
pub fn ggm_split_knockoffs<T: Real>(
    x: &RealMatrix<T>,
    g: &UndirectedGraph,
    plan: &BlockingPlan,
    s_params: &SParams,
    rng: &RngStream,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    ggm_split_with_rows(x, g, plan, s_params, rng, false)
}

/// As [`ggm_split_knockoffs`] but assigns rows to folds by a seeded shuffle.
pub fn ggm_split_knockoffs_shuffled<T: Real>(
    x: &RealMatrix<T>,
    g: &UndirectedGraph,
    plan: &BlockingPlan,
    s_params: &SParams,
    rng: &RngStream,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    ggm_split_with_rows(x, g, plan, s_params, rng, true)
}

fn ggm_split_with_rows<T: Real>(
    x: &RealMatrix<T>,
    g: &UndirectedGraph,
    plan: &BlockingPlan,
    s_params: &SParams,
    rng: &RngStream,
    shuffle: bool,
) -> Result<KnockoffResult<RealMatrix<T>>> {
    let (n, p) = x.shape();
    check_vertices(g, p, &[])?;
    let sizes = plan.validate_separating(g, n)?;
    let mut row_rng = rng.derive("rows");
    let folds = fold_rows(&sizes, if shuffle { Some(&mut row_rng) } else { None });
    let mut out = x.clone();
    let mut trivial = vec![true; p];
    for (i, (rows, set)) in folds.iter().zip(&plan.sets).enumerate() {
        let sub = x.select_rows(rows);
        let ko = ggm_blocked_knockoffs(&sub, g, set, s_params, &rng.derive_index("fold", i as u64))?;
        for (r, &row) in rows.iter().enumerate() {
            out.row_mut(row).copy_from_slice(ko.knockoffs.row(r));
        }
        for (t, &ft) in trivial.iter_mut().zip(&ko.trivial) {
            *t &= ft;
        }
    }
    Ok(KnockoffResult { knockoffs: out, trivial })
}

/// `X_jᵀX̃_j / (‖X_j‖‖X̃_j‖)` per column.
pub fn original_knockoff_correlations<T: Real>(x: &RealMatrix<T>, xt: &RealMatrix<T>) -> Vec<f64> {
    (0..x.cols())
        .map(|j| {
            let a = x.col(j);
            let b = xt.col(j);
            let ab = crate::linalg::dot(&a, &b).to_f64_lossy();
            let aa = crate::linalg::dot(&a, &a).to_f64_lossy();
            let bb = crate::linalg::dot(&b, &b).to_f64_lossy();
            ab / (aa * bb).sqrt()
        })
        .collect()
}
