//! Sequential conditional independent pairs conditioned on the transition counts.

use super::DiscreteMatrix;
use crate::error::{KnockoffError, Result};
use crate::rng::RngStream;
use crate::KnockoffResult;
use std::collections::HashMap;

/// Largest `(K_j K_{j+1})^{fold}` enumerated per step.
pub const SCIP_BUDGET: f64 = 1e7;

fn decode(mut code: usize, n: usize, k: u32, out: &mut [u32]) {
    for v in out.iter_mut().take(n) {
        *v = (code % k as usize) as u32 + 1;
        code /= k as usize;
    }
}

fn pair_table(a: &[u32], b: &[u32], ka: u32, kb: u32) -> Vec<u32> {
    let mut t = vec![0u32; (ka * kb) as usize];
    for (&x, &y) in a.iter().zip(b) {
        t[((x - 1) * kb + y - 1) as usize] += 1;
    }
    t
}

struct Column {
    code: usize,
    values: Vec<u32>,
}

fn all_columns(n: usize, k: u32) -> impl Iterator<Item = Column> {
    let total = (k as usize).pow(n as u32);
    (0..total).map(move |code| {
        let mut values = vec![0; n];
        decode(code, n, k, &mut values);
        Column { code, values }
    })
}

/// SCIP on one fold of rows (`cols[j]` is column `j` restricted to the fold). Every output
/// column keeps all transition pair counts of the fold.
pub fn scip_fold(cols: &[Vec<u32>], card: &[u32], rng: &mut RngStream) -> Result<Vec<Vec<u32>>> {
    let p = cols.len();
    let n = cols.first().map_or(0, |c| c.len());
    for j in 0..p {
        let pair = if j + 1 < p { card[j] as f64 * card[j + 1] as f64 } else { card[j] as f64 };
        if pair.powi(n as i32) > SCIP_BUDGET {
            return Err(KnockoffError::Budget(format!(
                "enumerating {n}-row folds at column {} needs {:.3e} states; use a smaller fold size",
                j + 1,
                pair.powi(n as i32)
            )));
        }
    }
    let target: Vec<Vec<u32>> = (1..p).map(|j| pair_table(&cols[j - 1], &cols[j], card[j - 1], card[j])).collect();
    let fits_left = |j: usize, w: &[u32]| j == 0 || pair_table(&cols[j - 1], w, card[j - 1], card[j]) == target[j - 1];
    let fits_right = |j: usize, w: &[u32]| j + 1 >= p || pair_table(w, &cols[j + 1], card[j], card[j + 1]) == target[j];

    let mut out: Vec<Vec<u32>> = Vec::with_capacity(p);
    // g_{j-1} over candidate values of column j; `None` means identically one.
    let mut g_prev: Option<HashMap<usize, f64>> = None;
    for j in 0..p {
        // candidates for W_j: agree with X_{j-1} on the left and have g_{j-1} > 0
        let left: Vec<(Column, f64)> = all_columns(n, card[j])
            .filter_map(|c| {
                let g = match &g_prev {
                    None => 1.0,
                    Some(m) => *m.get(&c.code)?,
                };
                fits_left(j, &c.values).then_some((c, g))
            })
            .collect();
        let weights: Vec<f64> = left.iter().map(|(c, g)| if fits_right(j, &c.values) { *g } else { 0.0 }).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(KnockoffError::Degenerate(format!("no admissible value for column {}", j + 1)));
        }
        let mut u = rng.uniform() * total;
        let mut pick = weights.iter().rposition(|&w| w > 0.0).expect("positive total");
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 && u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        let (chosen, g_chosen) = (&left[pick].0, left[pick].1);
        if j + 1 < p {
            let right_ok = |w: &[u32]| j + 2 >= p || pair_table(w, &cols[j + 2], card[j + 1], card[j + 2]) == target[j + 1];
            let mut g_next = HashMap::new();
            for c in all_columns(n, card[j + 1]) {
                if !right_ok(&c.values) || pair_table(&chosen.values, &c.values, card[j], card[j + 1]) != target[j] {
                    continue;
                }
                let z: f64 = left
                    .iter()
                    .filter(|(w, _)| pair_table(&w.values, &c.values, card[j], card[j + 1]) == target[j])
                    .map(|(_, g)| g)
                    .sum();
                g_next.insert(c.code, g_chosen / z);
            }
            g_prev = Some(g_next);
        }
        out.push(chosen.values.clone());
    }
    Ok(out)
}

/// SCIP knockoffs for a discrete Markov chain: rows are shuffled into folds of
/// `fold_size` (the last may be smaller) and SCIP runs within each fold.
pub fn mc_scip_knockoffs(x: &DiscreteMatrix, fold_size: usize, rng: &RngStream) -> Result<KnockoffResult<DiscreteMatrix>> {
    if fold_size == 0 {
        return Err(KnockoffError::InvalidInput("fold size must be positive".into()));
    }
    let n = x.n();
    let mut order: Vec<usize> = (0..n).collect();
    rng.derive("folds").shuffle(&mut order);
    let mut out = x.clone();
    let mut cols: Vec<Vec<u32>> = x.columns().to_vec();
    for (f, rows) in order.chunks(fold_size).enumerate() {
        let sub: Vec<Vec<u32>> = x.columns().iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect();
        let ko = scip_fold(&sub, x.cards(), &mut rng.derive_index("fold", f as u64))?;
        for (j, col) in ko.into_iter().enumerate() {
            for (&i, v) in rows.iter().zip(col) {
                cols[j][i] = v;
            }
        }
    }
    let mut trivial = Vec::with_capacity(x.p());
    for (j, col) in cols.into_iter().enumerate() {
        trivial.push(col == x.col(j));
        out.set_col(j, col);
    }
    Ok(KnockoffResult { knockoffs: out, trivial })
}
