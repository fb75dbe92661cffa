//! Conditional knockoffs for discrete graphical models and discrete Markov chains.

mod expanding;
mod refined;
mod scip;
mod split;

pub use expanding::{
    dgm_expanding_knockoffs, dgm_expanding_knockoffs_with_report, CutStrategy, ExpandingReport, ExpansionRound, Vertex,
};
pub use refined::{
    acceptance_ratio, mc_refined_blocking_column, mh_step, refined_chain, BasicMove, ThreeWayTable,
};
pub use scip::{mc_scip_knockoffs, scip_fold, SCIP_BUDGET};
pub use split::{dgm_split_knockoffs, Inner};

use crate::error::{KnockoffError, Result};
use crate::graph_tools::{complement, is_global_cut_set, UndirectedGraph};
use crate::rng::RngStream;
use crate::KnockoffResult;
use std::collections::{BTreeMap, HashMap};

/// Categorical data: entry `(i, j)` is a label in `1..=K_j`. Stored by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteMatrix {
    n: usize,
    cols: Vec<Vec<u32>>,
    card: Vec<u32>,
    labels: Option<Vec<Vec<i64>>>,
}

impl DiscreteMatrix {
    pub fn from_columns(cols: Vec<Vec<u32>>, card: Vec<u32>) -> Result<Self> {
        if cols.len() != card.len() {
            return Err(KnockoffError::Dimension(format!("{} columns but {} cardinalities", cols.len(), card.len())));
        }
        let n = cols.first().map_or(0, |c| c.len());
        for (j, (col, &k)) in cols.iter().zip(&card).enumerate() {
            if col.len() != n {
                return Err(KnockoffError::Dimension("ragged columns".into()));
            }
            if k < 2 {
                return Err(KnockoffError::InvalidInput(format!("column {} has cardinality {k} < 2", j + 1)));
            }
            if let Some(&bad) = col.iter().find(|&&v| v == 0 || v > k) {
                return Err(KnockoffError::InvalidInput(format!("column {} has label {bad} outside 1..={k}", j + 1)));
            }
        }
        Ok(DiscreteMatrix { n, cols, card, labels: None })
    }

    pub fn from_rows(rows: &[Vec<u32>], card: Vec<u32>) -> Result<Self> {
        let p = card.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(KnockoffError::Dimension("row length differs from cardinality count".into()));
        }
        let cols = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_columns(cols, card)
    }

    /// Remaps arbitrary integer labels per column to `1..=K_j` in increasing order, keeping
    /// the mapping. `K_j` is the number of distinct labels (at least 2).
    pub fn from_labels(rows: &[Vec<i64>]) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(KnockoffError::Dimension("ragged rows".into()));
        }
        let mut cols = Vec::with_capacity(p);
        let mut card = Vec::with_capacity(p);
        let mut labels = Vec::with_capacity(p);
        for j in 0..p {
            let mut distinct: Vec<i64> = rows.iter().map(|r| r[j]).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let index: HashMap<i64, u32> = distinct.iter().enumerate().map(|(i, &v)| (v, i as u32 + 1)).collect();
            cols.push(rows.iter().map(|r| index[&r[j]]).collect());
            card.push((distinct.len() as u32).max(2));
            labels.push(distinct);
        }
        let mut m = Self::from_columns(cols, card)?;
        m.labels = Some(labels);
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &[u32] {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.cols[j][i]
    }

    pub fn card(&self, j: usize) -> u32 {
        self.card[j]
    }

    pub fn cards(&self) -> &[u32] {
        &self.card
    }

    /// Original label for each category of column `j`, when built by [`Self::from_labels`].
    pub fn label_map(&self, j: usize) -> Option<&[i64]> {
        self.labels.as_ref().map(|l| l[j].as_slice())
    }

    pub fn row(&self, i: usize) -> Vec<u32> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        DiscreteMatrix {
            n: rows.len(),
            cols: self.cols.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
            card: self.card.clone(),
            labels: self.labels.clone(),
        }
    }

    pub(crate) fn set_col(&mut self, j: usize, col: Vec<u32>) {
        debug_assert_eq!(col.len(), self.n);
        self.cols[j] = col;
    }

    /// Real-valued copy using `value(j, label)` for each entry, row-major.
    pub fn to_real(&self, value: impl Fn(usize, u32) -> f64) -> crate::Matrix {
        let mut data = Vec::with_capacity(self.n * self.p());
        for i in 0..self.n {
            for j in 0..self.p() {
                data.push(value(j, self.cols[j][i]));
            }
        }
        crate::Matrix::from_vec(self.n, self.p(), data).expect("finite values")
    }
}

/// Uniformly permutes `target` within each group of rows sharing the same pattern across
/// `neighbors`. Groups are keyed by hashing the pattern and visited in order of first
/// appearance, so the output depends only on the data and the stream.
pub fn permute_within_groups(target: &[u32], neighbors: &[&[u32]], rng: &mut RngStream) -> Vec<u32> {
    let n = target.len();
    let mut group_of: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let key: Vec<u32> = neighbors.iter().map(|c| c[i]).collect();
        let next = groups.len();
        let g = *group_of.entry(key).or_insert(next);
        if g == next {
            groups.push(Vec::new());
        }
        groups[g].push(i);
    }
    let mut out = target.to_vec();
    for rows in &groups {
        let mut vals: Vec<u32> = rows.iter().map(|&i| target[i]).collect();
        rng.shuffle(&mut vals);
        for (&i, v) in rows.iter().zip(vals) {
            out[i] = v;
        }
    }
    out
}

/// Tally `N_j(k, k_{I_j})` of a column against its neighbour columns.
pub fn neighborhood_counts(target: &[u32], neighbors: &[&[u32]]) -> BTreeMap<(u32, Vec<u32>), usize> {
    let mut out = BTreeMap::new();
    for (i, &v) in target.iter().enumerate() {
        let key: Vec<u32> = neighbors.iter().map(|c| c[i]).collect();
        *out.entry((v, key)).or_insert(0) += 1;
    }
    out
}

/// Transition pair counts `N^{(j)}` between consecutive columns, as `K_{j-1} × K_j` tables.
pub fn pair_counts(x: &DiscreteMatrix) -> Vec<Vec<Vec<usize>>> {
    (1..x.p())
        .map(|j| {
            let mut t = vec![vec![0usize; x.card(j) as usize]; x.card(j - 1) as usize];
            for (&a, &b) in x.col(j - 1).iter().zip(x.col(j)) {
                t[a as usize - 1][b as usize - 1] += 1;
            }
            t
        })
        .collect()
}

fn check_graph(x: &DiscreteMatrix, g: &UndirectedGraph) -> Result<()> {
    if g.p() != x.p() {
        return Err(KnockoffError::Dimension(format!("graph has {} vertices but X has {} columns", g.p(), x.p())));
    }
    Ok(())
}

/// For each free vertex `j ∉ B`, permutes `X_j` uniformly within the rows sharing the same
/// neighbour pattern `X_{I_j}`; blocked columns are copied. Free vertices are processed in
/// increasing order with the one stream.
pub fn dgm_blocked_knockoffs(
    x: &DiscreteMatrix,
    g: &UndirectedGraph,
    b: &[usize],
    rng: &mut RngStream,
) -> Result<KnockoffResult<DiscreteMatrix>> {
    check_graph(x, g)?;
    if b.iter().any(|&v| v >= x.p()) {
        return Err(KnockoffError::InvalidInput("blocked vertex out of range".into()));
    }
    if !is_global_cut_set(g, b) {
        return Err(KnockoffError::Precondition("blocking set is not a global cut set".into()));
    }
    let mut out = x.clone();
    let mut trivial = vec![true; x.p()];
    for j in complement(x.p(), b) {
        let nb: Vec<&[u32]> = g.neighbors(j).iter().map(|&k| x.col(k)).collect();
        let col = permute_within_groups(x.col(j), &nb, rng);
        trivial[j] = col == x.col(j);
        out.set_col(j, col);
    }
    Ok(KnockoffResult { knockoffs: out, trivial })
}
