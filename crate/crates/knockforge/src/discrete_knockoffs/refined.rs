//! Metropolis–Hastings walk on three-way contingency tables for one Markov-chain column.

use crate::rng::RngStream;
use num_traits::{FromPrimitive, Num};

/// Counts `c[k-][k][k+]` of `(X_{j-1}, X_j, X_{j+1})` triples, labels 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThreeWayTable {
    dims: [usize; 3],
    cells: Vec<u64>,
}

/// A basic move: `(r1, r2)`, `(d1, d2)`, `(c1, c2)` are ordered distinct pairs of 0-based
/// categories along the left, middle and right axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasicMove {
    pub r: (usize, usize),
    pub d: (usize, usize),
    pub c: (usize, usize),
}

impl BasicMove {
    /// The eight cells touched, with the sign of the change.
    pub fn cells(&self) -> [([usize; 3], i64); 8] {
        let (r1, r2) = self.r;
        let (d1, d2) = self.d;
        let (c1, c2) = self.c;
        [
            ([r1, d1, c1], -1),
            ([r1, d2, c1], 1),
            ([r1, d1, c2], 1),
            ([r1, d2, c2], -1),
            ([r2, d1, c1], 1),
            ([r2, d2, c1], -1),
            ([r2, d1, c2], -1),
            ([r2, d2, c2], 1),
        ]
    }
}

impl ThreeWayTable {
    pub fn zeros(dims: [usize; 3]) -> Self {
        ThreeWayTable { dims, cells: vec![0; dims[0] * dims[1] * dims[2]] }
    }

    pub fn from_columns(left: &[u32], mid: &[u32], right: &[u32], dims: [usize; 3]) -> Self {
        let mut t = Self::zeros(dims);
        for ((&a, &b), &c) in left.iter().zip(mid).zip(right) {
            let idx = t.index([a as usize - 1, b as usize - 1, c as usize - 1]);
            t.cells[idx] += 1;
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn index(&self, k: [usize; 3]) -> usize {
        (k[0] * self.dims[1] + k[1]) * self.dims[2] + k[2]
    }

    pub fn get(&self, k: [usize; 3]) -> u64 {
        self.cells[self.index(k)]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn nonempty_cells(&self) -> usize {
        self.cells.iter().filter(|&&c| c > 0).count()
    }

    /// `N^{(j)}`: left × middle margin.
    pub fn left_margin(&self) -> Vec<Vec<u64>> {
        let [a, b, c] = self.dims;
        (0..a).map(|i| (0..b).map(|k| (0..c).map(|l| self.get([i, k, l])).sum()).collect()).collect()
    }

    /// `N^{(j+1)}`: middle × right margin.
    pub fn right_margin(&self) -> Vec<Vec<u64>> {
        let [a, b, c] = self.dims;
        (0..b).map(|k| (0..c).map(|l| (0..a).map(|i| self.get([i, k, l])).sum()).collect()).collect()
    }

    /// `M_{k-,k+}`: left × right margin.
    pub fn outer_margin(&self) -> Vec<Vec<u64>> {
        let [a, b, c] = self.dims;
        (0..a).map(|i| (0..c).map(|l| (0..b).map(|k| self.get([i, k, l])).sum()).collect()).collect()
    }

    /// The table after the move, or `None` if some cell would go negative.
    pub fn apply(&self, mv: &BasicMove) -> Option<ThreeWayTable> {
        let mut out = self.clone();
        for (k, sign) in mv.cells() {
            let idx = out.index(k);
            let v = out.cells[idx] as i64 + sign;
            if v < 0 {
                return None;
            }
            out.cells[idx] = v as u64;
        }
        Some(out)
    }

    /// Log of the unnormalised probability `∏_{k-,k+} M! / ∏_k c!`.
    pub fn log_weight(&self) -> f64 {
        let [a, b, c] = self.dims;
        let mut out = 0.0;
        for i in 0..a {
            for l in 0..c {
                let mut m = 0;
                for k in 0..b {
                    let v = self.get([i, k, l]);
                    m += v;
                    out -= ln_factorial(v);
                }
                out += ln_factorial(m);
            }
        }
        out
    }
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Ratio of table probabilities `π(c + Δ) / π(c)` for a move that keeps every cell
/// nonnegative, as a product of four fractions.
pub fn acceptance_ratio<N: Num + FromPrimitive + Clone>(t: &ThreeWayTable, mv: &BasicMove) -> N {
    let (r1, r2) = mv.r;
    let (d1, d2) = mv.d;
    let (c1, c2) = mv.c;
    let v = |k: [usize; 3], plus: u64| N::from_u64(t.get(k) + plus).expect("count fits");
    v([r1, d1, c1], 0) / v([r1, d2, c1], 1) * v([r1, d2, c2], 0) / v([r1, d1, c2], 1) * v([r2, d2, c1], 0)
        / v([r2, d1, c1], 1)
        * v([r2, d1, c2], 0)
        / v([r2, d2, c2], 1)
}

fn ordered_pair(k: usize, rng: &mut RngStream) -> (usize, usize) {
    let a = rng.below(k);
    let mut b = rng.below(k - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// One proposal-and-accept step; returns whether the table moved.
pub fn mh_step(t: &mut ThreeWayTable, rng: &mut RngStream) -> bool {
    let [a, b, c] = t.dims;
    let mv = BasicMove { r: ordered_pair(a, rng), c: ordered_pair(c, rng), d: ordered_pair(b, rng) };
    let cells = mv.cells();
    if cells.iter().any(|&(k, sign)| sign < 0 && t.get(k) == 0) {
        return false;
    }
    let alpha = acceptance_ratio::<f64>(t, &mv).min(1.0);
    if rng.uniform() <= alpha {
        for (k, sign) in cells {
            let idx = t.index(k);
            t.cells[idx] = (t.cells[idx] as i64 + sign) as u64;
        }
        true
    } else {
        false
    }
}

/// Runs `t_max` steps of the walk from `t`.
pub fn refined_chain(mut t: ThreeWayTable, t_max: usize, rng: &mut RngStream) -> ThreeWayTable {
    if t.dims.iter().all(|&d| d >= 2) {
        for _ in 0..t_max {
            mh_step(&mut t, rng);
        }
    }
    t
}

/// Knockoff for a middle column of a Markov chain: walks the table of `(X_{j-1}, X_j,
/// X_{j+1})` for `t_max` steps (default 100 × nonempty cells), then fills each
/// `(k-, k+)` row group with a uniform arrangement of its sampled middle labels.
pub fn mc_refined_blocking_column(
    left: &[u32],
    mid: &[u32],
    right: &[u32],
    dims: [usize; 3],
    t_max: Option<usize>,
    rng: &mut RngStream,
) -> Vec<u32> {
    let start = ThreeWayTable::from_columns(left, mid, right, dims);
    let steps = t_max.unwrap_or(100 * start.nonempty_cells());
    let t = refined_chain(start, steps, rng);
    let [a, b, c] = dims;
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); a * c];
    for (i, (&l, &r)) in left.iter().zip(right).enumerate() {
        rows[(l as usize - 1) * c + r as usize - 1].push(i);
    }
    let mut out = vec![0u32; mid.len()];
    for i in 0..a {
        for l in 0..c {
            let mut labels: Vec<u32> = Vec::new();
            for k in 0..b {
                labels.extend(std::iter::repeat_n(k as u32 + 1, t.get([i, k, l]) as usize));
            }
            rng.shuffle(&mut labels);
            for (&row, v) in rows[i * c + l].iter().zip(labels) {
                out[row] = v;
            }
        }
    }
    out
}
