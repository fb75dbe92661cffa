use super::{check_graph, dgm_blocked_knockoffs, dgm_expanding_knockoffs, mc_refined_blocking_column, CutStrategy};
use super::{permute_within_groups, DiscreteMatrix};
use crate::error::{KnockoffError, Result};
use crate::folds::fold_rows;
use crate::graph_tools::{complement, BlockingPlan, UndirectedGraph};
use crate::rng::RngStream;
use crate::KnockoffResult;

/// Knockoff construction run within each fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inner {
    Plain,
    /// Graph-expanding with at most this many rounds; the first round frees `B_i^c`.
    Expanding(usize),
    /// Chains only: interior free columns use the table walk with this many steps
    /// (`None` for the default), end columns use plain permutation.
    Refined(Option<usize>),
}

pub fn dgm_split_knockoffs(
    x: &DiscreteMatrix,
    g: &UndirectedGraph,
    plan: &BlockingPlan,
    inner: &Inner,
    rng: &RngStream,
) -> Result<KnockoffResult<DiscreteMatrix>> {
    check_graph(x, g)?;
    let p = x.p();
    if matches!(inner, Inner::Refined(_)) && *g != UndirectedGraph::path(p) {
        return Err(KnockoffError::InvalidInput("refined blocking requires the chain graph".into()));
    }
    let sizes = plan.validate_cut_sets(g, x.n())?;
    let folds = fold_rows(&sizes, None);
    let mut cols: Vec<Vec<u32>> = x.columns().to_vec();
    let mut trivial = vec![true; p];
    for (i, (rows, set)) in folds.iter().zip(&plan.sets).enumerate() {
        let sub = x.select_rows(rows);
        let mut fold_rng = rng.derive_index("fold", i as u64);
        let ko = match inner {
            Inner::Plain => dgm_blocked_knockoffs(&sub, g, set, &mut fold_rng)?,
            Inner::Expanding(q) => {
                let strategy = CutStrategy::Scheduled(vec![complement(p, set)]);
                dgm_expanding_knockoffs(&sub, g, *q, &strategy, &mut fold_rng)?
            }
            Inner::Refined(t_max) => refined_fold(&sub, set, *t_max, &mut fold_rng),
        };
        for j in 0..p {
            trivial[j] &= ko.trivial[j];
            for (&row, &v) in rows.iter().zip(ko.knockoffs.col(j)) {
                cols[j][row] = v;
            }
        }
    }
    let knockoffs = DiscreteMatrix::from_columns(cols, x.cards().to_vec())?;
    Ok(KnockoffResult { knockoffs, trivial })
}

fn refined_fold(x: &DiscreteMatrix, b: &[usize], t_max: Option<usize>, rng: &mut RngStream) -> KnockoffResult<DiscreteMatrix> {
    let p = x.p();
    let mut out = x.clone();
    let mut trivial = vec![true; p];
    for j in complement(p, b) {
        let col = if j > 0 && j + 1 < p {
            let dims = [x.card(j - 1) as usize, x.card(j) as usize, x.card(j + 1) as usize];
            mc_refined_blocking_column(x.col(j - 1), x.col(j), x.col(j + 1), dims, t_max, rng)
        } else {
            let nb: Vec<&[u32]> = [j.wrapping_sub(1), j + 1].iter().filter(|&&k| k < p).map(|&k| x.col(k)).collect();
            permute_within_groups(x.col(j), &nb, rng)
        };
        trivial[j] = col == x.col(j);
        out.set_col(j, col);
    }
    KnockoffResult { knockoffs: out, trivial }
}

#[cfg(test)]
mod tests {
    use super::super::neighborhood_counts;
    use super::*;

    fn random_matrix(n: usize, cards: &[u32], rng: &mut RngStream) -> DiscreteMatrix {
        let cols = cards.iter().map(|&k| (0..n).map(|_| rng.below(k as usize) as u32 + 1).collect()).collect();
        DiscreteMatrix::from_columns(cols, cards.to_vec()).unwrap()
    }

    fn even_odd(p: usize) -> BlockingPlan {
        BlockingPlan {
            sets: vec![(0..p).filter(|j| j % 2 == 1).collect(), (0..p).filter(|j| j % 2 == 0).collect()],
            fold_sizes: vec![],
            n_prime: 0,
        }
    }

    #[test]
    fn markov_chain_even_odd() {
        let mut rng = RngStream::new(1);
        let p = 10;
        let x = random_matrix(60, &vec![2; p], &mut rng);
        let g = UndirectedGraph::path(p);
        for inner in [Inner::Plain, Inner::Expanding(2), Inner::Refined(None)] {
            let out = dgm_split_knockoffs(&x, &g, &even_odd(p), &inner, &rng).unwrap();
            assert!(out.trivial.iter().all(|&t| !t), "{inner:?}");
            for rows in fold_rows(&[30, 30], None) {
                let xs = x.select_rows(&rows);
                let ks = out.knockoffs.select_rows(&rows);
                for j in 0..p {
                    if inner == Inner::Refined(None) {
                        // only the pair counts with each neighbour are conditioned on
                        for &k in g.neighbors(j) {
                            let nb = [xs.col(k)];
                            assert_eq!(neighborhood_counts(xs.col(j), &nb), neighborhood_counts(ks.col(j), &nb));
                        }
                    } else {
                        let nb: Vec<&[u32]> = g.neighbors(j).iter().map(|&k| xs.col(k)).collect();
                        assert_eq!(neighborhood_counts(xs.col(j), &nb), neighborhood_counts(ks.col(j), &nb));
                    }
                }
            }
        }
    }

    #[test]
    fn ising_parity_split() {
        let mut rng = RngStream::new(2);
        let g = UndirectedGraph::lattice(&[4, 4]);
        let x = random_matrix(80, &[2; 16], &mut rng);
        let parity = |v: usize| UndirectedGraph::lattice_coords(&[4, 4], v).iter().sum::<usize>() % 2;
        let plan = BlockingPlan {
            sets: vec![(0..16).filter(|&v| parity(v) == 0).collect(), (0..16).filter(|&v| parity(v) == 1).collect()],
            fold_sizes: vec![],
            n_prime: 0,
        };
        let out = dgm_split_knockoffs(&x, &g, &plan, &Inner::Plain, &rng).unwrap();
        assert!(out.trivial.iter().all(|&t| !t));
        for (rows, set) in fold_rows(&[40, 40], None).iter().zip(&plan.sets) {
            for &v in set {
                let xs = x.select_rows(rows);
                assert_eq!(xs.col(v), out.knockoffs.select_rows(rows).col(v));
            }
        }
    }

    #[test]
    fn non_covering_single_set() {
        let mut rng = RngStream::new(3);
        let x = random_matrix(10, &[2, 2, 2], &mut rng);
        let plan = BlockingPlan { sets: vec![vec![1]], fold_sizes: vec![], n_prime: 0 };
        let err = dgm_split_knockoffs(&x, &UndirectedGraph::path(3), &plan, &Inner::Plain, &rng);
        assert!(matches!(err, Err(KnockoffError::Coverage(_))));
    }

    #[test]
    fn nontrivial_with_positive_probability() {
        let p = 6;
        let g = UndirectedGraph::path(p);
        let mut seen = vec![false; p];
        for seed in 0..1000u64 {
            let mut rng = RngStream::new(seed);
            // 20 rows per fold exceed the 4 neighbour patterns
            let x = random_matrix(40, &vec![2; p], &mut rng);
            let out = dgm_split_knockoffs(&x, &g, &even_odd(p), &Inner::Plain, &rng).unwrap();
            for j in 0..p {
                seen[j] |= !out.trivial[j];
            }
            if seen.iter().all(|&s| s) {
                break;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn refined_requires_chain() {
        let mut rng = RngStream::new(4);
        let x = random_matrix(10, &[2, 2, 2], &mut rng);
        let plan = even_odd(3);
        let err = dgm_split_knockoffs(&x, &UndirectedGraph::cycle(3), &plan, &Inner::Refined(None), &rng);
        assert!(err.is_err());
    }
}
