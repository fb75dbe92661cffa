use super::{complement, is_global_cut_set, separation_violation, UndirectedGraph};
use crate::error::{KnockoffError, Result};
use crate::rng::RngStream;
use std::collections::BTreeSet;

/// Blocking sets `B_1..B_m` with fold sizes for data splitting. An empty `fold_sizes`
/// means "split the rows as evenly as possible".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockingPlan {
    pub sets: Vec<Vec<usize>>,
    pub fold_sizes: Vec<usize>,
    pub n_prime: usize,
}

impl BlockingPlan {
    pub fn m(&self) -> usize {
        self.sets.len()
    }

    /// Vertices that are blocked in every fold.
    pub fn always_blocked(&self, p: usize) -> Vec<usize> {
        let mut count = vec![0usize; p];
        for set in &self.sets {
            for &v in set {
                count[v] += 1;
            }
        }
        (0..p).filter(|&v| count[v] == self.sets.len()).collect()
    }

    pub fn is_covering(&self, p: usize) -> bool {
        self.always_blocked(p).is_empty()
    }

    /// Fold sizes for `n` rows: the explicit sizes if given (they must sum to `n`), else an
    /// even split with the remainder going to the first folds.
    pub fn resolve_fold_sizes(&self, n: usize) -> Result<Vec<usize>> {
        let m = self.sets.len();
        if m == 0 {
            return Err(KnockoffError::FoldSize("plan has no blocking sets".into()));
        }
        if self.fold_sizes.is_empty() {
            if n < m {
                return Err(KnockoffError::FoldSize(format!("{n} rows cannot fill {m} folds")));
            }
            return Ok((0..m).map(|i| n / m + usize::from(i < n % m)).collect());
        }
        if self.fold_sizes.len() != m {
            return Err(KnockoffError::FoldSize(format!("{} fold sizes for {m} blocking sets", self.fold_sizes.len())));
        }
        if self.fold_sizes.contains(&0) {
            return Err(KnockoffError::FoldSize("empty fold".into()));
        }
        let total: usize = self.fold_sizes.iter().sum();
        if total != n {
            return Err(KnockoffError::FoldSize(format!("fold sizes sum to {total}, but there are {n} rows")));
        }
        Ok(self.fold_sizes.clone())
    }

    /// Checks coverage, fold sizes and per-fold n_i-separation (Gaussian use).
    pub fn validate_separating(&self, g: &UndirectedGraph, n: usize) -> Result<Vec<usize>> {
        self.validate_common(g, n).and_then(|sizes| {
            for (i, (set, &ni)) in self.sets.iter().zip(&sizes).enumerate() {
                if let Some(comp) = separation_violation(g, set, ni) {
                    return Err(KnockoffError::Precondition(format!(
                        "fold {}: component {:?} is not {ni}-separated by its blocking set",
                        i + 1,
                        comp.iter().map(|v| v + 1).collect::<Vec<_>>()
                    )));
                }
            }
            Ok(sizes)
        })
    }

    /// Checks coverage, fold sizes and that every set is a global cut set (discrete use).
    pub fn validate_cut_sets(&self, g: &UndirectedGraph, n: usize) -> Result<Vec<usize>> {
        self.validate_common(g, n).and_then(|sizes| {
            for (i, set) in self.sets.iter().enumerate() {
                if !is_global_cut_set(g, set) {
                    return Err(KnockoffError::Precondition(format!("blocking set {} is not a global cut set", i + 1)));
                }
            }
            Ok(sizes)
        })
    }

    fn validate_common(&self, g: &UndirectedGraph, n: usize) -> Result<Vec<usize>> {
        if self.sets.iter().flatten().any(|&v| v >= g.p()) {
            return Err(KnockoffError::InvalidInput("blocking set mentions a vertex outside the graph".into()));
        }
        let stuck = self.always_blocked(g.p());
        if !stuck.is_empty() {
            return Err(KnockoffError::Coverage(format!(
                "always blocked: {:?}",
                stuck.iter().map(|v| v + 1).collect::<Vec<_>>()
            )));
        }
        self.resolve_fold_sizes(n)
    }
}

/// Greedy blocking search in neighbour-set form. Visits vertices in the order `pi`; a vertex
/// is free when `n′ ≥ 3 + |N_j| + |N_j ∩ visited free|`, after which its unvisited extended
/// neighbours absorb `N_j`. Returns the sorted blocking set.
pub fn greedy_blocking(g: &UndirectedGraph, pi: &[usize], n_prime: usize) -> Vec<usize> {
    let mut state = GreedyState::new(g);
    for &j in pi {
        state.visit(j, n_prime);
    }
    state.blocked()
}

/// Variant that always visits next the unvisited vertex of smallest degree in the expanded
/// graph, ties broken uniformly at random.
pub fn greedy_blocking_smallest_degree(g: &UndirectedGraph, n_prime: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut state = GreedyState::new(g);
    for _ in 0..g.p() {
        let mut best = usize::MAX;
        let mut ties = Vec::new();
        for j in (0..g.p()).filter(|&j| !state.visited[j]) {
            let deg = state.expanded_degree(j);
            if deg < best {
                best = deg;
                ties.clear();
            }
            if deg == best {
                ties.push(j);
            }
        }
        let j = ties[rng.below(ties.len())];
        state.visit(j, n_prime);
    }
    state.blocked()
}

struct GreedyState {
    n_sets: Vec<BTreeSet<usize>>,
    visited: Vec<bool>,
    free: Vec<bool>,
    blocked: Vec<bool>,
}

impl GreedyState {
    fn new(g: &UndirectedGraph) -> Self {
        let p = g.p();
        GreedyState {
            n_sets: (0..p).map(|j| g.neighbors(j).iter().copied().collect()).collect(),
            visited: vec![false; p],
            free: vec![false; p],
            blocked: vec![false; p],
        }
    }

    fn expanded_degree(&self, j: usize) -> usize {
        self.n_sets[j].len() + self.n_sets[j].iter().filter(|&&k| self.free[k]).count()
    }

    fn visit(&mut self, j: usize, n_prime: usize) {
        if n_prime >= 3 + self.expanded_degree(j) {
            let nj: Vec<usize> = self.n_sets[j].iter().copied().collect();
            for &k in nj.iter().filter(|&&k| !self.visited[k]) {
                for &w in &nj {
                    if w != k {
                        self.n_sets[k].insert(w);
                    }
                }
            }
            self.free[j] = true;
        } else {
            self.blocked[j] = true;
        }
        self.visited[j] = true;
    }

    fn blocked(&self) -> Vec<usize> {
        (0..self.blocked.len()).filter(|&j| self.blocked[j]).collect()
    }
}

/// The same search run literally on an explicitly expanded graph: a free vertex has its
/// neighbourhood clique-completed and gains a knockoff twin with the same neighbourhood.
/// Slower; kept to cross-check [`greedy_blocking`].
pub fn greedy_blocking_literal(g: &UndirectedGraph, pi: &[usize], n_prime: usize) -> Vec<usize> {
    let p = g.p();
    let mut adj: Vec<BTreeSet<usize>> = (0..p).map(|j| g.neighbors(j).iter().copied().collect()).collect();
    let mut blocked = Vec::new();
    for &j in pi {
        let nbrs: Vec<usize> = adj[j].iter().copied().collect();
        if n_prime >= 3 + nbrs.len() {
            for (a, &u) in nbrs.iter().enumerate() {
                for &w in &nbrs[a + 1..] {
                    adj[u].insert(w);
                    adj[w].insert(u);
                }
            }
            let twin = adj.len();
            adj.push(nbrs.iter().copied().collect());
            for &u in &nbrs {
                adj[u].insert(twin);
            }
        } else {
            blocked.push(j);
        }
    }
    blocked.sort_unstable();
    blocked
}

/// `m` greedy passes, each visiting vertices by decreasing count of previous blockings with
/// ties broken by a seeded shuffle. A non-covering result is returned as is; see
/// [`BlockingPlan::always_blocked`].
pub fn randomized_blocking_plan(g: &UndirectedGraph, m: usize, n_prime: usize, rng: &mut RngStream) -> BlockingPlan {
    let p = g.p();
    let mut eta = vec![0usize; p];
    let mut sets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut pi = rng.permutation(p);
        pi.sort_by(|a, b| eta[*b].cmp(&eta[*a]));
        let b = greedy_blocking(g, &pi, n_prime);
        for &v in &b {
            eta[v] += 1;
        }
        sets.push(b);
    }
    BlockingPlan { sets, fold_sizes: Vec::new(), n_prime }
}

/// Deterministic two-fold plan: identity order first, then the first blocking set (in order)
/// followed by the remaining variables.
pub fn two_pass_plan(g: &UndirectedGraph, n_prime: usize) -> BlockingPlan {
    let p = g.p();
    let b1 = greedy_blocking(g, &(0..p).collect::<Vec<_>>(), n_prime);
    let mut pi = b1.clone();
    pi.extend(complement(p, &b1));
    let b2 = greedy_blocking(g, &pi, n_prime);
    BlockingPlan { sets: vec![b1, b2], fold_sizes: Vec::new(), n_prime }
}

#[cfg(test)]
mod tests {
    use super::super::is_n_separated;
    use super::*;

    fn id(p: usize) -> Vec<usize> {
        (0..p).collect()
    }

    #[test]
    fn path_trace() {
        let g = UndirectedGraph::path(5);
        assert_eq!(greedy_blocking(&g, &id(5), 5), vec![1, 3]);
    }

    #[test]
    fn large_budget_blocks_nothing() {
        let mut rng = RngStream::new(41);
        let g = UndirectedGraph::erdos_renyi(12, 0.5, &mut rng);
        assert!(greedy_blocking(&g, &id(12), 3 + 2 * 12).is_empty());
    }

    #[test]
    fn unit_budget_blocks_everything() {
        let g = UndirectedGraph::path(4);
        assert_eq!(greedy_blocking(&g, &id(4), 1), id(4));
        assert_eq!(greedy_blocking(&UndirectedGraph::isolated(3), &id(3), 2), id(3));
    }

    #[test]
    fn literal_and_efficient_agree() {
        let mut rng = RngStream::new(42);
        for trial in 0..300 {
            let p = 5 + trial % 20;
            let g = UndirectedGraph::erdos_renyi(p, 0.05 + 0.3 * rng.uniform(), &mut rng);
            let pi = rng.permutation(p);
            let n_prime = 3 + rng.below(2 * p);
            assert_eq!(greedy_blocking(&g, &pi, n_prime), greedy_blocking_literal(&g, &pi, n_prime));
        }
    }

    #[test]
    fn smallest_degree_variant_separates() {
        let mut rng = RngStream::new(43);
        for _ in 0..100 {
            let g = UndirectedGraph::erdos_renyi(20, 0.15, &mut rng);
            let b = greedy_blocking_smallest_degree(&g, 9, &mut rng);
            assert!(is_n_separated(&g, &b, 9));
        }
    }

    #[test]
    fn isolated_plan_covers() {
        let g = UndirectedGraph::isolated(7);
        let plan = randomized_blocking_plan(&g, 3, 3, &mut RngStream::new(1));
        assert!(plan.sets.iter().all(|s| s.is_empty()));
        assert!(plan.is_covering(7));
    }

    #[test]
    fn path_plans() {
        let g = UndirectedGraph::path(5);
        // identity first pass blocks {2,4}; the second pass visits those first and frees them
        let plan = two_pass_plan(&g, 5);
        assert_eq!(plan.sets, vec![vec![1, 3], vec![0, 2, 4]]);
        let mut covering = 0;
        for seed in 0..200 {
            let plan = randomized_blocking_plan(&g, 2, 5, &mut RngStream::new(seed));
            let both: Vec<usize> = plan.sets[0].iter().filter(|v| plan.sets[1].contains(v)).copied().collect();
            assert_eq!(plan.always_blocked(5), both);
            covering += usize::from(plan.is_covering(5));
        }
        assert!(covering > 100, "only {covering} of 200 plans cover");
    }

    #[test]
    fn clique_plan_reports_blocked_vertices() {
        let mut g = UndirectedGraph::isolated(10);
        for a in 0..10 {
            for b in (a + 1)..10 {
                g.add_edge(a, b).unwrap();
            }
        }
        // budget too small for any vertex of degree 9
        let plan = randomized_blocking_plan(&g, 1, 5, &mut RngStream::new(3));
        assert_eq!(plan.sets[0], id(10));
        assert_eq!(plan.always_blocked(10), id(10));
        // with room for exactly one vertex only the first visited is free
        let plan = randomized_blocking_plan(&g, 1, 12, &mut RngStream::new(3));
        assert_eq!(plan.sets[0].len(), 9);
        assert_eq!(plan.always_blocked(10).len(), 9);
        assert!(!plan.is_covering(10));
    }

    #[test]
    fn fold_sizes() {
        let plan = BlockingPlan { sets: vec![vec![], vec![]], fold_sizes: vec![], n_prime: 3 };
        assert_eq!(plan.resolve_fold_sizes(11).unwrap(), vec![6, 5]);
        let plan = BlockingPlan { sets: vec![vec![], vec![]], fold_sizes: vec![6, 6], n_prime: 3 };
        assert!(matches!(plan.resolve_fold_sizes(11), Err(KnockoffError::FoldSize(_))));
    }

    #[test]
    fn two_pass_preset_on_ar1() {
        let g = UndirectedGraph::chain(30, 1);
        let plan = two_pass_plan(&g, 8);
        assert!(plan.is_covering(30));
        for set in &plan.sets {
            assert!(is_n_separated(&g, set, 8));
        }
    }
}
