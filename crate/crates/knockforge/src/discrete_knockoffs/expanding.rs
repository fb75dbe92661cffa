use super::{check_graph, permute_within_groups, DiscreteMatrix};
use crate::error::{KnockoffError, Result};
use crate::graph_tools::UndirectedGraph;
use crate::rng::RngStream;
use crate::KnockoffResult;
use std::collections::BTreeSet;

/// How each round picks its free vertices (the complement of the cut set).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum CutStrategy {
    /// Greedy independent set of the augmented graph over `[p] \ D`, in index order.
    #[default]
    Greedy,
    /// Free sets for the first rounds, given explicitly; later rounds fall back to greedy.
    Scheduled(Vec<Vec<usize>>),
}

/// A vertex of the augmented graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Vertex {
    Original(usize),
    Knockoff(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionRound {
    pub free: Vec<usize>,
    /// Augmented-graph neighbourhood each free vertex was permuted against.
    pub neighborhoods: Vec<Vec<Vertex>>,
    pub n_trivial: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExpandingReport {
    pub rounds: Vec<ExpansionRound>,
    /// A round produced only trivial columns and expansion stopped before `Q_max`.
    pub stopped_early: bool,
}

pub fn dgm_expanding_knockoffs(
    x: &DiscreteMatrix,
    g: &UndirectedGraph,
    q_max: usize,
    strategy: &CutStrategy,
    rng: &mut RngStream,
) -> Result<KnockoffResult<DiscreteMatrix>> {
    dgm_expanding_knockoffs_with_report(x, g, q_max, strategy, rng).map(|(r, _)| r)
}

pub fn dgm_expanding_knockoffs_with_report(
    x: &DiscreteMatrix,
    g: &UndirectedGraph,
    q_max: usize,
    strategy: &CutStrategy,
    rng: &mut RngStream,
) -> Result<(KnockoffResult<DiscreteMatrix>, ExpandingReport)> {
    check_graph(x, g)?;
    if q_max == 0 {
        return Err(KnockoffError::InvalidInput("Q_max must be at least 1".into()));
    }
    let p = x.p();
    let mut adj: Vec<BTreeSet<usize>> = (0..p).map(|j| g.neighbors(j).iter().copied().collect()).collect();
    let mut data: Vec<Vec<u32>> = x.columns().to_vec();
    let mut owner: Vec<usize> = (0..p).collect();
    let mut done = vec![false; p];
    let mut out = x.clone();
    let mut trivial = vec![true; p];
    let mut report = ExpandingReport::default();

    for q in 0..q_max {
        if done.iter().all(|&d| d) {
            break;
        }
        let free = match strategy {
            CutStrategy::Scheduled(rounds) if q < rounds.len() => checked_free_set(&rounds[q], &adj, &done)?,
            _ => greedy_free_set(&adj, &done),
        };
        if free.is_empty() {
            break;
        }
        let mut round = ExpansionRound { free: free.clone(), neighborhoods: Vec::new(), n_trivial: 0 };
        let mut new_cols = Vec::with_capacity(free.len());
        for &j in &free {
            let nb: Vec<&[u32]> = adj[j].iter().map(|&k| data[k].as_slice()).collect();
            let col = permute_within_groups(&data[j], &nb, rng);
            let same = col == data[j];
            round.n_trivial += usize::from(same);
            trivial[j] = same;
            round.neighborhoods.push(
                adj[j].iter().map(|&k| if k < p { Vertex::Original(k) } else { Vertex::Knockoff(owner[k]) }).collect(),
            );
            new_cols.push(col);
        }
        for (&j, col) in free.iter().zip(new_cols) {
            let t = data.len();
            let nbrs: Vec<usize> = adj[j].iter().copied().collect();
            adj.push(adj[j].clone());
            for &k in &nbrs {
                adj[k].insert(t);
            }
            for (a, &u) in nbrs.iter().enumerate() {
                for &v in &nbrs[a + 1..] {
                    adj[u].insert(v);
                    adj[v].insert(u);
                }
            }
            out.set_col(j, col.clone());
            data.push(col);
            owner.push(j);
            done[j] = true;
        }
        let all_trivial = round.n_trivial == round.free.len();
        report.rounds.push(round);
        if all_trivial && q + 1 < q_max && !done.iter().all(|&d| d) {
            report.stopped_early = true;
            break;
        }
    }
    Ok((KnockoffResult { knockoffs: out, trivial }, report))
}

fn greedy_free_set(adj: &[BTreeSet<usize>], done: &[bool]) -> Vec<usize> {
    let mut taken = vec![false; adj.len()];
    let mut free = Vec::new();
    for j in 0..done.len() {
        if !done[j] && !adj[j].iter().any(|&k| taken[k]) {
            taken[j] = true;
            free.push(j);
        }
    }
    free
}

fn checked_free_set(set: &[usize], adj: &[BTreeSet<usize>], done: &[bool]) -> Result<Vec<usize>> {
    let mut free = set.to_vec();
    free.sort_unstable();
    free.dedup();
    for (a, &j) in free.iter().enumerate() {
        if j >= done.len() {
            return Err(KnockoffError::Strategy(format!("free vertex {} out of range", j + 1)));
        }
        if done[j] {
            return Err(KnockoffError::Strategy(format!("vertex {} already has a knockoff", j + 1)));
        }
        if let Some(&k) = free[a + 1..].iter().find(|&&k| adj[j].contains(&k)) {
            return Err(KnockoffError::Strategy(format!(
                "vertices {} and {} are adjacent in the augmented graph, so the complement is not a global cut set",
                j + 1,
                k + 1
            )));
        }
    }
    Ok(free)
}
