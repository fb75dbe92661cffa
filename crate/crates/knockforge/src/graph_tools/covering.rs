use super::{color_classes, complement, BlockingPlan, UndirectedGraph};
use crate::error::{KnockoffError, Result};

/// Graph families with a known covering.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphFamily {
    /// Band graph of an AR(r) model on `p` variables.
    ArChain { p: usize, r: usize },
    /// Square lattice with the given side lengths.
    Lattice { dims: Vec<usize> },
    Cycle { p: usize },
    /// Forest given by a parent list.
    Tree { parents: Vec<Option<usize>> },
    Isolated { p: usize },
    /// Any graph with a proper colouring.
    Colorable { graph: UndirectedGraph, colors: Vec<usize> },
}

impl GraphFamily {
    pub fn graph(&self) -> Result<UndirectedGraph> {
        Ok(match self {
            GraphFamily::ArChain { p, r } => UndirectedGraph::chain(*p, *r),
            GraphFamily::Lattice { dims } => UndirectedGraph::lattice(dims),
            GraphFamily::Cycle { p } => UndirectedGraph::cycle(*p),
            GraphFamily::Tree { parents } => UndirectedGraph::tree(parents)?,
            GraphFamily::Isolated { p } => UndirectedGraph::isolated(*p),
            GraphFamily::Colorable { graph, .. } => graph.clone(),
        })
    }
}

fn infeasible(msg: String) -> KnockoffError {
    KnockoffError::Infeasible(msg)
}

fn even_split(n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|i| n / m + usize::from(i < n % m)).collect()
}

/// Built-in blocking plans for the standard families, with explicit fold sizes summing to
/// `n`. Every fold is separated at its own fold size.
pub fn standard_covering(family: &GraphFamily, n: usize) -> Result<BlockingPlan> {
    match family {
        GraphFamily::Isolated { .. } | GraphFamily::ArChain { r: 0, .. } => {
            if n < 3 {
                return Err(infeasible(format!("isolated graph needs n >= 3, got {n}")));
            }
            Ok(BlockingPlan { sets: vec![Vec::new()], fold_sizes: vec![n], n_prime: 3 })
        }
        GraphFamily::ArChain { p, r } => {
            let (p, r) = (*p, *r);
            if n < 2 + 8 * r {
                return Err(infeasible(format!("AR({r}) covering needs n >= 2 + 8r = {}, got {n}", 2 + 8 * r)));
            }
            let d = (n - 2) / 8;
            let b1: Vec<usize> = (0..p).filter(|v| (v / d) % 2 == 1).collect();
            let b2: Vec<usize> = (0..p).filter(|v| (v / d) % 2 == 0).collect();
            Ok(BlockingPlan { sets: vec![b1, b2], fold_sizes: even_split(n, 2), n_prime: 2 * d + 2 * r + 1 })
        }
        GraphFamily::Lattice { dims } => {
            let d = dims.len();
            if n < 6 + 4 * d {
                return Err(infeasible(format!("{d}-dimensional lattice covering needs n >= 6 + 4d = {}, got {n}", 6 + 4 * d)));
            }
            let p: usize = dims.iter().product();
            let odd: Vec<usize> = (0..p)
                .filter(|&v| UndirectedGraph::lattice_coords(dims, v).iter().map(|c| c + 1).sum::<usize>() % 2 == 1)
                .collect();
            let even = complement(p, &odd);
            Ok(BlockingPlan { sets: vec![odd, even], fold_sizes: even_split(n, 2), n_prime: 3 + 2 * d })
        }
        GraphFamily::Cycle { p } => {
            let p = *p;
            if p < 3 {
                return Err(KnockoffError::InvalidInput("a cycle needs at least 3 vertices".into()));
            }
            let mut colors: Vec<usize> = (0..p).map(|v| v % 2).collect();
            if p % 2 == 1 {
                colors[p - 1] = 2;
            }
            colorable_covering(&UndirectedGraph::cycle(p), &colors, n)
        }
        GraphFamily::Tree { parents } => {
            let g = UndirectedGraph::tree(parents)?;
            let mut depth = vec![usize::MAX; parents.len()];
            for v in 0..parents.len() {
                let mut chain = Vec::new();
                let mut u = v;
                while depth[u] == usize::MAX {
                    chain.push(u);
                    match parents[u] {
                        Some(par) => u = par,
                        None => {
                            depth[u] = 0;
                            chain.pop();
                            break;
                        }
                    }
                }
                let mut d = depth[u];
                for &w in chain.iter().rev() {
                    d += 1;
                    depth[w] = d;
                }
            }
            let colors: Vec<usize> = depth.iter().map(|d| d % 2).collect();
            colorable_covering(&g, &colors, n)
        }
        GraphFamily::Colorable { graph, colors } => {
            if colors.len() != graph.p() {
                return Err(KnockoffError::InvalidInput("colouring length differs from vertex count".into()));
            }
            for (a, b) in graph.edges() {
                if colors[a] == colors[b] {
                    return Err(KnockoffError::InvalidInput(format!("vertices {} and {} share a colour", a + 1, b + 1)));
                }
            }
            colorable_covering(graph, colors, n)
        }
    }
}

/// Fold `i` frees colour class `i`; it needs `n_i ≥ 3 + max degree in the class`. Rows left
/// over after those minima are spread evenly.
fn colorable_covering(g: &UndirectedGraph, colors: &[usize], n: usize) -> Result<BlockingPlan> {
    let classes: Vec<Vec<usize>> = color_classes(colors).into_iter().filter(|c| !c.is_empty()).collect();
    let need: Vec<usize> = classes.iter().map(|c| 3 + c.iter().map(|&v| g.degree(v)).max().unwrap_or(0)).collect();
    let total: usize = need.iter().sum();
    if n < total {
        return Err(infeasible(format!(
            "{}-colouring covering needs n >= sum of (3 + max class degree) = {total}, got {n}",
            classes.len()
        )));
    }
    let extra = even_split(n - total, classes.len());
    let fold_sizes = need.iter().zip(&extra).map(|(a, b)| a + b).collect();
    let sets = classes.iter().map(|c| complement(g.p(), c)).collect();
    Ok(BlockingPlan { sets, fold_sizes, n_prime: need.iter().copied().max().unwrap_or(3) })
}
