//! Graphs over the variables, n-separation, blocking-set search, global cut sets and
//! colourings.
//!
//! Vertices are 0-based in the API. Graph files and user-facing messages are 1-based.

mod blocking;
mod covering;

pub use blocking::{
    greedy_blocking, greedy_blocking_literal, greedy_blocking_smallest_degree, randomized_blocking_plan,
    two_pass_plan, BlockingPlan,
};
pub use covering::{standard_covering, GraphFamily};

use crate::error::{KnockoffError, Result};
use crate::rng::RngStream;
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    p: usize,
    adj: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    /// Graph with `p` vertices and no edges.
    pub fn isolated(p: usize) -> Self {
        UndirectedGraph { p, adj: vec![Vec::new(); p] }
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::isolated(p);
        for &(a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.p || b >= self.p {
            return Err(KnockoffError::InvalidInput(format!("edge ({}, {}) out of range 1..{}", a + 1, b + 1, self.p)));
        }
        if a == b {
            return Err(KnockoffError::InvalidInput(format!("self-loop at vertex {}", a + 1)));
        }
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
            let pos = self.adj[b].binary_search(&a).unwrap_err();
            self.adj[b].insert(pos, a);
        }
        Ok(())
    }

    /// Band graph `{(j, k) : 1 ≤ |j − k| ≤ r}`, the sparsity pattern of an AR(r) model.
    pub fn chain(p: usize, r: usize) -> Self {
        let mut g = Self::isolated(p);
        for j in 0..p {
            for k in (j + 1)..p.min(j + r + 1) {
                g.add_edge(j, k).unwrap();
            }
        }
        g
    }

    pub fn path(p: usize) -> Self {
        Self::chain(p, 1)
    }

    pub fn cycle(p: usize) -> Self {
        let mut g = Self::path(p);
        if p >= 3 {
            g.add_edge(0, p - 1).unwrap();
        }
        g
    }

    /// Rectangular lattice with the given side lengths; the first coordinate varies fastest
    /// (column-major flattening for two dimensions).
    pub fn lattice(dims: &[usize]) -> Self {
        let p: usize = dims.iter().product();
        let mut g = Self::isolated(p);
        let mut stride = 1;
        for &len in dims {
            for v in 0..p {
                let coord = (v / stride) % len;
                if coord + 1 < len {
                    g.add_edge(v, v + stride).unwrap();
                }
            }
            stride *= len;
        }
        g
    }

    /// Coordinates (0-based) of a lattice vertex.
    pub fn lattice_coords(dims: &[usize], v: usize) -> Vec<usize> {
        let mut rest = v;
        dims.iter()
            .map(|&len| {
                let c = rest % len;
                rest /= len;
                c
            })
            .collect()
    }

    /// Forest from a parent list (`None` marks a root).
    pub fn tree(parents: &[Option<usize>]) -> Result<Self> {
        let mut g = Self::isolated(parents.len());
        for (v, par) in parents.iter().enumerate() {
            if let Some(u) = *par {
                g.add_edge(v, u)?;
            }
        }
        if g.edge_count() + components_after_deletion(&g, &[]).len() != g.p {
            return Err(KnockoffError::InvalidInput("parent list contains a cycle".into()));
        }
        Ok(g)
    }

    pub fn erdos_renyi(p: usize, prob: f64, rng: &mut RngStream) -> Self {
        let mut g = Self::isolated(p);
        for j in 0..p {
            for k in (j + 1)..p {
                if rng.uniform() < prob {
                    g.add_edge(j, k).unwrap();
                }
            }
        }
        g
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.adj[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.adj[j].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (j, nb) in self.adj.iter().enumerate() {
            out.extend(nb.iter().filter(|&&k| k > j).map(|&k| (j, k)));
        }
        out
    }

    /// Parses the text format: a header line `p <count>`, then one 1-indexed edge per line.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| KnockoffError::Parse("empty graph file".into()))?;
        let mut it = header.split_whitespace();
        let p = match (it.next(), it.next(), it.next()) {
            (Some("p"), Some(v), None) => v
                .parse::<usize>()
                .map_err(|_| KnockoffError::Parse(format!("bad vertex count in header `{header}`")))?,
            _ => return Err(KnockoffError::Parse(format!("expected header `p <count>`, got `{header}`"))),
        };
        let mut g = Self::isolated(p);
        for line in lines {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| KnockoffError::Parse(format!("bad edge line `{line}`"))))
                .collect::<Result<_>>()?;
            if nums.len() != 2 || nums[0] == 0 || nums[1] == 0 {
                return Err(KnockoffError::Parse(format!("bad edge line `{line}`")));
            }
            g.add_edge(nums[0] - 1, nums[1] - 1)?;
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("p {}\n", self.p);
        for (a, b) in self.edges() {
            s.push_str(&format!("{} {}\n", a + 1, b + 1));
        }
        s
    }
}

fn mask(p: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; p];
    for &v in set {
        m[v] = true;
    }
    m
}

/// Connected components of the subgraph induced on `[p] ∖ B`, each sorted, ordered by
/// smallest vertex.
pub fn components_after_deletion(g: &UndirectedGraph, b: &[usize]) -> Vec<Vec<usize>> {
    let removed = mask(g.p, b);
    let mut seen = removed.clone();
    let mut out = Vec::new();
    for start in 0..g.p {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `I_V ∩ B` for a component `V` of the deletion subgraph (every outside neighbour of `V`
/// lies in `B`).
pub fn blocked_neighbors(g: &UndirectedGraph, component: &[usize], b_mask: &[bool]) -> Vec<usize> {
    let mut out: Vec<usize> = component.iter().flat_map(|&v| g.neighbors(v).iter().copied()).filter(|&w| b_mask[w]).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// First component violating `2|V| + |I_V ∩ B| < n`, if any.
pub fn separation_violation(g: &UndirectedGraph, b: &[usize], n: usize) -> Option<Vec<usize>> {
    let bm = mask(g.p, b);
    components_after_deletion(g, b)
        .into_iter()
        .find(|comp| 2 * comp.len() + blocked_neighbors(g, comp, &bm).len() >= n)
}

pub fn is_n_separated(g: &UndirectedGraph, b: &[usize], n: usize) -> bool {
    separation_violation(g, b, n).is_none()
}

/// True iff no two vertices outside `B` are adjacent.
pub fn is_global_cut_set(g: &UndirectedGraph, b: &[usize]) -> bool {
    let bm = mask(g.p, b);
    (0..g.p).all(|v| bm[v] || g.neighbors(v).iter().all(|&w| bm[w]))
}

/// Greedy proper colouring visiting vertices in `order`; each vertex gets the smallest
/// colour unused by its already-coloured neighbours.
pub fn greedy_coloring(g: &UndirectedGraph, order: &[usize]) -> Vec<usize> {
    let mut color = vec![usize::MAX; g.p];
    for &v in order {
        let used: Vec<usize> = g.neighbors(v).iter().map(|&w| color[w]).filter(|&c| c != usize::MAX).collect();
        color[v] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    color
}

pub fn color_classes(colors: &[usize]) -> Vec<Vec<usize>> {
    let m = colors.iter().copied().max().map_or(0, |c| c + 1);
    let mut classes = vec![Vec::new(); m];
    for (v, &c) in colors.iter().enumerate() {
        classes[c].push(v);
    }
    classes
}

/// Complement of `set` in `[p]`, sorted.
pub fn complement(p: usize, set: &[usize]) -> Vec<usize> {
    let m = mask(p, set);
    (0..p).filter(|&v| !m[v]).collect()
}
