#![allow(dead_code)]

use knockforge::discrete_knockoffs::{mh_step, BasicMove, ThreeWayTable};
use knockforge::RngStream;
use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Write;

pub type Cols = Vec<Vec<u32>>;

/// Writes straight to the process stderr so the line shows even when the harness
/// captures test output.
pub fn report(id: &str, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id} [{verdict}] {title}: {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

pub fn pairs(x: &Cols) -> Vec<[usize; 4]> {
    (1..x.len())
        .map(|j| {
            let mut t = [0usize; 4];
            for (&a, &b) in x[j - 1].iter().zip(&x[j]) {
                t[((a - 1) * 2 + b - 1) as usize] += 1;
            }
            t
        })
        .collect()
}

fn all_binary(n: usize) -> Vec<Vec<u32>> {
    (0..1usize << n).map(|c| (0..n).map(|i| ((c >> i) & 1) as u32 + 1).collect()).collect()
}

/// Exact law of the SCIP knockoff given binary X, by enumerating the fibre Q and applying
/// the sequential conditionals directly to the joint of (X, X̃_1..X̃_j).
pub fn scip_oracle(x: &Cols) -> HashMap<Cols, f64> {
    let n = x[0].len();
    let p = x.len();
    let target = pairs(x);
    let cols = all_binary(n);
    let mut q: Vec<Cols> = Vec::new();
    let mut idx = vec![0usize; p];
    loop {
        let w: Cols = idx.iter().map(|&i| cols[i].clone()).collect();
        if pairs(&w) == target {
            q.push(w);
        }
        let mut k = 0;
        while k < p {
            idx[k] += 1;
            if idx[k] < cols.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == p {
            break;
        }
    }
    let mut joint: HashMap<(Cols, Cols), f64> = q.iter().map(|w| ((w.clone(), Vec::new()), 1.0 / q.len() as f64)).collect();
    for j in 0..p {
        let mut cond: HashMap<(Cols, Cols), Vec<(Vec<u32>, f64)>> = HashMap::new();
        for ((w, tk), &pr) in &joint {
            let mut rest = w.clone();
            rest[j].clear();
            cond.entry((rest, tk.clone())).or_default().push((w[j].clone(), pr));
        }
        let mut next = HashMap::new();
        for ((w, tk), &pr) in &joint {
            let mut rest = w.clone();
            rest[j].clear();
            let options = &cond[&(rest, tk.clone())];
            let total: f64 = options.iter().map(|o| o.1).sum();
            for (v, pv) in options {
                let mut tk2 = tk.clone();
                tk2.push(v.clone());
                *next.entry((w.clone(), tk2)).or_insert(0.0) += pr * pv / total;
            }
        }
        joint = next;
    }
    let mut out: HashMap<Cols, f64> = HashMap::new();
    let mut norm = 0.0;
    for ((w, tk), pr) in joint {
        if &w == x {
            *out.entry(tk).or_insert(0.0) += pr;
            norm += pr;
        }
    }
    out.values_mut().for_each(|v| *v /= norm);
    out
}

pub fn total_variation<K: std::hash::Hash + Eq>(law: &HashMap<K, f64>, counts: &HashMap<K, usize>, draws: usize) -> f64 {
    let keys: HashSet<&K> = law.keys().chain(counts.keys()).collect();
    keys.into_iter()
        .map(|k| (law.get(k).copied().unwrap_or(0.0) - *counts.get(k).unwrap_or(&0) as f64 / draws as f64).abs())
        .sum::<f64>()
        / 2.0
}

pub fn all_moves() -> Vec<BasicMove> {
    let pairs = [(0, 1), (1, 0)];
    let mut out = Vec::new();
    for r in pairs {
        for d in pairs {
            for c in pairs {
                out.push(BasicMove { r, d, c });
            }
        }
    }
    out
}

/// Every binary table reachable from `start` by basic moves.
pub fn fibre(start: &ThreeWayTable) -> Vec<ThreeWayTable> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start.clone());
    while let Some(t) = queue.pop_front() {
        for mv in all_moves() {
            if let Some(u) = t.apply(&mv) {
                if seen.insert(u.clone()) {
                    queue.push_back(u);
                }
            }
        }
    }
    seen.into_iter().collect()
}

pub struct ChainStats {
    pub tv: f64,
    pub worst_flow_sigmas: f64,
    pub states: usize,
}

pub fn run_chains(left: &[u32], mid: &[u32], right: &[u32], chains: usize, steps: usize, seed: u64) -> ChainStats {
    let start = ThreeWayTable::from_columns(left, mid, right, [2, 2, 2]);
    let states = fibre(&start);
    let z: f64 = states.iter().map(|t| t.log_weight().exp()).sum();
    let pi: HashMap<ThreeWayTable, f64> = states.iter().map(|t| (t.clone(), t.log_weight().exp() / z)).collect();
    let root = RngStream::new(seed);
    let mut hist: HashMap<ThreeWayTable, usize> = HashMap::new();
    let mut flow: HashMap<(ThreeWayTable, ThreeWayTable), usize> = HashMap::new();
    for c in 0..chains {
        let mut rng = root.derive_index("chain", c as u64);
        let mut t = start.clone();
        for _ in 0..steps {
            mh_step(&mut t, &mut rng);
        }
        *hist.entry(t.clone()).or_insert(0) += 1;
        let before = t.clone();
        if mh_step(&mut t, &mut rng) {
            *flow.entry((before, t)).or_insert(0) += 1;
        }
    }
    let tv = total_variation(&pi, &hist, chains);
    let mut worst: f64 = 0.0;
    for ((a, b), &f) in &flow {
        let back = *flow.get(&(b.clone(), a.clone())).unwrap_or(&0);
        let sigma = ((f + back) as f64).sqrt().max(1.0);
        worst = worst.max((f as f64 - back as f64).abs() / sigma);
    }
    ChainStats { tv, worst_flow_sigmas: worst, states: states.len() }
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < na && j < nb {
        let v = a[i].min(b[j]);
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (en.sqrt() + 0.12 + 0.11 / en.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = RngStream::new(1);
        let mut a: Vec<f64> = (0..5000).map(|_| rng.normal()).collect();
        let mut b: Vec<f64> = (0..5000).map(|_| rng.normal()).collect();
        assert!(ks_two_sample(&mut a, &mut b).1 > 0.001);
        let mut c: Vec<f64> = (0..5000).map(|_| rng.normal() + 0.2).collect();
        assert!(ks_two_sample(&mut a, &mut c).1 < 1e-6);
    }
}
