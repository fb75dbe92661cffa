//! Covariate and response generators.

use crate::discrete_knockoffs::DiscreteMatrix;
use crate::error::{KnockoffError, Result};
use crate::graph_tools::UndirectedGraph;
use crate::linalg::{cholesky, chol_solve};
use crate::rng::RngStream;
use crate::Matrix;
use serde::{Deserialize, Serialize};

/// Rows i.i.d. `N(0, Σ)` with `Σ_jk = ρ^|j-k|`, via `X_j = ρ X_{j-1} + √(1-ρ²) ε_j`.
pub fn gen_gaussian_ar(n: usize, p: usize, rho: f64, rng: &mut RngStream) -> Result<Matrix> {
    if !(rho.abs() < 1.0) {
        return Err(KnockoffError::InvalidInput(format!("|rho| = {} must be below 1", rho.abs())));
    }
    let c = (1.0 - rho * rho).sqrt();
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let e = rng.normal();
            prev = if j == 0 { e } else { rho * prev + c * e };
            data.push(prev);
        }
    }
    Matrix::from_vec(n, p, data)
}

pub fn ar_covariance(p: usize, rho: f64) -> Matrix {
    let mut s = Matrix::zeros(p, p);
    for j in 0..p {
        for k in 0..p {
            s.row_mut(j)[k] = rho.powi((j as i32 - k as i32).abs());
        }
    }
    s
}

/// Gaussian with banded precision `Ω = I − offdiag·1{1 ≤ |j−k| ≤ bandwidth}`, rescaled so
/// that `Σ` has unit diagonal. Sampling solves `Lᵀx = z` with the banded Cholesky factor.
#[derive(Clone, Debug)]
pub struct BandedGaussian {
    p: usize,
    bandwidth: usize,
    /// `band[i][d]` is `L[i][i-d]`.
    band: Vec<Vec<f64>>,
    scale: Vec<f64>,
}

impl BandedGaussian {
    pub fn new(p: usize, bandwidth: usize, offdiag: f64) -> Result<Self> {
        let omega = |i: usize, j: usize| {
            if i == j {
                1.0
            } else if i.abs_diff(j) <= bandwidth {
                -offdiag
            } else {
                0.0
            }
        };
        let mut band = vec![vec![0.0; bandwidth + 1]; p];
        for i in 0..p {
            for j in i.saturating_sub(bandwidth)..=i {
                let mut v = omega(i, j);
                for k in i.saturating_sub(bandwidth).max(j.saturating_sub(bandwidth))..j {
                    v -= band[i][i - k] * band[j][j - k];
                }
                if i == j {
                    if !(v > 0.0) {
                        return Err(KnockoffError::InvalidInput(format!(
                            "precision with bandwidth {bandwidth} and off-diagonal {offdiag} is not positive definite"
                        )));
                    }
                    band[i][0] = v.sqrt();
                } else {
                    band[i][i - j] = v / band[j][0];
                }
            }
        }
        let mut g = BandedGaussian { p, bandwidth, band, scale: vec![1.0; p] };
        let raw = g.unscaled_covariance();
        g.scale = (0..p).map(|j| raw[(j, j)].sqrt()).collect();
        Ok(g)
    }

    fn l(&self, i: usize, k: usize) -> f64 {
        if k <= i && i - k <= self.bandwidth {
            self.band[i][i - k]
        } else {
            0.0
        }
    }

    fn solve_upper(&self, z: &mut [f64]) {
        for i in (0..self.p).rev() {
            let mut v = z[i];
            for k in i + 1..(i + self.bandwidth + 1).min(self.p) {
                v -= self.l(k, i) * z[k];
            }
            z[i] = v / self.band[i][0];
        }
    }

    fn unscaled_covariance(&self) -> Matrix {
        // Ω⁻¹ = L⁻ᵀ L⁻¹; column j solves L Lᵀ x = e_j
        let mut out = Matrix::zeros(self.p, self.p);
        for j in 0..self.p {
            let mut v = vec![0.0; self.p];
            v[j] = 1.0;
            for i in 0..self.p {
                let mut s = v[i];
                for k in i.saturating_sub(self.bandwidth)..i {
                    s -= self.l(i, k) * v[k];
                }
                v[i] = s / self.band[i][0];
            }
            self.solve_upper(&mut v);
            out.set_col(j, &v);
        }
        out.symmetrize();
        out
    }

    /// Unit-diagonal covariance of the rescaled variables.
    pub fn covariance(&self) -> Matrix {
        let raw = self.unscaled_covariance();
        let mut out = raw.clone();
        for i in 0..self.p {
            for j in 0..self.p {
                out.row_mut(i)[j] = raw[(i, j)] / (self.scale[i] * self.scale[j]);
            }
        }
        out
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Matrix {
        let mut data = Vec::with_capacity(n * self.p);
        let mut z = vec![0.0; self.p];
        for _ in 0..n {
            z.iter_mut().for_each(|v| *v = rng.normal());
            self.solve_upper(&mut z);
            data.extend(z.iter().zip(&self.scale).map(|(v, s)| v / s));
        }
        Matrix::from_vec(n, self.p, data).expect("finite samples")
    }
}

pub fn gen_gaussian_banded(n: usize, p: usize, bandwidth: usize, offdiag: f64, rng: &mut RngStream) -> Result<Matrix> {
    Ok(BandedGaussian::new(p, bandwidth, offdiag)?.sample(n, rng))
}

/// Samples rows from `N(0, Σ)` for a general covariance by Cholesky.
pub fn gen_gaussian_cholesky(n: usize, sigma: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
    let l = cholesky(sigma)?;
    let p = sigma.rows();
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = rng.normal());
        for i in 0..p {
            data.push((0..=i).map(|k| l[(i, k)] * z[k]).sum());
        }
    }
    Matrix::from_vec(n, p, data)
}

/// Inhomogeneous binary Markov chain. States 0/1 are stored as labels 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChainModel {
    /// `q10[j] = P(X_j = 0 | X_{j-1} = 1)` for `j ≥ 1` (entry 0 unused).
    pub q10: Vec<f64>,
    /// `q01[j] = P(X_j = 1 | X_{j-1} = 0)`.
    pub q01: Vec<f64>,
}

impl MarkovChainModel {
    pub fn draw(p: usize, rng: &mut RngStream) -> Self {
        let mut q10 = vec![0.0; p];
        let mut q01 = vec![0.0; p];
        for j in 1..p {
            let (u1, u2, u3, u4) = (rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
            q10[j] = u1 / (0.4 + u1 + u2);
            q01[j] = u3 / (0.4 + u3 + u4);
        }
        MarkovChainModel { q10, q01 }
    }

    pub fn p(&self) -> usize {
        self.q10.len()
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> DiscreteMatrix {
        let p = self.p();
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = Vec::with_capacity(p);
            let mut state = u32::from(rng.uniform() < 0.5);
            row.push(state + 1);
            for j in 1..p {
                let u = rng.uniform();
                state = if state == 1 { u32::from(u >= self.q10[j]) } else { u32::from(u < self.q01[j]) };
                row.push(state + 1);
            }
            rows.push(row);
        }
        DiscreteMatrix::from_rows(&rows, vec![2; p]).expect("binary labels")
    }
}

pub fn gen_markov_chain(n: usize, p: usize, model_rng: &mut RngStream, rng: &mut RngStream) -> (MarkovChainModel, DiscreteMatrix) {
    let model = MarkovChainModel::draw(p, model_rng);
    let x = model.sample(n, rng);
    (model, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IsingSampler {
    Gibbs {
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default = "default_thin")]
        thin: usize,
    },
    Cftp,
}

fn default_burn_in() -> usize {
    10_000
}

fn default_thin() -> usize {
    100
}

impl Default for IsingSampler {
    fn default() -> Self {
        IsingSampler::Gibbs { burn_in: default_burn_in(), thin: default_thin() }
    }
}

pub const CFTP_MAX_SIDE: usize = 8;

/// Ising model on a `side × side` grid: `P(x) ∝ exp(θ Σ_{s~t} x_s x_t + Σ_s h_s x_s)`,
/// spins ±1 stored as labels 1/2, sites flattened column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    pub side: usize,
    pub theta: f64,
    pub h: Vec<f64>,
    graph: UndirectedGraph,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl IsingModel {
    pub fn new(side: usize, theta: f64, h: Vec<f64>) -> Result<Self> {
        if side < 2 {
            return Err(KnockoffError::InvalidInput("Ising side must be at least 2".into()));
        }
        if h.len() != side * side {
            return Err(KnockoffError::Dimension("field length must be side²".into()));
        }
        Ok(IsingModel { side, theta, h, graph: UndirectedGraph::lattice(&[side, side]) })
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    fn p_plus(&self, s: usize, spins: &[i8]) -> f64 {
        let field: f64 = self.graph.neighbors(s).iter().map(|&t| f64::from(spins[t])).sum();
        sigmoid(2.0 * (self.theta * field + self.h[s]))
    }

    fn sweep(&self, spins: &mut [i8], uniforms: &mut impl FnMut() -> f64) {
        for s in 0..spins.len() {
            spins[s] = if uniforms() < self.p_plus(s, spins) { 1 } else { -1 };
        }
    }

    fn gibbs(&self, n: usize, burn_in: usize, thin: usize, rng: &mut RngStream) -> Vec<Vec<i8>> {
        let p = self.side * self.side;
        let mut spins: Vec<i8> = (0..p).map(|_| if rng.uniform() < 0.5 { 1 } else { -1 }).collect();
        let mut draw = || rng.uniform();
        for _ in 0..burn_in {
            self.sweep(&mut spins, &mut draw);
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..thin.max(1) {
                self.sweep(&mut spins, &mut draw);
            }
            out.push(spins.clone());
        }
        out
    }

    /// Monotone coupling from the past; one exact draw.
    fn cftp_one(&self, rng: &RngStream) -> Vec<i8> {
        let p = self.side * self.side;
        let mut depth = 1usize;
        loop {
            let mut upper = vec![1i8; p];
            let mut lower = vec![-1i8; p];
            for t in (1..=depth).rev() {
                let mut step = rng.derive_index("step", t as u64);
                let us: Vec<f64> = (0..p).map(|_| step.uniform()).collect();
                let mut it = us.iter().copied();
                self.sweep(&mut upper, &mut || it.next().expect("one uniform per site"));
                let mut it = us.iter().copied();
                self.sweep(&mut lower, &mut || it.next().expect("one uniform per site"));
            }
            if upper == lower {
                return upper;
            }
            depth *= 2;
        }
    }

    pub fn sample(&self, n: usize, sampler: IsingSampler, rng: &mut RngStream) -> Result<DiscreteMatrix> {
        let draws = match sampler {
            IsingSampler::Gibbs { burn_in, thin } => self.gibbs(n, burn_in, thin, rng),
            IsingSampler::Cftp => {
                if self.side > CFTP_MAX_SIDE {
                    return Err(KnockoffError::InvalidInput(format!("CFTP is limited to side ≤ {CFTP_MAX_SIDE}")));
                }
                if self.theta < 0.0 {
                    return Err(KnockoffError::InvalidInput("monotone CFTP needs theta ≥ 0".into()));
                }
                let base = rng.derive("cftp");
                (0..n).map(|i| self.cftp_one(&base.derive_index("draw", i as u64))).collect()
            }
        };
        let rows: Vec<Vec<u32>> = draws.iter().map(|s| s.iter().map(|&v| if v > 0 { 2 } else { 1 }).collect()).collect();
        DiscreteMatrix::from_rows(&rows, vec![2; self.side * self.side])
    }
}

pub fn gen_ising(n: usize, side: usize, theta: f64, h: f64, sampler: IsingSampler, rng: &mut RngStream) -> Result<DiscreteMatrix> {
    IsingModel::new(side, theta, vec![h; side * side])?.sample(n, sampler, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFamily {
    #[default]
    LinearGaussian,
    Logistic,
}

/// `y_i ~ N(x_iᵀβ/√n, 1)`, or Bernoulli(σ(x_iᵀβ/√n)) coded 0/1.
pub fn gen_response(x: &Matrix, beta: &[f64], family: ResponseFamily, rng: &mut RngStream) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if beta.len() != p {
        return Err(KnockoffError::Dimension(format!("beta has length {} but X has {p} columns", beta.len())));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|i| {
            let eta = scale * x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            match family {
                ResponseFamily::LinearGaussian => eta + rng.normal(),
                ResponseFamily::Logistic => f64::from(rng.uniform() < sigmoid(eta)),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignRule {
    #[default]
    Random,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRule {
    #[default]
    Uniform,
    /// 1-based inclusive coordinate range.
    Range { start: usize, end: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeRule {
    #[default]
    Constant,
    /// `amplitude × Unif(1, 2)`.
    UniformOneTwo,
}

/// Coefficient vector with `k` nonzeros of size `amplitude` (or `amplitude·U(1,2)`).
pub fn gen_beta(
    p: usize,
    k: usize,
    amplitude: f64,
    signs: SignRule,
    support: SupportRule,
    magnitude: MagnitudeRule,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let pool: Vec<usize> = match support {
        SupportRule::Uniform => (0..p).collect(),
        SupportRule::Range { start, end } => {
            if start == 0 || end > p || start > end {
                return Err(KnockoffError::InvalidInput(format!("support range {start}..={end} is not within 1..={p}")));
            }
            (start - 1..end).collect()
        }
    };
    if k > pool.len() {
        return Err(KnockoffError::InvalidInput(format!("k = {k} exceeds the {} available coordinates", pool.len())));
    }
    let mut pick = pool;
    rng.shuffle(&mut pick);
    let mut support: Vec<usize> = pick[..k].to_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; p];
    for &j in &support {
        let size = match magnitude {
            MagnitudeRule::Constant => amplitude,
            MagnitudeRule::UniformOneTwo => amplitude * (1.0 + rng.uniform()),
        };
        let sign = match signs {
            SignRule::Random if rng.uniform() < 0.5 => -1.0,
            _ => 1.0,
        };
        beta[j] = sign * size;
    }
    Ok((beta, support))
}

/// Rounds every entry to the nearest point of the `1/K` grid: `⌊xK + 1/2⌋ / K`.
pub fn discretize(x: &Matrix, k: f64) -> Result<Matrix> {
    if !(k > 0.0) {
        return Err(KnockoffError::InvalidInput("K must be positive".into()));
    }
    Ok(x.map(|v| (v * k + 0.5).floor() / k))
}

/// Covariance of the Gaussian generators, for the model-X baseline.
pub fn gaussian_covariance_from_cholesky(l: &Matrix) -> Matrix {
    chol_solve(l, &Matrix::identity(l.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(x: &Matrix, a: usize, b: usize) -> f64 {
        let n = x.rows() as f64;
        let ma = x.col(a).iter().sum::<f64>() / n;
        let mb = x.col(b).iter().sum::<f64>() / n;
        (0..x.rows()).map(|i| (x.row(i)[a] - ma) * (x.row(i)[b] - mb)).sum::<f64>() / n
    }

    #[test]
    fn ar_moments() {
        let mut rng = RngStream::new(1);
        let n = 100_000;
        let x = gen_gaussian_ar(n, 3, 0.3, &mut rng).unwrap();
        // Var of a product of unit normals with correlation r is 1 + r²
        let se = |r: f64| ((1.0 + r * r) / n as f64).sqrt();
        assert!((sample_cov(&x, 0, 2) - 0.09).abs() < 3.0 * se(0.09));
        assert!((sample_cov(&x, 0, 1) - 0.3).abs() < 3.0 * se(0.3));
        let z = gen_gaussian_ar(n, 3, 0.0, &mut rng).unwrap();
        assert!(sample_cov(&z, 0, 1).abs() < 3.0 * se(0.0));
        assert!(gen_gaussian_ar(2, 2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn banded_unit_diagonal_and_inverse() {
        let g = BandedGaussian::new(30, 10, 0.05).unwrap();
        let s = g.covariance();
        for j in 0..30 {
            assert!((s[(j, j)] - 1.0).abs() < 1e-12);
        }
        // oracle: dense inversion of the precision matrix
        let mut omega = Matrix::identity(30);
        for i in 0..30 {
            for j in 0..30 {
                if i != j && (i as usize).abs_diff(j) <= 10 {
                    omega.row_mut(i)[j] = -0.05;
                }
            }
        }
        let inv = gaussian_covariance_from_cholesky(&cholesky(&omega).unwrap());
        for i in 0..30 {
            for j in 0..30 {
                let want = inv[(i, j)] / (inv[(i, i)] * inv[(j, j)]).sqrt();
                assert!((s[(i, j)] - want).abs() < 1e-12);
            }
        }
        assert!(BandedGaussian::new(30, 10, 0.2).is_err());
    }

    #[test]
    fn banded_width_one_matches_ar_interior() {
        let rho: f64 = 0.3;
        let g = BandedGaussian::new(41, 1, rho / (1.0 + rho * rho)).unwrap();
        let s = g.covariance();
        for lag in 0..4 {
            assert!((s[(20, 20 + lag)] - rho.powi(lag as i32)).abs() < 1e-9);
        }
        let mut rng = RngStream::new(2);
        let x = g.sample(100_000, &mut rng);
        let se = ((1.0 + rho * rho) / 100_000f64).sqrt();
        assert!((sample_cov(&x, 20, 21) - s[(20, 21)]).abs() < 3.0 * se);
        assert!((sample_cov(&x, 0, 0) - 1.0).abs() < 3.0 * (2.0f64 / 100_000.0).sqrt());
    }

    #[test]
    fn markov_chain_frozen_tables() {
        let mut model_rng = RngStream::new(3).derive("model");
        let model = MarkovChainModel::draw(5, &mut model_rng.clone());
        let (m2, x) = gen_markov_chain(100_000, 5, &mut model_rng, &mut RngStream::new(4));
        assert_eq!(model, m2);
        let n = 100_000f64;
        let ones = x.col(0).iter().filter(|&&v| v == 2).count() as f64;
        assert!((ones / n - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
        for j in 1..5 {
            let from1: Vec<usize> = (0..x.n()).filter(|&i| x.get(i, j - 1) == 2).collect();
            let to0 = from1.iter().filter(|&&i| x.get(i, j) == 1).count() as f64;
            let m = from1.len() as f64;
            let q = model.q10[j];
            assert!((to0 / m - q).abs() < 3.0 * (q * (1.0 - q) / m).sqrt());
        }
        let (_, x2) = gen_markov_chain(10, 5, &mut RngStream::new(3).derive("model"), &mut RngStream::new(5));
        assert_ne!(x2, x.select_rows(&(0..10).collect::<Vec<_>>()));
    }

    fn exact_marginal(side: usize, theta: f64) -> f64 {
        let model = IsingModel::new(side, theta, vec![0.0; side * side]).unwrap();
        let p = side * side;
        let (mut z, mut plus) = (0.0, vec![0.0; p]);
        for code in 0..1usize << p {
            let s: Vec<f64> = (0..p).map(|i| if (code >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let e: f64 = model.graph().edges().iter().map(|&(a, b)| theta * s[a] * s[b]).sum();
            let w = e.exp();
            z += w;
            for i in 0..p {
                if s[i] > 0.0 {
                    plus[i] += w;
                }
            }
        }
        plus[0] / z
    }

    #[test]
    fn ising_samplers_agree_with_enumeration() {
        let side = 3;
        let n = 10_000;
        let truth = exact_marginal(side, 0.2);
        let mut rng = RngStream::new(6);
        let model = IsingModel::new(side, 0.2, vec![0.0; 9]).unwrap();
        let se = (truth * (1.0 - truth) / n as f64).sqrt();
        for sampler in [IsingSampler::Gibbs { burn_in: 100, thin: 10 }, IsingSampler::Cftp] {
            let x = model.sample(n, sampler, &mut rng).unwrap();
            for s in [0, 4, 8] {
                let frac = x.col(s).iter().filter(|&&v| v == 2).count() as f64 / n as f64;
                assert!((frac - truth).abs() < 3.0 * se, "{sampler:?} site {s}: {frac} vs {truth}");
            }
        }
        // same-site correlation check against enumeration for CFTP
        let x = model.sample(n, IsingSampler::Cftp, &mut rng).unwrap();
        let agree = (0..n).filter(|&i| x.get(i, 0) == x.get(i, 1)).count() as f64 / n as f64;
        assert!(agree > 0.5);
    }

    #[test]
    fn ising_limits() {
        let mut rng = RngStream::new(7);
        let x = gen_ising(4000, 4, 0.0, 0.0, IsingSampler::Cftp, &mut rng).unwrap();
        let frac = x.col(5).iter().filter(|&&v| v == 2).count() as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 3.0 * (0.25f64 / 4000.0).sqrt());
        let x = gen_ising(200, 4, 0.2, 5.0, IsingSampler::default(), &mut rng).unwrap();
        let frac = x.columns().iter().flatten().filter(|&&v| v == 2).count() as f64 / (200.0 * 16.0);
        assert!(frac > 0.99);
        assert!(gen_ising(1, 9, 0.2, 0.0, IsingSampler::Cftp, &mut rng).is_err());
    }

    #[test]
    fn responses() {
        let mut rng = RngStream::new(8);
        let n = 20_000;
        let x = gen_gaussian_ar(n, 3, 0.0, &mut rng).unwrap();
        let y = gen_response(&x, &[0.0; 3], ResponseFamily::LinearGaussian, &mut rng).unwrap();
        let m = y.iter().sum::<f64>() / n as f64;
        assert!(m.abs() < 3.0 / (n as f64).sqrt());
        let y = gen_response(&x, &[0.0; 3], ResponseFamily::Logistic, &mut rng).unwrap();
        let m = y.iter().sum::<f64>() / n as f64;
        assert!((m - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        let beta = [0.0, -3.0 * (n as f64).sqrt(), 0.0];
        let y = gen_response(&x, &beta, ResponseFamily::LinearGaussian, &mut rng).unwrap();
        let c: f64 = (0..n).map(|i| x.row(i)[1] * y[i]).sum::<f64>() / n as f64;
        assert!(c < -2.5);
    }

    #[test]
    fn beta_rules() {
        let mut rng = RngStream::new(9);
        let (b, s) = gen_beta(6, 6, 2.0, SignRule::Random, SupportRule::Uniform, MagnitudeRule::Constant, &mut rng).unwrap();
        assert!(b.iter().all(|v| v.abs() == 2.0));
        assert_eq!(s.len(), 6);
        let (b, _) = gen_beta(6, 0, 2.0, SignRule::Random, SupportRule::Uniform, MagnitudeRule::Constant, &mut rng).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
        let range = SupportRule::Range { start: 1, end: 20 };
        let (b, s) = gen_beta(100, 10, 1.0, SignRule::Fixed, range, MagnitudeRule::UniformOneTwo, &mut rng).unwrap();
        assert!(s.iter().all(|&j| j < 20));
        assert!(s.iter().all(|&j| b[j] >= 1.0 && b[j] < 2.0));
        assert!(gen_beta(5, 6, 1.0, SignRule::Fixed, SupportRule::Uniform, MagnitudeRule::Constant, &mut rng).is_err());
    }

    #[test]
    fn discretize_rounding() {
        let x = Matrix::from_rows(&[vec![0.24, 0.26, -1.3]]).unwrap();
        let d = discretize(&x, 2.0).unwrap();
        assert_eq!(d.row(0), &[0.0, 0.5, -1.5]);
        let mut rng = RngStream::new(10);
        let z = gen_gaussian_ar(1000, 2, 0.0, &mut rng).unwrap();
        let fine = discretize(&z, 1e6).unwrap();
        assert!(fine.sub(&z).max_abs() <= 0.5e-6 + 1e-12);
        let coarse = discretize(&z, 0.5).unwrap();
        let near: usize = coarse.as_slice().iter().filter(|v| [-2.0, 0.0, 2.0].contains(v)).count();
        assert!(near as f64 > 0.9 * 2000.0);
    }
}
