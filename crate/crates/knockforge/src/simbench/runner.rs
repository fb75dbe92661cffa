//! Monte Carlo loop: generate, construct knockoffs, filter, score.

use super::config::{ExperimentConfig, FieldRule, GeneratorSpec, InnerSpec, MethodSpec, PlanSpec};
use super::generators::{
    ar_covariance, discretize, gen_beta, gen_gaussian_ar, gen_response, BandedGaussian, IsingModel, IsingSampler,
    MarkovChainModel,
};
use crate::discrete_knockoffs::{dgm_expanding_knockoffs, dgm_split_knockoffs, mc_scip_knockoffs, CutStrategy, DiscreteMatrix, Inner};
use crate::error::{KnockoffError, Result};
use crate::gaussian_core::{compute_s, gaussian_conditional_knockoffs};
use crate::ggm_knockoffs::ggm_split_knockoffs;
use crate::graph_tools::{
    color_classes, complement, greedy_coloring, randomized_blocking_plan, standard_covering, two_pass_plan, BlockingPlan,
    GraphFamily, UndirectedGraph,
};
use crate::knockoff_filter::{
    fdp_and_power, knockoff_threshold, knockoffs_with_unlabeled, lcd_statistics, unconditional_gaussian_knockoffs,
    Family, LassoOptions,
};
use crate::rng::RngStream;
use crate::Matrix;
use rayon::prelude::*;
use std::time::Instant;

pub const THREADS_ENV: &str = "KNOCKFORGE_THREADS";
/// A run fails when more than this fraction of replicates error.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Thread count: `KNOCKFORGE_THREADS` if set and valid, else `requested`, else all cores.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .or(requested)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub fdp: f64,
    pub power: f64,
    pub n_selected: usize,
    pub n_trivial_columns: usize,
    pub threshold: f64,
    pub lambda: f64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub n_ok: usize,
    pub n_failed: usize,
    pub fdr: f64,
    pub fdr_se: f64,
    pub power: f64,
    pub power_se: f64,
    pub mean_selected: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub name: String,
    pub records: Vec<ReplicateRecord>,
    pub aggregate: Aggregate,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

impl ExperimentSummary {
    fn new(name: String, records: Vec<ReplicateRecord>) -> Self {
        let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let (fdr, fdr_se) = mean_se(&ok.iter().map(|r| r.fdp).collect::<Vec<_>>());
        let (power, power_se) = mean_se(&ok.iter().map(|r| r.power).collect::<Vec<_>>());
        let (mean_selected, _) = mean_se(&ok.iter().map(|r| r.n_selected as f64).collect::<Vec<_>>());
        let aggregate =
            Aggregate { n_ok: ok.len(), n_failed: records.len() - ok.len(), fdr, fdr_se, power, power_se, mean_selected };
        ExperimentSummary { name, records, aggregate }
    }

    pub fn failure_fraction(&self) -> f64 {
        self.aggregate.n_failed as f64 / self.records.len().max(1) as f64
    }

    pub fn too_many_failures(&self) -> bool {
        self.failure_fraction() > MAX_FAILURE_FRACTION
    }

    /// Per-replicate rows followed by `mean` and `se` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header =
            ["replicate", "fdp", "power", "n_selected", "n_trivial_columns", "threshold", "lambda", "wall_ms", "error"];
        w.write_record(header).expect("in-memory write");
        for r in &self.records {
            let ok = r.error.is_none();
            let num = |v: f64| if ok { v.to_string() } else { String::new() };
            w.write_record([
                r.replicate.to_string(),
                num(r.fdp),
                num(r.power),
                if ok { r.n_selected.to_string() } else { String::new() },
                if ok { r.n_trivial_columns.to_string() } else { String::new() },
                num(r.threshold),
                num(r.lambda),
                r.wall_ms.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        let a = &self.aggregate;
        let failed = format!("{} failed", a.n_failed);
        w.write_record(["mean", &a.fdr.to_string(), &a.power.to_string(), &a.mean_selected.to_string(), "", "", "", "", &failed])
            .expect("in-memory write");
        w.write_record(["se", &a.fdr_se.to_string(), &a.power_se.to_string(), "", "", "", "", "", ""])
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

enum Generator {
    Ar { rho: f64 },
    Banded(BandedGaussian),
    DiscretizedAr { rho: f64, k: f64 },
    Markov(MarkovChainModel),
    Ising(IsingModel, IsingSampler),
}

/// Everything held fixed across replicates.
struct FrozenModel {
    generator: Generator,
    graph: UndirectedGraph,
    family: GraphFamily,
    beta: Vec<f64>,
    support: Vec<usize>,
    sigma: Option<Matrix>,
    s_true: Option<Vec<f64>>,
}

enum Covariates {
    Continuous(Matrix),
    Discrete(DiscreteMatrix),
}

fn discrete_value(gen: &Generator) -> impl Fn(usize, u32) -> f64 + '_ {
    move |_, label| match gen {
        Generator::Ising(..) => {
            if label == 2 {
                1.0
            } else {
                -1.0
            }
        }
        _ => f64::from(label) - 1.0,
    }
}

impl FrozenModel {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let root = RngStream::new(cfg.seed).derive("experiment");
        let p = cfg.p;
        let (generator, family) = match &cfg.generator {
            GeneratorSpec::GaussianAr { rho } => (Generator::Ar { rho: *rho }, GraphFamily::ArChain { p, r: 1 }),
            GeneratorSpec::GaussianBanded { bandwidth, offdiag } => (
                Generator::Banded(BandedGaussian::new(p, *bandwidth, *offdiag)?),
                GraphFamily::ArChain { p, r: *bandwidth },
            ),
            GeneratorSpec::DiscretizedAr { rho, k } => {
                (Generator::DiscretizedAr { rho: *rho, k: *k }, GraphFamily::ArChain { p, r: 1 })
            }
            GeneratorSpec::MarkovChain => (
                Generator::Markov(MarkovChainModel::draw(p, &mut root.derive("markov"))),
                GraphFamily::ArChain { p, r: 1 },
            ),
            GeneratorSpec::Ising { side, theta, field, sampler } => {
                let mut f = root.derive("field");
                let h = match field {
                    FieldRule::Zero => vec![0.0; p],
                    FieldRule::Constant { h } => vec![*h; p],
                    FieldRule::Uniform => (0..p).map(|_| f.uniform()).collect(),
                };
                (
                    Generator::Ising(IsingModel::new(*side, *theta, h)?, *sampler),
                    GraphFamily::Lattice { dims: vec![*side, *side] },
                )
            }
        };
        let graph = family.graph()?;
        let r = &cfg.response;
        let (beta, support) =
            gen_beta(p, r.k, r.amplitude, r.signs, r.support, r.magnitude, &mut root.derive("beta"))?;
        let sigma = match &generator {
            Generator::Ar { rho } => Some(ar_covariance(p, *rho)),
            Generator::Banded(b) => Some(b.covariance()),
            _ => None,
        };
        let s_true = match (&cfg.method, &sigma) {
            (MethodSpec::UnconditionalGaussian { s }, Some(sig)) => Some(compute_s(sig, s)?.s),
            _ => None,
        };
        Ok(FrozenModel { generator, graph, family, beta, support, sigma, s_true })
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Covariates> {
        let p = self.beta.len();
        Ok(match &self.generator {
            Generator::Ar { rho } => Covariates::Continuous(gen_gaussian_ar(n, p, *rho, rng)?),
            Generator::Banded(b) => Covariates::Continuous(b.sample(n, rng)),
            Generator::DiscretizedAr { rho, k } => Covariates::Continuous(discretize(&gen_gaussian_ar(n, p, *rho, rng)?, *k)?),
            Generator::Markov(m) => Covariates::Discrete(m.sample(n, rng)),
            Generator::Ising(m, sampler) => Covariates::Discrete(m.sample(n, *sampler, rng)?),
        })
    }

    fn to_real(&self, x: &DiscreteMatrix) -> Matrix {
        x.to_real(discrete_value(&self.generator))
    }
}

fn coloring_plan(g: &UndirectedGraph) -> BlockingPlan {
    let order: Vec<usize> = (0..g.p()).collect();
    let classes = color_classes(&greedy_coloring(g, &order));
    BlockingPlan { sets: classes.iter().map(|c| complement(g.p(), c)).collect(), fold_sizes: Vec::new(), n_prime: 0 }
}

struct Outcome {
    fdp: f64,
    power: f64,
    n_selected: usize,
    n_trivial: usize,
    threshold: f64,
    lambda: f64,
}

fn run_replicate(cfg: &ExperimentConfig, model: &FrozenModel, r: usize) -> Result<Outcome> {
    let rs = RngStream::new(cfg.seed).derive_index("replicate", r as u64);
    let x = model.sample(cfg.n, &mut rs.derive("x"))?;
    let real = match &x {
        Covariates::Continuous(m) => m.clone(),
        Covariates::Discrete(d) => model.to_real(d),
    };
    let y = gen_response(&real, &model.beta, cfg.response.family, &mut rs.derive("y"))?;
    let mut ko_rng = rs.derive("knockoffs");
    let (x_tilde, trivial) = match (&cfg.method, &x) {
        (MethodSpec::LowDimGaussian { s }, Covariates::Continuous(xm)) => {
            let xu = if cfg.n_unlabeled > 0 {
                match model.sample(cfg.n_unlabeled, &mut rs.derive("x-unlabeled"))? {
                    Covariates::Continuous(m) => m,
                    Covariates::Discrete(_) => unreachable!("validated continuous"),
                }
            } else {
                Matrix::zeros(0, cfg.p)
            };
            let ko = knockoffs_with_unlabeled(xm, &xu, |full| {
                let st = crate::gaussian_core::compute_suff_stats(full)?;
                let sv = compute_s(&st.sigma_hat, s)?;
                gaussian_conditional_knockoffs(full, &sv, &mut ko_rng)
            })?;
            (ko.knockoffs, ko.trivial)
        }
        (MethodSpec::UnconditionalGaussian { .. }, Covariates::Continuous(xm)) => {
            let sigma = model.sigma.as_ref().expect("gaussian generator");
            let s = model.s_true.as_ref().expect("computed with the model");
            let ko = unconditional_gaussian_knockoffs(xm, &vec![0.0; cfg.p], sigma, s, &mut ko_rng)?;
            (ko.knockoffs, ko.trivial)
        }
        (MethodSpec::GgmSplit { s, plan }, Covariates::Continuous(xm)) => {
            let plan = match plan {
                PlanSpec::Standard => standard_covering(&model.family, cfg.n)?,
                PlanSpec::Randomized { n_prime, m } => {
                    randomized_blocking_plan(&model.graph, *m, *n_prime, &mut rs.derive("plan"))
                }
                PlanSpec::TwoPass { n_prime } => two_pass_plan(&model.graph, *n_prime),
            };
            let ko = ggm_split_knockoffs(xm, &model.graph, &plan, s, &ko_rng)?;
            (ko.knockoffs, ko.trivial)
        }
        (MethodSpec::DgmSplit { inner }, Covariates::Discrete(xd)) => {
            let inner = match inner {
                InnerSpec::Plain => Inner::Plain,
                InnerSpec::Expanding { q_max } => Inner::Expanding(*q_max),
                InnerSpec::Refined { t_max } => Inner::Refined(*t_max),
            };
            let ko = dgm_split_knockoffs(xd, &model.graph, &coloring_plan(&model.graph), &inner, &ko_rng)?;
            (model.to_real(&ko.knockoffs), ko.trivial)
        }
        (MethodSpec::DgmExpanding { q_max }, Covariates::Discrete(xd)) => {
            let ko = dgm_expanding_knockoffs(xd, &model.graph, *q_max, &CutStrategy::Greedy, &mut ko_rng)?;
            (model.to_real(&ko.knockoffs), ko.trivial)
        }
        (MethodSpec::McScip { fold_size }, Covariates::Discrete(xd)) => {
            let ko = mc_scip_knockoffs(xd, *fold_size, &ko_rng)?;
            (model.to_real(&ko.knockoffs), ko.trivial)
        }
        (MethodSpec::Identity, _) => (real.clone(), vec![true; cfg.p]),
        _ => return Err(KnockoffError::InvalidInput("method does not match the generator".into())),
    };
    let family = match cfg.response.family {
        super::generators::ResponseFamily::LinearGaussian => Family::Gaussian,
        super::generators::ResponseFamily::Logistic => Family::Binomial,
    };
    let opts = LassoOptions { family, folds: cfg.filter.folds, n_lambda: cfg.filter.n_lambda };
    let w = lcd_statistics(&real, &x_tilde, &y, &opts, &rs.derive("filter"))?;
    let sel = knockoff_threshold(&w, cfg.filter.q, cfg.filter.plus)?;
    let (fdp, power) = fdp_and_power(&sel.selected, &model.support, cfg.p)?;
    Ok(Outcome {
        fdp,
        power,
        n_selected: sel.selected.len(),
        n_trivial: trivial.iter().filter(|&&t| t).count(),
        threshold: sel.threshold,
        lambda: w.lambda_selected,
    })
}

/// Runs every replicate on a pool of `threads` workers. Stage errors are recorded per
/// replicate; an error is returned only when the configuration itself is unusable.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let model = FrozenModel::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| KnockoffError::InvalidInput(format!("thread pool: {e}")))?;
    let mut records: Vec<ReplicateRecord> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let start = Instant::now();
                let out = run_replicate(cfg, &model, r);
                let wall_ms = if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
                match out {
                    Ok(o) => ReplicateRecord {
                        replicate: r,
                        fdp: o.fdp,
                        power: o.power,
                        n_selected: o.n_selected,
                        n_trivial_columns: o.n_trivial,
                        threshold: o.threshold,
                        lambda: o.lambda,
                        wall_ms,
                        error: None,
                    },
                    Err(e) => ReplicateRecord {
                        replicate: r,
                        fdp: f64::NAN,
                        power: f64::NAN,
                        n_selected: 0,
                        n_trivial_columns: 0,
                        threshold: f64::NAN,
                        lambda: f64::NAN,
                        wall_ms,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    records.sort_by_key(|r| r.replicate);
    Ok(ExperimentSummary::new(cfg.name.clone(), records))
}
