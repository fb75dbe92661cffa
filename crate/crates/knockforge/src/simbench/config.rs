//! Experiment configuration, read from TOML.

use super::generators::{IsingSampler, MagnitudeRule, ResponseFamily, SignRule, SupportRule};
use crate::error::{KnockoffError, Result};
use crate::gaussian_core::SParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    /// Number of covariates; for the Ising generator this must equal `side²`.
    pub p: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n_unlabeled: usize,
    /// Record wall-clock times; off by default so output is byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    pub generator: GeneratorSpec,
    pub response: ResponseSpec,
    pub method: MethodSpec,
    #[serde(default)]
    pub filter: FilterSpec,
}

fn default_replicates() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    GaussianAr {
        rho: f64,
    },
    GaussianBanded {
        bandwidth: usize,
        offdiag: f64,
    },
    /// AR(1) rounded to the `1/k` grid.
    DiscretizedAr {
        rho: f64,
        k: f64,
    },
    MarkovChain,
    Ising {
        side: usize,
        theta: f64,
        #[serde(default)]
        field: FieldRule,
        #[serde(default)]
        sampler: IsingSampler,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldRule {
    #[default]
    Zero,
    Constant {
        h: f64,
    },
    /// `h_s ~ Unif(0, 1)`, frozen per experiment.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSpec {
    #[serde(default)]
    pub family: ResponseFamily,
    pub amplitude: f64,
    pub k: usize,
    #[serde(default)]
    pub signs: SignRule,
    #[serde(default)]
    pub support: SupportRule,
    #[serde(default)]
    pub magnitude: MagnitudeRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    /// Low-dimensional Gaussian conditional knockoffs (unlabeled rows used when given).
    LowDimGaussian {
        #[serde(default)]
        s: SParams,
    },
    /// Model-X Gaussian knockoffs with the true covariance.
    UnconditionalGaussian {
        #[serde(default)]
        s: SParams,
    },
    /// Gaussian graphical model with data splitting.
    GgmSplit {
        #[serde(default)]
        s: SParams,
        #[serde(default)]
        plan: PlanSpec,
    },
    /// Discrete graphical model with data splitting over a proper colouring.
    DgmSplit {
        #[serde(default)]
        inner: InnerSpec,
    },
    /// Discrete graphical model, graph-expanding on the full data.
    DgmExpanding {
        #[serde(default = "default_q_max")]
        q_max: usize,
    },
    /// SCIP for binary Markov chains on small row folds.
    McScip {
        #[serde(default = "default_fold_size")]
        fold_size: usize,
    },
    /// `X̃ = X`; every statistic is zero.
    Identity,
}

fn default_q_max() -> usize {
    2
}

fn default_fold_size() -> usize {
    4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSpec {
    /// Built-in covering for the generator's graph family.
    #[default]
    Standard,
    /// `m` greedy passes with random orders, blocking towards components of size `n_prime`.
    Randomized { n_prime: usize, m: usize },
    /// Deterministic two-pass greedy plan.
    TwoPass { n_prime: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnerSpec {
    #[default]
    Plain,
    Expanding {
        q_max: usize,
    },
    Refined {
        #[serde(default)]
        t_max: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub q: f64,
    pub plus: bool,
    pub folds: usize,
    pub n_lambda: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { q: crate::knockoff_filter::DEFAULT_Q, plus: true, folds: 10, n_lambda: 100 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| KnockoffError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks counts and the method's preconditions that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KnockoffError::InvalidInput(m));
        if self.n == 0 || self.p == 0 || self.replicates == 0 {
            return bad("n, p and replicates must be positive".into());
        }
        if self.response.k > self.p {
            return bad(format!("k = {} exceeds p = {}", self.response.k, self.p));
        }
        if !(self.filter.q > 0.0 && self.filter.q < 1.0) {
            return bad(format!("q = {} is outside (0, 1)", self.filter.q));
        }
        if self.filter.folds < 2 || self.filter.folds > self.n || self.filter.n_lambda < 2 {
            return bad("filter needs 2 ≤ folds ≤ n and n_lambda ≥ 2".into());
        }
        let discrete = matches!(self.generator, GeneratorSpec::MarkovChain | GeneratorSpec::Ising { .. });
        match &self.generator {
            GeneratorSpec::GaussianAr { rho } | GeneratorSpec::DiscretizedAr { rho, .. } if !(rho.abs() < 1.0) => {
                return bad(format!("|rho| = {} must be below 1", rho.abs()));
            }
            GeneratorSpec::Ising { side, .. } if side * side != self.p => {
                return bad(format!("Ising side {side} gives p = {}, config says {}", side * side, self.p));
            }
            _ => {}
        }
        match &self.method {
            MethodSpec::LowDimGaussian { .. } => {
                if discrete {
                    return bad("low_dim_gaussian needs a continuous generator".into());
                }
                if self.n + self.n_unlabeled <= 2 * self.p {
                    return Err(KnockoffError::Precondition(format!(
                        "low-dimensional construction needs n + n_unlabeled > 2p, got {} ≤ {}",
                        self.n + self.n_unlabeled,
                        2 * self.p
                    )));
                }
            }
            MethodSpec::UnconditionalGaussian { .. } => {
                if !matches!(self.generator, GeneratorSpec::GaussianAr { .. } | GeneratorSpec::GaussianBanded { .. }) {
                    return bad("unconditional_gaussian needs a Gaussian generator".into());
                }
            }
            MethodSpec::GgmSplit { .. } => {
                if discrete {
                    return bad("ggm_split needs a continuous generator".into());
                }
            }
            MethodSpec::DgmSplit { inner } => {
                if !discrete {
                    return bad("dgm_split needs a discrete generator".into());
                }
                if matches!(inner, InnerSpec::Refined { .. }) && !matches!(self.generator, GeneratorSpec::MarkovChain) {
                    return bad("refined blocking is for Markov chains".into());
                }
            }
            MethodSpec::DgmExpanding { q_max } => {
                if !discrete || *q_max == 0 {
                    return bad("dgm_expanding needs a discrete generator and q_max ≥ 1".into());
                }
            }
            MethodSpec::McScip { fold_size } => {
                if !matches!(self.generator, GeneratorSpec::MarkovChain) || *fold_size == 0 {
                    return bad("mc_scip needs the Markov chain generator and fold_size ≥ 1".into());
                }
                if 4f64.powi(*fold_size as i32) > crate::discrete_knockoffs::SCIP_BUDGET {
                    return Err(KnockoffError::Budget(format!("fold_size {fold_size} exceeds the enumeration budget")));
                }
            }
            MethodSpec::Identity => {}
        }
        Ok(())
    }
}
