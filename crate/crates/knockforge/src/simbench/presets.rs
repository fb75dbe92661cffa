//! Shipped experiment configurations. The `full-*` presets use full-scale simulation
//! parameters; the `desk-*` presets are scaled down to run in minutes.

use super::config::ExperimentConfig;

const PRESETS: &[(&str, &str)] = &[
    (
        "full-ldg-ar1",
        r#"
name = "full-ldg-ar1"
n = 2500
p = 1000
replicates = 200
[generator]
family = "gaussian_ar"
rho = 0.3
[response]
amplitude = 4.0
k = 60
[method]
kind = "low_dim_gaussian"
"#,
    ),
    (
        "full-ggm-ar1",
        r#"
name = "full-ggm-ar1"
n = 300
p = 2000
replicates = 200
[generator]
family = "gaussian_ar"
rho = 0.3
[response]
amplitude = 10.0
k = 60
[method]
kind = "ggm_split"
plan = { kind = "two_pass", n_prime = 40 }
"#,
    ),
    (
        "full-ggm-ar10",
        r#"
name = "full-ggm-ar10"
n = 400
p = 2000
replicates = 200
[generator]
family = "gaussian_banded"
bandwidth = 10
offdiag = 0.05
[response]
amplitude = 10.0
k = 60
[method]
kind = "ggm_split"
plan = { kind = "two_pass", n_prime = 50 }
"#,
    ),
    (
        "full-markov",
        r#"
name = "full-markov"
n = 300
p = 1000
replicates = 200
[generator]
family = "markov_chain"
[response]
amplitude = 10.0
k = 60
[method]
kind = "dgm_split"
inner = { kind = "expanding", q_max = 2 }
"#,
    ),
    (
        "full-ising",
        r#"
name = "full-ising"
n = 300
p = 1024
replicates = 200
[generator]
family = "ising"
side = 32
theta = 0.2
[response]
amplitude = 10.0
k = 60
[method]
kind = "dgm_split"
"#,
    ),
    (
        "desk-ldg",
        r#"
name = "desk-ldg"
n = 150
p = 50
replicates = 400
seed = 101
[generator]
family = "gaussian_ar"
rho = 0.3
[response]
amplitude = 3.5
k = 10
[method]
kind = "low_dim_gaussian"
"#,
    ),
    (
        "desk-ggm",
        r#"
name = "desk-ggm"
n = 120
p = 200
replicates = 400
seed = 102
[generator]
family = "gaussian_ar"
rho = 0.3
[response]
amplitude = 4.5
k = 10
[method]
kind = "ggm_split"
plan = { kind = "two_pass", n_prime = 40 }
"#,
    ),
    (
        "desk-markov",
        r#"
name = "desk-markov"
n = 120
p = 100
replicates = 400
seed = 103
[generator]
family = "markov_chain"
[response]
amplitude = 8.0
k = 10
[method]
kind = "dgm_split"
inner = { kind = "expanding", q_max = 2 }
"#,
    ),
    (
        "desk-ising",
        r#"
name = "desk-ising"
n = 100
p = 64
replicates = 400
seed = 104
[generator]
family = "ising"
side = 8
theta = 0.2
[response]
amplitude = 4.5
k = 10
[method]
kind = "dgm_split"
"#,
    ),
    (
        "desk-power-conditional",
        r#"
name = "desk-power-conditional"
n = 400
p = 100
replicates = 400
seed = 105
[generator]
family = "gaussian_ar"
rho = 0.3
[response]
amplitude = 3.5
k = 10
[method]
kind = "low_dim_gaussian"
"#,
    ),
    (
        "desk-power-unconditional",
        r#"
name = "desk-power-unconditional"
n = 400
p = 100
replicates = 400
seed = 105
[generator]
family = "gaussian_ar"
rho = 0.3
[response]
amplitude = 3.5
k = 10
[method]
kind = "unconditional_gaussian"
"#,
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_toml(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| t.trim_start())
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    preset_toml(name).map(|t| ExperimentConfig::from_toml(t).expect("shipped presets are valid"))
}
