use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use knockforge::discrete_knockoffs::{dgm_split_knockoffs, Inner};
use knockforge::gaussian_core::{compute_s, compute_suff_stats, gaussian_conditional_knockoffs, SMethod, SParams};
use knockforge::ggm_knockoffs::ggm_split_knockoffs;
use knockforge::graph_tools::{
    color_classes, complement, greedy_coloring, randomized_blocking_plan, standard_covering, two_pass_plan,
    BlockingPlan, GraphFamily, UndirectedGraph,
};
use knockforge::io;
use knockforge::knockoff_filter::{knockoff_threshold, lcd_statistics, LassoOptions};
use knockforge::simbench::generators::{gen_gaussian_ar, gen_gaussian_banded, gen_ising, gen_markov_chain, IsingSampler};
use knockforge::simbench::{presets, resolve_threads, run_experiment, ExperimentConfig};
use knockforge::{KnockoffError, RngStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_PRECONDITION: u8 = 2;
const EXIT_FAILURES: u8 = 3;

#[derive(Parser)]
#[command(name = "knockforge", version, about = "Conditional model-X knockoffs and the knockoff filter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation experiment from a TOML config file or a named preset.
    Run(RunArgs),
    /// Print a preset config, or list presets when no name is given.
    Preset { name: Option<String> },
    /// Generate a data matrix.
    Gen(GenArgs),
    /// Build and check a blocking plan for a graph.
    Block(BlockArgs),
    /// Generate knockoffs for a data file.
    Knockoff(KnockoffArgs),
    /// Run the knockoff filter with lasso coefficient-difference statistics.
    Filter(FilterArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file; ignored when --preset is given.
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; KNOCKFORGE_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Ar,
    Banded,
    Markov,
    Ising,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: GenFamily,
    #[arg(long)]
    n: usize,
    /// Number of variables (lattice side for ising).
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    #[arg(long, default_value_t = 1)]
    bandwidth: usize,
    #[arg(long, default_value_t = 0.2)]
    offdiag: f64,
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    field: f64,
    /// Use coupling from the past for ising (small lattices only).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanKind {
    Standard,
    TwoPass,
    Randomized,
    Coloring,
}

#[derive(Args)]
struct GraphArgs {
    /// Graph file (edge list, 1-based).
    #[arg(long, conflicts_with = "family")]
    graph: Option<PathBuf>,
    /// Built-in family: `ar:P:R`, `cycle:P`, `lattice:A,B`.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args)]
struct BlockArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value = "standard")]
    plan: PlanKind,
    /// Sample size the plan must serve.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    n_prime: Option<usize>,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KnockoffMethod {
    /// Low-dimensional Gaussian (n > 2p).
    Ldg,
    /// Gaussian graphical model with a two-pass blocking plan.
    Ggm,
    /// Discrete graphical model, split over colour classes.
    Dgm,
}

#[derive(Args)]
struct KnockoffArgs {
    #[arg(long, value_enum)]
    method: KnockoffMethod,
    #[arg(long)]
    x: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    n_prime: Option<usize>,
    /// Infer discrete cardinalities from column maxima when no `K:` line is present.
    #[arg(long)]
    infer_k: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    knockoffs: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    /// Use the plain knockoff threshold instead of knockoff+.
    #[arg(long)]
    no_plus: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn one_based(v: &[usize]) -> String {
    v.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_family(spec: &str) -> anyhow::Result<GraphFamily> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| anyhow!("family '{spec}' needs a ':'"))?;
    let nums = |s: &str, sep: char| -> anyhow::Result<Vec<usize>> {
        s.split(sep).map(|t| t.trim().parse::<usize>().with_context(|| format!("bad number '{t}'"))).collect()
    };
    Ok(match kind {
        "ar" => match nums(rest, ':')?.as_slice() {
            [p, r] => GraphFamily::ArChain { p: *p, r: *r },
            _ => bail!("expected ar:P:R"),
        },
        "cycle" => GraphFamily::Cycle { p: rest.trim().parse()? },
        "lattice" => GraphFamily::Lattice { dims: nums(rest, ',')? },
        _ => bail!("unknown family '{kind}'"),
    })
}

fn load_graph(args: &GraphArgs) -> anyhow::Result<(UndirectedGraph, Option<GraphFamily>)> {
    match (&args.graph, &args.family) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok((UndirectedGraph::parse(&text)?, None))
        }
        (None, Some(spec)) => {
            let fam = parse_family(spec)?;
            Ok((fam.graph()?, Some(fam)))
        }
        (None, None) => bail!("pass --graph or --family"),
    }
}

fn coloring_plan(g: &UndirectedGraph) -> BlockingPlan {
    let order: Vec<usize> = (0..g.p()).collect();
    let classes = color_classes(&greedy_coloring(g, &order));
    let sets = classes.iter().map(|c| complement(g.p(), c)).collect();
    BlockingPlan { sets, fold_sizes: Vec::new(), n_prime: 1 }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), _) => presets::preset(name).ok_or_else(|| {
            KnockoffError::InvalidInput(format!("unknown preset '{name}'; try `knockforge preset`"))
        })?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, None) => bail!(KnockoffError::InvalidInput("pass a config file or --preset".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    cfg.validate()?;
    let threads = resolve_threads(args.threads);
    let summary = run_experiment(&cfg, threads)?;
    emit(args.out.as_deref(), &summary.to_csv())?;
    let a = &summary.aggregate;
    eprintln!(
        "{}: {} ok, {} failed, FDR {:.4} (se {:.4}), power {:.4} (se {:.4})",
        summary.name, a.n_ok, a.n_failed, a.fdr, a.fdr_se, a.power, a.power_se
    );
    if summary.too_many_failures() {
        eprintln!("error: {:.1}% of replicates failed", 100.0 * summary.failure_fraction());
        return Ok(ExitCode::from(EXIT_FAILURES));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_preset(name: Option<String>) -> anyhow::Result<ExitCode> {
    match name {
        None => presets::preset_names().iter().for_each(|n| println!("{n}")),
        Some(n) => match presets::preset_toml(&n) {
            Some(t) => print!("{t}"),
            None => bail!(KnockoffError::InvalidInput(format!("unknown preset '{n}'"))),
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<ExitCode> {
    let root = RngStream::new(a.seed);
    let mut rng = root.derive("x");
    let text = match a.family {
        GenFamily::Ar => io::matrix_to_csv(&gen_gaussian_ar(a.n, a.p, a.rho, &mut rng)?),
        GenFamily::Banded => io::matrix_to_csv(&gen_gaussian_banded(a.n, a.p, a.bandwidth, a.offdiag, &mut rng)?),
        GenFamily::Markov => {
            let (_, x) = gen_markov_chain(a.n, a.p, &mut root.derive("markov"), &mut rng);
            io::discrete_to_csv(&x)
        }
        GenFamily::Ising => {
            let sampler = if a.exact { IsingSampler::Cftp } else { IsingSampler::default() };
            io::discrete_to_csv(&gen_ising(a.n, a.p, a.theta, a.field, sampler, &mut rng)?)
        }
    };
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_block(a: BlockArgs) -> anyhow::Result<ExitCode> {
    let (g, family) = load_graph(&a.graph)?;
    let n_prime = a.n_prime.unwrap_or(a.n / a.m.max(1));
    let plan = match a.plan {
        PlanKind::Standard => {
            let fam = family.ok_or_else(|| anyhow!("the standard plan needs --family"))?;
            standard_covering(&fam, a.n)?
        }
        PlanKind::TwoPass => two_pass_plan(&g, n_prime),
        PlanKind::Randomized => randomized_blocking_plan(&g, a.m, n_prime, &mut RngStream::new(a.seed).derive("plan")),
        PlanKind::Coloring => coloring_plan(&g),
    };
    let always = plan.always_blocked(g.p());
    println!("p = {}, edges = {}, max degree = {}", g.p(), g.edge_count(), g.max_degree());
    for (i, b) in plan.sets.iter().enumerate() {
        println!("B{} ({} blocked): {}", i + 1, b.len(), one_based(b));
    }
    let check = match a.plan {
        PlanKind::Coloring => plan.validate_cut_sets(&g, a.n),
        _ => plan.validate_separating(&g, a.n),
    };
    match check {
        Ok(sizes) => {
            println!("fold sizes: {}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "));
            println!("plan is valid and covering");
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            if !always.is_empty() {
                println!("never free: {}", one_based(&always));
            }
            Err(e.into())
        }
    }
}

fn cmd_knockoff(a: KnockoffArgs) -> anyhow::Result<ExitCode> {
    let rng = RngStream::new(a.seed).derive("knockoffs");
    let (text, trivial) = match a.method {
        KnockoffMethod::Ldg => {
            let x = io::read_matrix(&a.x)?;
            let stats = compute_suff_stats(&x)?;
            let s = compute_s(&stats.sigma_hat, &SParams::new(SMethod::Sdp))?;
            let ko = gaussian_conditional_knockoffs(&x, &s, &mut rng.clone())?;
            (io::matrix_to_csv(&ko.knockoffs), ko.trivial)
        }
        KnockoffMethod::Ggm => {
            let x = io::read_matrix(&a.x)?;
            let (g, _) = load_graph(&a.graph)?;
            let n_prime = a.n_prime.unwrap_or(x.rows() / 2);
            let plan = two_pass_plan(&g, n_prime);
            let ko = ggm_split_knockoffs(&x, &g, &plan, &SParams::new(SMethod::Sdp), &rng)?;
            (io::matrix_to_csv(&ko.knockoffs), ko.trivial)
        }
        KnockoffMethod::Dgm => {
            let text = std::fs::read_to_string(&a.x).with_context(|| format!("reading {}", a.x.display()))?;
            let x = io::parse_discrete(&text, a.infer_k)?;
            let (g, _) = load_graph(&a.graph)?;
            let ko = dgm_split_knockoffs(&x, &g, &coloring_plan(&g), &Inner::Plain, &rng)?;
            (io::discrete_to_csv(&ko.knockoffs), ko.trivial)
        }
    };
    emit(a.out.as_deref(), &text)?;
    let n_trivial = trivial.iter().filter(|&&t| t).count();
    eprintln!("{} of {} knockoff columns equal their originals", n_trivial, trivial.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_filter(a: FilterArgs) -> anyhow::Result<ExitCode> {
    let x = io::read_matrix(&a.x)?;
    let xk = io::read_matrix(&a.knockoffs)?;
    let y = io::parse_vector(&std::fs::read_to_string(&a.y).with_context(|| format!("reading {}", a.y.display()))?)?;
    let w = lcd_statistics(&x, &xk, &y, &LassoOptions::default(), &RngStream::new(a.seed).derive("filter"))?;
    let sel = knockoff_threshold(&w, a.q, !a.no_plus)?;
    let mut text = format!("threshold,{}\nselected,{}\n", sel.threshold, one_based(&sel.selected));
    text.push_str("variable,W\n");
    for (j, v) in w.w.iter().enumerate() {
        text.push_str(&format!("{},{}\n", j + 1, v));
    }
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Preset { name } => cmd_preset(name),
        Command::Gen(a) => cmd_gen(a),
        Command::Block(a) => cmd_block(a),
        Command::Knockoff(a) => cmd_knockoff(a),
        Command::Filter(a) => cmd_filter(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<KnockoffError>() {
                Some(k) if k.is_precondition() => ExitCode::from(EXIT_PRECONDITION),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
