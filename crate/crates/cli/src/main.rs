use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dbpcfg::gibbs::GibbsConfig;
use dbpcfg::pipeline::{cmd_baseline, cmd_evaluate, cmd_induce, cmd_synth, Metric, RunConfig};
use dbpcfg::synth::{SyntheticKind, SyntheticSpec};

#[derive(Parser)]
#[command(name = "dbpcfg", version, about = "Depth-bounded PCFG induction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a grammar and parses from a tokenized corpus.
    Induce(InduceArgs),
    /// Score predicted trees against gold trees.
    Evaluate(EvaluateArgs),
    /// Write a synthetic corpus and its gold trees.
    Synth(SynthArgs),
    /// Right-branching parses of a corpus.
    Baseline(BaselineArgs),
}

#[derive(clap::Args)]
struct InduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 15)]
    cats: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 20)]
    containment_iters: usize,
    #[arg(long, default_value_t = 500)]
    min_iters: usize,
    #[arg(long, default_value_t = 250)]
    post_convergence: usize,
    #[arg(long, default_value_t = 3000)]
    max_iters: usize,
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Upper limit on compiled transitions.
    #[arg(long)]
    transition_budget: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricName {
    Parseval,
    NpRecall,
    NpF1,
    Permutation,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricName::Parseval)]
    metric: MetricName,
    #[arg(long, default_value_t = 4000)]
    dev_size: usize,
    /// Second system's trees for the permutation test.
    #[arg(long)]
    against: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SyntheticKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    vocab_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BaselineArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output tree file.
    #[arg(long)]
    out: PathBuf,
}

fn induce(a: InduceArgs) -> Result<()> {
    let mut gibbs = GibbsConfig {
        categories: a.cats,
        depth_bound: a.depth,
        beta: a.beta,
        containment_iters: a.containment_iters,
        min_iters: a.min_iters,
        post_convergence: a.post_convergence,
        window: a.window,
        tol: a.tol,
        max_iters: a.max_iters,
        seed: a.seed,
        workers: a.workers,
        ..Default::default()
    };
    if let Some(b) = a.transition_budget {
        gibbs.transition_budget = b;
    }
    let config = RunConfig {
        gibbs,
        input: a.input,
        out: a.out,
    };
    let (manifest, _) = cmd_induce(&config)?;
    println!(
        "{} iterations, best log-likelihood {:.4} at iteration {}, artifacts in {}",
        manifest.iterations,
        manifest.best_log_likelihood,
        manifest.best_iteration,
        config.out.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let metric = match a.metric {
        MetricName::Parseval => Metric::Parseval,
        MetricName::NpRecall => Metric::NpRecall,
        MetricName::NpF1 => Metric::NpF1 { dev_size: a.dev_size },
        MetricName::Permutation => Metric::Permutation {
            against: a.against.context("--metric permutation needs --against")?,
            iterations: a.permutations,
            seed: a.seed,
        },
    };
    let report = cmd_evaluate(&a.pred, &a.gold, &metric)?;
    print!("{report}");
    if let Some(out) = a.out {
        std::fs::write(&out, &report).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Induce(a) => induce(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                vocab_size: a.vocab_size,
                ..SyntheticSpec::new(a.kind, a.seed)
            };
            cmd_synth(&spec, &a.out).map_err(Into::into)
        }
        Command::Baseline(a) => cmd_baseline(&a.input, &a.out).map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
