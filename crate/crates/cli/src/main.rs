use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgmpinn::config::ConfigEntries;
use cgmpinn::experiment::{run_experiment, summary_table};
use cgmpinn::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "cgmpinn", version, about = "Curriculum-guided GMM-weighted PINN experiments", args_conflicts_with_subcommands = true)]
struct Cli {
    /// Run a verification suite (same as `verify <SUITE>`).
    #[arg(long, value_name = "SUITE")]
    verify: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (method, seed) pair and write one directory per run.
    Run(Box<RunArgs>),
    /// Run a property suite: gradients, gmm, bounds, descent, manufactured, relobralo or all.
    Verify { suite: String },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated methods.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (default: $CGMPINN_OUT, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    adam_iters: Option<usize>,
    #[arg(long)]
    lbfgs_iters: Option<usize>,
    #[arg(long)]
    k_upd: Option<usize>,
    #[arg(long)]
    k_components: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c_sat: Option<f64>,
    #[arg(long, value_name = "on|off")]
    relobralo: Option<String>,
    /// Extra `section.key=value` assignments.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.verify, cli.command) {
        (Some(suite), _) | (None, Some(Command::Verify { suite })) => verify(&suite),
        (None, Some(Command::Run(args))) => run(args),
        (None, None) => {
            eprintln!("error: expected a subcommand (`run` or `verify`); see --help");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn verify(name: &str) -> cgmpinn::Result<bool> {
    let suites = if name == "all" { Suite::ALL.to_vec() } else { vec![name.parse()?] };
    let mut ok = true;
    for suite in suites {
        println!("== {suite}");
        for check in run_suite(suite)? {
            ok &= check.passed;
            println!("{check}");
        }
    }
    Ok(ok)
}

fn run(args: Box<RunArgs>) -> cgmpinn::Result<bool> {
    let mut entries = match &args.config {
        Some(path) => ConfigEntries::read(path)?,
        None => ConfigEntries::default(),
    };
    let flags = [
        ("run.problem", args.problem),
        ("run.method", args.method),
        ("run.seed", args.seed),
        ("run.out", args.out.map(|p| p.display().to_string())),
        ("train.optimizer", args.optimizer),
        ("train.adam_iters", args.adam_iters.map(|v| v.to_string())),
        ("train.lbfgs_iters", args.lbfgs_iters.map(|v| v.to_string())),
        ("curriculum.k_upd", args.k_upd.map(|v| v.to_string())),
        ("curriculum.k_components", args.k_components.map(|v| v.to_string())),
        ("curriculum.beta", args.beta.map(|v| v.to_string())),
        ("curriculum.c_sat", args.c_sat.map(|v| v.to_string())),
        ("relobralo.enabled", args.relobralo),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            entries.set(key, &v);
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| cgmpinn::Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        entries.set(k.trim(), v.trim());
    }
    let cfg = entries.build()?;
    let summaries = run_experiment(&cfg, |record, dir| {
        let s = &record.summary;
        eprintln!(
            "{} seed {}: rel_e2 {:.4e} in {:.1}s -> {}",
            s.method,
            s.seed,
            s.metrics.rel_e2,
            s.cpu_s,
            dir.display()
        );
        if let Some(f) = &s.failure {
            eprintln!("  run aborted: {f}");
        }
    })?;
    println!("problem: {}", cfg.problem);
    print!("{}", summary_table(&summaries));
    Ok(summaries.iter().all(|s| s.failure.is_none()))
}
