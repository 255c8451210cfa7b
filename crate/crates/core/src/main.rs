use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use influprobe::budget::{capacity_to_k, feasible_users, ProbeKind, RateModel};
use influprobe::generator::{generate, write_dataset, GenConfig};
use influprobe::harness::{
    budget_checks, prepare_truth, read_report, run_experiment, summarize, sweep, write_summary_to,
    ExperimentConfig, ExperimentOutcome, GroupKey, SweepGrid,
};
use influprobe::{Error, Result};

#[derive(Parser)]
#[command(name = "influprobe", version, about = "Probe-strategy simulator for evolving follower networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset directory.
    Gen(GenArgs),
    /// Run one experiment.
    Run(RunArgs),
    /// Run a theta/beta/capacity grid.
    Sweep(SweepArgs),
    /// Check probing feasibility under the API rate limits.
    Budget(BudgetArgs),
    /// Aggregate report CSVs into a plot-ready table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Generator config (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m0: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
    /// Skip tweet and dictionary files.
    #[arg(long)]
    no_tweets: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    capacities: Option<Vec<f64>>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Validate an experiment config instead of a single figure.
    #[arg(long, conflicts_with_all = ["users", "days"])]
    config: Option<PathBuf>,
    /// Users that must be refreshed.
    #[arg(long, required_unless_present = "config")]
    users: Option<u64>,
    /// `relations` or `tweets`.
    #[arg(long, default_value = "relations")]
    kind: ProbeKind,
    /// Period length in days.
    #[arg(long, required_unless_present = "config")]
    days: Option<f64>,
    /// Capacity fraction: report the per-period probe count for `--users`.
    #[arg(long)]
    capacity: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// One or more report.csv files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Grouping columns: scope, strategy, capacity, seed, period.
    #[arg(long, value_delimiter = ',', default_value = "scope,strategy,capacity")]
    by: Vec<GroupKey>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_run(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_outcome(cfg: &ExperimentConfig, out: &ExperimentOutcome) {
    println!(
        "{} rows -> {}",
        out.reports.len(),
        cfg.output_dir.join("report.csv").display()
    );
    for s in &out.summary {
        let keys: Vec<&str> = s.keys.iter().map(|(_, v)| v.as_str()).collect();
        println!(
            "{:<40} mse={:.4e} jaccard@100={:.3} tau_b={:.3}",
            keys.join(" "),
            s.mean[0],
            s.mean[2],
            s.mean[4]
        );
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                line: 0,
                msg: e.to_string(),
            })?
        }
        None => GenConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(m) = args.m0 {
        cfg.m0 = m;
    }
    if let Some(p) = args.periods {
        cfg.periods = p;
    }
    if args.no_tweets {
        cfg.tweets = false;
    }
    let data = generate(&cfg)?;
    write_dataset(&args.out, &data, Some(&cfg))?;
    println!(
        "wrote {} snapshots ({} vertices, {} edges at t=0) to {}",
        data.snapshots.len(),
        cfg.n,
        data.snapshots[0].graph.edge_count(),
        args.out.display()
    );
    Ok(())
}

fn budget(args: BudgetArgs) -> Result<bool> {
    if let Some(path) = &args.config {
        let cfg = ExperimentConfig::load(path)?;
        cfg.validate()?;
        let truth = prepare_truth(&cfg, cfg.seeds[0])?;
        let mut ok = true;
        for (cap, c) in budget_checks(&cfg, &truth)? {
            let verdict = if c.feasible() { "feasible" } else { "INFEASIBLE" };
            println!(
                "capacity {cap}: {:?} {verdict}: {} calls needed, {} available per period",
                c.kind, c.required_calls, c.available_calls
            );
            ok &= c.feasible();
        }
        return Ok(ok);
    }
    let users = args.users.expect("clap enforces --users");
    let days = args.days.expect("clap enforces --days");
    let rates = RateModel::default();
    let cap = feasible_users(&rates, days, args.kind)?;
    let ok = cap >= users;
    let kind = match args.kind {
        ProbeKind::Relations => "relations",
        ProbeKind::Tweets => "tweets",
    };
    if ok {
        println!("feasible: {cap} >= {users} users ({kind}, {days} days)");
    } else {
        println!(
            "infeasible: {cap} < {users} users ({kind}, {days} days; short by {})",
            users - cap
        );
    }
    if let Some(f) = args.capacity {
        println!("capacity {f}: k = {} probes per period", capacity_to_k(users as usize, f)?);
    }
    Ok(ok)
}

fn report(args: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &args.inputs {
        rows.extend(read_report(p)?);
    }
    let summary = summarize(&rows, &args.by);
    match &args.out {
        Some(p) => {
            let mut w = csv::Writer::from_path(p)?;
            write_summary_to(&mut w, &args.by, &summary)?;
            w.flush().map_err(|e| Error::io(p, e))?;
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            write_summary_to(&mut w, &args.by, &summary)?;
            w.flush().map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Run(a) => {
            let cfg = load_run(&a)?;
            let out = run_experiment(&cfg)?;
            print_outcome(&cfg, &out);
            Ok(true)
        }
        Command::Sweep(a) => {
            let cfg = load_run(&a.run)?;
            let mut grid: SweepGrid = cfg.sweep.clone().unwrap_or_default();
            if let Some(t) = a.thetas {
                grid.thetas = t;
            }
            if let Some(b) = a.betas {
                grid.betas = b;
            }
            if let Some(c) = a.capacities {
                grid.capacities = c;
            }
            let out = sweep(&cfg, &grid)?;
            print_outcome(&cfg, &out);
            Ok(true)
        }
        Command::Budget(a) => budget(a),
        Command::Report(a) => report(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
