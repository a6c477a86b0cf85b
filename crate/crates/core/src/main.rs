//! Command line interface: `gen` emits problem files, `solve` runs one
//! strategy on one problem and writes its trace, `bench` runs an
//! experiment plan into CSV/SVG, `rates` writes a rate report.

use std::fs::{self, File};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfp::bench::{figure_strategies, run_plan, EmitFormat, ExperimentPlan, Strategy};
use cfp::config::RunConfig;
use cfp::problem::{generate_equality_problem, generate_problem, ProblemInstance};
use cfp::rates::{
    estimate_kappa, fit_empirical_rate, linear_system_constants, Provenance, RateReport,
    RegularityConstants,
};
use cfp::sets::distance_oracle;
use cfp::solver::{
    run, run_lopping, AlphaPolicy, SolverConfig, StoppingRule, TraceVerbosity, WeightPolicy,
};
use cfp::{Error, Result};

/// Safety factor applied to the empirical linear-regularity estimate in
/// reports.
const KAPPA_SAFETY: f64 = 2.0;

#[derive(Parser)]
#[command(name = "cfp", version, about = "Convex feasibility solver toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random consistent problem file.
    Gen(GenArgs),
    /// Solve one problem with one strategy and write the trace.
    Solve(SolveArgs),
    /// Run an experiment plan and emit CSV/SVG aggregates.
    Bench(BenchArgs),
    /// Compute rate constants and the per-method rate report.
    Rates(RatesArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Config file (TOML); command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Constraint count.
    #[arg(long)]
    m: Option<usize>,
    /// Dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Selection strategy: cyclic|all|active|maxprox|top:<t>|threshold:<t>.
    #[arg(long)]
    strategy: Option<String>,
    /// Outer block size b.
    #[arg(long)]
    block_size: Option<usize>,
    /// Relaxation parameter in (0, 2).
    #[arg(long)]
    alpha: Option<f64>,
    /// Stopping proximity threshold.
    #[arg(long)]
    eps: Option<f64>,
    /// Global check cadence.
    #[arg(long)]
    check_every: Option<usize>,
    /// Iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Resolved {
    m: usize,
    n: usize,
    seed: u64,
    strategy_spec: String,
    block_size: usize,
    config: SolverConfig,
    lopping: bool,
    flag_horizon: usize,
    out: PathBuf,
    format: EmitFormat,
    trials: usize,
}

impl Resolved {
    fn strategy(&self) -> Result<Strategy> {
        Strategy::parse(&self.strategy_spec, self.block_size)
    }

    /// Comma-separated strategy list (bench accepts several at once).
    fn strategy_list(&self) -> Result<Vec<Strategy>> {
        self.strategy_spec
            .split(',')
            .map(|s| Strategy::parse(s.trim(), self.block_size))
            .collect()
    }
}

impl CommonArgs {
    fn resolve(
        &self,
        lopping_flag: bool,
        flag_horizon: Option<usize>,
        trials: Option<usize>,
        format: Option<&str>,
    ) -> Result<Resolved> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let m = self.m.or(file.m).unwrap_or(100);
        let n = self.n.or(file.n).unwrap_or(20);
        let seed = self.seed.or(file.seed).unwrap_or(1);
        let block_size = self.block_size.or(file.outer_block_size).unwrap_or(m);
        let strategy_spec = self
            .strategy
            .as_deref()
            .or(file.strategy_spec())
            .unwrap_or("maxprox")
            .to_string();
        let alpha = self.alpha.or(file.alpha).unwrap_or(1.0);
        let stopping = StoppingRule {
            epsilon: self.eps.or(file.epsilon).unwrap_or(1e-6),
            check_every: self.check_every.or(file.check_every).unwrap_or(100),
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(5000),
        };
        let config = SolverConfig {
            alpha: AlphaPolicy::Constant(alpha),
            weights: WeightPolicy::Uniform,
            stopping,
            verbosity: TraceVerbosity::Metrics,
        };
        let out = self
            .out
            .clone()
            .or(file.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let format = match format.or(file.format.as_deref()) {
            Some(f) => EmitFormat::parse(f)?,
            None => EmitFormat::Both,
        };
        Ok(Resolved {
            m,
            n,
            seed,
            strategy_spec,
            block_size,
            config,
            lopping: lopping_flag || file.lopping.unwrap_or(false),
            flag_horizon: flag_horizon.or(file.flag_horizon).unwrap_or(1),
            out,
            format,
            trials: trials.or(file.trials).unwrap_or(100),
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Generate an equality (hyperplane) system instead of inequalities.
    #[arg(long)]
    equality: bool,
    /// Output file path (default: problem.txt under --out).
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Read the problem from a file instead of generating it.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Use the lopping/flagging run mode.
    #[arg(long)]
    lopping: bool,
    /// Flag horizon N for lopping.
    #[arg(long)]
    flag_horizon: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of trials per strategy.
    #[arg(long)]
    trials: Option<usize>,
    /// Figure preset (1-4) or "all"; overrides --strategy.
    #[arg(long, conflicts_with = "strategy")]
    figure: Option<String>,
    /// Output format.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Read the problem from a file instead of generating it.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Sample count for the empirical regularity estimate.
    #[arg(long, default_value_t = 30)]
    samples: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Rates(args) => cmd_rates(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let r = args.common.resolve(false, None, None, None)?;
    let problem = if args.equality {
        generate_equality_problem(r.m, r.n, r.seed)?
    } else {
        generate_problem(r.m, r.n, r.seed)?
    };
    let path = match args.file {
        Some(p) => p,
        None => {
            fs::create_dir_all(&r.out)?;
            r.out.join("problem.txt")
        }
    };
    problem.write_file(&path)?;
    println!(
        "wrote {} ({}x{}, seed {}, start max proximity {:.6e})",
        path.display(),
        problem.m(),
        problem.n(),
        problem.seed(),
        problem.max_proximity(problem.x0())
    );
    Ok(())
}

fn load_or_generate(problem: &Option<PathBuf>, r: &Resolved) -> Result<ProblemInstance> {
    match problem {
        Some(path) => ProblemInstance::read_file(path),
        None => generate_problem(r.m, r.n, r.seed),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let r = args.common.resolve(args.lopping, args.flag_horizon, None, None)?;
    let strategy = r.strategy()?;
    let problem = load_or_generate(&args.problem, &r)?;
    let cutters = problem.cutters()?;
    let sched = strategy.schedule(problem.m())?;
    let inner = strategy.inner();
    let trace = if r.lopping {
        run_lopping(&problem, &cutters, &sched, &inner, &r.config, r.flag_horizon)?
    } else {
        run(&problem, &cutters, &sched, &inner, &r.config)?
    };
    fs::create_dir_all(&r.out)?;
    let path = r.out.join("trace.csv");
    let mut f = File::create(&path)?;
    trace.write_csv(&mut f)?;
    println!(
        "{}: {} after {} iterations, final max proximity {:.6e} (trace: {})",
        strategy.label(),
        trace.status.as_str(),
        trace.terminal_iteration(),
        trace.final_max_prox(),
        path.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let r = args
        .common
        .resolve(false, None, args.trials, args.format.as_deref())?;
    let figures: Vec<(String, Vec<Strategy>)> = match args.figure.as_deref() {
        Some("all") => (1..=4)
            .map(|f| Ok((format!("fig{f}"), figure_strategies(f)?)))
            .collect::<Result<_>>()?,
        Some(f) => {
            let id: u8 = f
                .parse()
                .map_err(|_| Error::Parse(format!("bad figure {f:?}, expected 1-4 or all")))?;
            vec![(format!("fig{id}"), figure_strategies(id)?)]
        }
        None if args.common.strategy.is_some() => {
            vec![("bench".to_string(), r.strategy_list()?)]
        }
        None => vec![("fig1".to_string(), figure_strategies(1)?)],
    };
    for (stem, strategies) in figures {
        let plan = ExperimentPlan {
            m: r.m,
            n: r.n,
            trials: r.trials,
            base_seed: r.seed,
            strategies,
            config: r.config.clone(),
        };
        let agg = run_plan(&plan)?;
        let title = format!("{stem}: m={} n={} trials={}", r.m, r.n, r.trials);
        let written = cfp::bench::emit(&agg, &r.out, &stem, &title, r.format)?;
        for p in written {
            println!("wrote {}", p.display());
        }
        for s in &agg.strategies {
            let mut iters: Vec<f64> = s.terminal_iters.iter().map(|&i| i as f64).collect();
            iters.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!(
                "  {:20} median terminal iteration {:7.1}, failures {}",
                s.label,
                cfp::bench::percentile(&iters, 0.5),
                s.failures
            );
        }
    }
    Ok(())
}

fn cmd_rates(args: RatesArgs) -> Result<()> {
    let r = args.common.resolve(false, None, None, None)?;
    let strategy = r.strategy()?;
    let problem = load_or_generate(&args.problem, &r)?;
    let (delta, big_delta) = linear_system_constants(problem.a())?;
    let kappa_hat = estimate_kappa(&problem, args.samples, r.seed.wrapping_add(777))?;
    let kappa = KAPPA_SAFETY * kappa_hat;
    let constants =
        RegularityConstants::new(delta, big_delta, kappa.max(1.0), Provenance::Empirical)?;

    let cutters = problem.cutters()?;
    let (d0, d0_upper) = match distance_oracle(&cutters, problem.x0()) {
        Ok(d) => (d, false),
        Err(_) => (cfp::linalg::dist(problem.x0(), problem.witness()), true),
    };

    let sched = strategy.schedule(problem.m())?;
    let trace = run(&problem, &cutters, &sched, &strategy.inner(), &r.config)?;
    let b = match strategy.kind {
        cfp::bench::StrategyKind::Cyclic => 1,
        _ => strategy.block_size,
    };
    let mut report = RateReport::new(
        strategy.method(),
        problem.m(),
        b,
        strategy.top_size(),
        constants,
        d0,
        d0_upper,
    )?;
    if let Ok(q_hat) = fit_empirical_rate(&trace) {
        report = report.with_empirical_rate(q_hat);
    }

    fs::create_dir_all(&r.out)?;
    let path = r.out.join("rates.csv");
    let mut out = String::new();
    out.push_str(RateReport::csv_header());
    out.push('\n');
    out.push_str(&report.to_csv_row());
    out.push('\n');
    fs::write(&path, out)?;
    println!(
        "{}: q_r {:.6} c_r {:.4e} (delta {:.4}, Delta {:.4}, kappa {:.4} [{}x empirical], d0 {:.4}{})",
        strategy.label(),
        report.q,
        report.c,
        delta,
        big_delta,
        kappa,
        KAPPA_SAFETY,
        d0,
        if d0_upper { ", upper bound" } else { "" }
    );
    if let Some(q_hat) = report.q_hat {
        println!("  empirical rate fit q_hat {q_hat:.6}");
    }
    println!("wrote {}", path.display());
    Ok(())
}
