//! `mcdmac`: solve allocation instances, simulate, evaluate the analytical
//! model and run sweeps.
//!
//! Exit status is 0 on success, 1 for invalid input (bad flags, config or
//! instance files) and 2 when a run itself fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcdmac::allocator::{
    parse_problem, random_problem, solve_bruteforce, solve_dp, AllocationProblem,
};
use mcdmac::analysis::write_analysis_csv;
use mcdmac::config::{ScenarioFile, SweepMode};
use mcdmac::exec::{self, Execution};
use mcdmac::simulator::sweep::{plot_script, run_rate_gain, run_sweep, write_csv, MetricsRow};
use mcdmac::simulator::{run, run_traced, write_trace, Strategy};
use mcdmac::Error;

#[derive(Debug, Parser)]
#[command(
    name = "mcdmac",
    version,
    about = "Multi-channel diversity MAC toolkit"
)]
struct Cli {
    /// Run batches on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an allocation instance file, or a batch of random instances.
    Solve(SolveArgs),
    /// Run one simulation and write its metrics row.
    Simulate(SimulateArgs),
    /// Evaluate the closed-form rate and throughput model.
    Analyze(CommonArgs),
    /// Run the [sweep] grid of a scenario file.
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance file.
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    instance: Option<PathBuf>,

    /// Cross-check against exhaustive search.
    #[arg(long)]
    oracle: bool,

    /// Solve this many random instances instead of a file.
    #[arg(long, value_name = "N")]
    random: Option<usize>,

    /// Seed for --random.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Override the scenario strategy.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,

    /// Also write a packet trace next to --out, as <out>.trace.csv.
    #[arg(long, requires = "out")]
    trace: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Solve(args) => solve(args, exec),
        Command::Simulate(args) => simulate(args),
        Command::Analyze(args) => analyze(args),
        Command::Sweep(args) => sweep(args, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure {
            code: 2,
            message: format!("cannot create {}: {e}", p.display()),
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(args: &CommonArgs) -> Result<ScenarioFile, Failure> {
    let mut file = ScenarioFile::load(&args.config).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Failure {
            code: 1,
            message: format!("{}:{line}:{column}: {message}", args.config.display()),
        },
        other => other.into(),
    })?;
    if let Some(seed) = args.seed {
        file.seed = seed;
        if let Some(s) = &mut file.sweep {
            s.seeds = vec![seed];
        }
    }
    Ok(file)
}

fn report(problem: &AllocationProblem, out: &mut dyn Write, oracle: bool) -> Result<(), Failure> {
    let a = solve_dp(problem);
    for (m, c) in a.choices.iter().enumerate() {
        match c {
            Some(q) => writeln!(
                out,
                "channel {}: rate {} b/s, power {} W",
                m + 1,
                problem.rate(m, *q),
                a.powers[m]
            )?,
            None => writeln!(out, "channel {}: unused", m + 1)?,
        }
    }
    writeln!(out, "total rate: {} b/s", a.total_rate)?;
    writeln!(out, "total power: {} W", a.total_power)?;
    if oracle {
        let bf = solve_bruteforce(problem)?;
        let agree = bf.total_rate == a.total_rate;
        writeln!(
            out,
            "oracle: {} b/s ({})",
            bf.total_rate,
            if agree { "agree" } else { "DISAGREE" }
        )?;
        if !agree {
            return Err(Failure {
                code: 2,
                message: "allocator and exhaustive search disagree".into(),
            });
        }
    }
    Ok(())
}

fn solve(args: SolveArgs, exec: Execution) -> Result<(), Failure> {
    let mut out = output(None)?;
    if let Some(n) = args.random {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let problems: Vec<AllocationProblem> =
            (0..n).map(|_| random_problem(&mut rng, 6, 4)).collect();
        let results = exec::map(exec, problems, |p| -> Result<(f64, Option<f64>), Error> {
            let dp = solve_dp(&p).total_rate;
            let bf = if args.oracle {
                Some(solve_bruteforce(&p)?.total_rate)
            } else {
                None
            };
            Ok((dp, bf))
        });
        let mut total = 0.0;
        let mut agree = 0;
        for r in results {
            let (dp, bf) = r?;
            total += dp;
            if bf == Some(dp) {
                agree += 1;
            }
        }
        writeln!(out, "instances: {n}")?;
        writeln!(
            out,
            "mean total rate: {} b/s",
            if n > 0 { total / n as f64 } else { 0.0 }
        )?;
        if args.oracle {
            writeln!(out, "agree: {agree}/{n}")?;
            out.flush()?;
            if agree != n {
                return Err(Failure {
                    code: 2,
                    message: format!("{} instances disagree", n - agree),
                });
            }
        }
        out.flush()?;
        return Ok(());
    }
    let path = args
        .instance
        .expect("clap requires an instance without --random");
    let text = std::fs::read_to_string(&path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let problem = parse_problem(&text).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Failure {
            code: 1,
            message: format!("{}:{line}:{column}: {message}", path.display()),
        },
        other => other.into(),
    })?;
    report(&problem, &mut *out, args.oracle)?;
    out.flush()?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut file = load(&args.common)?;
    if let Some(s) = args.strategy {
        file.simulation.strategy = s;
    }
    let cfg = file.scenario()?;
    let id = args.common.config.file_stem().map_or_else(
        || "scenario".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let metrics = if args.trace {
        let out = args
            .common
            .out
            .as_ref()
            .expect("clap requires --out with --trace");
        let (metrics, trace) = run_traced(&cfg)?;
        let trace_path = out.with_extension("trace.csv");
        write_trace(&trace, output(Some(&trace_path))?)?;
        metrics
    } else {
        run(&cfg)?
    };
    let row = MetricsRow::new(&id, &cfg, &metrics);
    write_csv(&[row], output(args.common.out.as_deref())?)?;
    Ok(())
}

fn analyze(args: CommonArgs) -> Result<(), Failure> {
    let file = load(&args)?;
    let scenario = file.analysis()?;
    write_analysis_csv(&scenario, output(args.out.as_deref())?)?;
    Ok(())
}

fn sweep(args: CommonArgs, exec: Execution) -> Result<(), Failure> {
    let file = load(&args)?;
    let mode = file.sweep.as_ref().map(|s| s.mode).unwrap_or_default();
    let out = output(args.out.as_deref())?;
    let x_axis = match mode {
        SweepMode::Simulate => {
            let rows = run_sweep(&file, exec)?;
            write_csv(&rows, out)?;
            file.sweep
                .as_ref()
                .and_then(|s| s.axis.first())
                .map_or("", |a| a.name.key())
                .to_string()
        }
        SweepMode::RateGain => {
            write_csv(&run_rate_gain(&file, exec)?, out)?;
            "distance_m".to_string()
        }
    };
    if let Some(path) = &args.out {
        let script = plot_script(&path.to_string_lossy(), mode, &x_axis);
        let mut f = output(Some(&path.with_extension("plot.py")))?;
        f.write_all(script.as_bytes())?;
        f.flush()?;
    }
    Ok(())
}
