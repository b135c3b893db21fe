//! Command-line front end: generate instances, solve them, run benchmark
//! protocols, and validate solution files.
//!
//! Exit codes: 0 success, 1 usage or input errors, 2 infeasible problems,
//! exceeded limits, or failed validation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mrtapf::bench::{run_bench, write_csv, BenchConfig};
use mrtapf::dist::build_cost_matrix;
use mrtapf::grid::{generate_instance, Instance};
use mrtapf::sa::SaParams;
use mrtapf::solver::{solve_instance, SolutionFile, SolveParams, DEFAULT_NODE_LIMIT};
use mrtapf::validate::validate;
use mrtapf::Error;

#[derive(Parser)]
#[command(name = "mrtapf", version, about = "Multi-robot task assignment and path finding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random map and scenario pair.
    Gen {
        #[arg(long)]
        width: u16,
        #[arg(long)]
        height: u16,
        /// Fraction of cells to block, in [0, 1].
        #[arg(long)]
        obstacles: f64,
        #[arg(long)]
        robots: usize,
        #[arg(long)]
        goals: usize,
        #[arg(long)]
        seed: u64,
        /// Output prefix; writes <prefix>.map and <prefix>.scen.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one scenario and write the solution JSON.
    Solve {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        /// Initial annealing temperature.
        #[arg(long, default_value_t = 0.1)]
        t_initial: f64,
        /// Annealing iterations.
        #[arg(long, default_value_t = 20_000)]
        max_iter: u32,
        /// Annealer seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cap on CBS tree nodes per round.
        #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
        node_limit: usize,
        /// Wall-clock budget in seconds (unlimited when absent).
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the assignment cost matrix as CSV.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
        /// Zero the timing fields so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run a benchmark protocol from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory: results.csv plus solutions/*.json.
        #[arg(long)]
        out: PathBuf,
        /// Zero the timing fields so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Check a solution file against its map and scenario.
    Validate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
}

fn main() -> ExitCode {
    mrtapf::init_threads_from_env();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 for bad input, 2 for infeasibility or exhausted limits.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::MapFormat(_)
        | Error::RowWidthMismatch { .. }
        | Error::InvalidInstance(_)
        | Error::BadCell(_)
        | Error::MalformedSolution(_)
        | Error::OracleLimits(_)
        | Error::Json(_)
        | Error::Io(_) => 1,
        Error::InsufficientFreeCells { .. }
        | Error::RetryBudgetExhausted { .. }
        | Error::UnreachableGoal { .. }
        | Error::UnreachableInsertion { .. }
        | Error::CbsLimitExceeded { .. }
        | Error::CbsExhausted
        | Error::LowLevelExhausted { .. }
        | Error::TimeLimit { .. }
        | Error::RoundBudgetExceeded { .. }
        | Error::ValidationFailed(_) => 2,
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Gen { width, height, obstacles, robots, goals, seed, out } => {
            let instance = generate_instance(width, height, obstacles, robots, goals, seed)?;
            let map_path = with_suffix(&out, ".map");
            let scen_path = with_suffix(&out, ".scen");
            std::fs::write(&map_path, instance.map.render())?;
            let scen = instance.scenario(&map_path.display().to_string());
            std::fs::write(&scen_path, serde_json::to_string_pretty(&scen)?)?;
            println!("wrote {} and {}", map_path.display(), scen_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            map,
            scen,
            t_initial,
            max_iter,
            seed,
            node_limit,
            time_limit,
            out,
            dump_matrix,
            no_timing,
        } => {
            let instance = Instance::from_files(&map, &scen)?;
            if let Some(matrix_path) = dump_matrix {
                let matrix = build_cost_matrix(&instance)?;
                let mut buf = Vec::new();
                matrix.write_csv(&mut buf)?;
                std::fs::write(matrix_path, buf)?;
            }
            let params = SolveParams {
                sa: SaParams {
                    t_initial,
                    max_iter,
                    seed: seed.unwrap_or(instance.seed),
                },
                node_limit,
                time_limit,
            };
            let output = solve_instance(&instance, &params)?;
            let file = SolutionFile::from_output(&output, !no_timing);
            std::fs::write(&out, file.to_json()?)?;
            println!(
                "solved: flowtime {} makespan {} rounds {} assignment cost {} ({:.3}s + {:.3}s)",
                file.flowtime,
                file.makespan,
                file.rounds,
                file.assignment.cost,
                output.sa_seconds,
                output.recbs_seconds,
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { config, out, no_timing } => {
            let text = std::fs::read_to_string(&config)?;
            let config: BenchConfig = serde_json::from_str(&text)?;
            std::fs::create_dir_all(&out)?;
            let report = run_bench(&config, Some(&out.join("solutions")), !no_timing)?;
            let mut buf = Vec::new();
            write_csv(&report, &mut buf)?;
            std::fs::write(out.join("results.csv"), buf)?;
            for cell in &report.summary {
                println!(
                    "n={:<3} m={:<3} solved {}/{} ({:.0}%)",
                    cell.robots,
                    cell.goals,
                    cell.solved,
                    cell.instances,
                    cell.success_rate * 100.0
                );
            }
            println!("wrote {}", out.join("results.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { map, scen, solution } => {
            let instance = Instance::from_files(&map, &scen)?;
            let file = SolutionFile::from_file(&solution)?;
            let (sol, plan) = file.to_parts();
            let report = validate(&instance, &sol, &plan)?;
            println!("{report}");
            if report.ok() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}
