//! `modop` — command-line front end for the Hilbert C*-module operator
//! laboratory.
//!
//! Exit codes: 0 all checks passed, 1 at least one property failed,
//! 2 input or configuration error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modop_core::decomposition;
use modop_core::harness::gen::{gen_kaplansky_instance, sample_shape, DimPolicy, KaplanskyBranch};
use modop_core::harness::{run_suite, SuiteConfig, SuiteKind};
use modop_core::module_space::OperatorMatrix;
use modop_core::normality;
use modop_core::regular::{self, RegularOp};
use modop_core::report::Verdict;
use modop_core::rng::{derive_seed, SplitMix64};
use modop_core::tol::Tolerances;

#[derive(Parser)]
#[command(
    name = "modop",
    about = "Numerical laboratory for adjointable operators on finite-dimensional Hilbert C*-modules",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the randomized property suites and emit a JSON report.
    Verify(VerifyArgs),
    /// Polar-decompose the operator in FILE and audit the decomposition.
    Polar {
        file: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Report the normality verdict and residual for the operator in FILE.
    NormalCheck {
        file: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Search for a product-normality asymmetry witness: TS normal, ST not.
    KaplanskySearch {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        attempts: u64,
        #[arg(long, default_value_t = 3)]
        max_block: usize,
        #[arg(long, default_value_t = 4)]
        max_rank: usize,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Compute the bounded transform of the operator in FILE (or invert a
    /// stored transform back to the operator).
    Transform {
        file: PathBuf,
        /// Read a bounded-transform JSON and recover the operator.
        #[arg(long)]
        invert: bool,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run (repeatable); "all" or omit for every suite.
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long = "max-block", default_value_t = 3)]
    max_block: usize,
    #[arg(long = "max-rank", default_value_t = 4)]
    max_rank: usize,
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn tolerances(tol: Option<f64>) -> Result<Tolerances, String> {
    match tol {
        Some(t) if t > 0.0 => Ok(Tolerances::with_base(t)),
        Some(t) => Err(format!("tolerance must be positive, got {t}")),
        None => Ok(Tolerances::default()),
    }
}

fn read_operator(path: &PathBuf) -> Result<OperatorMatrix, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Verify(args) => verify(args),
        Command::Polar { file, tol } => {
            let t = read_operator(&file)?;
            let tols = tolerances(tol)?;
            let parts = decomposition::polar(&t);
            let report = decomposition::check_polar_conditions_with(&t, &parts, &tols);
            let pass = report.pass;
            let out = serde_json::json!({
                "isometry": parts.isometry,
                "modulus": parts.modulus,
                "report": report,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("serializable")
            );
            Ok(exit_for(pass))
        }
        Command::NormalCheck { file, tol } => {
            let t = read_operator(&file)?;
            let tols = tolerances(tol)?;
            let verdict = normality::is_normal(&t, tols.property);
            let normal = verdict.normal;
            println!(
                "{}",
                serde_json::to_string_pretty(&verdict).expect("serializable")
            );
            Ok(exit_for(normal))
        }
        Command::KaplanskySearch {
            seed,
            attempts,
            max_block,
            max_rank,
            tol,
        } => kaplansky_search(seed, attempts, max_block, max_rank, tol),
        Command::Transform { file, invert } => {
            let text = fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            if invert {
                let r: RegularOp =
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                match regular::inverse_transform(&r) {
                    Ok(t) => {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&t).expect("serializable")
                        );
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(err) => {
                        eprintln!("inversion failed: {err}");
                        Ok(ExitCode::from(1))
                    }
                }
            } else {
                let t: OperatorMatrix =
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                let r = regular::bounded_transform(&t);
                println!(
                    "{}",
                    serde_json::to_string_pretty(&r).expect("serializable")
                );
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

fn exit_for(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_suites(names: &[String]) -> Result<Vec<SuiteKind>, String> {
    if names.is_empty() || names.iter().any(|n| n == "all") {
        return Ok(SuiteKind::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| n.parse::<SuiteKind>().map_err(|e| e.to_string()))
        .collect()
}

fn verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let config = SuiteConfig {
        trials: args.trials,
        seed: args.seed,
        max_block_dim: args.max_block,
        max_rank: args.max_rank,
        max_blocks: 3,
        tol_override: args.tol,
        suites: parse_suites(&args.suites)?,
    };
    let report = run_suite(&config).map_err(|e| e.to_string())?;
    let all_passed = report.all_passed();

    let json = serde_json::to_string_pretty(&report).expect("serializable");
    match &args.out {
        Some(path) => {
            fs::write(path, &json).map_err(|e| format!("{}: {e}", path.display()))?;
            for suite in &report.suites {
                println!(
                    "{}: {} trials, {} pass, {} fail, {} indeterminate, {} precondition failures{}",
                    suite.name,
                    suite.trials,
                    suite.pass,
                    suite.fail,
                    suite.indeterminate,
                    suite.precondition_failures,
                    if suite.generator_starvation {
                        " [generator starvation]"
                    } else {
                        ""
                    }
                );
            }
            println!(
                "report written to {} ({} ms)",
                path.display(),
                report.wallclock_ms
            );
        }
        None => println!("{json}"),
    }
    Ok(exit_for(all_passed))
}

fn kaplansky_search(
    seed: u64,
    attempts: u64,
    max_block: usize,
    max_rank: usize,
    tol: Option<f64>,
) -> Result<ExitCode, String> {
    let tols = tolerances(tol)?;
    let policy = DimPolicy {
        max_rank,
        max_block_dim: max_block,
        max_blocks: 3,
    };
    for attempt in 0..attempts {
        let attempt_seed = derive_seed(seed, 0xCA9A, attempt);
        let mut rng = SplitMix64::new(attempt_seed);
        let (shape, k) = sample_shape(&policy, &mut rng);
        let (t, s) = gen_kaplansky_instance(&shape, k, KaplanskyBranch::Generic, rng.next_u64());
        let report = match normality::kaplansky_check(&t, &s, &tols) {
            Ok(r) => r,
            Err(_) => continue,
        };
        if report.st_normal == Verdict::Fails
            && report.commutes_with_modulus == Verdict::Fails
            && report.pass
        {
            let out = serde_json::json!({
                "attempts_used": attempt + 1,
                "seed": attempt_seed,
                "t": t,
                "s": s,
                "report": report,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("serializable")
            );
            return Ok(ExitCode::SUCCESS);
        }
    }
    eprintln!("no witness found in {attempts} attempts");
    Ok(ExitCode::from(1))
}
