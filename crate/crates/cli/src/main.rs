//! `bandit-lab`: run bandit experiments, build Gittins tables, validate
//! deviation bounds and print lower-bound curves.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure
//! (including failed bound validation), 4 i/o error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bandit_core::bounds::{
    self, lai_robbins_curve, LowerBoundCurve,
};
use bandit_core::exp_family::BanditInstance;
use bandit_core::gittins::{build_gittins_table, BetaState};
use bandit_core::harness::{
    self, emit_csv, emit_json, family_by_name, ConfigFile, OutputFormat,
};
use bandit_core::policies::{PolicyConfig, PolicyKind};
use bandit_core::Error;

#[derive(Parser)]
#[command(name = "bandit-lab", version, about = "Multi-armed bandit experiment lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the horizon T.
        #[arg(long)]
        horizon: Option<u64>,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<u64>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace the config's policies (repeatable, kind names).
        #[arg(long)]
        policy: Vec<String>,
        /// Override the arm means (comma-separated, fixed-instance mode).
        #[arg(long)]
        arms: Option<String>,
        /// Override the reward family.
        #[arg(long)]
        family: Option<String>,
        /// Gaussian variance when the family needs one.
        #[arg(long)]
        sigma2: Option<f64>,
        /// Write output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Fixed worker count (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Precompute a finite-horizon Gittins index table and write it as CSV.
    GittinsTable {
        #[arg(long)]
        horizon: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Run a bound-validation suite and print one JSON report per check.
    CheckBounds {
        /// chernoff | self-normalized | maximal | pinsker | envelope | all
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 20260810)]
        seed: u64,
        /// Monte Carlo paths/pairs per check.
        #[arg(long, default_value_t = 100_000)]
        runs: usize,
    },
    /// Print the Lai-Robbins lower-bound constant and curve for an instance.
    LowerBound {
        #[arg(long)]
        family: String,
        /// Comma-separated arm means.
        #[arg(long)]
        arms: String,
        #[arg(long)]
        sigma2: Option<f64>,
    },
}

fn parse_means(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad arm mean '{s}'")))
        })
        .collect()
}

fn run_command(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            horizon,
            reps,
            seed,
            policy,
            arms,
            family,
            sigma2,
            out,
            format,
            workers,
        } => {
            let mut file = ConfigFile::load(&config)?;
            if let Some(h) = horizon {
                file.horizon = h;
            }
            if let Some(n) = reps {
                file.replications = n;
            }
            if let Some(s) = seed {
                file.seed = s;
            }
            if let Some(f) = family {
                file.family = f;
            }
            if let Some(s2) = sigma2 {
                file.sigma2 = Some(s2);
            }
            if let Some(a) = arms {
                file.arms = Some(parse_means(&a)?);
            }
            if !policy.is_empty() {
                file.policies = policy
                    .iter()
                    .map(|name| Ok(PolicyConfig::new(PolicyKind::from_name(name)?)))
                    .collect::<Result<_, Error>>()?;
            }
            if let Some(w) = workers {
                file.workers = Some(w);
            }
            if let Some(o) = out {
                file.out = Some(o);
            }
            let resolved_format = match format {
                Some(FormatArg::Csv) => Some(OutputFormat::Csv),
                Some(FormatArg::Json) => Some(OutputFormat::Json),
                None => file.format,
            };

            let experiment = file.resolve()?;
            let result = harness::run(&experiment)?;
            let fmt = resolved_format.unwrap_or(OutputFormat::Csv);
            match &file.out {
                Some(path) => harness::write_output(&result, path, fmt)?,
                None => match fmt {
                    OutputFormat::Csv => print!("{}", emit_csv(&result)),
                    OutputFormat::Json => println!("{}", emit_json(&result)?),
                },
            }
            Ok(())
        }
        Command::GittinsTable {
            horizon,
            out,
            alpha,
            beta,
        } => {
            let table = build_gittins_table(BetaState::new(alpha, beta)?, horizon)?;
            table.write_csv(&out)?;
            eprintln!(
                "wrote {} gittins indices (horizon {horizon}, prior Beta({alpha}, {beta})) to {}",
                table.len(),
                out.display()
            );
            Ok(())
        }
        Command::CheckBounds { suite, seed, runs } => {
            let mut all_pass = true;
            let mut emit = |line: serde_json::Value, pass: bool| {
                println!("{line}");
                all_pass &= pass;
            };
            let want = |name: &str| suite == name || suite == "all";
            let mut known = false;
            if want("chernoff") {
                known = true;
                for r in bounds::chernoff_suite(runs, seed)? {
                    let pass = r.pass;
                    emit(serde_json::to_value(&r).expect("serializable"), pass);
                }
            }
            if want("self-normalized") {
                known = true;
                for r in bounds::self_normalized_suite(runs, seed)? {
                    let pass = r.pass;
                    emit(serde_json::to_value(&r).expect("serializable"), pass);
                }
            }
            if want("maximal") {
                known = true;
                for r in bounds::maximal_suite(runs, seed)? {
                    let pass = r.pass;
                    emit(serde_json::to_value(&r).expect("serializable"), pass);
                }
            }
            if want("pinsker") {
                known = true;
                for (family, r) in bounds::pinsker_suite(runs, seed)? {
                    let pass = r.violations == 0;
                    emit(
                        serde_json::json!({
                            "bound": "pinsker",
                            "params": {"family": family, "pairs": r.n_pairs},
                            "c1": r.c1,
                            "c2": r.c2,
                            "violations": r.violations,
                            "pass": pass,
                        }),
                        pass,
                    );
                }
            }
            if want("envelope") {
                known = true;
                for (label, r) in bounds::envelope_suite()? {
                    let pass = r.pass();
                    emit(
                        serde_json::json!({
                            "bound": "posterior-tail-envelope",
                            "params": {"config": label},
                            "report": r,
                            "pass": pass,
                        }),
                        pass,
                    );
                }
            }
            if !known {
                return Err(Error::Config(format!(
                    "unknown suite '{suite}' (chernoff, self-normalized, maximal, pinsker, envelope, all)"
                )));
            }
            if all_pass {
                Ok(())
            } else {
                Err(Error::Numeric("one or more bound checks failed".into()))
            }
        }
        Command::LowerBound {
            family,
            arms,
            sigma2,
        } => {
            let model = family_by_name(&family, sigma2)?;
            let means = parse_means(&arms)?;
            let instance = BanditInstance::new(model, means.clone())?;
            let LowerBoundCurve { constant } = lai_robbins_curve(&instance)?;
            let ts = [100u64, 1000, 10_000, 100_000];
            println!(
                "{}",
                serde_json::json!({
                    "family": family,
                    "arms": means,
                    "constant": constant,
                    "curve": ts
                        .iter()
                        .map(|&t| serde_json::json!({"t": t, "value": constant * (t as f64).ln()}))
                        .collect::<Vec<_>>(),
                })
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) => ExitCode::from(2),
                Error::Numeric(_) => ExitCode::from(3),
                Error::Io { .. } => ExitCode::from(4),
            }
        }
    }
}
