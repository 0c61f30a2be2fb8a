use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use navier_harness::config::ExperimentConfig;
use navier_harness::error::HarnessError;
use navier_harness::runner::{self, Outcome};

#[derive(Parser)]
#[command(
    name = "navier",
    version,
    about = "Frequency-averaged elastic wave experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for the frequency sweep (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Exit with status 4 when the command's acceptance check fails.
    #[arg(long = "assert", global = true)]
    assert_: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One realization over the frequency grid; writes fields and the comparison.
    Simulate(RunArgs),
    /// Averaged data against the forward map at Q, Q/2, Q/4 (and the seed ensemble).
    VerifyTheorem1(RunArgs),
    /// Ratio of the averaged single-scattering term to the averaged incident term.
    U1Diagnostic(RunArgs),
    /// Reconstructs phi from one realization's averaged data.
    Recover(RunArgs),
    /// H_n^(1)(t) and its truncated large-argument expansion as CSV.
    SpecfunTable {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        t: f64,
        /// Terms kept in the expansion.
        #[arg(long, default_value_t = 0)]
        terms: usize,
    },
    /// Fitted covariance exponent from Monte Carlo realizations.
    CovarianceCheck {
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::standard(),
    };
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.run.output.clone());
    Ok((cfg, out))
}

fn report(o: Outcome, assert: bool) -> Result<(), HarnessError> {
    let o = o.into_result(assert)?;
    let tag = match o.passed {
        Some(true) => "pass: ",
        Some(false) => "FAIL: ",
        None => "",
    };
    println!("{tag}{}", o.summary);
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("--threads {t}: {e}")))?;
    }
    let assert = cli.assert_;
    match cli.command {
        Command::Simulate(a) => {
            let (cfg, out) = load(&a)?;
            report(runner::simulate(&cfg, &out)?, assert)
        }
        Command::VerifyTheorem1(a) => {
            let (cfg, out) = load(&a)?;
            report(runner::verify_theorem1_cmd(&cfg, &out)?, assert)
        }
        Command::U1Diagnostic(a) => {
            let (cfg, out) = load(&a)?;
            report(runner::u1_diagnostic_cmd(&cfg, &out)?, assert)
        }
        Command::Recover(a) => {
            let (cfg, out) = load(&a)?;
            report(runner::recover_cmd(&cfg, &out)?, assert)
        }
        Command::SpecfunTable { n, t, terms } => {
            print!("{}", runner::specfun_table(n, t, terms)?);
            Ok(())
        }
        Command::CovarianceCheck {
            m,
            samples,
            seed,
            out,
        } => {
            let o = runner::covariance_check_cmd(m, samples, seed, out.as_deref())?;
            report(o, assert)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subcommands_and_global_flags() {
        let cli = Cli::try_parse_from([
            "navier",
            "specfun-table",
            "--n",
            "0",
            "--t",
            "1.0",
            "--assert",
        ])
        .unwrap();
        assert!(cli.assert_);
        assert!(matches!(cli.command, Command::SpecfunTable { n: 0, .. }));
        let cli =
            Cli::try_parse_from(["navier", "--threads", "2", "recover", "--seed", "7"]).unwrap();
        assert_eq!(cli.threads, Some(2));
        assert!(matches!(
            cli.command,
            Command::Recover(RunArgs { seed: Some(7), .. })
        ));
    }

    #[test]
    fn unknown_flags_exit_with_two() {
        let e = Cli::try_parse_from(["navier", "simulate", "--bogus"])
            .err()
            .unwrap();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn bad_order_in_config_exits_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let text = ExperimentConfig::standard()
            .to_toml()
            .replace("m = 2.25", "m = 2.7");
        std::fs::write(&path, text).unwrap();
        let args = RunArgs {
            config: Some(path),
            seed: None,
            out: None,
        };
        let e = load(&args).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("[2, 5/2)"), "{e}");
    }
}
