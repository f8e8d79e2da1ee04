//! `modscat` — batch front door for the long-time NLS laboratory.
//!
//! Subcommands: `simulate` (run and persist an experiment), `oracle`
//! (direct-vs-stationary-phase comparison table), `expand` (coefficient
//! extraction from a persisted run), `verify` (acceptance suites).
//!
//! Exit codes: 0 success, 1 criterion failure, 2 config error, 3 runtime
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
usage:
  modscat simulate --config FILE [--out DIR] [--gnuplot-script] [--check]
  modscat oracle   --config FILE [--out DIR] [--gnuplot-script] [--check]
  modscat expand   --run DIR [--config FILE] [--gnuplot-script]
  modscat verify   [--suite NAME] [--threads N]

suites: free, conservation, decay, phase, oracle, coefficients, remainder,
        quintic, restart, all (default)

environment:
  MODSCAT_RUN_ROOT   root for run directories when --out is absent
";

struct Args {
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    run: Option<PathBuf>,
    suite: String,
    threads: usize,
    gnuplot: bool,
    check: bool,
}

fn parse_flags(args: &[String]) -> Result<Args, String> {
    let mut parsed = Args {
        config: None,
        out: None,
        run: None,
        suite: "all".to_string(),
        threads: std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
        gnuplot: false,
        check: false,
    };
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{name} needs a value"))
        };
        match flag.as_str() {
            "--config" => parsed.config = Some(PathBuf::from(value("--config")?)),
            "--out" => parsed.out = Some(PathBuf::from(value("--out")?)),
            "--run" => parsed.run = Some(PathBuf::from(value("--run")?)),
            "--suite" => parsed.suite = value("--suite")?,
            "--threads" => {
                parsed.threads = value("--threads")?
                    .parse()
                    .map_err(|_| "--threads needs an integer".to_string())?
            }
            "--gnuplot-script" => parsed.gnuplot = true,
            "--check" => parsed.check = true,
            other => return Err(format!("unknown flag {other:?}")),
        }
    }
    Ok(parsed)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some((subcommand, rest)) = argv.split_first() else {
        eprint!("{USAGE}");
        return ExitCode::from(2);
    };
    let args = match parse_flags(rest) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };

    match subcommand.as_str() {
        "simulate" | "oracle" => {
            let Some(config) = args.config.as_deref() else {
                eprintln!("error: --config is required");
                return ExitCode::from(2);
            };
            if args.check {
                let outcome = if subcommand == "simulate" {
                    commands::check_experiment(config)
                } else {
                    commands::check_oracle(config)
                };
                return match outcome {
                    Ok(()) => {
                        println!("ok");
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        ExitCode::from(2)
                    }
                };
            }
            let result = if subcommand == "simulate" {
                commands::simulate(config, args.out.as_deref(), args.gnuplot)
            } else {
                commands::oracle(config, args.out.as_deref(), args.gnuplot)
            };
            match result {
                Ok(dir) => {
                    println!("{}", dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    // Config problems (including validation) are exit 2,
                    // anything at run time is 3.
                    if e.is::<config::ConfigError>() {
                        ExitCode::from(2)
                    } else {
                        ExitCode::from(3)
                    }
                }
            }
        }
        "expand" => {
            let Some(run) = args.run.as_deref() else {
                eprintln!("error: --run is required");
                return ExitCode::from(2);
            };
            // Fit windows can be overridden by the experiment config file.
            let window = match args.config.as_deref() {
                Some(path) => match config::load(path).and_then(|t| config::parse_experiment(&t)) {
                    Ok(cfg) => Some((cfg.fit_t_min, cfg.fit_t_max)),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                },
                None => None,
            };
            match commands::expand(run, window, args.gnuplot) {
                Ok(dir) => {
                    println!("{}", dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        "verify" => match commands::verify(&args.suite, args.threads) {
            Some((all_passed, lines)) => {
                for line in lines {
                    println!("{line}");
                }
                if all_passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            None => {
                eprintln!(
                    "error: unknown suite {:?} (available: {})",
                    args.suite,
                    modscat_core::acceptance::SUITES
                        .iter()
                        .map(|(s, _)| *s)
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                ExitCode::from(2)
            }
        },
        other => {
            eprintln!("error: unknown subcommand {other:?}");
            eprint!("{USAGE}");
            ExitCode::from(2)
        }
    }
}
