//! Command-line harness around the gallery and the solver.
//!
//! `nsqp list` prints the registered examples, `nsqp run NAME` solves one
//! and writes its iterate log and summary, and `nsqp check [NAME]`
//! verifies feasible points and gradients. Options come from a flat
//! `key = value` file (`--config PATH`) and from flags, which win.

mod config;
mod output;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gallery::{self, Example, ExampleConfig};
use crate::problem::{gradient_check, PackedPoint};
use crate::solver::{solve, SolverError, Termination};

pub use config::{
    config_text, flag_key, parse_config_text, ConfigError, Format, RunConfig, StartPoint,
    SOLVER_KEYS,
};
pub use output::{
    format_float, write_log, write_summary, write_summary_table, LOG_FIELDS, SUMMARY_FIELDS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Points per example in the gradient spot check.
pub const CHECK_POINTS: usize = 10;
/// Central-difference step of the gradient spot check.
pub const CHECK_STEP: f64 = 1e-6;
/// Largest accepted gradient error, relative per row.
pub const CHECK_GRADIENT_TOL: f64 = 1e-5;
/// Largest accepted violation or tape-versus-loop mismatch at a known
/// feasible point.
pub const CHECK_FEASIBLE_TOL: f64 = 1e-10;

const USAGE: &str = "usage: nsqp list
       nsqp run NAME [--config PATH] [--seed INT] [--max-iter INT] [--opt-tol FLOAT]
                     [--format json-lines|csv] [--out PATH] [--summary PATH] [--KEY VALUE ...]
       nsqp check [NAME] [--config PATH] [--KEY VALUE ...]";

pub fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => EXIT_OK,
        Termination::MaxIter
        | Termination::LineSearchFailed
        | Termination::StationaryInfeasible => EXIT_NOT_CONVERGED,
        Termination::NumericalError => EXIT_NUMERICAL,
    }
}

/// Entry point of the `nsqp` binary; returns the process exit code.
pub fn main(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match args.first().map(String::as_str) {
        Some("list") => cmd_list(gallery::REGISTRY, stdout),
        Some("run") => match run_config(&args[1..]) {
            Ok(cfg) => match gallery::build(&cfg.example) {
                Ok(ex) => cmd_run(&cfg, ex.as_ref(), stdout, stderr),
                Err(e) => config_failure(stderr, &ConfigError::from(e)),
            },
            Err(e) => config_failure(stderr, &e),
        },
        Some("check") => cmd_check(&args[1..], stdout, stderr),
        Some("-h" | "--help" | "help") => {
            let _ = writeln!(stdout, "{USAGE}");
            EXIT_OK
        }
        Some(other) => {
            let _ = writeln!(stderr, "error: unknown command `{other}`\n{USAGE}");
            EXIT_CONFIG
        }
        None => {
            let _ = writeln!(stderr, "{USAGE}");
            EXIT_CONFIG
        }
    }
}

fn config_failure(stderr: &mut dyn Write, e: &ConfigError) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    EXIT_CONFIG
}

/// Prints `name  description` for each registered example.
pub fn cmd_list(registry: &[(&str, &str)], out: &mut dyn Write) -> i32 {
    let width = registry.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, description) in registry {
        let _ = writeln!(out, "{name:<width$}  {description}");
    }
    EXIT_OK
}

/// Positional example name, `--config` path and flag pairs of a command
/// line.
struct Args {
    example: Option<String>,
    config: Option<String>,
    flags: Vec<(String, String)>,
}

fn split_args(args: &[String]) -> Result<Args, ConfigError> {
    let mut parsed = Args {
        example: None,
        config: None,
        flags: vec![],
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            if parsed.example.replace(arg.clone()).is_some() {
                return Err(ConfigError::general(format!("unexpected argument `{arg}`")));
            }
            continue;
        };
        let (name, value) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| {
                    ConfigError::at(flag, format!("flag `--{flag}` needs a value"))
                })?;
                (flag.to_string(), v.clone())
            }
        };
        if name == "config" {
            parsed.config = Some(value);
        } else {
            parsed.flags.push((name, value));
        }
    }
    Ok(parsed)
}

/// Merges the config file and the flags into key-value entries; flags win
/// and a positional example name wins over the file.
fn merged_entries(args: &Args) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut entries = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::at("config", format!("{path}: {e}")))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    if let Some(name) = &args.example {
        entries.insert("example".to_string(), name.clone());
    }
    let example = entries
        .get("example")
        .and_then(|n| ExampleConfig::default_for(n).ok());
    for (flag, value) in &args.flags {
        let key = flag_key(flag, example.as_ref())
            .ok_or_else(|| ConfigError::at(flag, format!("unknown flag `--{flag}`")))?;
        entries.insert(key, value.clone());
    }
    Ok(entries)
}

/// Parses the arguments of `run` into a validated configuration.
pub fn run_config(args: &[String]) -> Result<RunConfig, ConfigError> {
    RunConfig::from_entries(&merged_entries(&split_args(args)?)?)
}

fn create(path: &std::path::Path) -> io::Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new)
}

/// Solves `ex` under `cfg`, writes the iterate log to `cfg.out` (or
/// `stdout`), the summary record to [`RunConfig::summary_path`] and a
/// summary table to `stderr`.
pub fn cmd_run(
    cfg: &RunConfig,
    ex: &dyn Example,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let opts = match cfg.solver_options(ex.feasible_point()) {
        Ok(o) => o,
        Err(e) => return config_failure(stderr, &e),
    };
    let sol = match solve(ex.problem(), &opts) {
        Ok(s) => s,
        Err(SolverError::InvalidOption { key, reason }) => {
            return config_failure(stderr, &ConfigError::at(&format!("solver.{key}"), reason))
        }
        Err(SolverError::Problem(e)) if e.is_numerical() => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_NUMERICAL;
        }
        Err(SolverError::Problem(e)) => {
            return config_failure(stderr, &ConfigError::general(e.to_string()))
        }
    };
    let name = cfg.example.name();
    let written = (|| -> io::Result<()> {
        match &cfg.out {
            Some(path) => {
                let mut w = create(path)?;
                write_log(&mut w, cfg.format, &sol.log)?;
                w.flush()?;
            }
            None => write_log(stdout, cfg.format, &sol.log)?,
        }
        if let Some(path) = cfg.summary_path() {
            let mut w = create(&path)?;
            write_summary(&mut w, cfg.format, name, cfg.seed, &sol)?;
            w.flush()?;
        }
        Ok(())
    })();
    if let Err(e) = written {
        return config_failure(stderr, &ConfigError::at("out", e.to_string()));
    }
    let _ = write_summary_table(stderr, name, cfg.seed, &sol);
    exit_code(sol.termination)
}

/// Checks one example: its known feasible point has no violation and
/// matches the loop reference, and autodiff gradients agree with central
/// differences at [`CHECK_POINTS`] random points. Returns the failures.
pub fn check_example(ex: &dyn Example, seed: u64) -> Vec<String> {
    let mut failures = vec![];
    let p = ex.problem();
    if let Some(x) = ex.feasible_point() {
        match p.evaluate(&x) {
            Ok(rec) => {
                let viol = rec.max_ineq_violation().max(rec.max_eq_violation());
                if viol > CHECK_FEASIBLE_TOL {
                    failures.push(format!("feasible point violates constraints by {viol:.3e}"));
                }
                let r = ex.reference(&x);
                let mismatch = std::iter::once((rec.f, r.f))
                    .chain(rec.ci.iter().copied().zip(r.ci.iter().copied()))
                    .chain(rec.ce.iter().copied().zip(r.ce.iter().copied()))
                    .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
                    .fold(0.0, f64::max);
                if mismatch > CHECK_FEASIBLE_TOL
                    || rec.ci.len() != r.ci.len()
                    || rec.ce.len() != r.ce.len()
                {
                    failures.push(format!(
                        "tape and reference disagree at the feasible point by {mismatch:.3e}"
                    ));
                }
            }
            Err(e) => failures.push(format!("feasible point evaluation failed: {e}")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..CHECK_POINTS {
        let x = PackedPoint((0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect());
        match gradient_check(p, &x, CHECK_STEP) {
            Ok(err) if err <= CHECK_GRADIENT_TOL => {}
            Ok(err) => failures.push(format!("gradient check at point {i}: error {err:.3e}")),
            Err(e) => failures.push(format!("gradient check at point {i}: {e}")),
        }
    }
    failures
}

/// Checks the named example, or every registered example with default
/// settings when none is named. Exits 1 listing any failure.
pub fn cmd_check(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let configs: Result<Vec<RunConfig>, ConfigError> = split_args(args).and_then(|a| {
        let entries = merged_entries(&a)?;
        if entries.contains_key("example") {
            Ok(vec![RunConfig::from_entries(&entries)?])
        } else if entries.is_empty() {
            gallery::REGISTRY
                .iter()
                .map(|(name, _)| Ok(RunConfig::new(ExampleConfig::default_for(name)?)))
                .collect()
        } else {
            Err(ConfigError::at("example", "options need a named example"))
        }
    });
    let configs = match configs {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "check failed: {e}");
            return EXIT_CHECK_FAILED;
        }
    };
    let mut failed = false;
    for cfg in &configs {
        let name = cfg.example.name();
        let failures = match gallery::build(&cfg.example) {
            Ok(ex) => check_example(ex.as_ref(), cfg.seed),
            Err(e) => vec![ConfigError::from(e).to_string()],
        };
        if failures.is_empty() {
            let _ = writeln!(stdout, "{name}: ok");
        } else {
            failed = true;
            for f in failures {
                let _ = writeln!(stderr, "{name}: {f}");
            }
        }
    }
    if failed {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}
