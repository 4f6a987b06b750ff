//! Command-line interface: `run`, `sweep`, `study`, and `selftest`.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for runtime
//! failures, 4 when the verification suite finds a failing property.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, RunConfig};
use crate::diagnostics::{self, RunSummary};
use crate::selftest::run_selftest;
use crate::snapshot::{read_snapshot, write_snapshot};
use crate::solver::{continuation_run, SolverError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_SELFTEST: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "porohyst",
    version,
    about = "Simulator for unsaturated flow with hysteresis, plasticity, and heat"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat `section.key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for output files (created if missing; default: current).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the configured worker thread count.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for randomized components.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one simulation; write diagnostics.csv, summary.txt, snapshot.txt.
    Run(CommonArgs),
    /// Vanishing-regularization sweep over the configured delta/R pairs.
    Sweep(CommonArgs),
    /// Refinement study along the configured axis.
    Study(CommonArgs),
    /// Built-in verification suite of named properties.
    Selftest(CommonArgs),
}

/// A failure carrying its process exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: String) -> Self {
        Failure { code: EXIT_CONFIG, message }
    }

    fn runtime(message: String) -> Self {
        Failure { code: EXIT_RUNTIME, message }
    }

    fn from_solver(e: SolverError) -> Self {
        let code = match e {
            SolverError::Numerical { .. } => EXIT_RUNTIME,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Parse the configuration file named by `args`, or fall back to defaults.
fn load_config(args: &CommonArgs) -> Result<RunConfig, Failure> {
    let Some(path) = &args.config else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::config(format!("cannot read config '{}': {e}", path.display()))
    })?;
    config::parse(&text).map_err(|e| Failure::config(e.to_string()))
}

fn out_dir(args: &CommonArgs) -> Result<PathBuf, Failure> {
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::runtime(format!("cannot create '{}': {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| Failure::runtime(format!("cannot write '{}': {e}", path.display())))
}

fn cmd_run(args: &CommonArgs) -> Result<String, Failure> {
    let cfg = load_config(args)?;
    let dir = out_dir(args)?;
    let solver = cfg.build(args.threads).map_err(Failure::from_solver)?;

    let mut state = match &cfg.resume {
        None => solver.init_state().map_err(Failure::from_solver)?,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::config(format!("cannot read snapshot '{}': {e}", path.display()))
            })?;
            read_snapshot(&text, &solver).map_err(|e| Failure::config(e.to_string()))?
        }
    };

    let record = solver.run(&mut state, false).map_err(Failure::from_solver)?;
    for report in &record.reports {
        for warning in &report.warnings {
            eprintln!("warning: step {}: {warning}", report.step);
        }
    }

    let summary = RunSummary::new(&solver, &record).to_string();
    write_file(&dir, "diagnostics.csv", &diagnostics::diagnostics_csv(&record.reports))?;
    write_file(&dir, "summary.txt", &summary)?;
    write_file(&dir, "snapshot.txt", &write_snapshot(&solver, &state))?;
    Ok(summary)
}

fn cmd_sweep(args: &CommonArgs) -> Result<String, Failure> {
    let cfg = load_config(args)?;
    let dir = out_dir(args)?;
    let Some(sweep) = &cfg.sweep else {
        return Err(Failure::config(
            "the sweep command needs sweep.deltas and sweep.rs in the configuration".to_string(),
        ));
    };
    let consts = cfg.constitutive().map_err(Failure::from_solver)?;
    let mut base = cfg.solver;
    if let Some(t) = args.threads {
        base.threads = t;
    }
    let disc = cfg.make_disc(cfg.resolution());
    let report = continuation_run(&disc, &consts, &base, &cfg.drives, &sweep.deltas, &sweep.rs)
        .map_err(Failure::from_solver)?;

    let mut out = String::new();
    let _ = writeln!(out, "# porohyst.sweep.v1");
    let _ = writeln!(out, "delta,r_cut,sup_p,min_theta,k_r_active_steps,max_rel_residual");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.delta, e.r_cut, e.sup_p, e.min_theta, e.k_r_active_steps, e.max_rel_residual
        );
    }
    let _ = writeln!(out, "# gaps between consecutive runs");
    let _ = writeln!(out, "d_velocity,d_pressure,d_theta,d_grad_theta");
    for g in &report.gaps {
        let _ = writeln!(out, "{},{},{},{}", g.d_velocity, g.d_pressure, g.d_theta, g.d_grad_theta);
    }
    write_file(&dir, "sweep.csv", &out)?;
    Ok(out)
}

fn cmd_study(args: &CommonArgs) -> Result<String, Failure> {
    let cfg = load_config(args)?;
    let dir = out_dir(args)?;
    let Some(study) = &cfg.study else {
        return Err(Failure::config(
            "the study command needs study.axis and study.values in the configuration".to_string(),
        ));
    };
    let consts = cfg.constitutive().map_err(Failure::from_solver)?;
    let mut base = cfg.solver;
    if let Some(t) = args.threads {
        base.threads = t;
    }
    let make_disc = |res: usize| cfg.make_disc(res);
    let report = diagnostics::convergence_study(
        &make_disc,
        cfg.resolution(),
        &consts,
        &base,
        &cfg.drives,
        study.axis,
        &study.values,
    )
    .map_err(Failure::from_solver)?;
    let out = report.csv();
    write_file(&dir, "study.csv", &out)?;
    Ok(out)
}

fn cmd_selftest(args: &CommonArgs) -> Result<String, Failure> {
    let report = run_selftest(args.seed.unwrap_or(0));
    let mut out = String::new();
    for r in &report.results {
        let _ = writeln!(
            out,
            "{} {} — {}",
            if r.passed { "pass" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let _ = writeln!(
        out,
        "{}/{} properties passed",
        report.results.iter().filter(|r| r.passed).count(),
        report.results.len()
    );
    if report.all_passed() {
        Ok(out)
    } else {
        Err(Failure { code: EXIT_SELFTEST, message: out })
    }
}

/// Execute a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Study(args) => cmd_study(args),
        Command::Selftest(args) => cmd_selftest(args),
    };
    match result {
        Ok(stdout) => {
            print!("{stdout}");
            EXIT_OK
        }
        Err(failure) => {
            if failure.code == EXIT_SELFTEST {
                // The property list itself is the payload; keep it on stdout
                // so scripted callers can parse it uniformly.
                print!("{}", failure.message);
            } else {
                eprintln!("error: {}", failure.message);
            }
            failure.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_command_line_grammar_parses() {
        let cli = Cli::try_parse_from(["porohyst", "run", "--config", "a.cfg", "--out", "o"])
            .unwrap();
        match cli.command {
            Command::Run(args) => {
                assert_eq!(args.config.as_deref(), Some(Path::new("a.cfg")));
                assert_eq!(args.out.as_deref(), Some(Path::new("o")));
            }
            _ => panic!("expected run"),
        }
        assert!(Cli::try_parse_from(["porohyst", "selftest", "--seed", "9"]).is_ok());
        assert!(Cli::try_parse_from(["porohyst", "study", "--threads", "2"]).is_ok());
        assert!(Cli::try_parse_from(["porohyst", "unknown"]).is_err());
    }

    #[test]
    fn missing_config_file_is_a_config_failure() {
        let args = CommonArgs {
            config: Some(PathBuf::from("/definitely/not/here.cfg")),
            ..CommonArgs::default()
        };
        let err = load_config(&args).map(|_| ()).err().unwrap();
        assert_eq!(err.code, EXIT_CONFIG);
    }
}
