//! `hessctl`: JSON configuration, command dispatch, report and field files.

mod commands;
mod config;
mod field_io;
mod selftest;

pub use commands::{
    exit_code_for, run_command, RunOutcome, EXIT_BAD_CONFIG, EXIT_CHECK_FAILED, EXIT_NO_CONVERGENCE, EXIT_OK,
};
pub use config::{
    load_config, parse_config, BoundaryConfig, BoxConfig, ChecksConfig, Command, Component, CustomProblem, GridConfig,
    OutputConfig, ProblemConfig, RunConfig, SampleCounts, SweepConfig, VerifyConfig,
};
pub use field_io::{emit_field, field_from_csv, field_to_csv, fmt_f64, read_field};

use std::path::PathBuf;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "hessctl", version, about = "Augmented k-Hessian Dirichlet problems: structure checks, solves and audits")]
struct Args {
    /// structure, solve, verify, sweep or selftest.
    command: String,
    /// JSON configuration; optional for selftest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed, overriding `checks.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

fn prepare(args: &Args) -> crate::Result<RunConfig> {
    let command = Command::parse(&args.command).ok_or_else(|| crate::Error::ConfigSchema {
        pointer: "/command".into(),
        reason: format!("unknown command `{}`", args.command),
    })?;
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None if command == Command::Selftest => RunConfig::empty(command),
        None => {
            return Err(crate::Error::ConfigParse(format!("`{}` needs --config <file>", command.name())));
        }
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(crate::Error::ConfigSchema {
                pointer: "/command".into(),
                reason: format!("config says `{}` but `{}` was requested", c.name(), command.name()),
            });
        }
    }
    cfg.command = Some(command);
    if let Some(seed) = args.seed {
        cfg.checks.seed = Some(seed);
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> crate::Result<RunOutcome> {
    let out = PathBuf::from(&cfg.output.dir);
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| crate::Error::InvalidParameter { name: "workers".into(), reason: e.to_string() })?
            .install(|| run_command(cfg, &out)),
        None => run_command(cfg, &out),
    }
}

/// Parse arguments, run, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = prepare(&args).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(o) => {
            println!("{}", o.summary);
            println!("{}: exit {} ({})", args.command, o.exit, o.out_dir.join("report.json").display());
            o.exit
        }
        Err(e) => {
            eprintln!("hessctl {}: {e}", args.command);
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests;
