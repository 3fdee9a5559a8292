use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use energymimo::config::ExperimentConfig;
use energymimo::experiment;
use energymimo::{Error, Result};

#[derive(Parser)]
#[command(name = "energymimo", version, about = "Consumption-aware massive MIMO precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-realization power reports and gains against ZF.
    Run(Common),
    /// Per-iteration residuals of the fixed point and distance to the oracle.
    Convergence(Common),
    /// Optimal active-antenna sweeps and finite-Q accuracy curves.
    Asymptotic(Common),
    /// Cross-check the solvers against the reference implementations.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (key = value lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, env = "ENERGYMIMO_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.scenario.seed = seed;
            cfg.oracle.seed = seed;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.validate().map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
        if let Some(n) = self.threads {
            // only fails if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(cfg)
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `plans.csv` becomes `plans.finite_q.csv`.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let mut out = sink(cfg.output.as_deref())?;
            let summary = experiment::cmd_run(&cfg, &mut out)?;
            out.flush()?;
            for s in summary {
                eprintln!(
                    "M={} K={} Q={} {:<10} kept={} discarded={} gain_pas={:.4} gain_bs={:.4} m_active={:.2}",
                    s.m,
                    s.k,
                    s.q,
                    s.solver.name(),
                    s.kept,
                    s.discarded,
                    s.mean_gain_pas,
                    s.mean_gain_bs,
                    s.mean_m_active
                );
            }
        }
        Command::Convergence(c) => {
            let cfg = c.load()?;
            let mut out = sink(cfg.output.as_deref())?;
            for w in experiment::cmd_convergence(&cfg, &mut out)? {
                eprintln!("warning: {w}");
            }
            out.flush()?;
        }
        Command::Asymptotic(c) => {
            let cfg = c.load()?;
            match cfg.output.as_deref() {
                Some(path) => {
                    let mut plans = sink(Some(path))?;
                    let mut curves: Box<dyn Write> = if cfg.finite_q.is_empty() {
                        Box::new(io::sink())
                    } else {
                        sink(Some(&sibling(path, "finite_q")))?
                    };
                    experiment::cmd_asymptotic(&cfg, &mut plans, &mut curves)?;
                    plans.flush()?;
                    curves.flush()?;
                }
                None => {
                    let mut plans = Vec::new();
                    let mut curves = Vec::new();
                    experiment::cmd_asymptotic(&cfg, &mut plans, &mut curves)?;
                    let mut out = sink(None)?;
                    out.write_all(&plans)?;
                    if !curves.is_empty() {
                        writeln!(out)?;
                        out.write_all(&curves)?;
                    }
                    out.flush()?;
                }
            }
        }
        Command::Validate(c) => {
            let cfg = c.load()?;
            let checks = experiment::cmd_validate(&cfg)?;
            let mut out = sink(cfg.output.as_deref())?;
            for ch in &checks {
                writeln!(out, "{} {}: {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail)?;
            }
            out.flush()?;
            if let Some(bad) = checks.iter().find(|c| !c.passed) {
                return Err(Error::Validation(format!("check `{}` failed", bad.name)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors count as configuration errors
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
