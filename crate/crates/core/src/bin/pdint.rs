use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pdint::harness::{self, csv::fmt_f64, RunSpec};
use pdint::{CorrectionMode, Error, Method, StepMode};

#[derive(Parser)]
#[command(name = "pdint", version, about = "Positivity-preserving SDIRK integration of production-destruction systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate once and write the trajectory.
    Integrate(Common),
    /// Maximum relative invariant drift for each correction mode.
    Invariants(Common),
    /// Error against a reference solution over a sweep of tolerances or steps.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Tolerances (adaptive) or step sizes (fixed), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sweep: Vec<f64>,
    },
    /// Record every attempted step.
    Steptrace(Common),
    /// Wall-clock time of each correction mode relative to none.
    Timing {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Adaptive,
    Fixed,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: String,
    /// Model parameter override, `key=value`. Repeatable.
    #[arg(long = "param", value_parser = parse_kv)]
    params: Vec<(String, String)>,
    #[arg(long, default_value = "sdirk21")]
    method: Method,
    /// `none`, `final` or `all` (default none). `invariants` accepts a
    /// comma-separated list and defaults to all three.
    #[arg(long, value_delimiter = ',')]
    correction: Vec<CorrectionMode>,
    #[arg(long, value_enum, default_value = "adaptive")]
    mode: Mode,
    #[arg(long, default_value_t = 1e-6)]
    atol: f64,
    #[arg(long, default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    tf: Option<f64>,
    /// Fixed floor for the ratio-scaling denominator.
    #[arg(long)]
    eps: Option<f64>,
    /// Reject accepted steps whose predictor has a negative component.
    #[arg(long)]
    guard: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected key=value, got {s:?}")),
    }
}

impl Common {
    fn spec(&self, correction: CorrectionMode) -> Result<RunSpec, Error> {
        let step = match self.mode {
            Mode::Adaptive => {
                if self.h.is_some() {
                    return Err(Error::InvalidConfig("--h is only valid with --mode fixed".into()));
                }
                StepMode::Adaptive { atol: self.atol, rtol: self.rtol, h0: None }
            }
            Mode::Fixed => StepMode::Fixed {
                h: self.h.ok_or_else(|| Error::InvalidConfig("--mode fixed needs --h".into()))?,
            },
        };
        Ok(RunSpec {
            problem: self.problem.clone(),
            params: self.params.clone(),
            method: self.method,
            correction,
            step,
            t0: self.t0,
            tf: self.tf,
            eps: self.eps,
            guard: self.guard,
        })
    }

    fn single(&self) -> Result<RunSpec, Error> {
        match self.correction.as_slice() {
            [] => self.spec(CorrectionMode::None),
            [c] => self.spec(*c),
            _ => Err(Error::InvalidConfig("this command takes exactly one --correction".into())),
        }
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Integrate(c) => {
            let report = harness::cmd_integrate(&c.single()?, c.out.as_deref())?;
            print!("{}", report.summary());
            Ok(harness::exit_code(report.trajectory.status))
        }
        Command::Invariants(c) => {
            let modes = if c.correction.is_empty() { CorrectionMode::ALL.to_vec() } else { c.correction.clone() };
            let table = harness::cmd_invariants(&c.spec(modes[0])?, &modes, c.out.as_deref())?;
            for r in &table.rows {
                println!("{:<6} {:<5} {}", r.label, r.correction.name(), fmt_f64(r.error));
            }
            Ok(harness::exit_code(table.status))
        }
        Command::Convergence { common, sweep } => {
            let report = harness::cmd_convergence(&common.single()?, &sweep, common.out.as_deref())?;
            for p in &report.points {
                println!("{:e} steps={} error={}", p.control, p.accepted_steps, fmt_f64(p.error));
            }
            println!("slope: {:.4}", report.slope);
            Ok(0)
        }
        Command::Steptrace(c) => {
            let traj = harness::cmd_steptrace(&c.single()?, c.out.as_deref())?;
            let h_first = traj.attempts.first().map_or(f64::NAN, |a| a.h);
            let h_last = traj.attempts.last().map_or(f64::NAN, |a| a.h);
            println!(
                "status: {}\nattempts: {}\naccepted: {}\nfirst_h: {}\nlast_h: {}",
                traj.status,
                traj.attempts.len(),
                traj.accepted_steps(),
                fmt_f64(h_first),
                fmt_f64(h_last)
            );
            Ok(harness::exit_code(traj.status))
        }
        Command::Timing { common, repeats } => {
            for row in harness::timing(&common.spec(CorrectionMode::None)?, repeats)? {
                println!("{:<5} {:.4} s  x{:.3}", row.correction.name(), row.seconds, row.ratio);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            harness::error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
