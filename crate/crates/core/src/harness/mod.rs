//! Experiment commands behind the `pdint` binary.
//!
//! Each command takes a [`RunSpec`], runs one or more integrations and
//! returns a report; the binary prints summaries and writes CSV through
//! [`csv`].

pub mod csv;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{fit_slope, Vector};
use crate::patankar::ScalingPolicy;
use crate::problems::{problem, Problem};
use crate::sdirk::{integrate, CorrectionMode, Method, SolverConfig, StepMode, Trajectory, TrajectoryStatus};

/// Tolerance of adaptive reference solutions.
pub const REFERENCE_TOL: f64 = 1e-14;
/// Reference step for fixed-step studies is the finest step over this.
pub const REFERENCE_REFINEMENT: f64 = 8.0;

/// Everything needed to reproduce one integration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub problem: String,
    pub params: Vec<(String, String)>,
    pub method: Method,
    pub correction: CorrectionMode,
    pub step: StepMode,
    /// `None` uses the problem's default span for the command.
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    /// Fixed ratio-scaling floor; `None` keeps the default policy.
    pub eps: Option<f64>,
    pub guard: bool,
}

impl RunSpec {
    pub fn new(problem: &str, method: Method, correction: CorrectionMode, step: StepMode) -> Self {
        RunSpec {
            problem: problem.to_string(),
            params: Vec::new(),
            method,
            correction,
            step,
            t0: None,
            tf: None,
            eps: None,
            guard: false,
        }
    }

    pub fn param(mut self, key: &str, value: &str) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn span(mut self, t0: f64, tf: f64) -> Self {
        self.t0 = Some(t0);
        self.tf = Some(tf);
        self
    }

    pub fn guard(mut self, on: bool) -> Self {
        self.guard = on;
        self
    }

    pub fn with_correction(&self, correction: CorrectionMode) -> Self {
        RunSpec { correction, ..self.clone() }
    }

    pub fn with_step(&self, step: StepMode) -> Self {
        RunSpec { step, ..self.clone() }
    }

    /// Builds the problem and solver configuration, checking every field.
    pub fn prepare(&self, span: SpanKind) -> Result<Prepared> {
        let problem = problem(&self.problem, &self.params)?;
        let (d0, d1) = match span {
            SpanKind::Invariants => problem.invariant_span,
            SpanKind::Convergence => problem.convergence_span,
        };
        let t0 = self.t0.unwrap_or(d0);
        let tf = self.tf.unwrap_or(d1);
        if !(t0.is_finite() && tf.is_finite() && tf > t0) {
            return Err(Error::InvalidConfig(format!("time span [{t0}, {tf}] is empty")));
        }
        let mut config = SolverConfig::adaptive(self.method, 1.0, 1.0);
        config.mode = self.step;
        config = config.correction(self.correction).guard(self.guard);
        if let Some(eps) = self.eps {
            config = config.scaling(ScalingPolicy::fixed(eps));
        }
        config.validate()?;
        if problem.name == "kdv" && self.correction == CorrectionMode::AllStages {
            log::warn!("all-stages correction is known to distort KdV dynamics");
        }
        Ok(Prepared { problem, config, t0, tf })
    }
}

/// Which of a problem's default time spans to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanKind {
    Invariants,
    Convergence,
}

#[derive(Clone)]
pub struct Prepared {
    pub problem: Problem,
    pub config: SolverConfig,
    pub t0: f64,
    pub tf: f64,
}

impl Prepared {
    pub fn run(&self) -> Result<Trajectory> {
        integrate(&self.problem.model, &self.config, self.t0, self.tf, &self.problem.y0)
    }
}

/// Process exit code for a finished run.
pub fn exit_code(status: TrajectoryStatus) -> i32 {
    match status {
        TrajectoryStatus::Completed => 0,
        TrajectoryStatus::StepTooSmall | TrajectoryStatus::SolverFailure => 1,
    }
}

/// Process exit code for an error.
pub fn error_exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        1
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub struct IntegrateReport {
    pub problem: String,
    pub correction: CorrectionMode,
    pub trajectory: Trajectory,
    /// `(label, exact, E_I)` for each declared invariant.
    pub invariant_errors: Vec<(String, bool, f64)>,
}

impl IntegrateReport {
    pub fn summary(&self) -> String {
        let t = &self.trajectory;
        let mut s = format!(
            "problem: {}\ncorrection: {}\nstatus: {}\naccepted: {}\nrejected: {}\nmin_component: {}\nclipped: {}\n",
            self.problem,
            self.correction,
            t.status,
            t.accepted_steps(),
            t.rejected,
            csv::fmt_f64(t.min_over_run()),
            t.total_clips(),
        );
        for (label, _, e) in &self.invariant_errors {
            s.push_str(&format!("E[{label}]: {}\n", csv::fmt_f64(*e)));
        }
        if let Some(m) = &t.message {
            s.push_str(&format!("message: {m}\n"));
        }
        s
    }
}

/// Integrates over the invariant span and optionally writes the trajectory CSV.
pub fn cmd_integrate(spec: &RunSpec, out: Option<&Path>) -> Result<IntegrateReport> {
    let prep = spec.prepare(SpanKind::Invariants)?;
    let trajectory = prep.run()?;
    if let Some(path) = out {
        let mut w = create(path)?;
        csv::write_trajectory(&mut w, &trajectory)?;
        w.flush()?;
    }
    let invariant_errors = prep
        .problem
        .model
        .invariants()
        .iter()
        .map(|inv| Ok((inv.label.clone(), inv.exact, trajectory.invariant_error(&inv.w)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntegrateReport {
        problem: prep.problem.name.clone(),
        correction: spec.correction,
        trajectory,
        invariant_errors,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantRow {
    pub label: String,
    pub correction: CorrectionMode,
    pub exact: bool,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantTable {
    pub rows: Vec<InvariantRow>,
    /// Worst status over the runs.
    pub status: TrajectoryStatus,
}

/// E_I for every invariant under each requested correction mode.
pub fn cmd_invariants(spec: &RunSpec, modes: &[CorrectionMode], out: Option<&Path>) -> Result<InvariantTable> {
    let reports = modes
        .par_iter()
        .map(|&m| cmd_integrate(&spec.with_correction(m), None))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut status = TrajectoryStatus::Completed;
    for r in &reports {
        if r.trajectory.status != TrajectoryStatus::Completed {
            status = r.trajectory.status;
        }
        rows.extend(r.invariant_errors.iter().map(|(label, exact, error)| InvariantRow {
            label: label.clone(),
            correction: r.correction,
            exact: *exact,
            error: *error,
        }));
    }
    if let Some(path) = out {
        let mut w = create(path)?;
        csv::write_invariants(&mut w, &rows)?;
        w.flush()?;
    }
    Ok(InvariantTable { rows, status })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergencePoint {
    /// Tolerance (adaptive) or step size (fixed).
    pub control: f64,
    pub accepted_steps: usize,
    pub mean_step: f64,
    /// Relative 2-norm error at the final time.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// Fitted slope of log(error) against log(mean step).
    pub slope: f64,
}

/// Reference final state for a convergence study: SDIRK43 without
/// correction at tolerance 1e-14, or at an eighth of the finest fixed step.
pub fn reference_solution(spec: &RunSpec, sweep: &[f64]) -> Result<Vector> {
    let step = match spec.step {
        StepMode::Adaptive { .. } => StepMode::Adaptive { atol: REFERENCE_TOL, rtol: REFERENCE_TOL, h0: None },
        StepMode::Fixed { .. } => {
            let finest = sweep.iter().copied().fold(f64::INFINITY, f64::min);
            StepMode::Fixed { h: finest / REFERENCE_REFINEMENT }
        }
    };
    let ref_spec = RunSpec {
        method: Method::Sdirk43,
        correction: CorrectionMode::None,
        guard: false,
        ..spec.with_step(step)
    };
    let traj = ref_spec.prepare(SpanKind::Convergence)?.run()?;
    if traj.status != TrajectoryStatus::Completed {
        return Err(Error::Degenerate(format!(
            "reference run ended with {}: {}",
            traj.status,
            traj.message.unwrap_or_default()
        )));
    }
    Ok(traj.final_state().clone())
}

/// Runs the sweep against a precomputed reference. Sweep points run in
/// parallel; the report keeps sweep order.
pub fn convergence_with_reference(spec: &RunSpec, sweep: &[f64], reference: &[f64]) -> Result<ConvergenceReport> {
    if sweep.len() < 3 {
        return Err(Error::InvalidConfig(format!("a convergence study needs at least 3 points, got {}", sweep.len())));
    }
    let fixed = matches!(spec.step, StepMode::Fixed { .. });
    let componentwise = problem(&spec.problem, &spec.params)?.componentwise_error;
    let points = sweep
        .par_iter()
        .map(|&c| {
            let step = match spec.step {
                StepMode::Adaptive { h0, .. } => StepMode::Adaptive { atol: c, rtol: c, h0 },
                StepMode::Fixed { .. } => StepMode::Fixed { h: c },
            };
            let traj = spec.with_step(step).prepare(SpanKind::Convergence)?.run()?;
            if traj.status != TrajectoryStatus::Completed {
                return Err(Error::Degenerate(format!("sweep point {c:e} ended with {}", traj.status)));
            }
            let error = final_error(traj.final_state(), reference, componentwise)?;
            Ok(ConvergencePoint { control: c, accepted_steps: traj.accepted_steps(), mean_step: traj.mean_step(), error })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| if fixed { p.control } else { p.mean_step }).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error).collect();
    let slope = fit_slope(&xs, &ys)?;
    Ok(ConvergenceReport { points, slope })
}

/// Relative 2-norm error `|y - ref| / |ref|`, or the 2-norm of the
/// component-wise relative errors.
pub fn final_error(y: &[f64], reference: &[f64], componentwise: bool) -> Result<f64> {
    if y.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} components", y.len(), reference.len())));
    }
    if componentwise {
        if reference.contains(&0.0) {
            return Err(Error::Degenerate("component-wise error with a zero reference entry".into()));
        }
        Ok(y.iter().zip(reference).map(|(a, r)| ((a - r) / r).powi(2)).sum::<f64>().sqrt())
    } else {
        let num: f64 = y.iter().zip(reference).map(|(a, r)| (a - r).powi(2)).sum();
        let den: f64 = reference.iter().map(|r| r * r).sum();
        if den == 0.0 {
            return Err(Error::Degenerate("reference solution is zero".into()));
        }
        Ok((num / den).sqrt())
    }
}

pub fn cmd_convergence(spec: &RunSpec, sweep: &[f64], out: Option<&Path>) -> Result<ConvergenceReport> {
    if sweep.len() < 3 {
        return Err(Error::InvalidConfig(format!("a convergence study needs at least 3 points, got {}", sweep.len())));
    }
    let reference = reference_solution(spec, sweep)?;
    let report = convergence_with_reference(spec, sweep, &reference)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        csv::write_convergence(&mut w, &report)?;
        w.flush()?;
    }
    Ok(report)
}

/// Integrates and records every attempted step.
pub fn cmd_steptrace(spec: &RunSpec, out: Option<&Path>) -> Result<Trajectory> {
    let traj = spec.prepare(SpanKind::Invariants)?.run()?;
    if let Some(path) = out {
        let mut w = create(path)?;
        csv::write_attempts(&mut w, &traj.attempts)?;
        w.flush()?;
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub correction: CorrectionMode,
    pub seconds: f64,
    /// Time relative to the uncorrected run.
    pub ratio: f64,
}

/// Wall-clock time of each correction mode, best of `repeats` runs.
pub fn timing(spec: &RunSpec, repeats: usize) -> Result<Vec<TimingRow>> {
    let mut rows: Vec<TimingRow> = Vec::new();
    for mode in CorrectionMode::ALL {
        let prep = spec.with_correction(mode).prepare(SpanKind::Invariants)?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            prep.run()?;
            best = best.min(start.elapsed().as_secs_f64());
        }
        let base = rows.first().map_or(best, |r| r.seconds);
        rows.push(TimingRow { correction: mode, seconds: best, ratio: best / base });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_rejects_bad_specs() {
        let spec = RunSpec::new("robertson", Method::Sdirk21, CorrectionMode::None, StepMode::Fixed { h: 1.0 });
        assert!(spec.clone().span(1.0, 1.0).prepare(SpanKind::Invariants).is_err());
        assert!(RunSpec { problem: "nope".into(), ..spec.clone() }.prepare(SpanKind::Invariants).is_err());
        let spec = spec.with_step(StepMode::Fixed { h: 0.0 });
        let e = spec.prepare(SpanKind::Invariants).err().unwrap();
        assert_eq!(error_exit_code(&e), 2);
    }

    #[test]
    fn default_spans() {
        let spec = RunSpec::new("mapk", Method::Sdirk21, CorrectionMode::None, StepMode::Fixed { h: 1.0 });
        let p = spec.prepare(SpanKind::Convergence).unwrap();
        assert_eq!((p.t0, p.tf), (0.0, 60.0));
        let p = spec.prepare(SpanKind::Invariants).unwrap();
        assert_eq!((p.t0, p.tf), (0.0, 200.0));
    }

    #[test]
    fn too_few_sweep_points() {
        let spec = RunSpec::new("clipping", Method::Sdirk21, CorrectionMode::Final, StepMode::Fixed { h: 0.1 });
        assert!(cmd_convergence(&spec, &[0.1, 0.05], None).is_err());
    }
}
