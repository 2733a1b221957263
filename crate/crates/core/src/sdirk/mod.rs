//! SDIRK integrators with optional Patankar correction.

mod integrate;
mod stage;
mod step;
mod tableau;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::patankar::{CorrectionDiagnostics, ScalingPolicy};
use crate::pds::invariant_error;

pub use integrate::integrate;
pub use stage::{solve_stage, StageSolution, StageSolverConfig};
pub use step::{corrected_step, predictor_step, PredictorResult, StepOutcome};
pub use tableau::{tableau, ButcherTableau, Method};

/// Which values receive the positivity correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CorrectionMode {
    /// Plain SDIRK.
    #[default]
    None,
    /// One corrector solve on the step solution.
    Final,
    /// Every stage is predicted and then corrected; needs a stiffly accurate tableau.
    AllStages,
}

impl CorrectionMode {
    pub const ALL: [CorrectionMode; 3] = [CorrectionMode::None, CorrectionMode::Final, CorrectionMode::AllStages];

    pub fn name(self) -> &'static str {
        match self {
            CorrectionMode::None => "none",
            CorrectionMode::Final => "final",
            CorrectionMode::AllStages => "all",
        }
    }
}

impl fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "baseline" => Ok(CorrectionMode::None),
            "final" | "final-stage" => Ok(CorrectionMode::Final),
            "all" | "all-stages" => Ok(CorrectionMode::AllStages),
            _ => Err(Error::UnknownName { kind: "correction", name: s.to_string() }),
        }
    }
}

/// Step-size selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepMode {
    /// Embedded error control. `h0 = None` starts at `(tf - t0) * 1e-4`.
    Adaptive { atol: f64, rtol: f64, h0: Option<f64> },
    /// Uniform steps of size `h` (the last one shortened to land on `tf`).
    Fixed { h: f64 },
}

/// Elementary step-size controller parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Controller {
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    /// `None` uses `1e4 * machine epsilon * max(|t0|, |tf|)`.
    pub h_min: Option<f64>,
}

impl Default for Controller {
    fn default() -> Self {
        Controller {
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 5.0,
            h_min: None,
        }
    }
}

impl Controller {
    /// Step-size factor for an error estimate `err` and embedded order `p_hat`.
    pub fn factor(&self, err: f64, p_hat: u32) -> f64 {
        if err == 0.0 {
            return self.fac_max;
        }
        if !err.is_finite() {
            return self.fac_min;
        }
        (self.safety * err.powf(-1.0 / (p_hat as f64 + 1.0))).clamp(self.fac_min, self.fac_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tableau: ButcherTableau,
    pub mode: StepMode,
    pub correction: CorrectionMode,
    pub scaling: ScalingPolicy,
    pub controller: Controller,
    pub stage_solver: StageSolverConfig,
    /// Reject accepted steps whose predictor has a negative component.
    pub positivity_guard_rejection: bool,
    /// Abort after this many attempted steps.
    pub max_attempts: usize,
}

impl SolverConfig {
    pub fn adaptive(method: Method, atol: f64, rtol: f64) -> Self {
        Self::with_mode(method, StepMode::Adaptive { atol, rtol, h0: None })
    }

    pub fn fixed(method: Method, h: f64) -> Self {
        Self::with_mode(method, StepMode::Fixed { h })
    }

    fn with_mode(method: Method, mode: StepMode) -> Self {
        SolverConfig {
            tableau: method.tableau(),
            mode,
            correction: CorrectionMode::None,
            scaling: ScalingPolicy::default(),
            controller: Controller::default(),
            stage_solver: StageSolverConfig::default(),
            positivity_guard_rejection: false,
            max_attempts: 5_000_000,
        }
    }

    pub fn correction(mut self, mode: CorrectionMode) -> Self {
        self.correction = mode;
        self
    }

    pub fn scaling(mut self, policy: ScalingPolicy) -> Self {
        self.scaling = policy;
        self
    }

    pub fn guard(mut self, on: bool) -> Self {
        self.positivity_guard_rejection = on;
        self
    }

    pub fn initial_step(mut self, h0: f64) -> Self {
        if let StepMode::Adaptive { h0: ref mut slot, .. } = self.mode {
            *slot = Some(h0);
        }
        self
    }

    pub fn tableau(mut self, tableau: ButcherTableau) -> Self {
        self.tableau = tableau;
        self
    }

    /// Tolerances used by the embedded error norm (fixed mode uses 1, 1).
    pub fn tolerances(&self) -> (f64, f64) {
        match self.mode {
            StepMode::Adaptive { atol, rtol, .. } => (atol, rtol),
            StepMode::Fixed { .. } => (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            StepMode::Adaptive { atol, rtol, h0 } => {
                if !(atol > 0.0) || !(rtol >= 0.0) {
                    return Err(Error::InvalidConfig(format!("need atol > 0 and rtol >= 0, got {atol}, {rtol}")));
                }
                if let Some(h) = h0 {
                    if !(h > 0.0) {
                        return Err(Error::InvalidConfig(format!("initial step must be positive, got {h}")));
                    }
                }
            }
            StepMode::Fixed { h } => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::InvalidConfig(format!("fixed step must be positive, got {h}")));
                }
            }
        }
        let c = &self.controller;
        if !(c.fac_min < 1.0 && 1.0 < c.fac_max && c.safety > 0.0) {
            return Err(Error::InvalidConfig("controller needs fac_min < 1 < fac_max".into()));
        }
        if self.correction == CorrectionMode::AllStages && !self.tableau.stiffly_accurate {
            return Err(Error::InvalidConfig(format!(
                "all-stages correction needs a stiffly accurate tableau; {} is not",
                self.tableau.name
            )));
        }
        self.scaling.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryStatus {
    Completed,
    StepTooSmall,
    SolverFailure,
}

impl TrajectoryStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrajectoryStatus::Completed => "completed",
            TrajectoryStatus::StepTooSmall => "step_too_small",
            TrajectoryStatus::SolverFailure => "solver_failure",
        }
    }
}

impl fmt::Display for TrajectoryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One attempted step, accepted or not.
#[derive(Clone, Debug, PartialEq)]
pub struct Attempt {
    pub index: usize,
    pub t: f64,
    pub h: f64,
    pub accepted: bool,
    /// Smallest predictor component; NaN when the stage solve failed.
    pub min_pred: f64,
    pub err: f64,
}

/// Accepted time points and per-step records. Index 0 is the initial state,
/// so per-step vectors have a placeholder entry there (`h_used = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Smallest component of the stored state.
    pub min_component: Vec<f64>,
    /// Smallest component of the uncorrected predictor at each step.
    pub min_predictor: Vec<f64>,
    /// `invariant_values[k][i]` is invariant `k` at time point `i`.
    pub invariant_values: Vec<Vec<f64>>,
    pub clip_count: Vec<usize>,
    pub h_used: Vec<f64>,
    pub diagnostics: Vec<CorrectionDiagnostics>,
    /// Largest relative one-step change of each exact invariant.
    pub max_step_conservation_defect: Vec<f64>,
    pub attempts: Vec<Attempt>,
    pub rejected: usize,
    pub status: TrajectoryStatus,
    pub message: Option<String>,
}

impl Trajectory {
    pub fn accepted_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial state")
    }

    /// Minimum component over every stored state.
    pub fn min_over_run(&self) -> f64 {
        self.min_component.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Minimum over the uncorrected predictors of all accepted steps.
    pub fn min_predictor_over_run(&self) -> f64 {
        self.min_predictor.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Minimum of component `i` over the stored states.
    pub fn min_of_component(&self, i: usize) -> f64 {
        self.states.iter().map(|y| y[i]).fold(f64::INFINITY, f64::min)
    }

    /// Maximum relative deviation of `wᵀy` from its initial value.
    pub fn invariant_error(&self, w: &[f64]) -> Result<f64> {
        invariant_error(&self.states, w)
    }

    /// Mean accepted step size.
    pub fn mean_step(&self) -> f64 {
        let n = self.accepted_steps();
        if n == 0 {
            return 0.0;
        }
        (self.final_time() - self.times[0]) / n as f64
    }

    pub fn total_clips(&self) -> usize {
        self.clip_count.iter().sum()
    }
}
