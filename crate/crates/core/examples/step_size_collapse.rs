//! Stratospheric chemistry with the positivity-guard rejection switched on
//! and off. The guard rejects any step whose predictor has a negative
//! component, which forces the controller down to small steps.
//!
//!     cargo run --release --example step_size_collapse [tol]

use pdint::harness::{RunSpec, SpanKind};
use pdint::{CorrectionMode, Method, StepMode};

fn main() -> pdint::Result<()> {
    let tol: f64 = std::env::args().nth(1).map_or(Ok(1e-6), |s| s.parse()).expect("tolerance");
    let step = StepMode::Adaptive { atol: tol, rtol: tol, h0: None };
    for guard in [false, true] {
        let spec = RunSpec::new("stratospheric", Method::Sdirk21, CorrectionMode::None, step).guard(guard);
        let traj = spec.prepare(SpanKind::Invariants)?.run()?;
        let hs: Vec<f64> = traj.attempts.iter().map(|a| a.h).collect();
        let h_min = hs.iter().copied().fold(f64::INFINITY, f64::min);
        let h_max = hs.iter().copied().fold(0.0, f64::max);
        let guarded = traj.attempts.iter().filter(|a| !a.accepted && a.min_pred < 0.0).count();
        println!(
            "guard {:<5}: {:<15} attempts {:>6}  rejected {:>5} ({guarded} negative predictors)  h in [{h_min:.2e}, {h_max:.2e}]",
            guard,
            traj.status.to_string(),
            traj.attempts.len(),
            traj.rejected
        );
    }
    Ok(())
}
