//! Observed order of the three SDIRK methods with final-stage correction on
//! the MAPK cascade, against one shared reference solution.
//!
//!     cargo run --release --example convergence_study

use pdint::harness::{convergence_with_reference, reference_solution, RunSpec};
use pdint::{CorrectionMode, Method, StepMode};

fn main() -> pdint::Result<()> {
    let sweep = [1e-5, 1e-6, 1e-7, 1e-8];
    let base = RunSpec::new(
        "mapk",
        Method::Sdirk21,
        CorrectionMode::Final,
        StepMode::Adaptive { atol: 1e-6, rtol: 1e-6, h0: None },
    );
    let reference = reference_solution(&base, &sweep)?;
    for method in [Method::Sdirk21, Method::Sdirk32, Method::Sdirk43] {
        let spec = RunSpec { method, ..base.clone() };
        let report = convergence_with_reference(&spec, &sweep, &reference)?;
        println!("{method}: slope {:.2}", report.slope.abs());
        for p in &report.points {
            println!("  tol {:.0e}  steps {:>6}  mean h {:.3e}  error {:.3e}", p.control, p.accepted_steps, p.mean_step, p.error);
        }
    }
    Ok(())
}
