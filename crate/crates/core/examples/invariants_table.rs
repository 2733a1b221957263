//! Relative drift of every linear invariant for each benchmark problem and
//! correction mode.
//!
//!     cargo run --release --example invariants_table

use pdint::harness::{cmd_invariants, RunSpec};
use pdint::{CorrectionMode, Method, StepMode};

fn main() -> pdint::Result<()> {
    let modes = [CorrectionMode::None, CorrectionMode::Final, CorrectionMode::AllStages];
    let step = StepMode::Adaptive { atol: 1e-6, rtol: 1e-6, h0: None };
    for problem in ["robertson", "mapk", "stratospheric", "kdv"] {
        let spec = RunSpec::new(problem, Method::Sdirk21, CorrectionMode::None, step);
        let table = cmd_invariants(&spec, &modes, None)?;
        println!("{problem} ({})", table.status);
        for row in &table.rows {
            let kind = if row.exact { "exact" } else { "approx" };
            println!("  {:<6} {:<6} {:<6} {:.3e}", row.label, row.correction.name(), kind, row.error);
        }
    }
    Ok(())
}
