//! Robertson kinetics with and without the positivity corrector.
//!
//! Prints the smallest component seen at any accepted step and how many
//! steps needed correcting.
//!
//!     cargo run --release --example robertson_positivity

use pdint::problems::robertson;
use pdint::{integrate, CorrectionMode, Method, SolverConfig};

fn main() -> pdint::Result<()> {
    let model = robertson().into();
    let y0 = [1.0, 0.0, 0.0];
    println!("{:<8} {:>10} {:>10} {:>14} {:>14}", "mode", "accepted", "rejected", "min y", "min predictor");
    for mode in [CorrectionMode::None, CorrectionMode::Final, CorrectionMode::AllStages] {
        let cfg = SolverConfig::adaptive(Method::Sdirk21, 1e-6, 1e-6).correction(mode);
        let traj = integrate(&model, &cfg, 0.0, 1e4, &y0)?;
        println!(
            "{:<8} {:>10} {:>10} {:>14.3e} {:>14.3e}",
            mode.name(),
            traj.accepted_steps(),
            traj.rejected,
            traj.min_over_run(),
            traj.min_predictor_over_run()
        );
    }
    Ok(())
}
