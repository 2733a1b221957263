//! Finite-volume KdV soliton written as a production-destruction system.
//! Integrates with fixed steps and prints the profile peak and total mass.
//!
//!     cargo run --release --example kdv_soliton

use pdint::problems::{kdv, kdv_initial, KdvConfig};
use pdint::{integrate, CorrectionMode, Method, SolverConfig};

fn main() -> pdint::Result<()> {
    let cfg = KdvConfig::default();
    let model = kdv(cfg)?.into();
    let y0 = kdv_initial(&cfg);
    let dx = (cfg.x_hi - cfg.x_lo) / cfg.n_cells as f64;
    let peak = |y: &[f64]| {
        let (i, v) = y.iter().enumerate().fold((0, f64::MIN), |m, (i, &v)| if v > m.1 { (i, v) } else { m });
        (cfg.x_lo + (i as f64 + 0.5) * dx, v)
    };

    let solver = SolverConfig::fixed(Method::Sdirk21, 1e-3).correction(CorrectionMode::Final);
    let traj = integrate(&model, &solver, 0.0, 0.35, &y0)?;
    let mass = |y: &[f64]| y.iter().sum::<f64>() * dx;
    for (t, y) in traj.times.iter().zip(&traj.states).step_by(50) {
        let (x, v) = peak(y);
        println!("t = {t:.3}  peak {v:.5} at x = {x:+.4}  mass {:.15}", mass(y));
    }
    let y = traj.final_state();
    println!("relative mass drift {:.2e}", (mass(y) - mass(&y0)).abs() / mass(&y0));
    Ok(())
}
