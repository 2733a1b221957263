//! Adaptive and fixed-step integration drivers.

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::patankar::CorrectionDiagnostics;
use crate::pds::Model;

use super::stage::NewtonCache;
use super::step::corrected_step_cached;
use super::{Attempt, CorrectionMode, SolverConfig, StepMode, Trajectory, TrajectoryStatus};

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::StageNonConvergence { .. } | Error::SingularMatrix { .. } | Error::NonFinite(_)
    )
}

/// Integrates `model` from `(t0, y0)` to `tf`.
///
/// Invalid input is an `Err`. Once integration starts, problems are
/// reported through [`Trajectory::status`].
pub fn integrate(model: &Model, config: &SolverConfig, t0: f64, tf: f64, y0: &[f64]) -> Result<Trajectory> {
    config.validate()?;
    if !(t0.is_finite() && tf.is_finite() && tf > t0) {
        return Err(Error::InvalidConfig(format!("need t0 < tf, got [{t0}, {tf}]")));
    }
    let y0 = Vector::new(y0.to_vec())?;
    if y0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, model has {}",
            y0.dim(),
            model.dim()
        )));
    }
    if config.correction != CorrectionMode::None && y0.min() < 0.0 {
        return Err(Error::InvalidConfig("corrected integration needs a nonnegative initial state".into()));
    }

    let exact: Vec<usize> = model
        .invariants()
        .iter()
        .enumerate()
        .filter(|(_, inv)| inv.exact)
        .map(|(k, _)| k)
        .collect();
    let mut traj = Trajectory {
        times: vec![t0],
        min_component: vec![y0.min()],
        min_predictor: vec![y0.min()],
        invariant_values: model.invariants().iter().map(|inv| vec![inv.value(&y0)]).collect(),
        clip_count: vec![0],
        h_used: vec![0.0],
        diagnostics: vec![CorrectionDiagnostics::default()],
        max_step_conservation_defect: vec![0.0; model.invariants().len()],
        attempts: Vec::new(),
        rejected: 0,
        status: TrajectoryStatus::Completed,
        message: None,
        states: vec![y0],
    };

    let h_min = config
        .controller
        .h_min
        .unwrap_or(1e4 * f64::EPSILON * t0.abs().max(tf.abs()));
    let (adaptive, mut h) = match config.mode {
        StepMode::Adaptive { h0, .. } => (true, h0.unwrap_or((tf - t0) * 1e-4)),
        StepMode::Fixed { h } => (false, h),
    };
    let n_fixed = if adaptive { 0 } else { ((tf - t0) / h * (1.0 - 1e-12)).ceil().max(1.0) as usize };
    let mut block_growth = false;
    let mut cache = NewtonCache::default();
    let mut t = t0;

    while t < tf {
        if traj.attempts.len() >= config.max_attempts {
            traj.status = TrajectoryStatus::SolverFailure;
            traj.message = Some(format!("gave up after {} attempted steps", config.max_attempts));
            break;
        }
        let remaining = tf - t;
        let (h_try, t_new) = if adaptive {
            if h >= remaining * (1.0 - 1e-12) {
                (remaining, tf)
            } else {
                (h, t + h)
            }
        } else {
            let k = traj.accepted_steps() + 1;
            let t_next = if k >= n_fixed { tf } else { t0 + k as f64 * h };
            (t_next - t, t_next)
        };
        if adaptive && h_try < h_min && h_try < remaining {
            traj.status = TrajectoryStatus::StepTooSmall;
            traj.message = Some(format!("step size {h_try:e} fell below minimum {h_min:e} at t = {t}"));
            break;
        }

        let y_n = traj.states.last().expect("initial state").clone();
        let index = traj.attempts.len();
        let outcome = match corrected_step_cached(model, t, &y_n, h_try, config, &mut cache) {
            Ok(o) if o.y_corrected.is_finite() && o.y_pred.is_finite() => o,
            Ok(_) | Err(_) if !adaptive => {
                traj.status = TrajectoryStatus::SolverFailure;
                traj.message = Some(format!("step from t = {t} with h = {h_try:e} failed"));
                traj.attempts.push(Attempt { index, t, h: h_try, accepted: false, min_pred: f64::NAN, err: f64::NAN });
                break;
            }
            Err(e) if !recoverable(&e) => return Err(e),
            _ => {
                log::debug!("step failure at t = {t}, h = {h_try:e}; halving");
                traj.attempts.push(Attempt { index, t, h: h_try, accepted: false, min_pred: f64::NAN, err: f64::NAN });
                traj.rejected += 1;
                h = h_try * 0.5;
                continue;
            }
        };

        let min_pred = outcome.y_pred.min();
        let guard_hit = config.positivity_guard_rejection && outcome.accepted && min_pred < 0.0;
        let accepted = outcome.accepted && !guard_hit;
        traj.attempts.push(Attempt { index, t, h: h_try, accepted, min_pred, err: outcome.err });

        if !accepted {
            traj.rejected += 1;
            h = if guard_hit {
                block_growth = true;
                h_try * 0.5
            } else {
                outcome.h_next
            };
            continue;
        }

        if outcome.diagnostics.post_solve_clipped > 0 {
            log::warn!(
                "t = {t_new}: corrector returned {} negative components (min {:e}); clipped, mass change {:e}",
                outcome.diagnostics.post_solve_clipped,
                outcome.diagnostics.post_solve_min_component,
                outcome.diagnostics.post_solve_defect
            );
        }
        let y_new = outcome.y_corrected;
        for &k in &exact {
            let inv = &model.invariants()[k];
            let before = inv.value(&y_n);
            if before != 0.0 {
                let rel = (inv.value(&y_new) - before).abs() / before.abs();
                let slot = &mut traj.max_step_conservation_defect[k];
                *slot = slot.max(rel);
            }
        }
        for (k, inv) in model.invariants().iter().enumerate() {
            traj.invariant_values[k].push(inv.value(&y_new));
        }
        traj.times.push(t_new);
        traj.min_component.push(y_new.min());
        traj.min_predictor.push(min_pred);
        traj.clip_count.push(outcome.diagnostics.clip_count);
        traj.h_used.push(h_try);
        traj.diagnostics.push(outcome.diagnostics);
        traj.states.push(y_new);
        t = t_new;

        if adaptive {
            let mut h_next = outcome.h_next;
            if block_growth {
                h_next = h_next.min(h_try);
                block_growth = false;
            }
            h = h_next;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use crate::pds::{GraphLaplacianModel, Invariant};
    use crate::sdirk::Method;

    fn still() -> Model {
        GraphLaplacianModel::new("still", 2, |_, _| DenseMatrix::zeros(2, 2)).into()
    }

    #[test]
    fn zero_rhs_fixed_step_count() {
        let cfg = SolverConfig::fixed(Method::Sdirk21, 0.3);
        let traj = integrate(&still(), &cfg, 0.0, 1.0, &[1.0, 2.0]).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        assert_eq!(traj.accepted_steps(), 4);
        assert_eq!(traj.final_time(), 1.0);
        assert!(traj.states.iter().all(|y| y.as_slice() == [1.0, 2.0]));
    }

    #[test]
    fn times_strictly_increase_and_land_on_tf() {
        let model: Model = GraphLaplacianModel::new("swap", 2, |_, _| {
            DenseMatrix::from_rows(&[vec![-3.0, 1.0], vec![3.0, -1.0]]).unwrap()
        })
        .with_invariant(Invariant::new("mass", vec![1.0, 1.0], true).unwrap())
        .into();
        let cfg = SolverConfig::adaptive(Method::Sdirk32, 1e-8, 1e-8);
        let traj = integrate(&model, &cfg, 0.0, 2.0, &[1.0, 0.0]).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        assert_eq!(traj.final_time(), 2.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        // Exact solution: y1 = 1/4 + 3/4 e^{-4t}.
        let exact = 0.25 + 0.75 * (-8.0f64).exp();
        assert!((traj.final_state()[0] - exact).abs() < 1e-6);
        assert!(traj.max_step_conservation_defect[0] < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let cfg = SolverConfig::fixed(Method::Sdirk21, 0.1);
        assert!(integrate(&still(), &cfg, 1.0, 1.0, &[1.0, 1.0]).is_err());
        assert!(integrate(&still(), &cfg, 0.0, 1.0, &[1.0]).is_err());
        let cfg = cfg.correction(CorrectionMode::Final);
        assert!(integrate(&still(), &cfg, 0.0, 1.0, &[1.0, -1.0]).is_err());
        assert!(integrate(&still(), &SolverConfig::fixed(Method::Sdirk21, -1.0), 0.0, 1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn deterministic() {
        let model: Model = GraphLaplacianModel::new("quad", 2, |_, y: &[f64]| {
            DenseMatrix::from_rows(&[vec![-y[0], 0.0], vec![y[0], 0.0]]).unwrap()
        })
        .into();
        let cfg = SolverConfig::adaptive(Method::Sdirk43, 1e-7, 1e-7).correction(CorrectionMode::Final);
        let a = integrate(&model, &cfg, 0.0, 5.0, &[1.0, 0.0]).unwrap();
        let b = integrate(&model, &cfg, 0.0, 5.0, &[1.0, 0.0]).unwrap();
        assert_eq!(a, b);
    }
}
