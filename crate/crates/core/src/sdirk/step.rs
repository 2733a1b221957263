//! A single SDIRK step: predictor, then the selected correction.

use crate::error::{Error, Result};
use crate::numerics::{wrms_norm, DenseMatrix, Vector};
use crate::patankar::{
    averaged_g_final, clip, corrector_solve, final_stage_inputs, finalize_nonnegative, h_form_corrector,
    note_clipped, ratio_scaling, stage_corrected_g, CorrectionDiagnostics,
};
use crate::pds::Model;

use super::stage::{solve_stage_cached, NewtonCache, StageSolverConfig};
use super::{ButcherTableau, CorrectionMode, SolverConfig, StepMode};

/// Stages and solutions of an uncorrected SDIRK step.
#[derive(Clone, Debug)]
pub struct PredictorResult {
    pub stages: Vec<Vector>,
    /// `f(t_n + c_j h, Y_j)` for each stage.
    pub stage_derivs: Vec<Vector>,
    /// `G` at each stage for G-form models.
    pub stage_g: Vec<Option<DenseMatrix>>,
    pub y_pred: Vector,
    pub y_hat: Vector,
}

/// Result of one attempted step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub accepted: bool,
    pub t_new: f64,
    pub y_pred: Vector,
    pub y_corrected: Vector,
    pub y_hat: Vector,
    pub stages: Vec<Vector>,
    pub err: f64,
    pub h_used: f64,
    pub h_next: f64,
    pub diagnostics: CorrectionDiagnostics,
}

/// `y_pred - h Σ (b_j - b̂_j) F_j`.
fn embedded(tab: &ButcherTableau, h: f64, y_pred: &Vector, derivs: &[Vector]) -> Vector {
    let mut y_hat = y_pred.clone();
    for (e, f) in tab.error_weights().iter().zip(derivs) {
        y_hat.axpy(-h * e, f);
    }
    y_hat
}

fn accumulate(tab: &ButcherTableau, i: usize, h: f64, derivs: &[Vector], d: usize) -> Vector {
    let mut acc = Vector::zeros(d);
    for (j, f) in derivs.iter().enumerate().take(i) {
        let a = tab.a[i][j];
        if a != 0.0 {
            acc.axpy(h * a, f);
        }
    }
    acc
}

/// Plain SDIRK step. For stiffly accurate tableaus the predictor is the
/// last stage itself.
pub fn predictor_step(
    model: &Model,
    t_n: f64,
    y_n: &[f64],
    h: f64,
    tab: &ButcherTableau,
    stage_cfg: &StageSolverConfig,
) -> Result<PredictorResult> {
    predictor_step_cached(model, t_n, y_n, h, tab, stage_cfg, &mut NewtonCache::default())
}

pub(crate) fn predictor_step_cached(
    model: &Model,
    t_n: f64,
    y_n: &[f64],
    h: f64,
    tab: &ButcherTableau,
    stage_cfg: &StageSolverConfig,
    cache: &mut NewtonCache,
) -> Result<PredictorResult> {
    let d = model.dim();
    let mut stages = Vec::with_capacity(tab.s);
    let mut stage_derivs: Vec<Vector> = Vec::with_capacity(tab.s);
    let mut stage_g = Vec::with_capacity(tab.s);
    for i in 0..tab.s {
        let acc = accumulate(tab, i, h, &stage_derivs, d);
        let sol = solve_stage_cached(model, t_n + tab.c[i] * h, y_n, h, tab.a[i][i], &acc, stage_cfg, cache)?;
        stages.push(sol.y);
        stage_derivs.push(sol.f);
        stage_g.push(sol.g);
    }
    let y_pred = if tab.stiffly_accurate {
        stages[tab.s - 1].clone()
    } else {
        let mut y = Vector::from_vec_unchecked(y_n.to_vec());
        for (b, f) in tab.b.iter().zip(&stage_derivs) {
            y.axpy(h * b, f);
        }
        y
    };
    let y_hat = embedded(tab, h, &y_pred, &stage_derivs);
    Ok(PredictorResult { stages, stage_derivs, stage_g, y_pred, y_hat })
}

/// One step with the correction selected in `config`. The error estimate
/// always comes from the uncorrected predictor.
pub fn corrected_step(model: &Model, t_n: f64, y_n: &[f64], h: f64, config: &SolverConfig) -> Result<StepOutcome> {
    corrected_step_cached(model, t_n, y_n, h, config, &mut NewtonCache::default())
}

pub(crate) fn corrected_step_cached(
    model: &Model,
    t_n: f64,
    y_n: &[f64],
    h: f64,
    config: &SolverConfig,
    cache: &mut NewtonCache,
) -> Result<StepOutcome> {
    let tab = &config.tableau;
    if y_n.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} for model of dimension {}",
            y_n.len(),
            model.dim()
        )));
    }
    let eps = config.scaling.resolve(h, tab.p);
    let y_n_norm = crate::numerics::norm_inf(y_n);

    let (y_pred, y_hat, y_corrected, stages, diagnostics) = match config.correction {
        CorrectionMode::None => {
            let pr = predictor_step_cached(model, t_n, y_n, h, tab, &config.stage_solver, cache)?;
            let diag = CorrectionDiagnostics {
                post_solve_min_component: pr.y_pred.min(),
                ..Default::default()
            };
            (pr.y_pred.clone(), pr.y_hat, pr.y_pred, pr.stages, diag)
        }
        CorrectionMode::Final => {
            let pr = predictor_step_cached(model, t_n, y_n, h, tab, &config.stage_solver, cache)?;
            let (mut y, mut diag) = final_correction(model, t_n, y_n, h, tab, &pr, eps)?;
            finalize_nonnegative(&mut y, y_n_norm, &mut diag);
            (pr.y_pred, pr.y_hat, y, pr.stages, diag)
        }
        CorrectionMode::AllStages => {
            if !tab.stiffly_accurate {
                return Err(Error::InvalidConfig(format!(
                    "all-stages correction needs a stiffly accurate tableau; {} is not",
                    tab.name
                )));
            }
            all_stages(model, t_n, y_n, h, tab, &config.stage_solver, eps, y_n_norm, cache)?
        }
    };

    let (atol, rtol) = config.tolerances();
    let delta = y_pred.sub(&y_hat);
    let err = wrms_norm(&delta, &y_pred, atol, rtol)?;
    let (accepted, h_next) = match config.mode {
        StepMode::Adaptive { .. } => {
            let ok = err.is_finite() && err <= 1.0;
            (ok, h * config.controller.factor(err, tab.p_hat))
        }
        StepMode::Fixed { .. } => (true, h),
    };
    Ok(StepOutcome {
        accepted,
        t_new: t_n + h,
        y_pred,
        y_corrected,
        y_hat,
        stages,
        err,
        h_used: h,
        h_next,
        diagnostics,
    })
}

fn final_correction(
    model: &Model,
    t_n: f64,
    y_n: &[f64],
    h: f64,
    tab: &ButcherTableau,
    pr: &PredictorResult,
    eps: f64,
) -> Result<(Vector, CorrectionDiagnostics)> {
    match model {
        Model::G(gm) => {
            let (args, sigmas, diag) = final_stage_inputs(&pr.stages, &pr.y_pred, eps, !gm.strong_sign())?;
            let mats: Vec<DenseMatrix> = (0..tab.s)
                .map(|j| match &pr.stage_g[j] {
                    Some(g) if args[j] == pr.stages[j] => g.clone(),
                    _ => gm.g(t_n + tab.c[j] * h, &args[j]),
                })
                .collect();
            let g_bar = averaged_g_final(&tab.b, &mats, &sigmas)?;
            let (y, solve_diag) = corrector_solve(y_n, h, &g_bar)?;
            Ok((y, with_solve(diag, solve_diag)))
        }
        Model::H(hm) => {
            let mut diag = CorrectionDiagnostics::default();
            for st in &pr.stages {
                note_clipped(&mut diag, st);
            }
            note_clipped(&mut diag, &pr.y_pred);
            let mats: Vec<DenseMatrix> = pr.stages.iter().map(|st| hm.h(&clip(st))).collect();
            let (y, solve_diag) = h_form_corrector(y_n, h, &tab.b, &mats, &pr.y_pred, eps)?;
            Ok((y, with_solve(diag, solve_diag)))
        }
    }
}

fn with_solve(mut diag: CorrectionDiagnostics, solve: CorrectionDiagnostics) -> CorrectionDiagnostics {
    diag.scaling_active |= solve.scaling_active;
    diag.post_solve_min_component = solve.post_solve_min_component;
    diag
}

type StepParts = (Vector, Vector, Vector, Vec<Vector>, CorrectionDiagnostics);

/// Predicts and corrects every stage in turn. The returned predictor is the
/// uncorrected last stage computed from the corrected earlier stages.
#[allow(clippy::too_many_arguments)]
fn all_stages(
    model: &Model,
    t_n: f64,
    y_n: &[f64],
    h: f64,
    tab: &ButcherTableau,
    stage_cfg: &StageSolverConfig,
    eps: f64,
    y_n_norm: f64,
    cache: &mut NewtonCache,
) -> Result<StepParts> {
    let d = model.dim();
    let s = tab.s;
    let mut corrected: Vec<Vector> = Vec::with_capacity(s);
    let mut derivs: Vec<Vector> = Vec::with_capacity(s);
    let mut mats: Vec<DenseMatrix> = Vec::with_capacity(s);
    let mut diag = CorrectionDiagnostics {
        post_solve_min_component: f64::INFINITY,
        ..Default::default()
    };
    let mut y_pred = Vector::zeros(d);
    let mut f_pred = Vector::zeros(d);

    for i in 0..s {
        let t_i = t_n + tab.c[i] * h;
        let acc = accumulate(tab, i, h, &derivs, d);
        let sol = solve_stage_cached(model, t_i, y_n, h, tab.a[i][i], &acc, stage_cfg, cache)?;
        let yp = sol.y;
        note_clipped(&mut diag, &yp);
        diag.scaling_active |= yp.iter().any(|&v| v < eps);

        let (mut y_i, solve_diag) = match model {
            Model::G(gm) => {
                let clip_args = !gm.strong_sign();
                let g_diag = match sol.g {
                    Some(g) if !clip_args || yp.min() >= 0.0 => g,
                    _ => gm.g(t_i, &clip(&yp)),
                };
                let sigmas = corrected
                    .iter()
                    .map(|yj| ratio_scaling(yj, &yp, eps))
                    .collect::<Result<Vec<_>>>()?;
                let g_bar = stage_corrected_g(&tab.a[i][..=i], &mats, &sigmas, &g_diag)?;
                corrector_solve(y_n, h, &g_bar)?
            }
            Model::H(hm) => {
                let mut h_sum = DenseMatrix::zeros(d, d);
                h_sum.add_scaled(tab.a[i][i], &hm.h(&clip(&yp)))?;
                for (j, hj) in mats.iter().enumerate() {
                    h_sum.add_scaled(tab.a[i][j], hj)?;
                }
                let sigma = ratio_scaling(&vec![1.0; d], &yp, eps)?;
                corrector_solve(y_n, h, &h_sum.scale_columns(&sigma)?)?
            }
        };
        diag.post_solve_min_component = diag.post_solve_min_component.min(solve_diag.post_solve_min_component);
        finalize_nonnegative(&mut y_i, y_n_norm, &mut diag);

        if i == s - 1 {
            y_pred = yp;
            f_pred = sol.f;
        }
        let (m_i, f_i) = match model {
            Model::G(gm) => {
                let g = gm.g(t_i, &y_i);
                let f = g.mul_vec(&y_i)?;
                (g, f)
            }
            Model::H(hm) => {
                let hmat = hm.h(&y_i);
                let f = hm.rhs(&y_i);
                (hmat, f)
            }
        };
        mats.push(m_i);
        derivs.push(f_i);
        corrected.push(y_i);
    }

    let mut used = derivs.clone();
    used[s - 1] = f_pred;
    let y_hat = embedded(tab, h, &y_pred, &used);
    let y_corrected = corrected.last().expect("at least one stage").clone();
    Ok((y_pred, y_hat, y_corrected, corrected, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pds::GraphLaplacianModel;
    use crate::sdirk::Method;

    fn decay() -> Model {
        GraphLaplacianModel::new("decay", 1, |_, _| DenseMatrix::from_rows(&[vec![-1.0]]).unwrap()).into()
    }

    /// Stability function `R(z) = 1 + z bᵀ (I - zA)^{-1} 1` evaluated by
    /// forward substitution on the lower-triangular `A`.
    fn stability(tab: &ButcherTableau, z: f64) -> f64 {
        let s = tab.s;
        let mut k = vec![0.0; s];
        for i in 0..s {
            let mut r = 1.0;
            for j in 0..i {
                r += z * tab.a[i][j] * k[j];
            }
            k[i] = r / (1.0 - z * tab.a[i][i]);
        }
        1.0 + z * tab.b.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>()
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let model: Model = GraphLaplacianModel::new("zero", 2, |_, _| DenseMatrix::zeros(2, 2)).into();
        let pr = predictor_step(&model, 0.0, &[0.3, 0.7], 0.5, &Method::Sdirk32.tableau(), &Default::default()).unwrap();
        assert_eq!(pr.y_pred.as_slice(), &[0.3, 0.7]);
        for st in &pr.stages {
            assert_eq!(st.as_slice(), &[0.3, 0.7]);
        }
    }

    #[test]
    fn scalar_decay_matches_stability_function() {
        for m in Method::ALL {
            let tab = m.tableau();
            let pr = predictor_step(&decay(), 0.0, &[1.0], 0.1, &tab, &Default::default()).unwrap();
            let r = stability(&tab, -0.1);
            assert!((pr.y_pred[0] - r).abs() < 1e-15, "{m}: {} vs {r}", pr.y_pred[0]);
        }
        // Closed form for the two-stage method.
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let z = -0.1;
        let k1 = 1.0 / (1.0 - g * z);
        let k2 = (1.0 + z * std::f64::consts::FRAC_1_SQRT_2 * k1) / (1.0 - g * z);
        assert!((k2 - stability(&Method::Sdirk21.tableau(), z)).abs() < 1e-15);
    }

    #[test]
    fn stiffly_accurate_predictor_is_last_stage() {
        for m in Method::ALL {
            let tab = m.tableau();
            let pr = predictor_step(&decay(), 0.0, &[1.0], 0.3, &tab, &Default::default()).unwrap();
            assert_eq!(pr.y_pred, pr.stages[tab.s - 1]);
        }
    }

    #[test]
    fn positive_linear_decay_correction_inactive() {
        let model: Model = GraphLaplacianModel::new("chain", 3, |_, _| {
            DenseMatrix::from_rows(&[vec![-1.0, 0.0, 0.0], vec![1.0, -0.5, 0.0], vec![0.0, 0.5, 0.0]]).unwrap()
        })
        .into();
        for m in Method::ALL {
            for mode in [CorrectionMode::Final, CorrectionMode::AllStages] {
                let cfg = SolverConfig::fixed(m, 0.1).correction(mode);
                let out = corrected_step(&model, 0.0, &[1.0, 0.5, 0.2], 0.1, &cfg).unwrap();
                let rel = out.y_corrected.sub(&out.y_pred).norm_inf() / out.y_pred.norm_inf();
                assert!(rel <= 1e-12, "{m} {mode}: {rel}");
                assert_eq!(out.diagnostics.clip_count, 0);
            }
        }
    }

    #[test]
    fn all_stages_rejects_non_stiffly_accurate() {
        let a = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        let tab = ButcherTableau::new("mid", a, vec![0.5, 0.5], vec![1.0, 0.0], vec![0.5, 0.5], 1, 1, 1).unwrap();
        let cfg = SolverConfig::fixed(Method::Sdirk21, 0.1).tableau(tab).correction(CorrectionMode::AllStages);
        assert!(matches!(corrected_step(&decay(), 0.0, &[1.0], 0.1, &cfg), Err(Error::InvalidConfig(_))));
    }
}
