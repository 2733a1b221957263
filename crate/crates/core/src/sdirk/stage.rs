//! Implicit stage equation `Y = y_n + r + h a_ii f(t, Y)`.
//!
//! Simplified Newton with a finite-difference Jacobian, started from `y_n`.
//! G-form results get one frozen-G solve, `Y = (I - h a_ii G(t, Y))^{-1} b0`,
//! which restores every left-kernel invariant to round-off. If Newton
//! fails on a G-form model, frozen-G fixed-point iteration is tried
//! instead. H-form Jacobians are projected onto zero column sums so that
//! each Newton update conserves total mass.

use crate::error::{Error, Result};
use crate::numerics::{lu_solve, norm_inf, wrms_norm, DenseMatrix, LuFactors, Vector};
use crate::pds::{GraphLaplacianModel, Model};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSolverConfig {
    pub max_iter: usize,
    /// Relative tolerance on the iteration update, in WRMS measure.
    pub tol: f64,
}

impl Default for StageSolverConfig {
    fn default() -> Self {
        StageSolverConfig { max_iter: 50, tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct StageSolution {
    pub y: Vector,
    /// `f(t, Y)` at the returned stage value.
    pub f: Vector,
    /// `G(t, Y)` for G-form models, reused by the corrector.
    pub g: Option<DenseMatrix>,
    pub iterations: usize,
    pub used_newton: bool,
}

/// Factorized Newton matrix `I - h a_ii J`, kept across stages and steps
/// while `h a_ii` is unchanged.
#[derive(Debug, Default)]
pub(crate) struct NewtonCache {
    lu: Option<(LuFactors, f64)>,
}

impl NewtonCache {
    fn get(&self, ha: f64) -> Option<&LuFactors> {
        match &self.lu {
            Some((lu, key)) if *key == ha => Some(lu),
            _ => None,
        }
    }
}

/// Absolute part of the convergence weights, relative to the size of the
/// right-hand side.
const ABS_FLOOR: f64 = 1e-6;
/// An update that stops shrinking below this WRMS value is accepted as
/// converged to round-off.
const STAGNATION_ACCEPT: f64 = 1e3;
/// Jacobian rebuilds allowed within one stage solve.
const MAX_REFACTORS: usize = 8;

/// Solves one stage equation with `rhs_accum = h Σ_{j<i} a_ij f(Y_j)`.
pub fn solve_stage(
    model: &Model,
    t_stage: f64,
    y_n: &[f64],
    h: f64,
    a_ii: f64,
    rhs_accum: &[f64],
    cfg: &StageSolverConfig,
) -> Result<StageSolution> {
    solve_stage_cached(model, t_stage, y_n, h, a_ii, rhs_accum, cfg, &mut NewtonCache::default())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_stage_cached(
    model: &Model,
    t_stage: f64,
    y_n: &[f64],
    h: f64,
    a_ii: f64,
    rhs_accum: &[f64],
    cfg: &StageSolverConfig,
    cache: &mut NewtonCache,
) -> Result<StageSolution> {
    let d = model.dim();
    if y_n.len() != d || rhs_accum.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "stage of dimension {d} given vectors of length {} and {}",
            y_n.len(),
            rhs_accum.len()
        )));
    }
    let b0 = Vector::from_vec_unchecked(y_n.iter().zip(rhs_accum).map(|(a, b)| a + b).collect());
    let ha = h * a_ii;
    if ha == 0.0 {
        return Ok(finish(model, t_stage, b0, 0, false));
    }
    let atol = ABS_FLOOR * cfg.tol * b0.norm_inf().max(f64::MIN_POSITIVE);

    let mut iterations = 0;
    let start = Vector::from_vec_unchecked(y_n.to_vec());
    match newton(model, t_stage, &b0, ha, start, atol, cfg, &mut iterations, cache) {
        Ok(y) => {
            let y = match model {
                // One frozen-G solve restores exact conservation of kernel invariants.
                Model::G(gm) => lu_solve(&gm.g(t_stage, &y).identity_minus_scaled(ha), &b0)?,
                Model::H(_) => y,
            };
            Ok(finish(model, t_stage, y, iterations, true))
        }
        Err(e) => match model {
            Model::G(gm) => {
                log::debug!("newton failed at t = {t_stage} ({e}); trying fixed-point iteration");
                let y = picard(gm, t_stage, y_n, &b0, ha, atol, cfg)?;
                Ok(finish(model, t_stage, y, iterations + cfg.max_iter, false))
            }
            Model::H(_) => Err(e),
        },
    }
}

/// Frozen-G fixed-point iteration `Y <- (I - h a_ii G(t, Y))^{-1} b0`.
/// Every iterate is nonnegative when `b0` is.
fn picard(
    gm: &GraphLaplacianModel,
    t: f64,
    y_n: &[f64],
    b0: &Vector,
    ha: f64,
    atol: f64,
    cfg: &StageSolverConfig,
) -> Result<Vector> {
    let mut y = Vector::from_vec_unchecked(y_n.to_vec());
    let mut prev = f64::INFINITY;
    let mut r = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let next = lu_solve(&gm.g(t, &y).identity_minus_scaled(ha), b0)?;
        r = wrms_norm(&next.sub(&y), &next, atol, cfg.tol)?;
        y = next;
        if r <= 1.0 || (r <= STAGNATION_ACCEPT && r >= 0.9 * prev) {
            return Ok(y);
        }
        if !r.is_finite() {
            break;
        }
        prev = r;
    }
    Err(Error::StageNonConvergence { iterations: cfg.max_iter, residual: r })
}

fn finish(model: &Model, t: f64, y: Vector, iterations: usize, used_newton: bool) -> StageSolution {
    let (f, g) = match model {
        Model::G(gm) => {
            let g = gm.g(t, &y);
            let f = g.mul_vec(&y).expect("model dimension");
            (f, Some(g))
        }
        Model::H(hm) => (hm.rhs(&y), None),
    };
    StageSolution { y, f, g, iterations, used_newton }
}

/// Forward-difference Jacobian of `f(t, ·)` at `y`.
pub(crate) fn fd_jacobian(model: &Model, t: f64, y: &[f64]) -> DenseMatrix {
    let d = y.len();
    let f0 = model.rhs(t, y);
    let scale = norm_inf(y);
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jac = DenseMatrix::zeros(d, d);
    let mut yp = y.to_vec();
    for k in 0..d {
        let delta = sqrt_eps * y[k].abs().max(1e-8 * scale).max(f64::MIN_POSITIVE.sqrt());
        yp[k] = y[k] + delta;
        let step = yp[k] - y[k];
        let f1 = model.rhs(t, &yp);
        for i in 0..d {
            jac[(i, k)] = (f1[i] - f0[i]) / step;
        }
        yp[k] = y[k];
    }
    if let Model::H(_) = model {
        for k in 0..d {
            let colsum: f64 = (0..d).map(|i| jac[(i, k)]).sum();
            jac[(k, k)] -= colsum;
        }
    }
    jac
}

#[allow(clippy::too_many_arguments)]
fn newton(
    model: &Model,
    t: f64,
    b0: &Vector,
    ha: f64,
    mut y: Vector,
    atol: f64,
    cfg: &StageSolverConfig,
    iterations: &mut usize,
    cache: &mut NewtonCache,
) -> Result<Vector> {
    let refactor = |y: &[f64], cache: &mut NewtonCache| -> Result<()> {
        let m = fd_jacobian(model, t, y).identity_minus_scaled(ha);
        cache.lu = Some((LuFactors::factor(&m)?, ha));
        Ok(())
    };
    let mut fresh = false;
    if cache.get(ha).is_none() {
        refactor(&y, cache)?;
        fresh = true;
    }
    let mut prev = f64::INFINITY;
    let mut last = f64::INFINITY;
    let mut refactors = 0;
    while *iterations < cfg.max_iter {
        *iterations += 1;
        let f = model.rhs(t, &y);
        let resid: Vec<f64> = (0..y.len()).map(|i| b0[i] + ha * f[i] - y[i]).collect();
        let delta = cache.get(ha).expect("factorization present").solve(&resid)?;
        let next = Vector::from_vec_unchecked(y.iter().zip(delta.iter()).map(|(a, b)| a + b).collect());
        let r = wrms_norm(&delta, &next, atol, cfg.tol)?;
        if !r.is_finite() {
            break;
        }
        last = r;
        if r <= 1.0 || (fresh && r <= STAGNATION_ACCEPT && r >= 0.9 * prev) {
            return Ok(next);
        }
        if r > 0.5 * prev {
            // Slow or diverging: rebuild the Jacobian at the better of the
            // last two iterates.
            if refactors == MAX_REFACTORS {
                break;
            }
            if r < prev {
                y = next;
            }
            refactor(&y, cache)?;
            refactors += 1;
            fresh = true;
            prev = f64::INFINITY;
            continue;
        }
        y = next;
        prev = r;
    }
    cache.lu = None;
    Err(Error::StageNonConvergence { iterations: *iterations, residual: last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pds::{GraphLaplacianModel, HFormModel};

    fn linear(g: DenseMatrix) -> Model {
        let d = g.rows();
        GraphLaplacianModel::new("linear", d, move |_, _| g.clone()).into()
    }

    #[test]
    fn constant_g_converges_quickly() {
        let g = DenseMatrix::from_rows(&[vec![-2.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let model = linear(g.clone());
        let cfg = StageSolverConfig::default();
        let sol = solve_stage(&model, 0.0, &[0.7, 0.3], 0.5, 0.25, &[0.1, -0.05], &cfg).unwrap();
        let expect = crate::numerics::lu_solve(&g.identity_minus_scaled(0.125), &[0.8, 0.25]).unwrap();
        // Exact up to the finite-difference Jacobian error, which the third iterate removes.
        assert!(sol.iterations <= 3);
        for i in 0..2 {
            assert!((sol.y[i] - expect[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_stage() {
        let model = linear(DenseMatrix::from_rows(&[vec![-1.0]]).unwrap());
        let sol = solve_stage(&model, 0.0, &[2.0], 0.1, 0.0, &[0.5], &StageSolverConfig::default()).unwrap();
        assert_eq!(sol.y.as_slice(), &[2.5]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn hform_newton_conserves_mass() {
        // Nonlinear exchange: d_{12} = y1^2, d_{21} = y2.
        let model: Model = HFormModel::new("exchange", 2, |y: &[f64]| {
            let d = DenseMatrix::from_rows(&[vec![0.0, y[0] * y[0]], vec![y[1], 0.0]]).unwrap();
            crate::pds::assemble_h_from_destruction(&d).unwrap()
        })
        .into();
        let sol = solve_stage(&model, 0.0, &[1.0, 0.5], 0.3, 0.4, &[0.0, 0.0], &StageSolverConfig::default()).unwrap();
        assert!(sol.used_newton);
        assert!((sol.y[0] + sol.y[1] - 1.5).abs() < 1e-14);
        let f = model.rhs(0.0, &sol.y);
        for i in 0..2 {
            let r = sol.y[i] - [1.0, 0.5][i] - 0.12 * f[i];
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn robertson_stage_finds_physical_root() {
        // The y2 equation also has a root near -sqrt(0.04 / 3e7).
        let model: Model = crate::problems::robertson().into();
        for h in [0.01, 0.05, 0.2, 1.0] {
            match solve_stage(&model, 0.0, &[1.0, 0.0, 0.0], h, 0.29, &[0.0; 3], &StageSolverConfig::default()) {
                Ok(sol) => assert!(sol.y.min() >= 0.0, "h = {h}: {:?}", sol.y),
                Err(e) => assert!(h > 0.2, "h = {h}: {e}"),
            }
        }
    }
}
