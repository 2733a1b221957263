//! Patankar-type correction primitives.
//!
//! The corrector replaces the predictor `y_pred` by the solution of
//! `(I - h Ḡ) y = y_n`, where `Ḡ` averages graph Laplacians evaluated at
//! clipped stage values and right-scaled by ratio matrices. `I - h Ḡ` is an
//! M-matrix, so the result is nonnegative and keeps every left-kernel
//! invariant of `G`.
//!
//! Diagonal scaling matrices are passed around as their diagonals.

use crate::error::{Error, Result};
use crate::numerics::{lu_solve, DenseMatrix, Vector};

/// Relative threshold below which a post-solve component counts as a real
/// positivity defect rather than round-off.
pub const POST_SOLVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EpsilonMode {
    #[default]
    Fixed,
    /// `ε = coeff * h^(p+1)`.
    StepScaled,
}

/// Denominator floor used by ratio scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPolicy {
    pub mode: EpsilonMode,
    pub epsilon_fixed: f64,
    pub epsilon_coeff: f64,
}

impl Default for ScalingPolicy {
    fn default() -> Self {
        ScalingPolicy {
            mode: EpsilonMode::Fixed,
            epsilon_fixed: 1e-10,
            epsilon_coeff: 1.0,
        }
    }
}

impl ScalingPolicy {
    pub fn fixed(eps: f64) -> Self {
        ScalingPolicy {
            epsilon_fixed: eps,
            ..Self::default()
        }
    }

    pub fn step_scaled(coeff: f64) -> Self {
        ScalingPolicy {
            mode: EpsilonMode::StepScaled,
            epsilon_coeff: coeff,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match self.mode {
            EpsilonMode::Fixed => self.epsilon_fixed,
            EpsilonMode::StepScaled => self.epsilon_coeff,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon parameter must be positive, got {v}")));
        }
        Ok(())
    }

    /// ε for a step of size `h` with a method of order `p`. Never zero.
    pub fn resolve(&self, h: f64, p: u32) -> f64 {
        match self.mode {
            EpsilonMode::Fixed => self.epsilon_fixed,
            EpsilonMode::StepScaled => (self.epsilon_coeff * h.powi(p as i32 + 1)).max(f64::MIN_POSITIVE),
        }
    }
}

/// What the correction did during one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrectionDiagnostics {
    /// Components clipped in stage arguments and predictor values.
    pub clip_count: usize,
    /// Magnitude of the most negative clipped value; zero when nothing was clipped.
    pub max_negative_clipped: f64,
    /// True when some ratio differs from the plain quotient, i.e. a numerator
    /// was clipped or a denominator hit the ε floor.
    pub scaling_active: bool,
    /// Smallest component returned by the linear solve, before any cleanup.
    pub post_solve_min_component: f64,
    /// Components below `-POST_SOLVE_TOL * ‖y_n‖∞` that were set to zero.
    pub post_solve_clipped: usize,
    /// Total mass removed or added by that cleanup (sum of clipped values).
    pub post_solve_defect: f64,
}

impl CorrectionDiagnostics {
    fn record_clips(&mut self, v: &[f64]) {
        for &x in v {
            if x < 0.0 {
                self.clip_count += 1;
                self.max_negative_clipped = self.max_negative_clipped.max(-x);
            }
        }
    }

    pub fn merge(&mut self, other: &CorrectionDiagnostics) {
        self.clip_count += other.clip_count;
        self.max_negative_clipped = self.max_negative_clipped.max(other.max_negative_clipped);
        self.scaling_active |= other.scaling_active;
        self.post_solve_min_component = self.post_solve_min_component.min(other.post_solve_min_component);
        self.post_solve_clipped += other.post_solve_clipped;
        self.post_solve_defect += other.post_solve_defect;
    }
}

/// `max(v, 0)` componentwise.
pub fn clip(v: &[f64]) -> Vector {
    Vector::from_vec_unchecked(v.iter().map(|x| x.max(0.0)).collect())
}

/// Diagonal of `Σ_{Y/Z}`: `max(Y_l, 0) / max(Z_l, eps)`.
pub fn ratio_scaling(y: &[f64], z: &[f64], eps: f64) -> Result<Vector> {
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "ratio numerator has {} entries, denominator {}",
            y.len(),
            z.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {eps}")));
    }
    Ok(Vector::from_vec_unchecked(
        y.iter().zip(z).map(|(a, b)| a.max(0.0) / b.max(eps)).collect(),
    ))
}

/// True when `Σ_{Y/Z}` differs from `diag(Y/Z)`.
fn ratio_is_modified(y: &[f64], z: &[f64], eps: f64) -> bool {
    y.iter().any(|&a| a < 0.0) || z.iter().any(|&b| b < eps)
}

fn check_same_shape(mats: &[&DenseMatrix], diags: &[&[f64]]) -> Result<usize> {
    let d = mats.first().map_or(0, |m| m.rows());
    for m in mats {
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "expected {d}x{d} matrices, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    for s in diags {
        if s.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "scaling has {} entries for dimension {d}",
                s.len()
            )));
        }
    }
    Ok(d)
}

/// `Σ_j b_j G_j diag(σ_j)`.
pub fn averaged_g_final<S: AsRef<[f64]>>(
    b: &[f64],
    g_list: &[DenseMatrix],
    sigma_list: &[S],
) -> Result<DenseMatrix> {
    if b.len() != g_list.len() || b.len() != sigma_list.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights, {} matrices, {} scalings",
            b.len(),
            g_list.len(),
            sigma_list.len()
        )));
    }
    let mats: Vec<&DenseMatrix> = g_list.iter().collect();
    let diags: Vec<&[f64]> = sigma_list.iter().map(AsRef::as_ref).collect();
    let d = check_same_shape(&mats, &diags)?;
    let mut out = DenseMatrix::zeros(d, d);
    for ((bj, g), s) in b.iter().zip(g_list).zip(&diags) {
        if *bj == 0.0 {
            continue;
        }
        out.add_scaled(*bj, &g.scale_columns(s)?)?;
    }
    Ok(out)
}

/// Solves `(I - h Ḡ) y = y_n`. The raw solution is returned; diagnostics
/// carry its smallest component.
pub fn corrector_solve(y_n: &[f64], h: f64, g_bar: &DenseMatrix) -> Result<(Vector, CorrectionDiagnostics)> {
    if g_bar.rows() != y_n.len() || !g_bar.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "corrector matrix {}x{} for state of length {}",
            g_bar.rows(),
            g_bar.cols(),
            y_n.len()
        )));
    }
    let y = lu_solve(&g_bar.identity_minus_scaled(h), y_n)?;
    let diagnostics = CorrectionDiagnostics {
        post_solve_min_component: y.min(),
        ..Default::default()
    };
    Ok((y, diagnostics))
}

/// Clears post-solve negatives. Values below `-POST_SOLVE_TOL * ‖y_n‖∞` are
/// counted as defects in `diag`; round-off negatives are zeroed silently.
pub fn finalize_nonnegative(y: &mut Vector, y_n_norm: f64, diag: &mut CorrectionDiagnostics) {
    let threshold = -POST_SOLVE_TOL * y_n_norm;
    for v in y.iter_mut() {
        if *v < 0.0 {
            if *v < threshold {
                diag.post_solve_clipped += 1;
                diag.post_solve_defect += *v;
            }
            *v = 0.0;
        }
    }
}

/// `Ḡ_i = Σ_{j<i} a_ij G_j diag(σ_j) + a_ii G_diag`.
pub fn stage_corrected_g<S: AsRef<[f64]>>(
    a_row: &[f64],
    g_prior: &[DenseMatrix],
    sigma_prior: &[S],
    g_diag: &DenseMatrix,
) -> Result<DenseMatrix> {
    let i = a_row.len();
    if i == 0 || g_prior.len() != i - 1 || sigma_prior.len() != i - 1 {
        return Err(Error::DimensionMismatch(format!(
            "stage row of length {i} needs {} prior matrices and scalings, got {} and {}",
            i.saturating_sub(1),
            g_prior.len(),
            sigma_prior.len()
        )));
    }
    let mut out = if i == 1 {
        DenseMatrix::zeros(g_diag.rows(), g_diag.cols())
    } else {
        averaged_g_final(&a_row[..i - 1], g_prior, sigma_prior)?
    };
    if out.rows() != g_diag.rows() || out.cols() != g_diag.cols() {
        return Err(Error::DimensionMismatch("diagonal-stage matrix shape".into()));
    }
    out.add_scaled(a_row[i - 1], g_diag)?;
    Ok(out)
}

/// Final-stage corrector for H-form models:
/// `H̄ = (Σ_j b_j H_j) Σ_{1/y_pred}`, then `(I - h H̄) y = y_n`.
pub fn h_form_corrector(
    y_n: &[f64],
    h: f64,
    b: &[f64],
    h_list: &[DenseMatrix],
    y_pred: &[f64],
    eps: f64,
) -> Result<(Vector, CorrectionDiagnostics)> {
    let d = y_n.len();
    let ones = vec![1.0; d];
    let sigma = ratio_scaling(&ones, y_pred, eps)?;
    let sigmas = vec![sigma; h_list.len()];
    let h_bar = averaged_g_final(b, h_list, &sigmas)?;
    let (y, mut diag) = corrector_solve(y_n, h, &h_bar)?;
    diag.scaling_active = y_pred.iter().any(|&v| v < eps);
    Ok((y, diag))
}

/// Clipped stage arguments and the per-stage ratio scalings for the
/// final-stage corrector. Returns `(clipped args, sigmas, diagnostics)`.
/// With `clip_args == false` (strong-sign models) the raw stages are used
/// as arguments.
pub fn final_stage_inputs(
    stages: &[Vector],
    y_pred: &[f64],
    eps: f64,
    clip_args: bool,
) -> Result<(Vec<Vector>, Vec<Vector>, CorrectionDiagnostics)> {
    let mut diag = CorrectionDiagnostics::default();
    let mut args = Vec::with_capacity(stages.len());
    let mut sigmas = Vec::with_capacity(stages.len());
    for y in stages {
        diag.record_clips(y);
        diag.scaling_active |= ratio_is_modified(y, y_pred, eps);
        sigmas.push(ratio_scaling(y, y_pred, eps)?);
        args.push(if clip_args { clip(y) } else { y.clone() });
    }
    diag.record_clips(y_pred);
    Ok((args, sigmas, diag))
}

/// Records clipping of a predicted stage in `diag`.
pub(crate) fn note_clipped(diag: &mut CorrectionDiagnostics, v: &[f64]) {
    diag.record_clips(v);
}
