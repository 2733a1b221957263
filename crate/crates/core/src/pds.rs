//! Production-destruction model abstractions.
//!
//! Two shapes are supported:
//!
//! - [`GraphLaplacianModel`]: `y' = G(t, y) y` where `G` has a nonpositive
//!   diagonal, nonnegative off-diagonal entries, and declared left-kernel
//!   vectors `w` with `wᵀ G = 0`.
//! - [`HFormModel`]: `y' = H(y) 1` where `H = Dᵀ - diag(D 1)` is built
//!   from nonnegative destruction rates and has zero column sums.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{norm_inf, DenseMatrix, Vector};

/// Relative tolerance on `‖wᵀG‖∞ / (‖G‖∞ ‖w‖∞)` for invariants flagged exact.
pub const KERNEL_TOL: f64 = 1e-10;

pub type GFn = dyn Fn(f64, &[f64]) -> DenseMatrix + Send + Sync;
pub type HFn = dyn Fn(&[f64]) -> DenseMatrix + Send + Sync;
pub type RhsFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A linear invariant `wᵀ y`. `exact` marks vectors in the left kernel of
/// the model matrix; other invariants are only reported.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    pub label: String,
    pub w: Vector,
    pub exact: bool,
}

impl Invariant {
    pub fn new(label: impl Into<String>, w: Vec<f64>, exact: bool) -> Result<Self> {
        Ok(Invariant {
            label: label.into(),
            w: Vector::new(w)?,
            exact,
        })
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.w.dot(y)
    }
}

/// `y' = G(t, y) y`.
#[derive(Clone)]
pub struct GraphLaplacianModel {
    label: String,
    dim: usize,
    eval_g: Arc<GFn>,
    invariants: Vec<Invariant>,
    strong_sign: bool,
    nonneg_domain_only: bool,
    autonomous: bool,
    y_scale: Vector,
    t_range: (f64, f64),
}

impl fmt::Debug for GraphLaplacianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphLaplacianModel")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("invariants", &self.invariants)
            .field("strong_sign", &self.strong_sign)
            .field("autonomous", &self.autonomous)
            .finish_non_exhaustive()
    }
}

impl GraphLaplacianModel {
    pub fn new<F>(label: impl Into<String>, dim: usize, eval_g: F) -> Self
    where
        F: Fn(f64, &[f64]) -> DenseMatrix + Send + Sync + 'static,
    {
        GraphLaplacianModel {
            label: label.into(),
            dim,
            eval_g: Arc::new(eval_g),
            invariants: Vec::new(),
            strong_sign: false,
            nonneg_domain_only: true,
            autonomous: true,
            y_scale: Vector::ones(dim),
            t_range: (0.0, 1.0),
        }
    }

    pub fn with_invariant(mut self, inv: Invariant) -> Self {
        assert_eq!(inv.w.dim(), self.dim, "invariant dimension");
        self.invariants.push(inv);
        self
    }

    /// Declares that the sign pattern holds for every `y`, not just `y ⪰ 0`.
    /// Such models skip clipping of the corrector's stage arguments.
    pub fn with_strong_sign(mut self, strong: bool) -> Self {
        self.strong_sign = strong;
        self.nonneg_domain_only = !strong;
        self
    }

    /// Marks `G` as time dependent; `t_range` bounds the times sampled by
    /// [`GraphLaplacianModel::check_structure`].
    pub fn non_autonomous(mut self, t_range: (f64, f64)) -> Self {
        self.autonomous = false;
        self.t_range = t_range;
        self
    }

    /// Per-component upper bound for random structural samples.
    pub fn with_y_scale(mut self, scale: Vec<f64>) -> Self {
        assert_eq!(scale.len(), self.dim, "scale dimension");
        self.y_scale = Vector::from_vec_unchecked(scale);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn invariants(&self) -> &[Invariant] {
        &self.invariants
    }

    pub fn strong_sign(&self) -> bool {
        self.strong_sign
    }

    pub fn nonneg_domain_only(&self) -> bool {
        self.nonneg_domain_only
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn y_scale(&self) -> &Vector {
        &self.y_scale
    }

    pub fn g(&self, t: f64, y: &[f64]) -> DenseMatrix {
        debug_assert_eq!(y.len(), self.dim);
        (self.eval_g)(t, y)
    }

    pub fn rhs(&self, t: f64, y: &[f64]) -> Vector {
        self.g(t, y).mul_vec(y).expect("model matrix has model dimension")
    }

    /// Samples `n` random states `y ∈ [0, y_scale]` (and times in the
    /// model's time range) and checks the sign pattern and every exact
    /// invariant. `sign_tol_rel` is relative to `‖G‖∞`.
    pub fn check_structure(&self, n: usize, seed: u64, sign_tol_rel: f64) -> StructureReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = StructureReport::default();
        for _ in 0..n {
            let y: Vec<f64> = self.y_scale.iter().map(|s| rng.gen::<f64>() * s).collect();
            let t = if self.autonomous {
                0.0
            } else {
                rng.gen_range(self.t_range.0..=self.t_range.1)
            };
            let g = self.g(t, &y);
            report.merge(check_matrix(&g, &self.invariants, sign_tol_rel));
        }
        report
    }
}

/// `y' = H(y) 1` with zero column sums in `H`.
#[derive(Clone)]
pub struct HFormModel {
    label: String,
    dim: usize,
    eval_h: Arc<HFn>,
    rhs: Option<Arc<RhsFn>>,
    invariants: Vec<Invariant>,
    y_scale: Vector,
}

impl fmt::Debug for HFormModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HFormModel")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("invariants", &self.invariants)
            .finish_non_exhaustive()
    }
}

impl HFormModel {
    pub fn new<F>(label: impl Into<String>, dim: usize, eval_h: F) -> Self
    where
        F: Fn(&[f64]) -> DenseMatrix + Send + Sync + 'static,
    {
        HFormModel {
            label: label.into(),
            dim,
            eval_h: Arc::new(eval_h),
            rhs: None,
            invariants: Vec::new(),
            y_scale: Vector::ones(dim),
        }
    }

    /// Supplies a direct evaluation of `H(y) 1` that skips dense assembly.
    pub fn with_rhs<F>(mut self, rhs: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.rhs = Some(Arc::new(rhs));
        self
    }

    pub fn with_invariant(mut self, inv: Invariant) -> Self {
        assert_eq!(inv.w.dim(), self.dim, "invariant dimension");
        self.invariants.push(inv);
        self
    }

    pub fn with_y_scale(mut self, scale: Vec<f64>) -> Self {
        assert_eq!(scale.len(), self.dim, "scale dimension");
        self.y_scale = Vector::from_vec_unchecked(scale);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn invariants(&self) -> &[Invariant] {
        &self.invariants
    }

    pub fn y_scale(&self) -> &Vector {
        &self.y_scale
    }

    pub fn h(&self, y: &[f64]) -> DenseMatrix {
        debug_assert_eq!(y.len(), self.dim);
        (self.eval_h)(y)
    }

    pub fn rhs(&self, y: &[f64]) -> Vector {
        match &self.rhs {
            Some(f) => Vector::from_vec_unchecked(f(y)),
            None => {
                let h = self.h(y);
                Vector::from_vec_unchecked((0..self.dim).map(|i| h.row(i).iter().sum()).collect())
            }
        }
    }

    /// Same sampling check as the G-form variant, applied to `H(y)`.
    pub fn check_structure(&self, n: usize, seed: u64, sign_tol_rel: f64) -> StructureReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = StructureReport::default();
        for _ in 0..n {
            let y: Vec<f64> = self.y_scale.iter().map(|s| rng.gen::<f64>() * s).collect();
            let h = self.h(&y);
            report.merge(check_matrix(&h, &self.invariants, sign_tol_rel));
        }
        report
    }
}

/// Either model shape, as consumed by the integrators.
#[derive(Clone, Debug)]
pub enum Model {
    G(GraphLaplacianModel),
    H(HFormModel),
}

impl Model {
    pub fn label(&self) -> &str {
        match self {
            Model::G(m) => m.label(),
            Model::H(m) => m.label(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::G(m) => m.dim(),
            Model::H(m) => m.dim(),
        }
    }

    pub fn invariants(&self) -> &[Invariant] {
        match self {
            Model::G(m) => m.invariants(),
            Model::H(m) => m.invariants(),
        }
    }

    pub fn is_autonomous(&self) -> bool {
        match self {
            Model::G(m) => m.is_autonomous(),
            Model::H(_) => true,
        }
    }

    pub fn rhs(&self, t: f64, y: &[f64]) -> Vector {
        match self {
            Model::G(m) => m.rhs(t, y),
            Model::H(m) => m.rhs(y),
        }
    }

    pub fn check_structure(&self, n: usize, seed: u64, sign_tol_rel: f64) -> StructureReport {
        match self {
            Model::G(m) => m.check_structure(n, seed, sign_tol_rel),
            Model::H(m) => m.check_structure(n, seed, sign_tol_rel),
        }
    }
}

impl From<GraphLaplacianModel> for Model {
    fn from(m: GraphLaplacianModel) -> Self {
        Model::G(m)
    }
}

impl From<HFormModel> for Model {
    fn from(m: HFormModel) -> Self {
        Model::H(m)
    }
}

/// Outcome of structural checks. Empty lists mean every check passed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructureReport {
    pub sign_violations: Vec<(usize, usize, f64)>,
    pub kernel_residuals: Vec<(usize, f64)>,
    pub samples_checked: usize,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.sign_violations.is_empty() && self.kernel_residuals.is_empty()
    }

    fn merge(&mut self, other: StructureReport) {
        self.sign_violations.extend(other.sign_violations);
        self.kernel_residuals.extend(other.kernel_residuals);
        self.samples_checked += other.samples_checked;
    }
}

fn check_matrix(m: &DenseMatrix, invariants: &[Invariant], sign_tol_rel: f64) -> StructureReport {
    let scale = m.norm_inf();
    let mut report = validate_sign_structure(m, sign_tol_rel * scale);
    for (k, inv) in invariants.iter().enumerate().filter(|(_, inv)| inv.exact) {
        let r = validate_left_kernel(m, &inv.w).expect("invariant has model dimension");
        if r > KERNEL_TOL * scale * inv.w.norm_inf() {
            report.kernel_residuals.push((k, r));
        }
    }
    report
}

/// Lists diagonal entries above `tol` and off-diagonal entries below `-tol`.
pub fn validate_sign_structure(m: &DenseMatrix, tol: f64) -> StructureReport {
    let mut sign_violations = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m[(i, j)];
            let bad = if i == j { v > tol } else { v < -tol };
            if bad {
                sign_violations.push((i, j, v));
            }
        }
    }
    StructureReport {
        sign_violations,
        kernel_residuals: Vec::new(),
        samples_checked: 1,
    }
}

/// `‖wᵀ M‖∞`.
pub fn validate_left_kernel(m: &DenseMatrix, w: &[f64]) -> Result<f64> {
    Ok(m.left_mul_vec(w)?.norm_inf())
}

fn check_rates(r: &DenseMatrix) -> Result<()> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "rate matrix must be square, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    for i in 0..r.rows() {
        for j in 0..r.cols() {
            if r[(i, j)] < 0.0 {
                return Err(Error::NegativeRate { row: i, col: j, value: r[(i, j)] });
            }
        }
    }
    Ok(())
}

/// `G = Lᵀ - diag(L 1)` from transition rates `L[i][j]` (species `i` to `j`).
/// Diagonal rates are self-transitions and cancel.
pub fn assemble_g_from_rates(l: &DenseMatrix) -> Result<DenseMatrix> {
    check_rates(l)?;
    let n = l.rows();
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = l[(i, j)];
                g[(j, i)] += r;
                g[(i, i)] -= r;
            }
        }
    }
    Ok(g)
}

/// `H = Dᵀ - diag(D 1)` from destruction rates `D[i][j]` (mass of `i` sent to `j`).
pub fn assemble_h_from_destruction(d: &DenseMatrix) -> Result<DenseMatrix> {
    assemble_g_from_rates(d)
}

/// `max_k |wᵀy_k - wᵀy_0| / |wᵀy_0|` over a sequence of states.
pub fn invariant_error<S: AsRef<[f64]>>(states: &[S], w: &[f64]) -> Result<f64> {
    let first = states
        .first()
        .ok_or_else(|| Error::Degenerate("empty trajectory".into()))?;
    let dot = |y: &[f64]| -> Result<f64> {
        if y.len() != w.len() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, invariant has {}",
                y.len(),
                w.len()
            )));
        }
        Ok(y.iter().zip(w).map(|(a, b)| a * b).sum())
    };
    let i0 = dot(first.as_ref())?;
    if i0 == 0.0 {
        return Err(Error::ZeroInitialInvariant);
    }
    let mut worst: f64 = 0.0;
    for s in states {
        worst = worst.max((dot(s.as_ref())? - i0).abs());
    }
    Ok(worst / i0.abs())
}

/// Relative residual used when deciding whether `w` is in the left kernel.
pub fn relative_kernel_residual(m: &DenseMatrix, w: &[f64]) -> Result<f64> {
    let r = validate_left_kernel(m, w)?;
    let scale = m.norm_inf() * norm_inf(w);
    Ok(if scale == 0.0 { r } else { r / scale })
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        self
    }
}
