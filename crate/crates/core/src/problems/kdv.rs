//! Finite-volume Korteweg-de Vries equation in production-destruction form.
//!
//! On a periodic grid of `n` cells the cell flux is
//! `f_i = -(α y_i² + ρ y_i + ν (L_x y)_i)`, interface fluxes are averages of
//! neighbouring cell fluxes, and each interface moves mass from one cell to
//! its neighbour according to the sign of the flux. The semi-discrete
//! system is `y' = H(y) 1` with `H = Dᵀ - diag(D 1)`.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Vector};
use crate::pds::{assemble_h_from_destruction, HFormModel, Invariant};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdvConfig {
    pub n_cells: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub alpha: f64,
    pub rho: f64,
    pub nu: f64,
    /// Constant added to the initial profile.
    pub shift: f64,
}

impl Default for KdvConfig {
    fn default() -> Self {
        KdvConfig {
            n_cells: 256,
            x_lo: -10.0,
            x_hi: 10.0,
            alpha: 1.0,
            rho: 0.0,
            nu: 1.0,
            shift: 0.0,
        }
    }
}

impl KdvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 8 {
            return Err(Error::InvalidConfig(format!("kdv needs at least 8 cells, got {}", self.n_cells)));
        }
        if !(self.x_hi > self.x_lo) {
            return Err(Error::InvalidConfig("kdv domain must have x_hi > x_lo".into()));
        }
        if !(self.nu >= 0.0) || !(self.shift >= 0.0) {
            return Err(Error::InvalidConfig("kdv needs nu >= 0 and shift >= 0".into()));
        }
        if ![self.alpha, self.rho, self.nu, self.shift].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("kdv coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_cells as f64
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_cells).map(|i| self.x_lo + (i as f64 + 0.5) * dx).collect()
    }
}

/// Cell fluxes `f_i` on the periodic grid.
fn cell_flux(cfg: &KdvConfig, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let inv_dx2 = 1.0 / (cfg.dx() * cfg.dx());
    (0..n)
        .map(|i| {
            let lap = (y[(i + n - 1) % n] - 2.0 * y[i] + y[(i + 1) % n]) * inv_dx2;
            -(cfg.alpha * y[i] * y[i] + cfg.rho * y[i] + cfg.nu * lap)
        })
        .collect()
}

/// `f_{i+1/2}` for `i = 0..n`, the last one wrapping to cell 0.
fn interface_flux(cfg: &KdvConfig, y: &[f64]) -> Vec<f64> {
    let f = cell_flux(cfg, y);
    let n = f.len();
    (0..n).map(|i| 0.5 * (f[i] + f[(i + 1) % n])).collect()
}

/// Destruction-rate matrix: a nonnegative interface flux moves mass from
/// cell `i+1` into cell `i`, a negative one from `i` into `i+1`.
pub fn destruction_rates(cfg: &KdvConfig, y: &[f64]) -> DenseMatrix {
    let n = y.len();
    let dx = cfg.dx();
    let mut d = DenseMatrix::zeros(n, n);
    for (i, &fl) in interface_flux(cfg, y).iter().enumerate() {
        let j = (i + 1) % n;
        if fl >= 0.0 {
            d[(j, i)] += fl / dx;
        } else {
            d[(i, j)] += -fl / dx;
        }
    }
    d
}

pub fn kdv(cfg: KdvConfig) -> Result<HFormModel> {
    cfg.validate()?;
    let n = cfg.n_cells;
    let dx = cfg.dx();
    let model = HFormModel::new("kdv", n, move |y: &[f64]| {
        assemble_h_from_destruction(&destruction_rates(&cfg, y)).expect("rates are nonnegative")
    })
    .with_rhs(move |y: &[f64]| {
        let fl = interface_flux(&cfg, y);
        (0..n).map(|i| (fl[i] - fl[(i + n - 1) % n]) / dx).collect()
    })
    .with_invariant(Invariant::new("mass", vec![dx; n], true)?)
    .with_y_scale(vec![6.0 + cfg.shift; n]);
    Ok(model)
}

/// `6 sech²(x) + shift` at the cell centres.
pub fn kdv_initial(cfg: &KdvConfig) -> Vector {
    let v = cfg
        .cell_centers()
        .into_iter()
        .map(|x| {
            let s = 1.0 / x.cosh();
            6.0 * s * s + cfg.shift
        })
        .collect();
    Vector::new(v).expect("finite profile")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_is_steady() {
        let m = kdv(KdvConfig::default()).unwrap();
        let f = m.rhs(&vec![2.5; 256]);
        assert!(f.norm_inf() < 1e-12);
        let hf: f64 = m.h(&vec![2.5; 256]).as_slice().iter().map(|v| v.abs()).sum();
        assert!(hf.is_finite());
    }

    #[test]
    fn initial_profile() {
        let cfg = KdvConfig { n_cells: 255, ..Default::default() };
        let y = kdv_initial(&cfg);
        assert!((y[127] - 6.0).abs() < 1e-14);
        let shifted = KdvConfig { shift: 0.5, ..Default::default() };
        assert!(kdv_initial(&shifted).iter().all(|&v| v >= 0.5));
        let peak = kdv_initial(&KdvConfig::default()).iter().copied().fold(0.0, f64::max);
        assert!(peak <= 6.0 && peak > 5.9);
    }

    #[test]
    fn invalid_configs() {
        assert!(kdv(KdvConfig { n_cells: 4, ..Default::default() }).is_err());
        assert!(kdv(KdvConfig { x_hi: -20.0, ..Default::default() }).is_err());
        assert!(kdv(KdvConfig { nu: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn sampled_structure_and_mass() {
        let m = kdv(KdvConfig { n_cells: 32, ..Default::default() }).unwrap();
        assert!(m.check_structure(100, 9, 0.0).passed());
        let y = kdv_initial(&KdvConfig { n_cells: 32, ..Default::default() });
        let mass: f64 = m.rhs(&y).iter().sum();
        assert!(mass.abs() < 1e-12);
    }
}
