//! Stratospheric ozone photochemistry with a diurnal photolysis cycle.
//!
//! Species: `[O1D, O, O3, O2, NO, NO2]`, concentrations in molecules/cm³,
//! time in seconds.

use std::f64::consts::PI;

use crate::numerics::DenseMatrix;
use crate::pds::{GraphLaplacianModel, Invariant};

pub const Y0: [f64; 6] = [9.906e1, 6.624e8, 5.326e11, 1.697e16, 8.725e8, 2.240e8];
pub const T0: f64 = 12.0 * 3600.0;
/// Oxygen atoms per molecule.
pub const W_OXYGEN: [f64; 6] = [1.0, 1.0, 3.0, 2.0, 1.0, 2.0];
/// Nitrogen atoms per molecule.
pub const W_NITROGEN: [f64; 6] = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0];

const SUNRISE: f64 = 4.5;
const SUNSET: f64 = 19.5;

/// Photolysis intensity in `[0, 1]`: a cosine bump between sunrise and
/// sunset local time, zero at night.
pub fn sigma_diurnal(t: f64) -> f64 {
    let tl = (t / 3600.0).rem_euclid(24.0);
    if !(SUNRISE..=SUNSET).contains(&tl) {
        return 0.0;
    }
    let w = (2.0 * tl - SUNRISE - SUNSET) / (SUNSET - SUNRISE);
    0.5 + 0.5 * (PI * w.abs() * w).cos()
}

pub fn stratospheric() -> GraphLaplacianModel {
    GraphLaplacianModel::new("stratospheric", 6, |t, y: &[f64]| {
        let s = sigma_diurnal(t);
        let k1 = 2.643e-10 * s * s * s;
        let k2 = 8.018e-17;
        let k3 = 6.120e-4 * s;
        let k4 = 1.576e-15;
        let k5 = 1.070e-3 * s * s;
        let k6 = 7.110e-11;
        let k7 = 1.200e-10;
        let k8 = 6.062e-15;
        let k9 = 1.069e-11;
        let k10 = 1.289e-2 * s;
        let (y1, y2, y3, y4, y5, y6) = (y[0], y[1], y[2], y[3], y[4], y[5]);
        let gamma = k3 + k5 + k4 * y2 + k7 * y1 + k8 * y5;
        #[rustfmt::skip]
        let g = vec![
            -(k6 + k7 * y3), 0.0,                                   k5,                      0.0,                     0.0,       0.0,
            k6,              -(k2 * y4 + k4 * y3 + k9 * y6),        k3,                      2.0 * k1,                0.0,       k10,
            0.0,             k2 * y4 / 3.0,                         -gamma,                  2.0 * k2 * y2 / 3.0,     0.0,       0.0,
            0.5 * k7 * y3,   k4 * y3 + 0.5 * k9 * y6,               gamma + 0.5 * k7 * y1,   -(k1 + k2 * y2),         0.0,       0.5 * k9 * y2,
            0.0,             0.0,                                   0.0,                     0.0,                     -k8 * y3,  k10 + k9 * y2,
            0.0,             0.0,                                   0.0,                     0.0,                     k8 * y3,   -(k10 + k9 * y2),
        ];
        DenseMatrix::new(6, 6, g).expect("finite rates")
    })
    .with_invariant(Invariant::new("M_O", W_OXYGEN.to_vec(), false).expect("finite"))
    .with_invariant(Invariant::new("M_N", W_NITROGEN.to_vec(), true).expect("finite"))
    .non_autonomous((0.0, 2.0 * 86400.0))
    .with_y_scale(Y0.iter().map(|v| 2.0 * v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pds::{relative_kernel_residual, validate_left_kernel};

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_diurnal(12.0 * 3600.0), 1.0);
        assert!(sigma_diurnal(4.5 * 3600.0).abs() < 1e-15);
        assert_eq!(sigma_diurnal(2.0 * 3600.0), 0.0);
        assert_eq!(sigma_diurnal(36.0 * 3600.0), 1.0);
    }

    #[test]
    fn sigma_is_bounded_periodic_and_continuous() {
        let day = 86400.0;
        for k in 0..10_000 {
            let t = k as f64 * 2.0 * day / 10_000.0;
            let s = sigma_diurnal(t);
            assert!((0.0..=1.0).contains(&s));
            assert!((s - sigma_diurnal(t + day)).abs() < 1e-12);
            let tl = (t / 3600.0) % 24.0;
            if !(4.5..=19.5).contains(&tl) {
                assert_eq!(s, 0.0);
            }
            // Lipschitz bound: |σ'| ≤ π / (15 h) · 2 · |w| ≤ 2π / 15 per hour.
            let ds = (sigma_diurnal(t + 1.0) - s).abs();
            assert!(ds <= 2.0 * PI / 15.0 / 3600.0 * 1.01, "jump at t = {t}");
        }
    }

    #[test]
    fn nitrogen_is_a_kernel_vector_oxygen_is_not() {
        let m = stratospheric();
        let report = m.check_structure(100, 5, 1e-12);
        assert!(report.passed(), "{report:?}");
        let g = m.g(T0, &Y0);
        assert!(relative_kernel_residual(&g, &W_NITROGEN).unwrap() <= 1e-10);
        assert!(validate_left_kernel(&g, &W_OXYGEN).unwrap() > 0.0);
    }

    /// Oxygen is still conserved by the vector field: every reaction
    /// balances oxygen atoms.
    #[test]
    fn oxygen_conserved_by_vector_field() {
        let m = stratospheric();
        let y = [50.0, 3e8, 4e11, 1.6e16, 5e8, 3e8];
        let f = m.rhs(T0, &y);
        let dot: f64 = f.iter().zip(&W_OXYGEN).map(|(a, b)| a * b).sum();
        let scale: f64 = f.iter().zip(&W_OXYGEN).map(|(a, b)| (a * b).abs()).sum();
        assert!(dot.abs() <= 1e-14 * scale);
    }

    #[test]
    fn initial_state() {
        assert_eq!(Y0[3], 1.697e16);
        assert_eq!(T0, 43200.0);
    }
}
