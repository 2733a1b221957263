//! Robertson's three-species autocatalytic reaction.

use crate::numerics::DenseMatrix;
use crate::pds::{GraphLaplacianModel, Invariant};

pub const Y0: [f64; 3] = [1.0, 0.0, 0.0];

pub fn robertson() -> GraphLaplacianModel {
    GraphLaplacianModel::new("robertson", 3, |_, y: &[f64]| {
        let (y2, y3) = (y[1], y[2]);
        DenseMatrix::new(
            3,
            3,
            vec![
                -0.04, 1e4 * y3, 0.0, //
                0.04, -3e7 * y2 - 1e4 * y3, 0.0, //
                0.0, 3e7 * y2, 0.0,
            ],
        )
        .expect("finite rates")
    })
    .with_invariant(Invariant::new("mass", vec![1.0; 3], true).expect("finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pds::validate_sign_structure;

    #[test]
    fn matrix_at_initial_state() {
        let m = robertson();
        let g = m.g(0.0, &Y0);
        assert_eq!(
            g.as_slice(),
            &[-0.04, 0.0, 0.0, 0.04, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(m.rhs(0.0, &Y0).as_slice(), &[-0.04, 0.04, 0.0]);
        assert!(validate_sign_structure(&g, 0.0).passed());
    }

    #[test]
    fn rhs_matches_reaction_form() {
        let m = robertson();
        let y = [0.7, 2e-5, 0.3];
        let f = m.rhs(0.0, &y);
        let expect = [
            -0.04 * y[0] + 1e4 * y[1] * y[2],
            0.04 * y[0] - 1e4 * y[1] * y[2] - 3e7 * y[1] * y[1],
            3e7 * y[1] * y[1],
        ];
        for i in 0..3 {
            assert!((f[i] - expect[i]).abs() <= 1e-15 * expect[i].abs().max(1e-3));
        }
    }

    #[test]
    fn sampled_structure() {
        let report = robertson().check_structure(100, 11, 0.0);
        assert!(report.passed(), "{report:?}");
    }
}
