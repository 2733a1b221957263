//! Reduced six-species MAPK cascade.
//!
//! `alpha` splits the `y1 y2` coupling between the two product channels.
//! At `alpha = 1` the vector `w2` is a left null vector of `G`; at
//! `alpha = 0` it is `w1`.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::pds::{GraphLaplacianModel, Invariant};

pub const Y0: [f64; 6] = [0.1, 0.175, 0.15, 1.15, 0.81, 0.5];
pub const W1: [f64; 6] = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
pub const W2: [f64; 6] = [0.0, 1.0, 1.0, 1.0, 1.0, 0.0];

const K1: f64 = 100.0 / 3.0;
const K2: f64 = 1.0 / 3.0;
const K3: f64 = 50.0;
const K4: f64 = 0.5;
const K5: f64 = 10.0 / 3.0;
const K6: f64 = 0.1;
const K7: f64 = 0.7;

pub fn mapk(alpha: f64) -> Result<GraphLaplacianModel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("mapk alpha must lie in [0, 1], got {alpha}")));
    }
    let model = GraphLaplacianModel::new("mapk", 6, move |_, y: &[f64]| {
        let (y1, y2) = (y[0], y[1]);
        #[rustfmt::skip]
        let g = vec![
            -(K7 + K1 * y2),          0.0,              0.0,               K2,  0.0, K6,
            0.0,                      -K1 * y1,         K5,                0.0, 0.0, 0.0,
            0.0,                      0.0,              -(K3 * y1 + K5),   K2,  K4,  0.0,
            (1.0 - alpha) * K1 * y2,  alpha * K1 * y1,  0.0,               -K2, 0.0, 0.0,
            0.0,                      0.0,              K3 * y1,           0.0, -K4, 0.0,
            K7,                       0.0,              0.0,               0.0, 0.0, -K6,
        ];
        DenseMatrix::new(6, 6, g).expect("finite rates")
    })
    .with_invariant(Invariant::new("C1", W1.to_vec(), alpha == 0.0)?)
    .with_invariant(Invariant::new("C2", W2.to_vec(), alpha == 1.0)?)
    .with_y_scale(Y0.iter().map(|v| 2.0 * v).collect());
    Ok(model)
}
