//! Butcher tableaus of the three embedded SDIRK pairs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Sdirk21,
    Sdirk32,
    Sdirk43,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sdirk21, Method::Sdirk32, Method::Sdirk43];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sdirk21 => "sdirk21",
            Method::Sdirk32 => "sdirk32",
            Method::Sdirk43 => "sdirk43",
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        match self {
            Method::Sdirk21 => sdirk21(),
            Method::Sdirk32 => sdirk32(),
            Method::Sdirk43 => sdirk43(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdirk21" => Ok(Method::Sdirk21),
            "sdirk32" => Ok(Method::Sdirk32),
            "sdirk43" => Ok(Method::Sdirk43),
            _ => Err(Error::UnknownName { kind: "method", name: s.to_string() }),
        }
    }
}

/// Lower-triangular SDIRK coefficients with an embedded weight vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub s: usize,
    /// Row `i` holds `a[i][0..=i]`; entries above the diagonal are zero.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub c: Vec<f64>,
    pub p: u32,
    pub p_hat: u32,
    pub q: u32,
    pub gamma: f64,
    pub stiffly_accurate: bool,
}

impl ButcherTableau {
    /// Builds and validates a tableau. `a` must be square with a constant
    /// diagonal and zeros above it; `b` and `b_hat` must each sum to one.
    /// Stiff accuracy is detected from the coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        b_hat: Vec<f64>,
        c: Vec<f64>,
        p: u32,
        p_hat: u32,
        q: u32,
    ) -> Result<Self> {
        let s = a.len();
        if s == 0 || a.iter().any(|r| r.len() != s) || b.len() != s || b_hat.len() != s || c.len() != s {
            return Err(Error::InvalidConfig("tableau arrays must all have the stage count".into()));
        }
        let gamma = a[0][0];
        for (i, row) in a.iter().enumerate() {
            if row[i] != gamma {
                return Err(Error::InvalidConfig(format!("diagonal entry {i} differs from gamma")));
            }
            if row[i + 1..].iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidConfig(format!("row {i} has entries above the diagonal")));
            }
        }
        for (label, w) in [("b", &b), ("b_hat", &b_hat)] {
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-14 {
                return Err(Error::InvalidConfig(format!("{label} sums to {sum}, not 1")));
            }
        }
        let stiffly_accurate = b.iter().zip(&a[s - 1]).all(|(x, y)| x == y);
        Ok(ButcherTableau {
            name: name.into(),
            s,
            a,
            b,
            b_hat,
            c,
            p,
            p_hat,
            q,
            gamma,
            stiffly_accurate,
        })
    }

    /// `b - b_hat`, the weights of the embedded error estimate.
    pub fn error_weights(&self) -> Vec<f64> {
        self.b.iter().zip(&self.b_hat).map(|(x, y)| x - y).collect()
    }
}

/// Looks up a tableau by name.
pub fn tableau(name: &str) -> Result<ButcherTableau> {
    Ok(name.parse::<Method>()?.tableau())
}

fn sdirk21() -> ButcherTableau {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let g = 1.0 - r;
    ButcherTableau::new(
        "sdirk21",
        vec![vec![g, 0.0], vec![r, g]],
        vec![r, g],
        vec![2.0 / 3.0, 1.0 / 3.0],
        vec![g, 1.0],
        2,
        1,
        1,
    )
    .expect("sdirk21 tableau")
}

fn sdirk32() -> ButcherTableau {
    let g = 9.0 / 40.0;
    let last = vec![4032.0 / 9943.0, 6929.0 / 15485.0, -723.0 / 9272.0, g];
    ButcherTableau::new(
        "sdirk32",
        vec![
            vec![g, 0.0, 0.0, 0.0],
            vec![163.0 / 520.0, g, 0.0, 0.0],
            vec![-6481433.0 / 8838675.0, 87795409.0 / 70709400.0, g, 0.0],
            last.clone(),
        ],
        last,
        // Second order, L-stable, and independent of the last stage.
        vec![9204194.0 / 57937861.0, 113036521.0 / 144369752.0, 3142881.0 / 54027944.0, 0.0],
        vec![g, 7.0 / 13.0, 11.0 / 15.0, 1.0],
        3,
        2,
        1,
    )
    .expect("sdirk32 tableau")
}

fn sdirk43() -> ButcherTableau {
    let g = 0.25;
    let last = vec![944.0 / 1365.0, -400.0 / 819.0, 99.0 / 35.0, -575.0 / 252.0, g];
    ButcherTableau::new(
        "sdirk43",
        vec![
            vec![g, 0.0, 0.0, 0.0, 0.0],
            vec![13.0 / 20.0, g, 0.0, 0.0, 0.0],
            vec![580.0 / 1287.0, -175.0 / 5148.0, g, 0.0, 0.0],
            vec![12698.0 / 37375.0, -201.0 / 2990.0, 891.0 / 11500.0, g, 0.0],
            last.clone(),
        ],
        last,
        vec![
            41911.0 / 60060.0,
            -83975.0 / 144144.0,
            3393.0 / 1120.0,
            -27025.0 / 11088.0,
            103.0 / 352.0,
        ],
        vec![0.25, 0.9, 2.0 / 3.0, 0.6, 1.0],
        4,
        3,
        1,
    )
    .expect("sdirk43 tableau")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_coefficients() {
        let t = tableau("sdirk21").unwrap();
        assert!((t.gamma - 0.2928932188134524).abs() < 1e-15);
        assert!((t.b[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(t.b_hat, vec![2.0 / 3.0, 1.0 / 3.0]);

        let t = tableau("sdirk32").unwrap();
        assert_eq!(t.gamma, 9.0 / 40.0);
        assert_eq!(t.a[1][0], 163.0 / 520.0);
        assert_eq!(t.b, vec![4032.0 / 9943.0, 6929.0 / 15485.0, -723.0 / 9272.0, 9.0 / 40.0]);

        let t = tableau("sdirk43").unwrap();
        assert_eq!(t.gamma, 0.25);
        assert_eq!(t.b[1], -400.0 / 819.0);
        assert_eq!(t.c, vec![0.25, 0.9, 2.0 / 3.0, 0.6, 1.0]);

        assert!(matches!(tableau("rk4"), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn structure_of_all_methods() {
        for m in Method::ALL {
            let t = m.tableau();
            assert!(t.stiffly_accurate, "{m}");
            assert_eq!(t.q, 1);
            assert_eq!(t.p_hat + 1, t.p);
            // Row sums reproduce the abscissae.
            for i in 0..t.s {
                let row: f64 = t.a[i].iter().sum();
                assert!((row - t.c[i]).abs() < 1e-14, "{m} row {i}: {row} vs {}", t.c[i]);
            }
        }
    }

    /// Order conditions evaluated directly from the coefficients, up to the
    /// claimed order of each weight vector.
    #[test]
    fn order_conditions() {
        fn conditions(t: &ButcherTableau, w: &[f64]) -> Vec<(u32, f64)> {
            let s = t.s;
            let c = &t.c;
            let a = &t.a;
            let ac: Vec<f64> = (0..s).map(|i| (0..s).map(|j| a[i][j] * c[j]).sum()).collect();
            let ac2: Vec<f64> = (0..s).map(|i| (0..s).map(|j| a[i][j] * c[j] * c[j]).sum()).collect();
            let aac: Vec<f64> = (0..s).map(|i| (0..s).map(|j| a[i][j] * ac[j]).sum()).collect();
            let dot = |v: &dyn Fn(usize) -> f64| -> f64 { (0..s).map(|i| w[i] * v(i)).sum() };
            vec![
                (1, dot(&|_| 1.0) - 1.0),
                (2, dot(&|i| c[i]) - 0.5),
                (3, dot(&|i| c[i] * c[i]) - 1.0 / 3.0),
                (3, dot(&|i| ac[i]) - 1.0 / 6.0),
                (4, dot(&|i| c[i].powi(3)) - 0.25),
                (4, dot(&|i| c[i] * ac[i]) - 0.125),
                (4, dot(&|i| ac2[i]) - 1.0 / 12.0),
                (4, dot(&|i| aac[i]) - 1.0 / 24.0),
            ]
        }
        for m in Method::ALL {
            let t = m.tableau();
            for (order, resid) in conditions(&t, &t.b) {
                if order <= t.p {
                    assert!(resid.abs() < 1e-13, "{m} b order {order}: {resid}");
                }
            }
            for (order, resid) in conditions(&t, &t.b_hat) {
                if order <= t.p_hat {
                    assert!(resid.abs() < 1e-13, "{m} b_hat order {order}: {resid}");
                }
            }
            // The embedded weights are exactly one order lower.
            let top = conditions(&t, &t.b_hat)
                .into_iter()
                .filter(|(o, _)| *o == t.p_hat + 1)
                .map(|(_, r)| r.abs())
                .fold(0.0, f64::max);
            assert!(top > 1e-6, "{m} embedded weights satisfy one order too many");
        }
    }

    #[test]
    fn rejects_malformed_tableaus() {
        let bad_diag = ButcherTableau::new("x", vec![vec![0.5, 0.0], vec![0.5, 0.4]], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.9], 1, 1, 1);
        assert!(bad_diag.is_err());
        let bad_sum = ButcherTableau::new("x", vec![vec![1.0]], vec![0.9], vec![1.0], vec![1.0], 1, 1, 1);
        assert!(bad_sum.is_err());
        let euler = ButcherTableau::new("euler", vec![vec![1.0]], vec![1.0], vec![1.0], vec![1.0], 1, 1, 1).unwrap();
        assert!(euler.stiffly_accurate);
    }
}
