//! Benchmark problems and a name-based registry.

mod kdv;
mod mapk;
mod robertson;
mod stratospheric;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Vector};
use crate::pds::{GraphLaplacianModel, Invariant, Model};

pub use kdv::{destruction_rates as kdv_destruction_rates, kdv, kdv_initial, KdvConfig};
pub use mapk::mapk;
pub use robertson::robertson;
pub use stratospheric::{sigma_diurnal, stratospheric};

pub mod consts {
    pub mod robertson {
        pub use super::super::robertson::Y0;
    }
    pub mod mapk {
        pub use super::super::mapk::{W1, W2, Y0};
    }
    pub mod stratospheric {
        pub use super::super::stratospheric::{T0, W_NITROGEN, W_OXYGEN, Y0};
    }
}

/// Registered problem names.
pub const NAMES: [&str; 5] = ["robertson", "mapk", "stratospheric", "kdv", "clipping"];

/// A model with its reference initial state and default time spans.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub model: Model,
    pub y0: Vector,
    /// Span used for positivity and invariant experiments.
    pub invariant_span: (f64, f64),
    /// Span used for convergence studies.
    pub convergence_span: (f64, f64),
    /// Measure convergence errors component by component, for states whose
    /// entries differ by many orders of magnitude.
    pub componentwise_error: bool,
}

/// Three species with a fast source `C -> A` (rate `lambda`) feeding a
/// reversible pair `A <-> B`. Started from `[0, 0, 1]`, every SDIRK21 step
/// with `h lambda > 1 + sqrt 2` has a negative second stage, so the
/// corrector is active on every step.
///
/// Clipping the first step perturbs the `A -> B` flux by a relative
/// `O(1 / (h lambda))`, which leaves a global error of roughly `4 / lambda`
/// independent of `h`. The registry default `lambda = 1e8` keeps that
/// floor below the discretization error of practical step sizes.
pub fn clipping(lambda: f64) -> Result<GraphLaplacianModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("clipping needs lambda > 0, got {lambda}")));
    }
    let g = DenseMatrix::from_rows(&[
        vec![-1.0, 0.5, lambda],
        vec![1.0, -0.5, 0.0],
        vec![0.0, 0.0, -lambda],
    ])?;
    Ok(GraphLaplacianModel::new("clipping", 3, move |_, _| g.clone())
        .with_invariant(Invariant::new("mass", vec![1.0; 3], true)?))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidConfig(format!("parameter {key}={value} is not a number")))
}

fn reject_unknown(name: &str, params: &[(String, String)], allowed: &[&str]) -> Result<()> {
    match params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(Error::InvalidConfig(format!(
            "{name} has no parameter {k:?} (known: {})",
            if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
        ))),
        None => Ok(()),
    }
}

/// Builds a registered problem. `params` are `key=value` overrides.
pub fn problem(name: &str, params: &[(String, String)]) -> Result<Problem> {
    let hour = 3600.0;
    match name.to_ascii_lowercase().as_str() {
        "robertson" => {
            reject_unknown(name, params, &[])?;
            Ok(Problem {
                name: "robertson".into(),
                model: robertson().into(),
                y0: Vector::new(robertson::Y0.to_vec())?,
                invariant_span: (0.0, 1e4),
                convergence_span: (0.0, 5000.0),
                componentwise_error: false,
            })
        }
        "mapk" => {
            reject_unknown(name, params, &["alpha"])?;
            let mut alpha = 1.0;
            for (k, v) in params {
                if k == "alpha" {
                    alpha = parse_f64(k, v)?;
                }
            }
            Ok(Problem {
                name: "mapk".into(),
                model: mapk(alpha)?.into(),
                y0: Vector::new(mapk::Y0.to_vec())?,
                invariant_span: (0.0, 200.0),
                convergence_span: (0.0, 60.0),
                componentwise_error: false,
            })
        }
        "stratospheric" => {
            reject_unknown(name, params, &[])?;
            Ok(Problem {
                name: "stratospheric".into(),
                model: stratospheric().into(),
                y0: Vector::new(stratospheric::Y0.to_vec())?,
                invariant_span: (12.0 * hour, 36.0 * hour),
                convergence_span: (19.0 * hour, 29.0 * hour),
                componentwise_error: true,
            })
        }
        "kdv" => {
            reject_unknown(name, params, &["n", "n_cells", "x_lo", "x_hi", "alpha", "rho", "nu", "shift"])?;
            let mut cfg = KdvConfig::default();
            for (k, v) in params {
                match k.as_str() {
                    "n" | "n_cells" => {
                        cfg.n_cells = v
                            .trim()
                            .parse()
                            .map_err(|_| Error::InvalidConfig(format!("parameter {k}={v} is not a count")))?
                    }
                    "x_lo" => cfg.x_lo = parse_f64(k, v)?,
                    "x_hi" => cfg.x_hi = parse_f64(k, v)?,
                    "alpha" => cfg.alpha = parse_f64(k, v)?,
                    "rho" => cfg.rho = parse_f64(k, v)?,
                    "nu" => cfg.nu = parse_f64(k, v)?,
                    "shift" => cfg.shift = parse_f64(k, v)?,
                    _ => unreachable!(),
                }
            }
            Ok(Problem {
                name: "kdv".into(),
                model: kdv(cfg)?.into(),
                y0: kdv_initial(&cfg),
                invariant_span: (0.0, 0.35),
                convergence_span: (0.0, 0.35),
                componentwise_error: false,
            })
        }
        "clipping" => {
            reject_unknown(name, params, &["lambda"])?;
            let mut lambda = 1e8;
            for (k, v) in params {
                if k == "lambda" {
                    lambda = parse_f64(k, v)?;
                }
            }
            Ok(Problem {
                name: "clipping".into(),
                model: clipping(lambda)?.into(),
                y0: Vector::new(vec![0.0, 0.0, 1.0])?,
                invariant_span: (0.0, 1.0),
                convergence_span: (0.0, 1.0),
                componentwise_error: false,
            })
        }
        _ => Err(Error::UnknownName { kind: "problem", name: name.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            let p = problem(name, &[]).unwrap();
            assert_eq!(p.y0.dim(), p.model.dim());
            assert!(p.invariant_span.1 > p.invariant_span.0);
        }
    }

    #[test]
    fn overrides_and_errors() {
        let p = problem("kdv", &kv(&[("n", "64"), ("shift", "0.5")])).unwrap();
        assert_eq!(p.model.dim(), 64);
        assert!(p.y0.min() >= 0.5);
        assert!(matches!(problem("lorenz", &[]), Err(Error::UnknownName { .. })));
        assert!(matches!(problem("robertson", &kv(&[("k1", "1")])), Err(Error::InvalidConfig(_))));
        assert!(problem("mapk", &kv(&[("alpha", "2")])).is_err());
        assert!(problem("mapk", &kv(&[("alpha", "x")])).is_err());
    }

    #[test]
    fn structure_checks_pass() {
        for name in ["robertson", "mapk", "kdv", "clipping"] {
            let p = problem(name, &[]).unwrap();
            let report = p.model.check_structure(100, 3, 0.0);
            assert!(report.passed(), "{name}: {report:?}");
        }
        let p = problem("stratospheric", &[]).unwrap();
        let report = p.model.check_structure(100, 3, 1e-12);
        assert!(report.sign_violations.is_empty(), "{report:?}");
    }
}
