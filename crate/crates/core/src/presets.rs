//! Built-in example systems.
//!
//! Names accept optional parameters after a colon:
//! `flat[:n,nu]`, `riemannian-const[:kappa[,n]]`, `lorentz-split[:kappa]`,
//! `multiplicity-2[:kappa]`. The default curvature is `(2.5π)²`, whose
//! scalar system has conjugate instants at `t = 0.4` and `t = 0.8`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ProfileSpec, SystemSpec};

pub const PRESET_NAMES: [&str; 4] = [
    "flat",
    "riemannian-const",
    "lorentz-split",
    "multiplicity-2",
];

pub fn default_kappa() -> f64 {
    (2.5 * PI).powi(2)
}

fn const_diag(nu: usize, values: Vec<f64>) -> SystemSpec {
    SystemSpec {
        n: values.len(),
        nu,
        s: ProfileSpec::ConstDiag { values },
    }
}

fn parse_params(name: &str, raw: Option<&str>, max: usize) -> Result<Vec<f64>> {
    let Some(raw) = raw else {
        return Ok(Vec::new());
    };
    let params = raw
        .split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                Error::InvalidConfig(format!("preset {name}: cannot parse parameter {p:?}"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if params.len() > max {
        return Err(Error::InvalidConfig(format!(
            "preset {name} takes at most {max} parameters, got {}",
            params.len()
        )));
    }
    Ok(params)
}

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidConfig(format!(
            "preset {name}: expected a small non-negative integer, got {v}"
        )))
    }
}

/// Resolves `name[:params]` to a system description.
pub fn preset(spec: &str) -> Result<SystemSpec> {
    let (name, raw) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    match name {
        "flat" => {
            let p = parse_params(name, raw, 2)?;
            let n = p
                .first()
                .map(|&v| as_count(name, v))
                .transpose()?
                .unwrap_or(2);
            let nu = p
                .get(1)
                .map(|&v| as_count(name, v))
                .transpose()?
                .unwrap_or(n.min(1));
            if n == 0 || nu > n {
                return Err(Error::InvalidConfig(format!(
                    "preset flat: need n >= 1 and nu <= n, got n = {n}, nu = {nu}"
                )));
            }
            Ok(const_diag(nu, vec![0.0; n]))
        }
        "riemannian-const" => {
            let p = parse_params(name, raw, 2)?;
            let kappa = p.first().copied().unwrap_or_else(default_kappa);
            let n = p
                .get(1)
                .map(|&v| as_count(name, v))
                .transpose()?
                .unwrap_or(1);
            if n == 0 {
                return Err(Error::InvalidConfig(
                    "preset riemannian-const: n must be positive".into(),
                ));
            }
            Ok(const_diag(0, vec![kappa; n]))
        }
        "lorentz-split" => {
            let kappa = parse_params(name, raw, 1)?
                .first()
                .copied()
                .unwrap_or_else(default_kappa);
            Ok(const_diag(1, vec![kappa, -kappa]))
        }
        "multiplicity-2" => {
            let kappa = parse_params(name, raw, 1)?
                .first()
                .copied()
                .unwrap_or_else(default_kappa);
            Ok(const_diag(0, vec![kappa, kappa]))
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown preset {other:?}; known presets: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Every preset with default parameters, by name.
pub fn all_presets() -> Vec<(&'static str, SystemSpec)> {
    PRESET_NAMES
        .iter()
        .map(|&name| (name, preset(name).expect("default presets are valid")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let flat = preset("flat").unwrap();
        assert_eq!((flat.n, flat.nu), (2, 1));
        let r = preset("riemannian-const").unwrap();
        assert_eq!(
            r.s,
            ProfileSpec::ConstDiag {
                values: vec![default_kappa()]
            }
        );
        let l = preset("lorentz-split").unwrap();
        assert_eq!((l.n, l.nu), (2, 1));
        let m = preset("multiplicity-2").unwrap();
        assert_eq!((m.n, m.nu), (2, 0));
    }

    #[test]
    fn parameters() {
        let flat = preset("flat:3,0").unwrap();
        assert_eq!((flat.n, flat.nu), (3, 0));
        let r = preset("riemannian-const:10,3").unwrap();
        assert_eq!(
            r.s,
            ProfileSpec::ConstDiag {
                values: vec![10.0; 3]
            }
        );
        assert!(preset("flat:2,3").is_err());
        assert!(preset("flat:1.5").is_err());
        assert!(preset("lorentz-split:1,2").is_err());
        assert!(preset("nope").is_err());
    }

    #[test]
    fn all_presets_build() {
        for (_, spec) in all_presets() {
            spec.build::<f64>().unwrap();
        }
    }
}
