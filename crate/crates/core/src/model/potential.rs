use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FkError, Result};

const TWO_PI: f64 = 2.0 * PI;

/// A nearest-neighbour interaction `V(u, v)` with analytic partials.
///
/// Implementors must be 1-periodic in the diagonal direction,
/// `V(u + 1, v + 1) = V(u, v)`, and satisfy the twist bound
/// `V12 <= -twist_delta() < 0`.
pub trait Interaction: Send + Sync {
    fn v(&self, u: f64, v: f64) -> f64;
    fn v1(&self, u: f64, v: f64) -> f64;
    fn v2(&self, u: f64, v: f64) -> f64;
    fn v11(&self, u: f64, v: f64) -> f64;
    fn v12(&self, u: f64, v: f64) -> f64;
    fn v22(&self, u: f64, v: f64) -> f64;
    fn twist_delta(&self) -> f64;
}

/// One Fourier mode `c cos(2 pi h x) + s sin(2 pi h x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub index: u32,
    pub cos: f64,
    pub sin: f64,
}

impl Harmonic {
    fn phase(&self, x: f64) -> (f64, f64) {
        (TWO_PI * self.index as f64 * x).sin_cos()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (s, c) = self.phase(x);
        self.cos * c + self.sin * s
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let w = TWO_PI * self.index as f64;
        let (s, c) = self.phase(x);
        w * (-self.cos * s + self.sin * c)
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let w = TWO_PI * self.index as f64;
        -w * w * self.eval(x)
    }
}

/// Interaction potentials understood by the library.
#[derive(Clone)]
pub enum Potential {
    /// `V(u,v) = (v-u)^2/2 + (K/4pi^2)(1 - cos 2 pi u)`.
    Standard { k: f64 },
    /// `V(u,v) = (kappa/2)(v-u)^2 + W(u) + lambda cos(2 pi (u+v))` with `W` a
    /// trigonometric polynomial. Twist holds when `kappa > 4 pi^2 |lambda|`.
    Generalized {
        kappa: f64,
        site: Vec<Harmonic>,
        mixed: f64,
    },
    /// Any user-supplied interaction.
    Custom(Arc<dyn Interaction>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Standard { k } => f.debug_struct("Standard").field("k", k).finish(),
            Potential::Generalized { kappa, site, mixed } => f
                .debug_struct("Generalized")
                .field("kappa", kappa)
                .field("site", site)
                .field("mixed", mixed)
                .finish(),
            Potential::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Potential {
    pub fn standard(k: f64) -> Self {
        Potential::Standard { k }
    }

    pub fn harmonic() -> Self {
        Potential::Standard { k: 0.0 }
    }

    /// Derivative of the site potential `W'(u)` for the standard family.
    pub fn standard_site_force(k: f64, u: f64) -> f64 {
        k / TWO_PI * (TWO_PI * u).sin()
    }

    /// Upper bound on `|W'|` for families with an explicit site potential.
    /// For the standard family this is the single-site depinning force `K / 2 pi`.
    pub fn max_site_force(&self) -> Option<f64> {
        match self {
            Potential::Standard { k } => Some(k.abs() / TWO_PI),
            Potential::Generalized { site, .. } => Some(
                site.iter()
                    .map(|h| TWO_PI * h.index as f64 * h.cos.hypot(h.sin))
                    .sum(),
            ),
            Potential::Custom(_) => None,
        }
    }
}

impl Interaction for Potential {
    fn v(&self, u: f64, v: f64) -> f64 {
        match self {
            Potential::Standard { k } => {
                let d = v - u;
                0.5 * d * d + k / (TWO_PI * TWO_PI) * (1.0 - (TWO_PI * u).cos())
            }
            Potential::Generalized { kappa, site, mixed } => {
                let d = v - u;
                0.5 * kappa * d * d
                    + site.iter().map(|h| h.eval(u)).sum::<f64>()
                    + mixed * (TWO_PI * (u + v)).cos()
            }
            Potential::Custom(p) => p.v(u, v),
        }
    }

    fn v1(&self, u: f64, v: f64) -> f64 {
        match self {
            Potential::Standard { k } => -(v - u) + Potential::standard_site_force(*k, u),
            Potential::Generalized { kappa, site, mixed } => {
                -kappa * (v - u) + site.iter().map(|h| h.deriv(u)).sum::<f64>()
                    - mixed * TWO_PI * (TWO_PI * (u + v)).sin()
            }
            Potential::Custom(p) => p.v1(u, v),
        }
    }

    fn v2(&self, u: f64, v: f64) -> f64 {
        match self {
            Potential::Standard { .. } => v - u,
            Potential::Generalized { kappa, mixed, .. } => {
                kappa * (v - u) - mixed * TWO_PI * (TWO_PI * (u + v)).sin()
            }
            Potential::Custom(p) => p.v2(u, v),
        }
    }

    fn v11(&self, u: f64, v: f64) -> f64 {
        match self {
            Potential::Standard { k } => 1.0 + k * (TWO_PI * u).cos(),
            Potential::Generalized { kappa, site, mixed } => {
                kappa + site.iter().map(|h| h.deriv2(u)).sum::<f64>()
                    - mixed * TWO_PI * TWO_PI * (TWO_PI * (u + v)).cos()
            }
            Potential::Custom(p) => p.v11(u, v),
        }
    }

    fn v12(&self, u: f64, v: f64) -> f64 {
        match self {
            Potential::Standard { .. } => -1.0,
            Potential::Generalized { kappa, mixed, .. } => {
                -kappa - mixed * TWO_PI * TWO_PI * (TWO_PI * (u + v)).cos()
            }
            Potential::Custom(p) => p.v12(u, v),
        }
    }

    fn v22(&self, u: f64, v: f64) -> f64 {
        match self {
            Potential::Standard { .. } => 1.0,
            Potential::Generalized { kappa, mixed, .. } => {
                kappa - mixed * TWO_PI * TWO_PI * (TWO_PI * (u + v)).cos()
            }
            Potential::Custom(p) => p.v22(u, v),
        }
    }

    fn twist_delta(&self) -> f64 {
        match self {
            Potential::Standard { .. } => 1.0,
            Potential::Generalized { kappa, mixed, .. } => kappa - TWO_PI * TWO_PI * mixed.abs(),
            Potential::Custom(p) => p.twist_delta(),
        }
    }
}

/// Outcome of sampling the unit square for twist and periodicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwistReport {
    /// Minimum of `-V12` over the grid.
    pub min_neg_v12: f64,
    /// Largest `|V(u+1, v+1) - V(u, v)|` seen.
    pub periodicity_residual: f64,
    pub worst_u: f64,
    pub worst_v: f64,
}

/// Sample `[0,1)^2` on a `resolution x resolution` grid (offset diagonally so
/// that `v - u` spans a few periods) and check the twist bound.
pub fn twist_audit(pot: &Potential, resolution: usize) -> Result<TwistReport> {
    if resolution < 2 {
        return Err(FkError::InvalidArgument(format!(
            "twist audit resolution must be >= 2, got {resolution}"
        )));
    }
    let delta = pot.twist_delta();
    let h = 1.0 / resolution as f64;
    let mut report = TwistReport {
        min_neg_v12: f64::INFINITY,
        periodicity_residual: 0.0,
        worst_u: 0.0,
        worst_v: 0.0,
    };
    for i in 0..resolution {
        for j in 0..resolution {
            let u = i as f64 * h;
            // v ranges over [-1, 2) so large spacings are covered too
            let v = -1.0 + 3.0 * j as f64 * h;
            let neg = -pot.v12(u, v);
            if !neg.is_finite() {
                return Err(FkError::NumericDomain(format!("V12({u}, {v}) is not finite")));
            }
            if neg < report.min_neg_v12 {
                report.min_neg_v12 = neg;
                report.worst_u = u;
                report.worst_v = v;
            }
            let r = (pot.v(u + 1.0, v + 1.0) - pot.v(u, v)).abs();
            report.periodicity_residual = report.periodicity_residual.max(r);
        }
    }
    if !(delta > 0.0) || report.min_neg_v12 < delta * (1.0 - 1e-12) {
        return Err(FkError::TwistViolation {
            u: report.worst_u,
            v: report.worst_v,
            value: report.min_neg_v12,
            delta,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_points() -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                pts.push((-0.9 + 0.37 * i as f64, -1.3 + 0.41 * j as f64));
            }
        }
        pts
    }

    fn potentials() -> Vec<Potential> {
        vec![
            Potential::standard(0.0),
            Potential::standard(1.0),
            Potential::standard(3.7),
            Potential::Generalized {
                kappa: 1.5,
                site: vec![
                    Harmonic { index: 1, cos: 0.02, sin: -0.01 },
                    Harmonic { index: 2, cos: 0.005, sin: 0.003 },
                ],
                mixed: 0.01,
            },
        ]
    }

    #[test]
    fn partials_match_central_differences() {
        let h = 1e-5;
        for pot in potentials() {
            for &(u, v) in &sample_points() {
                let d1 = (pot.v(u + h, v) - pot.v(u - h, v)) / (2.0 * h);
                let d2 = (pot.v(u, v + h) - pot.v(u, v - h)) / (2.0 * h);
                assert!((d1 - pot.v1(u, v)).abs() < 1e-8, "{pot:?} V1 at {u},{v}");
                assert!((d2 - pot.v2(u, v)).abs() < 1e-8, "{pot:?} V2 at {u},{v}");
                let d11 = (pot.v1(u + h, v) - pot.v1(u - h, v)) / (2.0 * h);
                let d12 = (pot.v1(u, v + h) - pot.v1(u, v - h)) / (2.0 * h);
                let d22 = (pot.v2(u, v + h) - pot.v2(u, v - h)) / (2.0 * h);
                assert!((d11 - pot.v11(u, v)).abs() < 1e-7);
                assert!((d12 - pot.v12(u, v)).abs() < 1e-7);
                assert!((d22 - pot.v22(u, v)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn periodic_along_diagonal() {
        for pot in potentials() {
            for &(u, v) in &sample_points() {
                assert!((pot.v(u + 1.0, v + 1.0) - pot.v(u, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standard_family_twist_is_one() {
        for k in [0.0, 1.0, 5.0] {
            let r = twist_audit(&Potential::standard(k), 16).unwrap();
            assert_eq!(r.min_neg_v12, 1.0);
            assert!(r.periodicity_residual < 1e-12);
        }
    }

    #[test]
    fn broken_twist_is_reported() {
        // kappa = 4 pi^2 lambda makes V12 vanish where cos(2 pi (u+v)) = -1
        let lambda = 0.02;
        let pot = Potential::Generalized {
            kappa: TWO_PI * TWO_PI * lambda,
            site: vec![],
            mixed: -lambda,
        };
        // the declared delta is zero, so the audit must fail
        match twist_audit(&pot, 32) {
            Err(FkError::TwistViolation { value, .. }) => assert!(value.abs() < 1e-2),
            other => panic!("expected twist violation, got {other:?}"),
        }
    }

    #[test]
    fn audit_rejects_tiny_grid() {
        assert!(twist_audit(&Potential::standard(1.0), 1).is_err());
    }
}
