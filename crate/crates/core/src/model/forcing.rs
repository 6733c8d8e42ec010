use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::potential::Harmonic;

/// External drive `F(t)`: constant (DC) or a 1-periodic trigonometric
/// polynomial (AC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Forcing {
    Dc { value: f64 },
    Ac { mean: f64, harmonics: Vec<Harmonic> },
}

impl Forcing {
    pub fn dc(value: f64) -> Self {
        Forcing::Dc { value }
    }

    pub fn ac(mean: f64, harmonics: Vec<Harmonic>) -> Self {
        Forcing::Ac { mean, harmonics }
    }

    /// `mean + amplitude * sin(2 pi t)`.
    pub fn ac_sine(mean: f64, amplitude: f64) -> Self {
        Forcing::Ac {
            mean,
            harmonics: vec![Harmonic { index: 1, cos: 0.0, sin: amplitude }],
        }
    }

    pub fn is_dc(&self) -> bool {
        matches!(self, Forcing::Dc { .. })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Dc { value } => *value,
            Forcing::Ac { mean, harmonics } => {
                mean + harmonics.iter().map(|h| h.eval(t)).sum::<f64>()
            }
        }
    }

    /// Time average over one period.
    pub fn mean(&self) -> f64 {
        match self {
            Forcing::Dc { value } => *value,
            Forcing::Ac { mean, harmonics } => {
                // index-0 harmonics contribute their cosine coefficient
                mean + harmonics.iter().filter(|h| h.index == 0).map(|h| h.cos).sum::<f64>()
            }
        }
    }

    /// RMS deviation from the mean over one period. Harmonics sharing an
    /// index are merged before applying Parseval.
    pub fn dispersion(&self) -> f64 {
        match self {
            Forcing::Dc { .. } => 0.0,
            Forcing::Ac { harmonics, .. } => {
                let mut merged: Vec<(u32, f64, f64)> = Vec::new();
                for h in harmonics.iter().filter(|h| h.index > 0) {
                    match merged.iter_mut().find(|m| m.0 == h.index) {
                        Some(m) => {
                            m.1 += h.cos;
                            m.2 += h.sin;
                        }
                        None => merged.push((h.index, h.cos, h.sin)),
                    }
                }
                (0.5 * merged.iter().map(|m| m.1 * m.1 + m.2 * m.2).sum::<f64>()).sqrt()
            }
        }
    }

    /// Exact integral of `F` over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self {
            Forcing::Dc { value } => value * (t1 - t0),
            Forcing::Ac { mean, harmonics } => {
                let mut acc = mean * (t1 - t0);
                for h in harmonics {
                    if h.index == 0 {
                        acc += h.cos * (t1 - t0);
                        continue;
                    }
                    let w = 2.0 * PI * h.index as f64;
                    acc += h.cos * ((w * t1).sin() - (w * t0).sin()) / w;
                    acc -= h.sin * ((w * t1).cos() - (w * t0).cos()) / w;
                }
                acc
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> Forcing {
        Forcing::ac(
            0.05,
            vec![
                Harmonic { index: 1, cos: 0.0, sin: 0.05 },
                Harmonic { index: 3, cos: 0.02, sin: -0.01 },
            ],
        )
    }

    #[test]
    fn ac_has_unit_period() {
        let f = profile();
        for i in 0..50 {
            let t = -3.0 + 0.173 * i as f64;
            assert!((f.eval(t) - f.eval(t + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn dispersion_matches_quadrature() {
        let f = profile();
        // periodic trapezoid is exact for trig polynomials of low degree
        let n = 4096;
        let mean = f.mean();
        let q: f64 = (0..n)
            .map(|i| {
                let d = f.eval(i as f64 / n as f64) - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;
        assert!((q.sqrt() - f.dispersion()).abs() < 1e-10);
        assert_eq!(Forcing::dc(0.3).dispersion(), 0.0);
    }

    #[test]
    fn integral_of_sine_over_period_vanishes() {
        let f = Forcing::ac_sine(0.0, 1.0);
        assert!(f.integral(0.0, 1.0).abs() < 1e-15);
        let g = profile();
        assert!((g.integral(0.2, 1.2) - 0.05).abs() < 1e-14);
    }
}
