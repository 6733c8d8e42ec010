//! Configurations, interactions, forcing and the gradient vector field
//! `du_j/dt = -V2(u_{j-1}, u_j) - V1(u_j, u_{j+1}) + F(t)`.

pub mod forcing;
pub mod potential;
pub mod state;

use serde::{Deserialize, Serialize};

pub use forcing::Forcing;
pub use potential::{twist_audit, Harmonic, Interaction, Potential, TwistReport};
pub use state::{
    config_distance, gcd, lcm, partial_order_compare, ChainState, OrderRelation,
    DEFAULT_DISTANCE_DECAY, DEFAULT_DISTANCE_WINDOW,
};

use crate::error::{FkError, Result};

/// `du/dt` at a configuration; N-periodic with zero winding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    pub du: Vec<f64>,
    pub t: f64,
}

/// Potential and forcing bundled together: everything the right-hand side needs.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub potential: Potential,
    pub forcing: Forcing,
}

impl Dynamics {
    pub fn new(potential: Potential, forcing: Forcing) -> Self {
        Dynamics { potential, forcing }
    }

    /// Evaluate the right-hand side for lift values `u` with winding `m`.
    #[inline]
    pub fn rhs_into(&self, u: &[f64], winding: i64, t: f64, out: &mut [f64]) {
        rhs_into(&self.potential, self.forcing.eval(t), u, winding as f64, out);
    }
}

/// Right-hand side kernel with the forcing already evaluated.
pub(crate) fn rhs_into(pot: &Potential, f: f64, u: &[f64], winding: f64, out: &mut [f64]) {
    let n = u.len();
    let left = |j: usize| if j == 0 { u[n - 1] - winding } else { u[j - 1] };
    let right = |j: usize| if j + 1 == n { u[0] + winding } else { u[j + 1] };
    match pot {
        Potential::Standard { k } => {
            let a = k / (2.0 * std::f64::consts::PI);
            for j in 0..n {
                let uj = u[j];
                out[j] = left(j) - 2.0 * uj + right(j)
                    - a * (2.0 * std::f64::consts::PI * uj).sin()
                    + f;
            }
        }
        _ => {
            for j in 0..n {
                let uj = u[j];
                out[j] = -pot.v2(left(j), uj) - pot.v1(uj, right(j)) + f;
            }
        }
    }
}

/// The generic `V1`/`V2` route without the standard-family shortcut.
pub fn vector_field_generic(
    state: &ChainState,
    pot: &dyn Interaction,
    force: &Forcing,
    t: f64,
) -> VelocityProfile {
    let f = force.eval(t);
    let du = (0..state.period() as i64)
        .map(|j| {
            let uj = state.at(j);
            -pot.v2(state.at(j - 1), uj) - pot.v1(uj, state.at(j + 1)) + f
        })
        .collect();
    VelocityProfile { du, t }
}

pub fn vector_field(
    state: &ChainState,
    pot: &Potential,
    force: &Forcing,
    t: f64,
) -> Result<VelocityProfile> {
    if !t.is_finite() {
        return Err(FkError::NumericDomain("evaluation time is not finite".into()));
    }
    let mut du = vec![0.0; state.period()];
    rhs_into(pot, force.eval(t), &state.u, state.winding as f64, &mut du);
    if let Some(i) = du.iter().position(|x| !x.is_finite()) {
        return Err(FkError::NumericDomain(format!("velocity at site {i} is not finite")));
    }
    Ok(VelocityProfile { du, t })
}

/// `(1/N) sum_{i<N} V(u_i, u_{i+1})`.
pub fn energy_per_site(state: &ChainState, pot: &Potential) -> f64 {
    let n = state.period();
    (0..n as i64)
        .map(|i| pot.v(state.at(i), state.at(i + 1)))
        .sum::<f64>()
        / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn equilibrium_at_bottom() {
        let s = ChainState::new(0, vec![0.0], 0.0).unwrap();
        let v = vector_field(&s, &Potential::standard(1.0), &Forcing::dc(0.0), 0.0).unwrap();
        assert_eq!(v.du, vec![0.0]);
    }

    #[test]
    fn harmonic_linear_profile_moves_with_force() {
        for (n, m) in [(1usize, 0i64), (3, 1), (5, -2), (8, 13)] {
            let s = ChainState::linear(n, m, 0.3);
            let v = vector_field(&s, &Potential::harmonic(), &Forcing::dc(0.7), 0.0).unwrap();
            for x in v.du {
                assert_abs_diff_eq!(x, 0.7, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_site_pendulum_force() {
        let s = ChainState::new(0, vec![0.25], 0.0).unwrap();
        let v = vector_field(&s, &Potential::standard(1.0), &Forcing::dc(0.0), 0.0).unwrap();
        assert_abs_diff_eq!(v.du[0], -1.0 / (2.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn energy_examples() {
        let harmonic = Potential::harmonic();
        let s = ChainState::linear(4, 1, 0.1);
        assert_abs_diff_eq!(energy_per_site(&s, &harmonic), 0.25 * 0.25 / 2.0, epsilon = 1e-15);
        let flat = ChainState::new(0, vec![0.0; 3], 0.0).unwrap();
        assert_eq!(energy_per_site(&flat, &Potential::standard(1.0)), 0.0);
        let two = ChainState::new(1, vec![0.0, 0.5], 0.0).unwrap();
        let expect = 0.125 + 1.0 / (4.0 * PI * PI);
        assert_abs_diff_eq!(energy_per_site(&two, &Potential::standard(1.0)), expect, epsilon = 1e-15);
    }

    #[test]
    fn standard_shortcut_matches_generic_route() {
        let s = ChainState::new(2, vec![0.1, 0.45, 0.83, 1.7, 1.62], 0.0).unwrap();
        let pot = Potential::standard(2.3);
        let f = Forcing::ac_sine(0.1, 0.2);
        let fast = vector_field(&s, &pot, &f, 0.37).unwrap();
        let slow = vector_field_generic(&s, &pot, &f, 0.37);
        for (a, b) in fast.du.iter().zip(&slow.du) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn field_commutes_with_translations() {
        let s = ChainState::new(1, vec![0.1, 0.45, 0.83, 0.9], 0.0).unwrap();
        let pot = Potential::Generalized {
            kappa: 1.2,
            site: vec![Harmonic { index: 1, cos: 0.03, sin: 0.01 }],
            mixed: 0.005,
        };
        let f = Forcing::dc(0.2);
        let base = vector_field(&s, &pot, &f, 0.0).unwrap();
        for (p, q) in [(1, 0), (3, -2), (-5, 4)] {
            let moved = vector_field(&s.translate(p, q), &pot, &f, 0.0).unwrap();
            let n = base.du.len() as i64;
            for i in 0..n {
                let expect = base.du[(i + p).rem_euclid(n) as usize];
                assert_abs_diff_eq!(moved.du[i as usize], expect, epsilon = 1e-12);
            }
            let e0 = energy_per_site(&s, &pot);
            assert_abs_diff_eq!(energy_per_site(&s.translate(p, q), &pot), e0, epsilon = 1e-12);
        }
    }
}
