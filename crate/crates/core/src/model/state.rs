use serde::{Deserialize, Serialize};

use crate::error::{FkError, Result};

/// An `(N, M)`-periodic configuration: `u_{i+kN} = u_i + kM`, stamped with a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// Winding per spatial period.
    pub winding: i64,
    /// Lift values `u_0 .. u_{N-1}`.
    pub u: Vec<f64>,
    pub t: f64,
}

/// Result of comparing two configurations in the componentwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderRelation {
    Le,
    Ge,
    Eq,
    Incomparable,
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a as u64, b as u64) as usize * b
}

impl ChainState {
    pub fn new(winding: i64, u: Vec<f64>, t: f64) -> Result<Self> {
        if u.is_empty() {
            return Err(FkError::InvalidArgument("a chain needs at least one site".into()));
        }
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(FkError::NumericDomain(format!("u[{i}] is not finite")));
        }
        if !t.is_finite() {
            return Err(FkError::NumericDomain("time stamp is not finite".into()));
        }
        Ok(ChainState { winding, u, t })
    }

    /// `u_j = j M / N + phase`.
    pub fn linear(n: usize, winding: i64, phase: f64) -> Self {
        let rho = winding as f64 / n as f64;
        ChainState {
            winding,
            u: (0..n).map(|j| j as f64 * rho + phase).collect(),
            t: 0.0,
        }
    }

    #[inline]
    pub fn period(&self) -> usize {
        self.u.len()
    }

    /// Mean spacing `M / N` as a float.
    pub fn rho(&self) -> f64 {
        self.winding as f64 / self.u.len() as f64
    }

    /// Value at any lattice site via the winding convention.
    #[inline]
    pub fn at(&self, j: i64) -> f64 {
        let n = self.u.len() as i64;
        let k = j.div_euclid(n);
        self.u[j.rem_euclid(n) as usize] + (k * self.winding) as f64
    }

    /// `max_i |u_{i+1} - u_i|` including the seam gap `u_0 + M - u_{N-1}`.
    pub fn spacing_bound(&self) -> f64 {
        let n = self.u.len();
        let mut best = 0.0_f64;
        for i in 0..n {
            let next = if i + 1 < n { self.u[i + 1] } else { self.u[0] + self.winding as f64 };
            best = best.max((next - self.u[i]).abs());
        }
        best
    }

    /// Smallest integer `n` with the state in `K_n`.
    pub fn kn_index(&self) -> u64 {
        self.spacing_bound().ceil() as u64
    }

    /// `T_{p,q}`: `u'_i = u_{i+p} + q`. The integer part of the shift is
    /// formed first and added once, so `T_{N,-M}` is the identity bit for bit.
    pub fn translate(&self, p: i64, q: i64) -> ChainState {
        let n = self.u.len() as i64;
        ChainState {
            winding: self.winding,
            u: (0..n)
                .map(|i| {
                    let j = i + p;
                    let shift = j.div_euclid(n) * self.winding + q;
                    self.u[j.rem_euclid(n) as usize] + shift as f64
                })
                .collect(),
            t: self.t,
        }
    }

    /// Representative with `u_0 in [0, 1)` (the R-quotient).
    pub fn canonical(&self) -> ChainState {
        let mut shift = self.u[0].floor();
        // u_0 = -tiny would round to 1.0; keep the nearer representative
        if self.u[0] - shift >= 1.0 {
            shift += 1.0;
        }
        ChainState {
            winding: self.winding,
            u: self.u.iter().map(|x| x - shift).collect(),
            t: self.t,
        }
    }

    /// Same configuration described with period `len` (a multiple of `N`).
    pub fn extend_to(&self, len: usize) -> Result<ChainState> {
        let n = self.u.len();
        if len % n != 0 {
            return Err(FkError::Incompatible(format!(
                "period {len} is not a multiple of {n}"
            )));
        }
        let reps = (len / n) as i64;
        Ok(ChainState {
            winding: self.winding * reps,
            u: (0..len as i64).map(|j| self.at(j)).collect(),
            t: self.t,
        })
    }

    /// Largest absolute difference of lift values over one common period.
    pub fn sup_distance(&self, other: &ChainState) -> f64 {
        let l = lcm(self.period(), other.period()) as i64;
        (0..l)
            .map(|j| (self.at(j) - other.at(j)).abs())
            .fold(0.0, f64::max)
    }
}

/// Componentwise comparison on one common period. States with different
/// rotation numbers drift apart linearly and are never globally ordered.
pub fn partial_order_compare(a: &ChainState, b: &ChainState) -> OrderRelation {
    let l = lcm(a.period(), b.period());
    let wa = a.winding * (l / a.period()) as i64;
    let wb = b.winding * (l / b.period()) as i64;
    if wa != wb {
        return OrderRelation::Incomparable;
    }
    let mut any_gt = false;
    let mut any_lt = false;
    for j in 0..l as i64 {
        let d = a.at(j) - b.at(j);
        if d > 0.0 {
            any_gt = true;
        } else if d < 0.0 {
            any_lt = true;
        }
        if any_gt && any_lt {
            return OrderRelation::Incomparable;
        }
    }
    match (any_gt, any_lt) {
        (false, false) => OrderRelation::Eq,
        (true, false) => OrderRelation::Ge,
        (false, true) => OrderRelation::Le,
        _ => OrderRelation::Incomparable,
    }
}

pub const DEFAULT_DISTANCE_WINDOW: i64 = 32;
pub const DEFAULT_DISTANCE_DECAY: i64 = 8;

/// Exponentially weighted window distance on the R-quotient:
/// `min_r max_{|j| <= W} exp(-|j|/n0) |a_j - b_j - r|`.
pub fn config_distance(a: &ChainState, b: &ChainState, window: i64, decay: i64) -> f64 {
    let weights: Vec<(i64, f64)> = (-window..=window)
        .map(|j| (j, (-(j.abs() as f64) / decay as f64).exp()))
        .collect();
    let diffs: Vec<f64> = weights.iter().map(|&(j, _)| a.at(j) - b.at(j)).collect();
    let eval = |r: f64| {
        weights
            .iter()
            .zip(&diffs)
            .map(|(&(_, w), d)| w * (d - r).abs())
            .fold(0.0, f64::max)
    };
    let d0 = a.at(0) - b.at(0);
    let r0 = d0.round();
    let bound = eval(r0);
    // the j = 0 term forces |d0 - r| <= optimum <= bound
    let lo = (d0 - bound).floor() as i64;
    let hi = (d0 + bound).ceil() as i64;
    (lo..=hi).map(|r| eval(r as f64)).fold(bound, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(m: i64, u: &[f64]) -> ChainState {
        ChainState::new(m, u.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn spacing_examples() {
        assert!((st(1, &[0.0, 0.3, 0.6]).spacing_bound() - 0.4).abs() < 1e-15);
        assert_eq!(st(0, &[0.0, 0.0]).spacing_bound(), 0.0);
        assert_eq!(st(5, &[0.0]).spacing_bound(), 5.0);
        assert_eq!(st(1, &[0.0, 0.3, 0.6]).kn_index(), 1);
    }

    #[test]
    fn translate_examples() {
        let a = st(1, &[0.0, 0.4]);
        assert_eq!(a.translate(1, 0).u, vec![0.4, 1.0]);
        assert_eq!(a.translate(2, -1), a);
        assert_eq!(a.translate(0, 1).u, vec![1.0, 1.4]);
    }

    #[test]
    fn order_examples() {
        let a = st(0, &[0.0, 0.6]);
        assert_eq!(partial_order_compare(&a, &a), OrderRelation::Eq);
        assert_eq!(partial_order_compare(&a.translate(0, 1), &a), OrderRelation::Ge);
        assert_eq!(partial_order_compare(&a, &a.translate(0, 1)), OrderRelation::Le);
        let b = st(0, &[0.1, 0.5]);
        assert_eq!(partial_order_compare(&a, &b), OrderRelation::Incomparable);
        // different rotation numbers are never ordered
        let c = st(1, &[5.0, 5.0]);
        assert_eq!(partial_order_compare(&c, &a), OrderRelation::Incomparable);
        // commensurable periods compare on the lcm window
        let d = st(0, &[0.0]);
        let e = st(0, &[0.1, 0.2]);
        assert_eq!(partial_order_compare(&d, &e), OrderRelation::Le);
    }

    #[test]
    fn distance_examples() {
        let a = st(1, &[0.0, 0.2, 0.7]);
        assert_eq!(config_distance(&a, &a, 32, 8), 0.0);
        assert!(config_distance(&a.translate(0, 7), &a, 32, 8) < 1e-12);
        let z = st(0, &[0.0]);
        let q = st(0, &[0.25]);
        assert!((config_distance(&z, &q, 2, 8) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn distance_brute_force() {
        let a = st(2, &[0.1, 0.9, 1.3, 1.2]);
        let b = st(2, &[-3.2, -2.5, -2.9, -2.0]);
        let (w, n0) = (5, 3);
        let brute = (-20..=20)
            .map(|r| {
                (-w..=w)
                    .map(|j: i64| {
                        (-(j.abs() as f64) / n0 as f64).exp() * (a.at(j) - b.at(j) - r as f64).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((config_distance(&a, &b, w, n0) - brute).abs() < 1e-14);
    }

    #[test]
    fn extension_preserves_values() {
        let a = st(1, &[0.0, 0.3, 0.6]);
        let e = a.extend_to(6).unwrap();
        assert_eq!(e.winding, 2);
        for j in -10..10 {
            assert!((a.at(j) - e.at(j)).abs() < 1e-15);
        }
        assert!(a.extend_to(4).is_err());
    }

    proptest! {
        // dyadic lifts make every integer shift exact
        #[test]
        fn translate_inverse_exact(u in prop::collection::vec(-2048i32..2048, 1..9), m in -3i64..4, p in -20i64..20, q in -5i64..5) {
            let a = ChainState::new(m, u.iter().map(|&x| x as f64 / 1024.0).collect(), 0.0).unwrap();
            let back = a.translate(p, q).translate(-p, -q);
            prop_assert_eq!(back, a);
        }

        #[test]
        fn translate_inverse_round_off(u in prop::collection::vec(-2.0f64..2.0, 1..9), m in -3i64..4, p in -20i64..20, q in -5i64..5) {
            let a = ChainState::new(m, u, 0.0).unwrap();
            let back = a.translate(p, q).translate(-p, -q);
            prop_assert!(back.sup_distance(&a) <= 1e-13);
        }

        #[test]
        fn order_is_antisymmetric(u in prop::collection::vec(-1.0f64..1.0, 1..6), shift in prop::collection::vec(0.0f64..0.5, 1..6)) {
            let n = u.len().min(shift.len());
            let a = ChainState::new(0, u[..n].to_vec(), 0.0).unwrap();
            let b = ChainState::new(0, (0..n).map(|i| u[i] + shift[i]).collect(), 0.0).unwrap();
            let ab = partial_order_compare(&a, &b);
            let ba = partial_order_compare(&b, &a);
            match ab {
                OrderRelation::Eq => prop_assert_eq!(ba, OrderRelation::Eq),
                OrderRelation::Le => prop_assert_eq!(ba, OrderRelation::Ge),
                OrderRelation::Ge => prop_assert_eq!(ba, OrderRelation::Le),
                OrderRelation::Incomparable => prop_assert_eq!(ba, OrderRelation::Incomparable),
            }
        }
    }
}
