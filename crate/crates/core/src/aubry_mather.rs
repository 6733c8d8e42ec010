//! Rotationally ordered configurations, ordered invariant measures for
//! rational rotation numbers, the cylinder projection and its diagnostics.

use std::io::Write;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{FkError, Result};
use crate::integrator::{advance, stroboscopic_map};
use crate::measures::{krylov_bogolyubov, periodic_orbit_average, Ensemble, KbOptions};
use crate::model::{config_distance, lcm, ChainState, Dynamics, DEFAULT_DISTANCE_DECAY, DEFAULT_DISTANCE_WINDOW};
use crate::par;
use crate::sliding::{classify_asymptotics, ClassifyOptions, Verdict};
use crate::zeroset::{classify_zero, csv_err, is_zero, zero_scale, ZeroClass, ZeroProfile};

pub const TOL_WIDTH: f64 = 1e-8;
/// Componentwise differences below this count as equal in order checks.
pub const TOL_ORDER: f64 = 1e-10;
pub const EPS_CONFIG: f64 = 1e-4;
pub const EPS_PI: f64 = 1e-6;
pub const DEFAULT_Q_MAX: i64 = 128;

/// Exactly `M / N`.
pub fn rotation_number(state: &ChainState) -> Ratio<i64> {
    Ratio::new(state.winding, state.period() as i64)
}

/// Continued-fraction convergents of `x` with denominators up to `q_max`.
pub fn convergents(x: f64, q_max: i64) -> Vec<Ratio<i64>> {
    let mut out = Vec::new();
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > q_max {
            break;
        }
        out.push(Ratio::new(h2, k2));
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderednessReport {
    pub is_ordered: bool,
    /// `(p, q)` with the largest violation.
    pub worst: Option<(i64, i64)>,
    /// `min(max (T u - u)^+, max (T u - u)^-)` at `worst`.
    pub violation: f64,
    pub rho_num: i64,
    pub rho_den: i64,
    /// `max |u_j - u_i - ρ(j - i)|`.
    pub width: f64,
    pub p_range: i64,
}

/// `max_{i,j} |u_j - u_i - ρ(j - i)|` over one period.
pub fn width(state: &ChainState) -> f64 {
    let rho = state.rho();
    let h: Vec<f64> = state.u.iter().enumerate().map(|(j, u)| u - rho * j as f64).collect();
    let hi = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = h.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Compare every `T_{p,q} u` with `u` for `|p| <= range`. Outside
/// `|q| <= ceil(spacing_bound * |p|)` the comparison holds trivially.
pub fn ordered_check(state: &ChainState, range: i64) -> Result<OrderednessReport> {
    let n = state.period() as i64;
    if range < n {
        return Err(FkError::Precondition(format!("range {range} is below the period {n}")));
    }
    let sb = state.spacing_bound();
    let mut worst = None;
    let mut violation = 0.0_f64;
    for p in -range..=range {
        let qmax = (sb * p.abs() as f64).ceil() as i64;
        for q in -qmax..=qmax {
            let (mut up, mut down) = (0.0_f64, 0.0_f64);
            for i in 0..n {
                let d = state.at(i + p) + q as f64 - state.at(i);
                if d > TOL_ORDER {
                    up = up.max(d);
                } else if d < -TOL_ORDER {
                    down = down.max(-d);
                }
            }
            let v = up.min(down);
            if v > violation {
                violation = v;
                worst = Some((p, q));
            }
        }
    }
    let rho = rotation_number(state);
    Ok(OrderednessReport {
        is_ordered: worst.is_none(),
        worst,
        violation,
        rho_num: *rho.numer(),
        rho_den: *rho.denom(),
        width: width(state),
        p_range: range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ConstructOptions {
    pub classify: ClassifyOptions,
    /// Time nodes per period when averaging a sliding orbit.
    pub orbit_nodes: usize,
    pub kb: KbOptions,
    /// AC: time-one iterates discarded before averaging.
    pub ac_transient: usize,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions { classify: ClassifyOptions::default(), orbit_nodes: 256, kb: KbOptions::default(), ac_transient: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Construction {
    pub ensemble: Ensemble,
    pub reports: Vec<OrderednessReport>,
    pub verdict: Option<Verdict>,
    pub rho_num: i64,
    pub rho_den: i64,
}

/// Ordered `(φ, T)`-invariant measure with rotation number `p / q`, from
/// the orbit of `u_i = i p / q`. Equilibria give a point mass, sliding
/// orbits a period average, anything else a Cesaro average.
pub fn construct_ordered_invariant(p: i64, q: i64, dynamics: &Dynamics, n_avg: usize, opts: &ConstructOptions) -> Result<Construction> {
    if q == 0 {
        return Err(FkError::InvalidArgument("q must be nonzero".into()));
    }
    let rho = Ratio::new(p, q);
    let (m, n) = (*rho.numer(), *rho.denom());
    let seed = ChainState::linear(n as usize, m, 0.0);
    let (ensemble, verdict) = if dynamics.forcing.is_dc() {
        let r = classify_asymptotics(&seed, dynamics, &opts.classify)?;
        let ens = match r.verdict {
            Verdict::Equilibrium => Ensemble::single(r.final_state.clone()),
            Verdict::PeriodicSliding { t0 } => {
                periodic_orbit_average(&r.final_state, dynamics, t0, opts.orbit_nodes, opts.classify.dt)?
            }
            Verdict::Undetermined => {
                krylov_bogolyubov(&Ensemble::single(r.final_state.clone()), dynamics, n_avg, &opts.kb)?
            }
        };
        (ens, Some(r.verdict))
    } else {
        let mut s = seed;
        for _ in 0..opts.ac_transient {
            s = stroboscopic_map(&s, dynamics, opts.kb.dt)?;
        }
        (krylov_bogolyubov(&Ensemble::single(s), dynamics, n_avg, &opts.kb)?, None)
    };
    let range = 2 * n;
    let reports = par::map(&ensemble.members, |u| ordered_check(u, range));
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    for (i, r) in reports.iter().enumerate() {
        if !r.is_ordered || r.width > 1.0 + TOL_WIDTH {
            return Err(FkError::Construction(format!(
                "member {i} fails the order check: violation {:.3e} at {:?}, width {:.6}",
                r.violation, r.worst, r.width
            )));
        }
        if (r.rho_num, r.rho_den) != (m, n) {
            return Err(FkError::Construction(format!("member {i} has rotation number {}/{}", r.rho_num, r.rho_den)));
        }
    }
    Ok(Construction { ensemble, reports, verdict, rho_num: m, rho_den: n })
}

/// `(u_0 mod 1, u_1 - u_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderPoint {
    pub x: f64,
    pub p: f64,
}

pub fn project_pi(state: &ChainState) -> CylinderPoint {
    let x = state.at(0).rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to 1.0
    CylinderPoint { x: if x >= 1.0 { 0.0 } else { x }, p: state.at(1) - state.at(0) }
}

/// `min_k |x - x' + k| + |p - p'|`.
pub fn cylinder_distance(a: CylinderPoint, b: CylinderPoint) -> f64 {
    let dx = (a.x - b.x).rem_euclid(1.0);
    dx.min(1.0 - dx) + (a.p - b.p).abs()
}

/// Members of an ensemble together with their spatial translates.
pub fn support_samples(mu: &Ensemble) -> Vec<ChainState> {
    mu.members
        .iter()
        .flat_map(|m| (0..m.period() as i64).map(move |p| m.translate(p, 0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub pairs_tested: usize,
    /// Smallest cylinder distance among pairs with configuration distance above `eps_c`.
    pub min_pi_distance: f64,
    pub min_ratio: f64,
    pub violation: Option<(usize, usize)>,
    pub violations: usize,
    /// Pairs whose difference (up to integer shifts) has a singular zero.
    pub singular_pairs: Vec<(usize, usize)>,
}

/// Singular zeros of `u - v + r` on one common period (same rotation
/// number) or on a window of sites (different rotation numbers).
pub fn difference_has_singular_zero(u: &ChainState, v: &ChainState) -> bool {
    let l = lcm(u.period(), v.period());
    let same_rho = u.winding * (l / u.period()) as i64 == v.winding * (l / v.period()) as i64;
    let (lo, hi, periodic) = if same_rho { (0, l as i64, true) } else { (-64, 64, false) };
    let diff: Vec<f64> = (lo..hi).map(|j| u.at(j) - v.at(j)).collect();
    let dmin = diff.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for r in (-dmax.ceil() as i64)..=(-dmin.floor() as i64) {
        let w: Vec<f64> = diff.iter().map(|d| d + r as f64).collect();
        let s = zero_scale(&w);
        if w.iter().all(|x| is_zero(*x, s)) {
            continue;
        }
        let prof = if periodic { ZeroProfile::periodic(w.clone()) } else { ZeroProfile::window(w.clone()) };
        for j in 0..w.len() as i64 {
            if !is_zero(w[j as usize], s) {
                continue;
            }
            if let Ok(ZeroClass::Singular(_)) = classify_zero(&prof, j) {
                return true;
            }
        }
    }
    false
}

/// Pairwise scan of `π` over samples: pairs farther apart than `eps_c`
/// in configuration space must stay `eps_pi` apart on the cylinder.
pub fn injectivity_diagnostic(samples: &[ChainState], eps_c: f64, eps_pi: f64) -> InjectivityReport {
    let pts: Vec<CylinderPoint> = samples.iter().map(project_pi).collect();
    let pairs: Vec<(usize, usize)> = (0..samples.len())
        .flat_map(|i| (i + 1..samples.len()).map(move |j| (i, j)))
        .collect();
    let scans = par::map(&pairs, |&(i, j)| {
        let dc = config_distance(&samples[i], &samples[j], DEFAULT_DISTANCE_WINDOW, DEFAULT_DISTANCE_DECAY);
        if dc <= eps_c {
            return None;
        }
        let dp = cylinder_distance(pts[i], pts[j]);
        Some((dp, dp / dc, difference_has_singular_zero(&samples[i], &samples[j])))
    });
    let mut rep = InjectivityReport {
        pairs_tested: 0,
        min_pi_distance: f64::INFINITY,
        min_ratio: f64::INFINITY,
        violation: None,
        violations: 0,
        singular_pairs: Vec::new(),
    };
    for (&(i, j), scan) in pairs.iter().zip(scans) {
        let Some((dp, ratio, singular)) = scan else { continue };
        rep.pairs_tested += 1;
        rep.min_ratio = rep.min_ratio.min(ratio);
        if dp < rep.min_pi_distance {
            rep.min_pi_distance = dp;
            if dp < eps_pi {
                rep.violation = Some((i, j));
            }
        }
        if dp < eps_pi {
            rep.violations += 1;
        }
        if singular {
            rep.singular_pairs.push((i, j));
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicRow {
    pub x: f64,
    pub p: f64,
    pub x_t: f64,
    pub p_t: f64,
    pub x_phi: f64,
    pub p_phi: f64,
}

fn flow(u: &ChainState, dynamics: &Dynamics, dc_dt: f64, dt: f64) -> Result<ChainState> {
    if dynamics.forcing.is_dc() {
        advance(u, dynamics, dc_dt, dt)
    } else {
        stroboscopic_map(u, dynamics, dt)
    }
}

/// `(π(u), π(Tu), π(φ^Δ u))` with `Δ = dc_dt` in DC and the time-one map in AC.
pub fn characteristic_map_samples(samples: &[ChainState], dynamics: &Dynamics, dc_dt: f64, dt: f64) -> Result<Vec<CharacteristicRow>> {
    let rows = par::map(samples, |u| -> Result<CharacteristicRow> {
        let a = project_pi(u);
        let t = project_pi(&u.translate(1, 0));
        let f = project_pi(&flow(u, dynamics, dc_dt, dt)?);
        Ok(CharacteristicRow { x: a.x, p: a.p, x_t: t.x, p_t: t.p, x_phi: f.x, p_phi: f.p })
    });
    rows.into_iter().collect()
}

/// Largest `d(π(T φ u), π(φ T u))` over the samples.
pub fn commutation_defect(samples: &[ChainState], dynamics: &Dynamics, dc_dt: f64, dt: f64) -> Result<f64> {
    let defects = par::map(samples, |u| -> Result<f64> {
        let a = project_pi(&flow(u, dynamics, dc_dt, dt)?.translate(1, 0));
        let b = project_pi(&flow(&u.translate(1, 0), dynamics, dc_dt, dt)?);
        Ok(cylinder_distance(a, b))
    });
    let mut worst = 0.0_f64;
    for d in defects {
        worst = worst.max(d?);
    }
    Ok(worst)
}

/// CSV `(x, p, x_T, p_T, x_phi, p_phi)`.
pub fn write_characteristic_csv<W: Write>(rows: &[CharacteristicRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "p", "x_T", "p_T", "x_phi", "p_phi"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.x, r.p, r.x_t, r.p_t, r.x_phi, r.p_phi].map(|v| format!("{v:.12}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Forcing, Potential};
    use std::f64::consts::PI;

    #[test]
    fn rotation_numbers() {
        assert_eq!(rotation_number(&ChainState::linear(3, 1, 0.0)), Ratio::new(1, 3));
        assert_eq!(rotation_number(&ChainState::linear(1, 0, 0.0)), Ratio::new(0, 1));
        assert_eq!(rotation_number(&ChainState::linear(5, -2, 0.0)), Ratio::new(-2, 5));
    }

    #[test]
    fn golden_mean_convergents() {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let c = convergents(g, 128);
        let dens: Vec<i64> = c.iter().map(|r| *r.denom()).collect();
        assert_eq!(dens, vec![1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
        assert_eq!(*c.last().unwrap(), Ratio::new(55, 89));
        assert_eq!(convergents(0.4, 128).last().copied(), Some(Ratio::new(2, 5)));
    }

    fn hull_state(amp: f64) -> ChainState {
        let rho = 1.0 / 3.0;
        let u = (0..3).map(|j| j as f64 * rho + amp * (2.0 * PI * j as f64 * rho).sin()).collect();
        ChainState::new(1, u, 0.0).unwrap()
    }

    /// Orderedness of `u_j = f(jρ)` is monotonicity of `f` on the orbit lift.
    fn hull_monotone(amp: f64) -> bool {
        let f = |x: f64| x + amp * (2.0 * PI * x).sin();
        (-6..6).all(|k| f((k + 1) as f64 / 3.0) > f(k as f64 / 3.0))
    }

    #[test]
    fn order_examples() {
        let lin = ordered_check(&ChainState::linear(3, 1, 0.2), 3).unwrap();
        assert!(lin.is_ordered && lin.width < 1e-15);
        for amp in [0.05, 0.15, 0.19, 0.2, 0.4] {
            let r = ordered_check(&hull_state(amp), 6).unwrap();
            assert_eq!(r.is_ordered, hull_monotone(amp), "amplitude {amp}");
        }
        let bad = ordered_check(&ChainState::new(1, vec![0.0, 0.9, 0.1], 0.0).unwrap(), 3).unwrap();
        assert!(!bad.is_ordered);
        let (p, q) = bad.worst.unwrap();
        let t = ChainState::new(1, vec![0.0, 0.9, 0.1], 0.0).unwrap();
        assert_eq!(crate::model::partial_order_compare(&t.translate(p, q), &t), crate::model::OrderRelation::Incomparable);
        assert!(ordered_check(&t, 2).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_pi(&ChainState::linear(1, 0, 0.0)), CylinderPoint { x: 0.0, p: 0.0 });
        let u = ChainState::new(0, vec![0.25, 0.75], 0.0).unwrap();
        assert_eq!(project_pi(&u), CylinderPoint { x: 0.25, p: 0.5 });
        assert_eq!(project_pi(&u.translate(0, 3)), project_pi(&u));
        assert!((cylinder_distance(CylinderPoint { x: 0.95, p: 0.0 }, CylinderPoint { x: 0.05, p: 0.1 }) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn injectivity_examples() {
        let a = ChainState::linear(1, 0, 0.0);
        let b = ChainState::linear(1, 0, 0.5);
        let r = injectivity_diagnostic(&[a.clone(), b.clone(), a.clone()], EPS_CONFIG, EPS_PI);
        assert_eq!(r.violations, 0);
        assert_eq!(r.pairs_tested, 2);
        let orbit = support_samples(&Ensemble::single(ChainState::linear(7, 3, 0.1)));
        let r = injectivity_diagnostic(&orbit, EPS_CONFIG, EPS_PI);
        assert_eq!(r.violations, 0);
        assert!(r.singular_pairs.is_empty());
        // a coincident site with equal-sign neighbours is singular
        let c = ChainState::new(0, vec![0.0, 0.1, 0.0], 0.0).unwrap();
        let d = ChainState::new(0, vec![0.0, 0.0, -0.1], 0.0).unwrap();
        assert!(difference_has_singular_zero(&ChainState::linear(3, 0, 0.0), &c));
        assert!(difference_has_singular_zero(&c, &d));
        assert!(!difference_has_singular_zero(&ChainState::linear(3, 0, 0.0), &ChainState::linear(3, 0, 0.3)));
    }

    #[test]
    fn characteristic_map_examples() {
        let harmonic = Dynamics::new(Potential::harmonic(), Forcing::dc(0.0));
        let lin = ChainState::linear(3, 1, 0.0);
        let rows = characteristic_map_samples(&[lin.clone()], &harmonic, 0.5, 1e-2).unwrap();
        assert!((rows[0].x_t - 1.0 / 3.0).abs() < 1e-15 && (rows[0].p_t - 1.0 / 3.0).abs() < 1e-15);
        let (a, b) = (CylinderPoint { x: rows[0].x, p: rows[0].p }, CylinderPoint { x: rows[0].x_phi, p: rows[0].p_phi });
        assert!(cylinder_distance(a, b) < 1e-15);
        let pend = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.0));
        let eq = ChainState::linear(2, 0, 0.5);
        let rows = characteristic_map_samples(&[eq], &pend, 0.5, 1e-2).unwrap();
        assert_eq!((rows[0].x_phi, rows[0].p_phi), (rows[0].x, rows[0].p));
        let driven = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.3));
        let u = ChainState::new(1, vec![0.1, 0.2, 0.9], 0.0).unwrap();
        assert!(commutation_defect(&[u], &driven, 0.7, 1e-2).unwrap() < 1e-10);
    }

    #[test]
    fn harmonic_construction_is_linear_profile() {
        let d = Dynamics::new(Potential::harmonic(), Forcing::dc(0.0));
        let c = construct_ordered_invariant(2, 6, &d, 4, &ConstructOptions::default()).unwrap();
        assert_eq!((c.rho_num, c.rho_den), (1, 3));
        assert_eq!(c.ensemble.len(), 1);
        assert!(c.ensemble.members[0].sup_distance(&ChainState::linear(3, 1, 0.0)) < 1e-12);
        assert!(c.reports[0].width < 1e-15);
    }

    #[test]
    fn pinned_construction_at_rho_zero() {
        let d = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.0));
        let c = construct_ordered_invariant(0, 1, &d, 4, &ConstructOptions::default()).unwrap();
        assert_eq!(c.verdict, Some(Verdict::Equilibrium));
        assert_eq!(c.ensemble.members[0].u, vec![0.0]);
        assert_eq!(c.reports[0].width, 0.0);
    }
}
