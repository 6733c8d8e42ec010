//! Translation-invariant measures as weighted ensembles of periodic states,
//! and the intersection functionals `Z(mu1, mu2)`, `Z(mu)` and `Z~(mu)`.
//!
//! A member `u` of period `N` stands for the uniform average over its `N`
//! translates, so every functional averages over relative translations.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FkError, Result};
use crate::integrator::advance;
use crate::model::{energy_per_site, lcm, vector_field, ChainState, Dynamics};
use crate::par;
use crate::seed;
use crate::zeroset::{csv_err, ternary_signs, TOL_ZERO};

/// Weighted collection of configurations on the R-quotient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<ChainState>,
    pub weights: Vec<f64>,
}

impl Ensemble {
    /// Canonicalizes members and normalizes weights.
    pub fn new(members: Vec<ChainState>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(FkError::InvalidArgument("an ensemble needs at least one member".into()));
        }
        if members.len() != weights.len() {
            return Err(FkError::InvalidArgument("one weight per member is required".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(FkError::InvalidArgument("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        Ok(Ensemble {
            members: members.iter().map(ChainState::canonical).collect(),
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(members: Vec<ChainState>) -> Result<Self> {
        let n = members.len();
        Self::new(members, vec![1.0; n])
    }

    pub fn single(state: ChainState) -> Self {
        Ensemble { members: vec![state.canonical()], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Time stamp of the first member.
    pub fn time(&self) -> f64 {
        self.members[0].t
    }

    /// Common period of all members.
    pub fn lcm_period(&self) -> usize {
        self.members.iter().fold(1, |l, m| lcm(l, m.period()))
    }

    pub fn mean_energy(&self, dynamics: &Dynamics) -> f64 {
        self.members
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * energy_per_site(m, &dynamics.potential))
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Ensemble = serde_json::from_str(text)?;
        Ensemble::new(raw.members, raw.weights)
    }
}

/// Snap values within the zero tolerance of an integer onto it. The
/// tolerance is absolute so that every integer offset `r` is treated alike.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= TOL_ZERO {
        r
    } else {
        x
    }
}

/// Number of integers `r` for which `w = diff + r` has a zero in the cell
/// with end values `(a, b)`: `-r` must equal `a` or lie strictly between.
fn cell_crossings(a: f64, b: f64) -> i64 {
    let (a, b) = (snap(a), snap(b));
    if a < b {
        (b.ceil() - a.ceil()) as i64
    } else if a > b {
        (a.floor() - b.floor()) as i64
    } else {
        (a.fract() == 0.0) as i64
    }
}

/// Pairs closer than this to an integer shift of each other count as one
/// configuration, matching the zero tracker.
pub use crate::zeroset::COLLAPSE_FLOOR;

/// `z_i(u, v) = sum_r z_i(u - v + r)` over one cell. Collapsed pairs have
/// `u - v + r` identically zero for one `r` and no zeros otherwise.
pub fn pair_intersections(u: &ChainState, v: &ChainState, i: i64) -> i64 {
    if collapsed(u, v) {
        return 0;
    }
    cell_count(u, v, i)
}

fn cell_count(u: &ChainState, v: &ChainState, i: i64) -> i64 {
    let count = cell_crossings(u.at(i) - v.at(i), u.at(i + 1) - v.at(i + 1));
    let n = u.kn_index().max(v.kn_index()) as i64;
    assert!(count <= 2 * n + 1, "cell count {count} exceeds 2n+1 with n = {n}");
    count
}

/// `sup_j |u_j - v_j - k| <= COLLAPSE_FLOOR` for some integer `k`.
fn collapsed(u: &ChainState, v: &ChainState) -> bool {
    let l = lcm(u.period(), v.period()) as i64;
    if u.winding * (l / u.period() as i64) != v.winding * (l / v.period() as i64) {
        return false;
    }
    let k = (u.at(0) - v.at(0)).round();
    (0..l).all(|j| (u.at(j) - v.at(j) - k).abs() <= COLLAPSE_FLOOR)
}

/// `(1/L) sum_i z_i(u, v)` averaged over the relative translations of `v`.
pub fn pair_density(u: &ChainState, v: &ChainState) -> f64 {
    let l = lcm(u.period(), v.period()) as i64;
    let shifts = v.period() as i64;
    let mut total = 0i64;
    for s in 0..shifts {
        let vs = v.translate(s, 0);
        if !collapsed(u, &vs) {
            total += (0..l).map(|i| cell_count(u, &vs, i)).sum::<i64>();
        }
    }
    total as f64 / (l * shifts) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZOptions {
    /// Above this many members the pair sum is subsampled.
    pub mc_threshold: usize,
    pub mc_pairs: usize,
    pub seed: u64,
}

impl Default for ZOptions {
    fn default() -> Self {
        ZOptions { mc_threshold: 64, mc_pairs: 4096, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZValue {
    pub value: f64,
    /// Standard error of the subsampled estimate; zero for exact sums.
    pub stat_err: f64,
    pub pairs: usize,
}

/// `Z(mu1, mu2) = int int z_0(u, v) dmu1 dmu2`.
pub fn z_functional(mu1: &Ensemble, mu2: &Ensemble, opts: &ZOptions) -> ZValue {
    let exact = mu1.len().max(mu2.len()) <= opts.mc_threshold;
    let pairs: Vec<(usize, usize)> = if exact {
        (0..mu1.len()).flat_map(|i| (0..mu2.len()).map(move |j| (i, j))).collect()
    } else {
        let mut rng = seed::stream(opts.seed, "z-pairs");
        (0..opts.mc_pairs)
            .map(|_| (rng.gen_range(0..mu1.len()), rng.gen_range(0..mu2.len())))
            .collect()
    };
    let dens = par::map(&pairs, |&(i, j)| pair_density(&mu1.members[i], &mu2.members[j]));
    if exact {
        let value = pairs
            .iter()
            .zip(&dens)
            .map(|(&(i, j), d)| mu1.weights[i] * mu2.weights[j] * d)
            .sum();
        return ZValue { value, stat_err: 0.0, pairs: pairs.len() };
    }
    // uniform pair draws, weighted by the product measure
    let ws: Vec<f64> = pairs.iter().map(|&(i, j)| mu1.weights[i] * mu2.weights[j]).collect();
    let wsum: f64 = ws.iter().sum();
    let mean = ws.iter().zip(&dens).map(|(w, d)| w * d).sum::<f64>() / wsum;
    let var = ws.iter().zip(&dens).map(|(w, d)| (w / wsum).powi(2) * (d - mean).powi(2)).sum::<f64>();
    ZValue { value: mean, stat_err: var.sqrt(), pairs: pairs.len() }
}

/// `Z(mu) = Z(mu, mu)`.
pub fn z_self(mu: &Ensemble, opts: &ZOptions) -> ZValue {
    z_functional(mu, mu, opts)
}

/// `Z~(mu) = int z_0(du/dt) dmu`, DC only. Velocity profiles that vanish
/// identically under the zero predicate contribute nothing.
pub fn z_derivative_functional(mu: &Ensemble, dynamics: &Dynamics) -> Result<f64> {
    if !dynamics.forcing.is_dc() {
        return Err(FkError::Unsupported("the velocity functional is defined for DC forcing only".into()));
    }
    let per_member = par::map(&mu.members, |m| -> Result<f64> {
        let v = vector_field(m, &dynamics.potential, &dynamics.forcing, m.t)?.du;
        let s = ternary_signs(&v);
        if s.iter().all(|&x| x == 0) {
            return Ok(0.0);
        }
        let n = s.len();
        let z: i64 = (0..n)
            .map(|j| (s[j] == 0 || (s[j] as i32) * (s[(j + 1) % n] as i32) < 0) as i64)
            .sum();
        Ok(z as f64 / n as f64)
    });
    let mut acc = 0.0;
    for (w, z) in mu.weights.iter().zip(per_member) {
        acc += w * z?;
    }
    Ok(acc)
}

/// Push every member forward by `horizon`; weights are unchanged.
pub fn evolve_ensemble(mu: &Ensemble, dynamics: &Dynamics, horizon: f64, dt: f64) -> Result<Ensemble> {
    if horizon < 0.0 {
        return Err(FkError::Precondition("horizon must be nonnegative".into()));
    }
    let moved = par::map(&mu.members, |m| advance(m, dynamics, horizon, dt));
    let members = moved.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { members, weights: mu.weights.clone() })
}

/// One row of a Z time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZRow {
    pub t: f64,
    pub z: f64,
    pub z_self: f64,
    pub z_tilde: Option<f64>,
    pub stat_err: f64,
}

/// Evolve two ensembles together and record `Z`, `Z(mu1)` and `Z~(mu1)` every `dt_out`.
pub fn z_series(
    mu1: &Ensemble,
    mu2: &Ensemble,
    dynamics: &Dynamics,
    horizon: f64,
    dt: f64,
    dt_out: f64,
    opts: &ZOptions,
) -> Result<(Vec<ZRow>, Ensemble, Ensemble)> {
    let mut a = mu1.clone();
    let mut b = mu2.clone();
    let steps = (horizon / dt_out).round().max(1.0) as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let row = |a: &Ensemble, b: &Ensemble| -> Result<ZRow> {
        let z = z_functional(a, b, opts);
        let zs = z_self(a, opts);
        let zt = if dynamics.forcing.is_dc() { Some(z_derivative_functional(a, dynamics)?) } else { None };
        Ok(ZRow { t: a.time(), z: z.value, z_self: zs.value, z_tilde: zt, stat_err: z.stat_err.max(zs.stat_err) })
    };
    rows.push(row(&a, &b)?);
    for _ in 0..steps {
        a = evolve_ensemble(&a, dynamics, dt_out, dt)?;
        b = evolve_ensemble(&b, dynamics, dt_out, dt)?;
        rows.push(row(&a, &b)?);
    }
    Ok((rows, a, b))
}

/// CSV `(t, Z, Zself, Ztilde, stat_err)`.
pub fn write_z_series<W: Write>(rows: &[ZRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "Z", "Zself", "Ztilde", "stat_err"]).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            format!("{:.6}", r.t),
            format!("{:.12}", r.z),
            format!("{:.12}", r.z_self),
            r.z_tilde.map(|x| format!("{x:.12}")).unwrap_or_default(),
            format!("{:.3e}", r.stat_err),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KbOptions {
    pub dt: f64,
    /// Quadrature nodes per unit time (DC).
    pub nodes_per_unit: usize,
}

impl Default for KbOptions {
    fn default() -> Self {
        KbOptions { dt: 1e-2, nodes_per_unit: 4 }
    }
}

/// Orbit samples `phi^{t_l} u` with weights `w_l`, as an ensemble.
fn orbit_ensemble(seed_mu: &Ensemble, dynamics: &Dynamics, times: &[f64], weights: &[f64], dt: f64) -> Result<Ensemble> {
    let per_member = par::map(&seed_mu.members, |m| -> Result<Vec<ChainState>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = m.clone();
        let mut t_prev = 0.0;
        for &t in times {
            cur = advance(&cur, dynamics, t - t_prev, dt)?;
            t_prev = t;
            out.push(cur.clone());
        }
        Ok(out)
    });
    let mut members = Vec::new();
    let mut ws = Vec::new();
    for (states, w) in per_member.into_iter().zip(&seed_mu.weights) {
        for (s, q) in states?.into_iter().zip(weights) {
            if *q > 0.0 {
                members.push(s);
                ws.push(w * q);
            }
        }
    }
    Ensemble::new(members, ws)
}

/// Cesaro average of the pushed-forward seed: trapezoid over `[0, n]` in DC,
/// the mean of `n` iterates of the time-one map in AC. Translation averages
/// are built into every member, so only the time average is explicit.
pub fn krylov_bogolyubov(seed_mu: &Ensemble, dynamics: &Dynamics, n: usize, opts: &KbOptions) -> Result<Ensemble> {
    if n == 0 {
        return Err(FkError::InvalidArgument("n must be positive".into()));
    }
    let (times, weights): (Vec<f64>, Vec<f64>) = if dynamics.forcing.is_dc() {
        let nodes = n * opts.nodes_per_unit.max(1);
        let h = n as f64 / nodes as f64;
        (0..=nodes)
            .map(|l| {
                let end = l == 0 || l == nodes;
                (l as f64 * h, if end { 0.5 * h } else { h } / n as f64)
            })
            .unzip()
    } else {
        (0..n).map(|k| (k as f64, 1.0 / n as f64)).unzip()
    };
    orbit_ensemble(seed_mu, dynamics, &times, &weights, opts.dt)
}

/// Uniform average over one period `t0` of a periodic orbit.
pub fn periodic_orbit_average(state: &ChainState, dynamics: &Dynamics, t0: f64, nodes: usize, dt: f64) -> Result<Ensemble> {
    if !(t0 > 0.0) || nodes == 0 {
        return Err(FkError::InvalidArgument("period and node count must be positive".into()));
    }
    let h = t0 / nodes as f64;
    let times: Vec<f64> = (0..nodes).map(|l| l as f64 * h).collect();
    let weights = vec![1.0 / nodes as f64; nodes];
    orbit_ensemble(&Ensemble::single(state.clone()), dynamics, &times, &weights, dt.min(h))
}

/// `|Z(nu(tau)) - Z(nu)| + |E(nu(tau)) - E(nu)|` with `E` the mean energy per site.
pub fn invariance_defect(nu: &Ensemble, dynamics: &Dynamics, tau: f64, dt: f64, opts: &ZOptions) -> Result<f64> {
    let later = evolve_ensemble(nu, dynamics, tau, dt)?;
    let dz = (z_self(&later, opts).value - z_self(nu, opts).value).abs();
    let de = (later.mean_energy(dynamics) - nu.mean_energy(dynamics)).abs();
    Ok(dz + de)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Forcing, Potential};

    fn st(m: i64, u: &[f64]) -> ChainState {
        ChainState::new(m, u.to_vec(), 0.0).unwrap()
    }

    fn brute_cell(u: &ChainState, v: &ChainState, i: i64) -> i64 {
        (-20..=20)
            .filter(|&r| {
                let a = u.at(i) - v.at(i) + r as f64;
                let b = u.at(i + 1) - v.at(i + 1) + r as f64;
                a == 0.0 || a * b < 0.0
            })
            .count() as i64
    }

    #[test]
    fn pair_examples() {
        let u = st(0, &[0.0, 0.5]);
        assert_eq!(pair_intersections(&u, &u, 0), 0);
        assert_eq!(pair_intersections(&u, &u.translate(0, 3), 1), 0);
        let v = st(0, &[0.25, 0.25]);
        assert_eq!(pair_intersections(&u, &v, 0), 1);
        let a = st(2, &[0.1, 0.9, 1.7, 1.75]);
        let b = st(2, &[-0.3, 1.4, 1.1, 2.3]);
        for i in -4..8 {
            assert_eq!(pair_intersections(&a, &b, i), brute_cell(&a, &b, i));
        }
    }

    #[test]
    fn near_integer_differences_count_alike_in_every_period() {
        // u - v sits 1.5e-10 below an integer at site 0, and the windings differ
        let u = st(0, &[0.3, 0.4, 0.35, 0.3]);
        let v = st(1, &[0.3 + 1.5e-10, 0.2, 0.45, 0.6]);
        let per_period = |k: i64| (4 * k..4 * k + 4).map(|i| pair_intersections(&u, &v, i)).sum::<i64>();
        for k in -3..3 {
            assert_eq!(per_period(k), per_period(0), "period {k}");
        }
    }

    #[test]
    fn z_examples() {
        let opts = ZOptions::default();
        let zero = Ensemble::single(st(0, &[0.0, 0.0]));
        let half = Ensemble::single(st(0, &[0.5, 0.5]));
        assert_eq!(z_functional(&zero, &half, &opts).value, 0.0);
        let mu1 = Ensemble::single(st(0, &[0.0, 0.5]));
        let mu2 = Ensemble::single(st(0, &[0.25, 0.25]));
        assert_eq!(z_functional(&mu1, &mu2, &opts).value, 1.0);
        let a = Ensemble::uniform(vec![st(1, &[0.1, 0.3, 0.9]), st(1, &[0.2, 0.25, 0.7])]).unwrap();
        let b = Ensemble::new(vec![st(1, &[0.0, 0.6, 0.65]), st(2, &[0.4, 1.3, 1.45])], vec![1.0, 3.0]).unwrap();
        let ab = z_functional(&a, &b, &opts).value;
        let ba = z_functional(&b, &a, &opts).value;
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn z_tilde_examples() {
        let eq = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.0));
        let mu = Ensemble::uniform(vec![st(0, &[0.0, 0.0, 0.0, 0.0]), st(0, &[0.5, 0.5])]).unwrap();
        // both members are equilibria, so the velocity vanishes identically
        assert_eq!(z_derivative_functional(&mu, &eq).unwrap(), 0.0);
        let harmonic = Dynamics::new(Potential::harmonic(), Forcing::dc(0.3));
        assert_eq!(z_derivative_functional(&Ensemble::single(ChainState::linear(5, 2, 0.1)), &harmonic).unwrap(), 0.0);
        let zigzag = Dynamics::new(Potential::harmonic(), Forcing::dc(0.0));
        let alt = Ensemble::single(st(0, &[0.0, 0.3, 0.0, 0.3]));
        assert_eq!(z_derivative_functional(&alt, &zigzag).unwrap(), 1.0);
        let ac = Dynamics::new(Potential::harmonic(), Forcing::ac_sine(0.0, 0.1));
        assert!(z_derivative_functional(&alt, &ac).is_err());
    }

    #[test]
    fn weights_normalize_and_reject_bad_input() {
        let e = Ensemble::new(vec![st(0, &[1.3]), st(0, &[0.2])], vec![2.0, 6.0]).unwrap();
        assert_eq!(e.weights, vec![0.25, 0.75]);
        assert!((e.members[0].u[0] - 0.3).abs() < 1e-15);
        assert!(Ensemble::new(vec![st(0, &[0.0])], vec![0.0]).is_err());
        assert!(Ensemble::new(vec![], vec![]).is_err());
        let back = Ensemble::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn evolution_examples() {
        let d = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.0));
        let eq = Ensemble::uniform(vec![st(0, &[0.0, 0.0]), st(0, &[0.5, 0.5])]).unwrap();
        assert_eq!(evolve_ensemble(&eq, &d, 0.0, 1e-2).unwrap(), eq);
        let later = evolve_ensemble(&eq, &d, 5.0, 1e-2).unwrap();
        for (a, b) in later.members.iter().zip(&eq.members) {
            assert_eq!(a.u, b.u);
        }
        let kb = krylov_bogolyubov(&eq, &d, 4, &KbOptions::default()).unwrap();
        assert!(invariance_defect(&kb, &d, 1.0, 1e-2, &ZOptions::default()).unwrap() < 1e-14);
    }

    #[test]
    fn subsampled_z_is_close_to_exact() {
        let mut rng = seed::stream(3, "test");
        let members: Vec<ChainState> = (0..70).map(|_| seed::random_state(&mut rng, 4, 1, 0.3)).collect();
        let mu = Ensemble::uniform(members).unwrap();
        let exact = z_self(&mu, &ZOptions { mc_threshold: 1000, ..Default::default() });
        let mc = z_self(&mu, &ZOptions::default());
        assert!(mc.stat_err > 0.0);
        assert!((mc.value - exact.value).abs() < 5.0 * mc.stat_err + 1e-12);
    }
}
