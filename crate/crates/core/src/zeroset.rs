//! Discrete zero-set calculus for solutions of the cooperative linear system
//! `dw_j/dt = a_j w_{j-1} + b_j w_{j+1} + c_j w_j`.
//!
//! A profile `w` has a zero in cell `[j, j+1)` when `w_j = 0` or
//! `w_j w_{j+1} < 0`. Along a trajectory the per-cell counts change only at
//! isolated events; [`ZeroTracker`] localizes them on the cubic interpolant
//! of the samples and books each one into integer boundary fluxes `c_i` and
//! disappearance counts `d_i` so that for every window
//! `z_{m,n}(end) - z_{m,n}(start) = c_m - c_n - sum_{m<=j<n} d_j`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{FkError, Result};
use crate::integrator::{integrate_linear_streaming, CoefficientSource, LinearSystemCoeffs};
use crate::interp::{bisect, HermiteCubic};
use crate::model::{ChainState, Dynamics, Interaction, Potential};

pub const TOL_ZERO: f64 = 1e-10;
pub const TOL_EVENT: f64 = 1e-9;
pub const TOL_TANGENCY: f64 = 1e-8;
/// Below this separation the linearization uses the derivative limit.
pub const TOL_QUOTIENT: f64 = 1e-9;

/// `max(1, |w|_inf)`, the scale of the zero predicate.
pub fn zero_scale(w: &[f64]) -> f64 {
    w.iter().fold(1.0_f64, |m, x| m.max(x.abs()))
}

pub fn is_zero(x: f64, scale: f64) -> bool {
    x.abs() <= TOL_ZERO * scale
}

/// Sign under the zero predicate: -1, 0 or +1.
pub fn ternary_sign(x: f64, scale: f64) -> i8 {
    if is_zero(x, scale) {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

pub fn ternary_signs(w: &[f64]) -> Vec<i8> {
    let s = zero_scale(w);
    w.iter().map(|&x| ternary_sign(x, s)).collect()
}

#[inline]
fn cell_zero(a: i8, b: i8) -> i64 {
    (a == 0 || (a as i32) * (b as i32) < 0) as i64
}

fn strict_sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// A profile over a finite window or one period of an N-periodic sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroProfile {
    pub w: Vec<f64>,
    pub periodic: bool,
}

impl ZeroProfile {
    pub fn periodic(w: Vec<f64>) -> Self {
        ZeroProfile { w, periodic: true }
    }

    pub fn window(w: Vec<f64>) -> Self {
        ZeroProfile { w, periodic: false }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, j: i64) -> Option<f64> {
        let n = self.w.len() as i64;
        if self.periodic {
            Some(self.w[j.rem_euclid(n) as usize])
        } else if (0..n).contains(&j) {
            Some(self.w[j as usize])
        } else {
            None
        }
    }

    pub fn scale(&self) -> f64 {
        zero_scale(&self.w)
    }

    /// Per-cell indicator `z_j`, if both ends of the cell are available.
    pub fn cell(&self, j: i64) -> Option<i64> {
        let s = self.scale();
        let a = self.get(j)?;
        let b = self.get(j + 1)?;
        Some(cell_zero(ternary_sign(a, s), ternary_sign(b, s)))
    }
}

/// `z_{m,n}(w) = sum_{m <= j < n} z_j(w)`.
pub fn count_zeros(w: &ZeroProfile, m: i64, n: i64) -> Result<i64> {
    if m >= n {
        return Err(FkError::InvalidArgument(format!("empty window [{m}, {n})")));
    }
    (m..n)
        .map(|j| {
            w.cell(j)
                .ok_or_else(|| FkError::InvalidArgument(format!("cell {j} lies outside the profile")))
        })
        .sum()
}

/// Zeros per period of an N-periodic profile.
pub fn count_zeros_periodic(w: &[f64]) -> i64 {
    let s = ternary_signs(w);
    let n = s.len();
    (0..n).map(|j| cell_zero(s[j], s[(j + 1) % n])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZeroType {
    /// Flanks of opposite sign.
    I,
    /// Flanks of equal sign.
    II,
}

impl ZeroType {
    pub fn from_flanks(left: f64, right: f64) -> Self {
        if left * right < 0.0 {
            ZeroType::I
        } else {
            ZeroType::II
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ZeroType::I => "I",
            ZeroType::II => "II",
        }
    }
}

/// A run of `degree` vanishing sites starting at `start`, flanked by nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularZero {
    pub start: i64,
    pub degree: usize,
    pub zero_type: ZeroType,
    pub left_flank: f64,
    pub right_flank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ZeroClass {
    Regular,
    Singular(SingularZero),
}

pub fn classify_zero(w: &ZeroProfile, j: i64) -> Result<ZeroClass> {
    let s = w.scale();
    let here = w
        .get(j)
        .ok_or_else(|| FkError::InvalidArgument(format!("site {j} lies outside the profile")))?;
    if !is_zero(here, s) {
        return Err(FkError::Precondition(format!("w[{j}] = {here:e} is not a zero")));
    }
    let n = w.len() as i64;
    let zero_at = |i: i64| w.get(i).map(|x| is_zero(x, s));
    let mut lo = j;
    loop {
        match zero_at(lo - 1) {
            Some(true) if j - (lo - 1) < n => lo -= 1,
            Some(true) | None => return Err(FkError::DegreeOverflow { start: lo }),
            Some(false) => break,
        }
    }
    let mut hi = j;
    loop {
        match zero_at(hi + 1) {
            Some(true) if hi + 1 - lo < n => hi += 1,
            Some(true) | None => return Err(FkError::DegreeOverflow { start: lo }),
            Some(false) => break,
        }
    }
    let degree = (hi - lo + 1) as usize;
    if w.periodic && degree as i64 >= n {
        return Err(FkError::DegreeOverflow { start: lo });
    }
    let left = w.get(lo - 1).unwrap();
    let right = w.get(hi + 1).unwrap();
    let zero_type = ZeroType::from_flanks(left, right);
    if degree == 1 && zero_type == ZeroType::I {
        return Ok(ZeroClass::Regular);
    }
    Ok(ZeroClass::Singular(SingularZero {
        start: lo,
        degree,
        zero_type,
        left_flank: left,
        right_flank: right,
    }))
}

/// All singular zeros of a periodic profile, each reported once.
pub fn singular_zeros(w: &[f64]) -> Result<Vec<SingularZero>> {
    let p = ZeroProfile::periodic(w.to_vec());
    let s = p.scale();
    let n = w.len() as i64;
    let mut out: Vec<SingularZero> = Vec::new();
    for j in 0..n {
        if !is_zero(w[j as usize], s) || is_zero(p.get(j - 1).unwrap(), s) {
            continue;
        }
        if let ZeroClass::Singular(z) = classify_zero(&p, j)? {
            out.push(z);
        }
    }
    Ok(out)
}

/// `(before, at, after)` zero counts on `[0, k+1)` around a degree-`k`
/// singular zero sitting on sites `1..=k`.
pub fn passage_counts(zero_type: ZeroType, k: usize) -> (usize, usize, usize) {
    match (zero_type, k % 2 == 0) {
        (ZeroType::I, true) => (k + 1, k, 1),
        (ZeroType::I, false) => (k, k, 1),
        (ZeroType::II, true) => (k, k, 0),
        (ZeroType::II, false) => (k + 1, k, 0),
    }
}

/// Net number of zeros lost across a singular zero.
pub fn passage_drop(zero_type: ZeroType, k: usize) -> i64 {
    let (before, _, after) = passage_counts(zero_type, k);
    before as i64 - after as i64
}

/// Leading power `j* = min(j, k+1-j)` of site `j` in a degree-`k` zero.
pub fn leading_order(j: usize, k: usize) -> usize {
    j.min(k + 1 - j)
}

/// Leading Taylor coefficients `d_j` of `w_j(t) ~ d_j t^{j*}` for a solution
/// starting at a degree-`k` zero on sites `1..=k`. Coefficient arrays are
/// indexed by site, with site 0 the left flank.
pub fn predict_leading_coeffs(flanks: (f64, f64), coeffs: &LinearSystemCoeffs, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(FkError::InvalidArgument("degree must be at least 1".into()));
    }
    if flanks.0 == 0.0 || flanks.1 == 0.0 {
        return Err(FkError::InvalidArgument("flank values must be nonzero".into()));
    }
    if coeffs.a.len() < k + 2 {
        return Err(FkError::InvalidArgument(format!(
            "need coefficients on {} sites, got {}",
            k + 2,
            coeffs.a.len()
        )));
    }
    let mut prev = vec![0.0; k + 2];
    prev[0] = flanks.0;
    prev[k + 1] = flanks.1;
    let mut out = vec![0.0; k];
    let top = (1..=k).map(|j| leading_order(j, k)).max().unwrap();
    for l in 1..=top {
        let mut next = vec![0.0; k + 2];
        for j in 1..=k {
            next[j] = (coeffs.a[j] * prev[j - 1] + coeffs.b[j] * prev[j + 1] + coeffs.c[j] * prev[j]) / l as f64;
            if leading_order(j, k) == l {
                out[j - 1] = next[j];
            }
        }
        prev = next;
    }
    Ok(out)
}

fn quotient(num: f64, den: f64, limit: impl FnOnce() -> f64, scale: f64) -> f64 {
    if den.abs() <= TOL_QUOTIENT * scale.max(1.0) {
        limit()
    } else {
        num / den
    }
}

/// Coefficients of the linear system satisfied by `w = u2 - u1`.
pub fn linearized_coeffs(u1: &ChainState, u2: &ChainState, pot: &Potential) -> Result<LinearSystemCoeffs> {
    if u1.period() != u2.period() || u1.winding != u2.winding {
        return Err(FkError::Incompatible("states must share (N, M)".into()));
    }
    let n = u1.period() as i64;
    let delta = pot.twist_delta();
    let (mut a, mut b, mut c) = (Vec::with_capacity(n as usize), Vec::with_capacity(n as usize), Vec::with_capacity(n as usize));
    for j in 0..n {
        let (p1, x1, q1) = (u1.at(j - 1), u1.at(j), u1.at(j + 1));
        let (p2, x2, q2) = (u2.at(j - 1), u2.at(j), u2.at(j + 1));
        let (wl, w0, wr) = (p2 - p1, x2 - x1, q2 - q1);
        match pot {
            Potential::Standard { k } => {
                let two_pi = 2.0 * std::f64::consts::PI;
                let q = quotient(
                    Potential::standard_site_force(*k, x2) - Potential::standard_site_force(*k, x1),
                    w0,
                    || k * (two_pi * 0.5 * (x1 + x2)).cos(),
                    x1.abs(),
                );
                a.push(1.0);
                b.push(1.0);
                c.push(-2.0 - q);
            }
            _ => {
                let qa = quotient(pot.v2(p2, x2) - pot.v2(p1, x2), wl, || pot.v12(0.5 * (p1 + p2), x2), p1.abs());
                let q22 = quotient(pot.v2(p1, x2) - pot.v2(p1, x1), w0, || pot.v22(p1, 0.5 * (x1 + x2)), x1.abs());
                let qb = quotient(pot.v1(x2, q2) - pot.v1(x2, q1), wr, || pot.v12(x2, 0.5 * (q1 + q2)), q1.abs());
                let q11 = quotient(pot.v1(x2, q1) - pot.v1(x1, q1), w0, || pot.v11(0.5 * (x1 + x2), q1), x1.abs());
                a.push(-qa);
                b.push(-qb);
                c.push(-q22 - q11);
            }
        }
    }
    let floor = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
    if floor < delta - 1e-6 * delta.max(1.0) {
        return Err(FkError::Precondition(format!(
            "difference quotients fall to {floor:e}, below the twist floor {delta:e}"
        )));
    }
    Ok(LinearSystemCoeffs { a, b, c, delta: delta.min(floor) })
}

/// Coefficients of the linear system satisfied by `du/dt` (DC forcing).
pub fn derivative_coeffs(u: &ChainState, pot: &Potential) -> LinearSystemCoeffs {
    let n = u.period() as i64;
    let mut a = Vec::with_capacity(n as usize);
    let mut b = Vec::with_capacity(n as usize);
    let mut c = Vec::with_capacity(n as usize);
    for j in 0..n {
        let (l, x, r) = (u.at(j - 1), u.at(j), u.at(j + 1));
        a.push(-pot.v12(l, x));
        b.push(-pot.v12(x, r));
        c.push(-pot.v22(l, x) - pot.v11(x, r));
    }
    let floor = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
    LinearSystemCoeffs { a, b, c, delta: pot.twist_delta().min(floor) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    /// A zero moved across a site; `direction` is the net rightward flux.
    Crossing { direction: i64 },
    /// `count` zeros vanished.
    Disappearance { count: i64 },
    /// `|w_j|` touched the tangency threshold, or a local creation was undone
    /// within the same block; no net change.
    Tangency,
    /// Zeros appeared and were never absorbed; the ledger cannot balance.
    Unresolved,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Crossing { .. } => "crossing",
            EventKind::Disappearance { .. } => "disappearance",
            EventKind::Tangency => "tangency",
            EventKind::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroEvent {
    pub t: f64,
    /// Time of the last sign change merged into this event.
    pub t_last: f64,
    /// First site of the block of sites that changed sign.
    pub site: i64,
    pub kind: EventKind,
    pub degree: usize,
    pub zero_type: Option<ZeroType>,
    /// Change of the zero count over the cells touching the block.
    pub delta_z: i64,
    /// Drop expected from the type/degree table, for disappearances.
    pub expected_drop: Option<i64>,
}

impl ZeroEvent {
    pub fn matches_table(&self) -> bool {
        match (&self.kind, self.expected_drop) {
            (EventKind::Disappearance { count }, Some(e)) => *count == e,
            (EventKind::Disappearance { .. }, None) => false,
            _ => true,
        }
    }
}

/// Differences with `|w|_inf` below this are treated as identically zero.
pub const COLLAPSE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackOptions {
    pub tol_event: f64,
    pub tol_tangency: f64,
    /// Sign changes closer than this in time form one event.
    pub cluster_gap: f64,
    /// Tracking stops once `|w|_inf` falls below this floor.
    pub collapse_floor: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            tol_event: TOL_EVENT,
            tol_tangency: TOL_TANGENCY,
            cluster_gap: 10.0 * TOL_EVENT,
            collapse_floor: COLLAPSE_FLOOR,
        }
    }
}

/// Integer tallies over `[t_start, t_end]`: `c[i]` is the net number of zeros
/// crossing site `i` rightwards, `d[i]` the zeros lost in cell `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLedger {
    pub periodic: bool,
    pub c: Vec<i64>,
    pub d: Vec<i64>,
    pub events: Vec<ZeroEvent>,
    pub t_start: f64,
    pub t_end: f64,
    pub w_start: Vec<f64>,
    pub w_end: Vec<f64>,
    /// `(t, z)` at every accepted sample, z over the whole profile.
    pub z_series: Vec<(f64, i64)>,
    /// Set when the profile fell below the collapse floor.
    pub collapsed_at: Option<f64>,
}

impl EventLedger {
    pub fn len(&self) -> usize {
        self.w_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_start.is_empty()
    }

    fn c_at(&self, i: i64) -> i64 {
        let n = self.c.len() as i64;
        if self.periodic {
            self.c[i.rem_euclid(n) as usize]
        } else {
            self.c[i as usize]
        }
    }

    fn d_at(&self, i: i64) -> i64 {
        let n = self.d.len() as i64;
        if self.periodic {
            self.d[i.rem_euclid(n) as usize]
        } else {
            self.d[i as usize]
        }
    }

    pub fn total_disappearance(&self) -> i64 {
        self.d.iter().sum()
    }

    pub fn unresolved(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Unresolved).count()
    }

    pub fn table_mismatches(&self) -> usize {
        self.events.iter().filter(|e| !e.matches_table()).count()
    }

    /// Samples at which the whole-profile count went up.
    pub fn monotonicity_violations(&self) -> usize {
        self.z_series.windows(2).filter(|p| p[1].1 > p[0].1).count()
    }

    /// `z_{m,n}(end) - z_{m,n}(start) - c_m + c_n + sum d`.
    pub fn residual(&self, m: i64, n: i64) -> Result<i64> {
        let (start, end) = if self.periodic {
            (ZeroProfile::periodic(self.w_start.clone()), ZeroProfile::periodic(self.w_end.clone()))
        } else {
            if m < 0 || n >= self.w_start.len() as i64 {
                return Err(FkError::InvalidArgument(format!("window [{m}, {n}) exceeds the profile")));
            }
            (ZeroProfile::window(self.w_start.clone()), ZeroProfile::window(self.w_end.clone()))
        };
        let dz = count_zeros(&end, m, n)? - count_zeros(&start, m, n)?;
        let dsum: i64 = (m..n).map(|j| self.d_at(j)).sum();
        Ok(dz - self.c_at(m) + self.c_at(n) + dsum)
    }

    /// Write the event list as CSV `(t, site, kind, degree, type, delta_z)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "site", "kind", "degree", "type", "delta_z"])
            .map_err(csv_err)?;
        for e in &self.events {
            wtr.write_record([
                format!("{:.12}", e.t),
                e.site.to_string(),
                e.kind.label().to_string(),
                e.degree.to_string(),
                e.zero_type.map(|z| z.label()).unwrap_or("").to_string(),
                e.delta_z.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> FkError {
    FkError::Io(std::io::Error::other(e.to_string()))
}

/// Run the balance check on window `[m, n)`; errors on a nonzero residual.
pub fn zero_balance_audit(ledger: &EventLedger, m: i64, n: i64) -> Result<i64> {
    let residual = ledger.residual(m, n)?;
    if residual != 0 {
        return Err(FkError::AuditFailure { residual, m, n, events: ledger.events.clone() });
    }
    Ok(0)
}

#[derive(Debug, Clone, Copy)]
struct SignChange {
    t: f64,
    site: usize,
    to: i8,
}

/// Accumulated cell changes of a block that created zeros and waits for
/// later changes to absorb them.
#[derive(Debug, Clone)]
struct Region {
    t0: f64,
    t1: f64,
    /// Changed sites, unwrapped so that they increase.
    sites: Vec<i64>,
    /// Cell index (unwrapped) to accumulated change.
    cells: BTreeMap<i64, i64>,
    start_signs: BTreeMap<i64, i8>,
}

struct Sample {
    t: f64,
    w: Vec<f64>,
    dw: Vec<f64>,
}

/// Streaming event tracker fed with `(t, w, dw/dt)` samples.
pub struct ZeroTracker {
    opts: TrackOptions,
    periodic: bool,
    len: usize,
    prev: Option<Sample>,
    first: Option<(f64, Vec<f64>)>,
    /// Ternary signs after all applied changes.
    sigma: Vec<i8>,
    /// Sign each site will have once `queue` is applied.
    latest: Vec<i8>,
    queue: Vec<SignChange>,
    pending: Vec<Region>,
    c: Vec<i64>,
    d: Vec<i64>,
    events: Vec<ZeroEvent>,
    z_series: Vec<(f64, i64)>,
    collapsed_at: Option<f64>,
}

impl ZeroTracker {
    pub fn new(len: usize, periodic: bool, opts: TrackOptions) -> Self {
        let n_cells = if periodic { len } else { len.saturating_sub(1) };
        ZeroTracker {
            opts,
            periodic,
            len,
            prev: None,
            first: None,
            sigma: vec![0; len],
            latest: vec![0; len],
            queue: Vec::new(),
            pending: Vec::new(),
            c: vec![0; len],
            d: vec![0; n_cells],
            events: Vec::new(),
            z_series: Vec::new(),
            collapsed_at: None,
        }
    }

    fn n_cells(&self) -> i64 {
        if self.periodic {
            self.len as i64
        } else {
            self.len as i64 - 1
        }
    }

    fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.len as i64) as usize
    }

    pub fn is_collapsed(&self) -> bool {
        self.collapsed_at.is_some()
    }

    /// Feed the next sample. Samples must be strictly increasing in time.
    pub fn push(&mut self, t: f64, w: &[f64], dw: &[f64]) -> Result<()> {
        if w.len() != self.len || dw.len() != self.len {
            return Err(FkError::InvalidArgument("sample length differs from tracker length".into()));
        }
        if self.collapsed_at.is_some() {
            return Ok(());
        }
        let Some(prev) = self.prev.take() else {
            self.sigma = ternary_signs(w);
            self.latest = self.sigma.clone();
            self.first = Some((t, w.to_vec()));
            self.z_series.push((t, count_zeros_periodic_or_window(w, self.periodic)));
            self.prev = Some(Sample { t, w: w.to_vec(), dw: dw.to_vec() });
            return Ok(());
        };
        if !(t > prev.t) {
            self.prev = Some(prev);
            return Err(FkError::InvalidArgument("sample times must increase".into()));
        }
        if w.iter().fold(0.0_f64, |m, x| m.max(x.abs())) < self.opts.collapse_floor {
            self.collapsed_at = Some(t);
            self.prev = Some(prev);
            return Ok(());
        }
        let scale_b = zero_scale(w);
        for j in 0..self.len {
            let h = HermiteCubic::new(prev.t, t, prev.w[j], prev.dw[j], w[j], dw[j]);
            self.scan_site(j, &h, prev.t, t, prev.w[j], w[j], scale_b);
        }
        self.queue.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.site.cmp(&b.site)));
        self.drain(Some(t - 2.0 * self.opts.cluster_gap));
        self.z_series.push((t, count_zeros_periodic_or_window(w, self.periodic)));
        self.prev = Some(Sample { t, w: w.to_vec(), dw: dw.to_vec() });
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn scan_site(&mut self, j: usize, h: &HermiteCubic, ta: f64, tb: f64, ya: f64, yb: f64, scale_b: f64) {
        let breaks = h.monotone_breaks();
        let value = |i: usize| {
            if i == 0 {
                ya
            } else if i == breaks.len() - 1 {
                yb
            } else {
                h.eval(breaks[i])
            }
        };
        let mut cur = self.latest[j];
        let mut skip_first = false;
        if cur == 0 {
            let open = if ya != 0.0 {
                strict_sign(ya)
            } else {
                skip_first = true;
                strict_sign(value(1))
            };
            if open != 0 {
                self.queue.push(SignChange { t: ta, site: j, to: open });
                cur = open;
            }
        }
        for i in 0..breaks.len() - 1 {
            let (vp, vq) = (value(i), value(i + 1));
            if i == 0 && skip_first {
                continue;
            }
            let (sp, sq) = (strict_sign(vp), strict_sign(vq));
            if sp != 0 && sq != 0 && sp != sq {
                let tau = bisect(|x| h.eval(x), breaks[i], breaks[i + 1], self.opts.tol_event);
                self.queue.push(SignChange { t: tau, site: j, to: sq });
                cur = sq;
            } else if sp == 0 && sq != 0 && cur != sq && i > 0 {
                self.queue.push(SignChange { t: breaks[i], site: j, to: sq });
                cur = sq;
            }
            // shallow local minimum of |w| without a sign change
            if i + 1 < breaks.len() - 1 {
                let vn = value(i + 2);
                if vq.abs() < self.opts.tol_tangency
                    && vq.abs() < vp.abs()
                    && vq.abs() < vn.abs()
                    && strict_sign(vn) == sq
                {
                    self.events.push(ZeroEvent {
                        t: breaks[i + 1],
                        t_last: breaks[i + 1],
                        site: j as i64,
                        kind: EventKind::Tangency,
                        degree: 1,
                        zero_type: Some(ZeroType::II),
                        delta_z: 0,
                        expected_drop: None,
                    });
                }
            }
        }
        if ternary_sign(yb, scale_b) == 0 && cur != 0 {
            self.queue.push(SignChange { t: tb, site: j, to: 0 });
            cur = 0;
        }
        self.latest[j] = cur;
    }

    /// Apply queued changes in clusters; with a cutoff only clusters that
    /// end before it are applied.
    fn drain(&mut self, cutoff: Option<f64>) {
        let mut start = 0;
        let q = std::mem::take(&mut self.queue);
        let mut i = 0;
        while i < q.len() {
            let mut end = i + 1;
            while end < q.len() && q[end].t - q[end - 1].t <= self.opts.cluster_gap {
                end += 1;
            }
            if let Some(c) = cutoff {
                if q[end - 1].t >= c {
                    break;
                }
            }
            self.apply_cluster(&q[i..end]);
            i = end;
            start = end;
        }
        self.queue = q[start..].to_vec();
    }

    fn apply_cluster(&mut self, changes: &[SignChange]) {
        let before = self.sigma.clone();
        for ch in changes {
            self.sigma[ch.site] = ch.to;
        }
        let mut sites: Vec<usize> = changes.iter().map(|c| c.site).collect();
        sites.sort_unstable();
        sites.dedup();
        let t_of = |s: usize| changes.iter().filter(|c| c.site == s).map(|c| c.t).fold(f64::INFINITY, f64::min);
        let t_last = changes.iter().map(|c| c.t).fold(f64::NEG_INFINITY, f64::max);
        for block in self.blocks(&sites) {
            let after = self.sigma.clone();
            let mut cells = BTreeMap::new();
            for cell in self.block_cells(&block) {
                let (i0, i1) = (self.wrap(cell), self.wrap(cell + 1));
                let dz = cell_zero(after[i0], after[i1]) - cell_zero(before[i0], before[i1]);
                cells.insert(cell, dz);
            }
            let t0 = block.iter().map(|&s| t_of(self.wrap(s))).fold(f64::INFINITY, f64::min);
            let start_signs = block.iter().map(|&s| (s, before[self.wrap(s)])).collect();
            let region = Region { t0, t1: t_last, sites: block, cells, start_signs };
            self.absorb(region);
        }
    }

    /// Split sorted changed sites into contiguous (unwrapped) blocks.
    fn blocks(&self, sites: &[usize]) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = Vec::new();
        for &s in sites {
            match out.last_mut() {
                Some(b) if *b.last().unwrap() + 1 == s as i64 => b.push(s as i64),
                _ => out.push(vec![s as i64]),
            }
        }
        if self.periodic && out.len() > 1 {
            let wraps = out[0][0] == 0 && *out.last().unwrap().last().unwrap() == self.len as i64 - 1;
            if wraps {
                let head = out.remove(0);
                let tail = out.last_mut().unwrap();
                tail.extend(head.into_iter().map(|s| s + self.len as i64));
            }
        }
        out
    }

    fn block_cells(&self, block: &[i64]) -> Vec<i64> {
        let (lo, hi) = (block[0], *block.last().unwrap());
        if self.periodic {
            if block.len() >= self.len {
                return (lo..lo + self.len as i64).collect();
            }
            (lo - 1..=hi).collect()
        } else {
            (lo - 1..=hi).filter(|&c| c >= 0 && c < self.n_cells()).collect()
        }
    }

    fn cells_overlap(&self, a: &BTreeMap<i64, i64>, b: &BTreeMap<i64, i64>) -> bool {
        let n = self.len as i64;
        let norm = |c: i64| if self.periodic { c.rem_euclid(n) } else { c };
        let set: std::collections::BTreeSet<i64> = a.keys().map(|&c| norm(c)).collect();
        b.keys().any(|&c| set.contains(&norm(c)))
    }

    fn merge(&self, mut a: Region, b: Region) -> Region {
        // shift b by a multiple of the period so that its cells meet a's
        let n = self.len as i64;
        let off = if self.periodic {
            [0, -n, n]
                .into_iter()
                .find(|&o| b.cells.keys().any(|c| a.cells.contains_key(&(c + o))))
                .unwrap_or(0)
        } else {
            0
        };
        for (c, dz) in b.cells {
            *a.cells.entry(c + off).or_insert(0) += dz;
        }
        for s in b.sites {
            if !a.sites.contains(&(s + off)) {
                a.sites.push(s + off);
            }
        }
        for (s, sg) in b.start_signs {
            a.start_signs.entry(s + off).or_insert(sg);
        }
        a.sites.sort_unstable();
        a.t0 = a.t0.min(b.t0);
        a.t1 = a.t1.max(b.t1);
        a
    }

    fn absorb(&mut self, mut region: Region) {
        // fold in every pending region this one touches
        let mut k = 0;
        while k < self.pending.len() {
            if self.cells_overlap(&self.pending[k].cells, &region.cells) {
                let p = self.pending.remove(k);
                region = self.merge(p, region);
                k = 0;
            } else {
                k += 1;
            }
        }
        let drop = -region.cells.values().sum::<i64>();
        let touches_edge = !self.periodic
            && region
                .sites
                .iter()
                .any(|&s| s == 0 || s == self.len as i64 - 1);
        if drop < 0 && !touches_edge {
            self.pending.push(region);
            return;
        }
        self.book(region, drop, touches_edge, false);
    }

    fn book(&mut self, region: Region, drop: i64, touches_edge: bool, unresolved: bool) {
        let cells: Vec<i64> = region.cells.keys().copied().collect();
        let dz: Vec<i64> = region.cells.values().copied().collect();
        let mut d = vec![0i64; cells.len()];
        if !touches_edge && !unresolved {
            for (i, &x) in dz.iter().enumerate() {
                d[i] = (-x).max(0);
            }
            let mut excess: i64 = d.iter().sum::<i64>() - drop;
            // gains are fed by flux from the nearest losing cell
            for g in 0..cells.len() {
                let mut gain = dz[g].max(0);
                while gain > 0 && excess > 0 {
                    let nearest = (0..cells.len())
                        .filter(|&i| d[i] > 0)
                        .min_by_key(|&i| (i as i64 - g as i64).abs());
                    match nearest {
                        Some(i) => {
                            d[i] -= 1;
                            gain -= 1;
                            excess -= 1;
                        }
                        None => break,
                    }
                }
            }
        }
        // fluxes: c at the site right of cell i is c_i - d_i - dz_i
        let full_ring = self.periodic && cells.len() == self.len;
        let from_right = !self.periodic && region.sites.contains(&0) && !region.sites.contains(&(self.len as i64 - 1));
        let mut flux: Vec<(i64, i64)> = Vec::new();
        if from_right {
            let mut c = 0;
            for i in (0..cells.len()).rev() {
                c += d[i] + dz[i];
                flux.push((cells[i], c));
            }
        } else {
            let mut c = 0;
            for i in 0..cells.len() {
                c = c - d[i] - dz[i];
                let site = cells[i] + 1;
                let is_last = i + 1 == cells.len();
                if !is_last || touches_edge {
                    flux.push((site, c));
                }
            }
            debug_assert!(c == 0 || unresolved || touches_edge || full_ring);
        }
        let n = self.len as i64;
        let mut net_flux = 0;
        for (site, c) in flux {
            if c == 0 {
                continue;
            }
            let idx = if self.periodic { site.rem_euclid(n) } else { site };
            if (0..self.c.len() as i64).contains(&idx) {
                self.c[idx as usize] += c;
                net_flux += c;
            }
        }
        for (i, &cell) in cells.iter().enumerate() {
            if d[i] != 0 {
                let idx = if self.periodic { cell.rem_euclid(n) } else { cell };
                self.d[idx as usize] += d[i];
            }
        }
        let end_signs: Vec<i8> = region.sites.iter().map(|&s| self.sigma[self.wrap(s)]).collect();
        let start_signs: Vec<i8> = region.sites.iter().map(|&s| region.start_signs.get(&s).copied().unwrap_or(0)).collect();
        let lo = region.sites[0];
        let hi = *region.sites.last().unwrap();
        let degree = region.sites.len();
        let zero_type = if self.periodic && degree >= self.len {
            None
        } else if !self.periodic && (lo == 0 || hi == self.len as i64 - 1) {
            None
        } else {
            let l = self.sigma[self.wrap(lo - 1)];
            let r = self.sigma[self.wrap(hi + 1)];
            if l != 0 && r != 0 {
                Some(if l != r { ZeroType::I } else { ZeroType::II })
            } else {
                None
            }
        };
        let kind = if unresolved {
            EventKind::Unresolved
        } else if drop > 0 && !touches_edge {
            EventKind::Disappearance { count: drop }
        } else if start_signs == end_signs {
            EventKind::Tangency
        } else {
            EventKind::Crossing { direction: net_flux }
        };
        let expected_drop = match kind {
            EventKind::Disappearance { .. } => zero_type.map(|z| passage_drop(z, degree)),
            _ => None,
        };
        if kind == EventKind::Tangency && dz.iter().all(|&x| x == 0) && region.t1 - region.t0 <= self.opts.cluster_gap {
            // a sign toggled back within one cluster: nothing happened
            return;
        }
        self.events.push(ZeroEvent {
            t: region.t0,
            t_last: region.t1,
            site: if self.periodic { lo.rem_euclid(n) } else { lo },
            kind,
            degree,
            zero_type,
            delta_z: -drop,
            expected_drop,
        });
    }

    /// Close the interval and return the ledger.
    pub fn finish(mut self) -> Result<EventLedger> {
        let Some(last) = self.prev.take() else {
            return Err(FkError::InvalidArgument("no samples were tracked".into()));
        };
        self.drain(None);
        for region in std::mem::take(&mut self.pending) {
            let drop = -region.cells.values().sum::<i64>();
            self.book(region, drop, false, true);
        }
        self.events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.site.cmp(&b.site)));
        let (t_start, w_start) = self.first.take().unwrap();
        Ok(EventLedger {
            periodic: self.periodic,
            c: self.c,
            d: self.d,
            events: self.events,
            t_start,
            t_end: last.t,
            w_start,
            w_end: last.w,
            z_series: self.z_series,
            collapsed_at: self.collapsed_at,
        })
    }
}

fn count_zeros_periodic_or_window(w: &[f64], periodic: bool) -> i64 {
    if periodic {
        count_zeros_periodic(w)
    } else {
        let s = ternary_signs(w);
        (0..s.len().saturating_sub(1)).map(|j| cell_zero(s[j], s[j + 1])).sum()
    }
}

/// Track a finished list of `(t, w, dw)` samples.
pub fn track_zero_events(samples: &[(f64, Vec<f64>, Vec<f64>)], periodic: bool, opts: TrackOptions) -> Result<EventLedger> {
    let len = samples
        .first()
        .ok_or_else(|| FkError::InvalidArgument("no samples".into()))?
        .1
        .len();
    let mut tr = ZeroTracker::new(len, periodic, opts);
    for (t, w, dw) in samples {
        tr.push(*t, w, dw)?;
    }
    tr.finish()
}

/// Outcome of integrating the difference of two states with event tracking.
#[derive(Debug, Clone, Serialize)]
pub struct PairAudit {
    pub ledger: EventLedger,
    /// `((m, n), residual)` for every audited window.
    pub residuals: Vec<((i64, i64), i64)>,
}

impl PairAudit {
    pub fn balanced(&self) -> bool {
        self.residuals.iter().all(|r| r.1 == 0)
    }
}

/// Integrate `w = u2 - u1` through its linear system and audit the ledger on
/// the given windows.
pub fn audit_pair(
    u1: &ChainState,
    u2: &ChainState,
    dynamics: &Dynamics,
    horizon: f64,
    dt: f64,
    windows: &[(i64, i64)],
    opts: TrackOptions,
) -> Result<PairAudit> {
    let w0: Vec<f64> = u2.u.iter().zip(&u1.u).map(|(a, b)| a - b).collect();
    if w0.iter().all(|&x| x == 0.0) {
        return Err(FkError::InvalidArgument("identical states have no zero set".into()));
    }
    let source = CoefficientSource::Difference { u1: u1.clone(), u2: u2.clone(), dynamics: dynamics.clone() };
    let mut tracker = ZeroTracker::new(w0.len(), true, opts);
    let t0 = u1.t;
    integrate_linear_streaming(&w0, &source, (t0, t0 + horizon), dt, dt, |t, w, dw| {
        tracker.push(t, w, dw)?;
        Ok(!tracker.is_collapsed())
    })?;
    let ledger = tracker.finish()?;
    let residuals = windows
        .iter()
        .map(|&(m, n)| ledger.residual(m, n).map(|r| ((m, n), r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairAudit { ledger, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::evolve_constant_linear;

    fn p(w: &[f64]) -> ZeroProfile {
        ZeroProfile::window(w.to_vec())
    }

    #[test]
    fn counting_examples() {
        assert_eq!(count_zeros(&p(&[1.0, -1.0]), 0, 1).unwrap(), 1);
        assert_eq!(count_zeros(&p(&[1.0, 1.0, 1.0]), 0, 2).unwrap(), 0);
        assert_eq!(count_zeros(&p(&[0.0, 1.0, 0.0, -1.0, 1.0]), 0, 4).unwrap(), 3);
        assert!(count_zeros(&p(&[1.0, 1.0]), 1, 1).is_err());
        assert_eq!(count_zeros_periodic(&[1.0, -1.0, 1.0, -1.0]), 4);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_zero(&p(&[-1.0, 0.0, 1.0]), 1).unwrap(), ZeroClass::Regular);
        match classify_zero(&p(&[-1.0, 0.0, 0.0, 1.0]), 1).unwrap() {
            ZeroClass::Singular(z) => {
                assert_eq!((z.start, z.degree, z.zero_type), (1, 2, ZeroType::I));
            }
            other => panic!("{other:?}"),
        }
        match classify_zero(&p(&[1.0, 0.0, 1.0]), 1).unwrap() {
            ZeroClass::Singular(z) => assert_eq!((z.degree, z.zero_type), (1, ZeroType::II)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(classify_zero(&p(&[0.0, 0.0, 1.0]), 1), Err(FkError::DegreeOverflow { .. })));
        assert!(matches!(
            classify_zero(&ZeroProfile::periodic(vec![0.0; 4]), 2),
            Err(FkError::DegreeOverflow { .. })
        ));
        assert!(classify_zero(&p(&[1.0, 0.5, 1.0]), 1).is_err());
    }

    #[test]
    fn table_rows() {
        assert_eq!(passage_counts(ZeroType::I, 2), (3, 2, 1));
        assert_eq!(passage_counts(ZeroType::I, 3), (3, 3, 1));
        assert_eq!(passage_counts(ZeroType::II, 2), (2, 2, 0));
        assert_eq!(passage_counts(ZeroType::II, 1), (2, 1, 0));
        assert_eq!(passage_drop(ZeroType::I, 1), 0);
    }

    fn uniform(k: usize, a: f64, b: f64, c: f64) -> LinearSystemCoeffs {
        LinearSystemCoeffs::uniform(k + 2, a, b, c).unwrap()
    }

    #[test]
    fn leading_coefficient_examples() {
        let d = predict_leading_coeffs((1.0, -1.0), &uniform(2, 1.0, 1.0, 0.0), 2).unwrap();
        assert_eq!(d, vec![1.0, -1.0]);
        let d = predict_leading_coeffs((1.0, 1.0), &uniform(1, 1.0, 1.0, 0.0), 1).unwrap();
        assert_eq!(d, vec![2.0]);
        let d = predict_leading_coeffs((1.0, 1.0), &uniform(2, 1.0, 1.0, 0.0), 2).unwrap();
        assert_eq!(d, vec![1.0, 1.0]);
        // odd middle site hears both flanks at order (k+1)/2
        let d = predict_leading_coeffs((1.0, 3.0), &uniform(3, 1.0, 1.0, 0.0), 3).unwrap();
        assert_eq!(d, vec![1.0, 2.0, 3.0]);
        assert!(predict_leading_coeffs((1.0, 1.0), &uniform(1, 1.0, 1.0, 0.0), 0).is_err());
        assert!(predict_leading_coeffs((0.0, 1.0), &uniform(1, 1.0, 1.0, 0.0), 1).is_err());
    }

    #[test]
    fn passage_counts_from_linear_flow() {
        for k in 1..=5 {
            for ty in [ZeroType::I, ZeroType::II] {
                if ty == ZeroType::I && k == 1 {
                    continue;
                }
                let mut w0 = vec![0.0; k + 2];
                w0[0] = 1.0;
                w0[k + 1] = if ty == ZeroType::I { -1.0 } else { 1.0 };
                let c = uniform(k, 1.0, 1.0, -0.3);
                let count = |w: &[f64]| count_zeros(&ZeroProfile::periodic(w.to_vec()), 0, k as i64 + 1).unwrap() as usize;
                let before = evolve_constant_linear(&c, &w0, -0.02, 400);
                let after = evolve_constant_linear(&c, &w0, 0.02, 400);
                assert_eq!((count(&before), count(&w0), count(&after)), passage_counts(ty, k), "{ty:?} k={k}");
            }
        }
    }

    #[test]
    fn linearization_examples() {
        let pot = Potential::standard(1.0);
        let u = ChainState::new(1, vec![0.1, 0.4, 0.8], 0.0).unwrap();
        let v = ChainState::new(1, vec![0.3, 0.35, 0.9], 0.0).unwrap();
        let c = linearized_coeffs(&u, &v, &pot).unwrap();
        assert!(c.a.iter().chain(&c.b).all(|&x| x == 1.0));
        let same = linearized_coeffs(&u, &u, &pot).unwrap();
        let der = derivative_coeffs(&u, &pot);
        for j in 0..3 {
            assert!((same.c[j] - der.c[j]).abs() < 1e-12);
            assert_eq!(same.a[j], der.a[j]);
        }
        // generic route reproduces the difference of vector fields
        let gen = Potential::Generalized {
            kappa: 1.0,
            site: vec![crate::model::Harmonic { index: 1, cos: -0.02, sin: 0.01 }],
            mixed: 0.01,
        };
        let c = linearized_coeffs(&u, &v, &gen).unwrap();
        let f = crate::model::Forcing::dc(0.0);
        let fu = crate::model::vector_field(&u, &gen, &f, 0.0).unwrap().du;
        let fv = crate::model::vector_field(&v, &gen, &f, 0.0).unwrap().du;
        let w: Vec<f64> = v.u.iter().zip(&u.u).map(|(a, b)| a - b).collect();
        let mut lin = vec![0.0; 3];
        c.apply(&w, &mut lin);
        for j in 0..3 {
            assert!((lin[j] - (fv[j] - fu[j])).abs() < 1e-12);
            assert!(c.a[j] >= gen.twist_delta() && c.b[j] >= gen.twist_delta());
        }
    }

    fn linear_samples(profile: impl Fn(f64) -> (Vec<f64>, Vec<f64>), times: &[f64]) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        times
            .iter()
            .map(|&t| {
                let (w, dw) = profile(t);
                (t, w, dw)
            })
            .collect()
    }

    #[test]
    fn constant_profile_gives_empty_ledger() {
        let s = linear_samples(|_| (vec![1.0, 2.0, 0.5], vec![0.0; 3]), &[0.0, 1.0, 2.0]);
        let l = track_zero_events(&s, true, TrackOptions::default()).unwrap();
        assert!(l.events.is_empty());
        assert!(l.c.iter().chain(&l.d).all(|&x| x == 0));
        assert_eq!(zero_balance_audit(&l, 0, 3).unwrap(), 0);
    }

    #[test]
    fn regular_crossing_is_a_flux() {
        let s = linear_samples(|t| (vec![1.0, t, -1.0], vec![0.0, 1.0, 0.0]), &[-1.0, -0.3, 0.4, 1.0]);
        let l = track_zero_events(&s, true, TrackOptions::default()).unwrap();
        assert_eq!(l.events.len(), 1);
        let e = &l.events[0];
        assert!(e.t.abs() < 1e-9);
        assert_eq!(e.kind, EventKind::Crossing { direction: 1 });
        assert_eq!(l.c, vec![0, 1, 0]);
        assert!(l.d.iter().all(|&x| x == 0));
        for (m, n) in [(0, 1), (1, 2), (0, 3), (2, 5)] {
            assert_eq!(zero_balance_audit(&l, m, n).unwrap(), 0);
        }
    }

    #[test]
    fn dip_disappears_with_table_count() {
        let s = linear_samples(|t| (vec![1.0, t, 1.0], vec![0.0, 1.0, 0.0]), &[-1.0, 0.5]);
        let l = track_zero_events(&s, true, TrackOptions::default()).unwrap();
        assert_eq!(l.events.len(), 1);
        let e = &l.events[0];
        assert_eq!(e.kind, EventKind::Disappearance { count: 2 });
        assert_eq!((e.degree, e.zero_type), (1, Some(ZeroType::II)));
        assert!(e.matches_table());
        assert_eq!(l.total_disappearance(), 2);
        assert_eq!(zero_balance_audit(&l, 0, 3).unwrap(), 0);
    }

    #[test]
    fn window_entry_is_booked_on_the_boundary() {
        // a zero enters the window through site 0
        let s = linear_samples(|t| (vec![-t, 1.0, 1.0], vec![-1.0, 0.0, 0.0]), &[-1.0, 1.0]);
        let l = track_zero_events(&s, false, TrackOptions::default()).unwrap();
        assert_eq!(l.c[0], 1);
        assert_eq!(zero_balance_audit(&l, 0, 2).unwrap(), 0);
    }

    #[test]
    fn shallow_dip_and_tangency() {
        // w_1 = t^2 - eps^2 dips below zero for a moment, then recovers
        let eps: f64 = 1e-5;
        let f = |t: f64| (vec![1.0, t * t - eps * eps, 1.0], vec![0.0, 2.0 * t, 0.0]);
        let s = linear_samples(f, &[-0.5, 0.5]);
        let l = track_zero_events(&s, true, TrackOptions::default()).unwrap();
        assert_eq!(zero_balance_audit(&l, 0, 3).unwrap(), 0);
        assert_eq!(l.unresolved(), 0);
        // a touch that never crosses
        let g = |t: f64| (vec![1.0, t * t + 1e-9, 1.0], vec![0.0, 2.0 * t, 0.0]);
        let l = track_zero_events(&linear_samples(g, &[-0.5, 0.25, 1.0]), true, TrackOptions::default()).unwrap();
        assert!(l.events.iter().any(|e| e.kind == EventKind::Tangency));
        assert_eq!(l.total_disappearance(), 0);
    }

    #[test]
    fn ledger_csv_has_header() {
        let s = linear_samples(|t| (vec![1.0, t, 1.0], vec![0.0, 1.0, 0.0]), &[-1.0, 0.5]);
        let l = track_zero_events(&s, true, TrackOptions::default()).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,site,kind,degree,type,delta_z\n"));
        assert!(text.contains("disappearance"));
    }

    #[test]
    fn translation_shifts_the_ledger() {
        let base = |t: f64| (vec![1.0, t, 1.0, -1.0, -0.5 + t], vec![0.0, 1.0, 0.0, 0.0, 1.0]);
        let times = [-1.0, -0.2, 0.3, 1.0];
        let a = track_zero_events(&linear_samples(base, &times), true, TrackOptions::default()).unwrap();
        let shifted = |t: f64| {
            let (mut w, mut dw) = base(t);
            w.rotate_left(1);
            dw.rotate_left(1);
            (w, dw)
        };
        let b = track_zero_events(&linear_samples(shifted, &times), true, TrackOptions::default()).unwrap();
        let mut c = a.c.clone();
        c.rotate_left(1);
        let mut d = a.d.clone();
        d.rotate_left(1);
        assert_eq!(b.c, c);
        assert_eq!(b.d, d);
    }
}
