//! DC asymptotics: average speeds, the equilibrium / uniformly sliding
//! dichotomy, modulation functions, the dissipation identity, depinning
//! sweeps and attractor residence times.

use std::io::Write;

use serde::Serialize;

use crate::error::{FkError, Result};
use crate::integrator::{integrate, integrate_streaming, Trajectory};
use crate::interp::golden_min;
use crate::measures::Ensemble;
use crate::model::{
    config_distance, gcd, partial_order_compare, ChainState, Dynamics, OrderRelation, Potential,
    Forcing, DEFAULT_DISTANCE_DECAY, DEFAULT_DISTANCE_WINDOW,
};
use crate::par;
use crate::zeroset::csv_err;

pub const TOL_EQ: f64 = 1e-8;
pub const TOL_PER: f64 = 1e-6;
pub const TOL_V: f64 = 1e-3;
pub const TOL_M: f64 = 1e-4;
pub const MODULATION_BINS: usize = 256;

/// Least-squares slope of `y` against `t`.
fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        sty += (a - tm) * (b - ym);
        stt += (a - tm) * (a - tm);
    }
    if stt == 0.0 {
        0.0
    } else {
        sty / stt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    /// Slope of `u_0`.
    pub v: f64,
    /// Largest minus smallest per-site slope.
    pub spread: f64,
}

impl SpeedEstimate {
    pub fn site_independent(&self, tol_v: f64) -> bool {
        self.spread <= tol_v
    }
}

/// Least-squares slopes of `u_j(t)` over samples with `t >= t_from`.
pub fn speed_estimate(traj: &Trajectory, t_from: f64) -> SpeedEstimate {
    let mut tail = traj.tail_from(t_from);
    if tail.len() < 2 {
        tail = &traj.samples[traj.samples.len().saturating_sub(2)..];
    }
    let t: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let n = tail[0].u.len();
    let slopes: Vec<f64> = (0..n)
        .map(|j| ls_slope(&t, &tail.iter().map(|s| s.u[j]).collect::<Vec<_>>()))
        .collect();
    let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    SpeedEstimate { v: slopes[0], spread: hi - lo }
}

/// Slope over the second half of the trajectory.
pub fn average_speed(traj: &Trajectory) -> SpeedEstimate {
    speed_estimate(traj, 0.5 * (traj.t_start() + traj.t_end()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    Equilibrium,
    PeriodicSliding { t0: f64 },
    Undetermined,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Equilibrium => "equilibrium",
            Verdict::PeriodicSliding { .. } => "sliding",
            Verdict::Undetermined => "undetermined",
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self {
            Verdict::PeriodicSliding { t0 } => Some(*t0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ClassifyOptions {
    /// Length of the first integration chunk.
    pub horizon: f64,
    /// Total time after which the verdict is left undetermined.
    pub max_horizon: f64,
    pub dt: f64,
    pub dt_out: f64,
    /// Fraction of each chunk discarded as transient.
    pub transient_fraction: f64,
    /// Time window over which the equilibrium test must hold.
    pub eq_window: f64,
    pub tol_eq: f64,
    pub tol_per: f64,
    pub tol_v: f64,
    /// Slopes below this are not searched for a period.
    pub min_speed: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            horizon: 200.0,
            max_horizon: 3200.0,
            dt: 1e-2,
            dt_out: 0.05,
            transient_fraction: 0.5,
            eq_window: 10.0,
            tol_eq: TOL_EQ,
            tol_per: TOL_PER,
            tol_v: TOL_V,
            min_speed: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub verdict: Verdict,
    /// Displacement speed over whole periods when sliding, slope otherwise.
    pub speed: f64,
    pub ls_speed: f64,
    pub speed_spread: f64,
    pub rho_num: i64,
    pub rho_den: i64,
    /// `max_j |du_j/dt|` over the final window.
    pub eq_residual: f64,
    /// `sup |u(t + t0) - u(t) - sign(v)|` at the best `t0`.
    pub per_residual: Option<f64>,
    /// Whether sampled pairs on the detected orbit are comparable.
    pub orbit_ordered: Option<bool>,
    pub time_used: f64,
    pub final_state: ChainState,
}

impl AsymptoticsReport {
    pub fn rho(&self) -> f64 {
        self.rho_num as f64 / self.rho_den as f64
    }
}

fn reduced_rho(state: &ChainState) -> (i64, i64) {
    let n = state.period() as i64;
    let g = gcd(state.winding.unsigned_abs(), n as u64).max(1) as i64;
    (state.winding / g, n / g)
}

fn sup_diff(a: &[f64], b: &[f64], shift: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y - shift).abs()).fold(0.0, f64::max)
}

enum Analysis {
    Done(AsymptoticsReport),
    /// Undetermined, optionally asking for a chunk at least this long.
    Open(AsymptoticsReport, Option<f64>),
}

fn analyze(traj: &Trajectory, opts: &ClassifyOptions, time_used: f64) -> Analysis {
    let (t_s, t_e) = (traj.t_start(), traj.t_end());
    let last = traj.last_state();
    let (rho_num, rho_den) = reduced_rho(&last);
    let eq_from = (t_e - opts.eq_window).max(t_s);
    let eq_tail = traj.tail_from(eq_from);
    let eq_residual = eq_tail
        .iter()
        .flat_map(|s| s.du.iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    let tail_start = t_s + opts.transient_fraction * (t_e - t_s);
    let est = speed_estimate(traj, tail_start);
    let mut report = AsymptoticsReport {
        verdict: Verdict::Undetermined,
        speed: est.v,
        ls_speed: est.v,
        speed_spread: est.spread,
        rho_num,
        rho_den,
        eq_residual,
        per_residual: None,
        orbit_ordered: None,
        time_used,
        final_state: last,
    };
    if eq_residual < opts.tol_eq {
        let eq = speed_estimate(traj, eq_from);
        report.verdict = Verdict::Equilibrium;
        report.speed = eq.v;
        report.ls_speed = eq.v;
        report.speed_spread = eq.spread;
        return Analysis::Done(report);
    }
    if est.v.abs() < opts.min_speed {
        return Analysis::Open(report, None);
    }
    let guess = 1.0 / est.v.abs();
    let (lo, hi) = (0.7 * guess, 1.3 * guess);
    // one further period is needed for the validation references
    if t_e - tail_start < hi + guess {
        return Analysis::Open(report, Some(4.0 * (hi + guess)));
    }
    let s = est.v.signum();
    let end = &traj.samples[traj.samples.len() - 1].u;
    let objective = |tau: f64| -> f64 {
        let back = traj.interpolate(t_e - tau);
        end.iter().zip(&back).map(|(a, b)| (a - b - s).powi(2)).sum()
    };
    let steps = ((hi - lo) / opts.dt_out).ceil() as usize;
    let (mut best_tau, mut best) = (lo, f64::INFINITY);
    for i in 0..=steps {
        let tau = lo + (hi - lo) * i as f64 / steps as f64;
        let g = objective(tau);
        if g < best {
            best = g;
            best_tau = tau;
        }
    }
    let h = (hi - lo) / steps as f64;
    let (t0, _) = golden_min(objective, best_tau - h, best_tau + h, 1e-12 * guess);
    let residual = [0.0, 0.37, 0.71]
        .iter()
        .map(|f| {
            let tr = t_e - f * t0;
            sup_diff(&traj.interpolate(tr), &traj.interpolate(tr - t0), s)
        })
        .fold(0.0, f64::max);
    report.per_residual = Some(residual);
    if residual >= opts.tol_per {
        return Analysis::Open(report, None);
    }
    let k = ((t_e - tail_start) / t0).floor().max(1.0);
    let u_back = traj.interpolate(t_e - k * t0);
    report.speed = (end[0] - u_back[0]) / (k * t0);
    report.verdict = Verdict::PeriodicSliding { t0 };
    let winding = traj.winding;
    let orbit: Vec<ChainState> = (0..=8)
        .map(|i| ChainState { winding, u: traj.interpolate(t_e - t0 * i as f64 / 8.0), t: 0.0 })
        .collect();
    let ordered = orbit.iter().enumerate().all(|(i, a)| {
        orbit[i + 1..]
            .iter()
            .all(|b| partial_order_compare(a, b) != OrderRelation::Incomparable)
    });
    report.orbit_ordered = Some(ordered);
    Analysis::Done(report)
}

/// Integrate in chunks until the tail is an equilibrium or a periodic
/// sliding orbit, or the time budget runs out.
pub fn classify_asymptotics(state: &ChainState, dynamics: &Dynamics, opts: &ClassifyOptions) -> Result<AsymptoticsReport> {
    if !dynamics.forcing.is_dc() {
        return Err(FkError::Unsupported("asymptotics are classified for DC forcing only".into()));
    }
    if !(opts.horizon > 0.0) || opts.max_horizon < opts.horizon {
        return Err(FkError::InvalidArgument("need 0 < horizon <= max_horizon".into()));
    }
    let mut cur = state.clone();
    let mut used = 0.0;
    let mut chunk = opts.horizon;
    loop {
        let traj = integrate(&cur, dynamics, (cur.t, cur.t + chunk), opts.dt, opts.dt_out)?;
        used += chunk;
        match analyze(&traj, opts, used) {
            Analysis::Done(r) => return Ok(r),
            Analysis::Open(r, need) => {
                let left = opts.max_horizon - used;
                if left <= 0.0 {
                    return Ok(r);
                }
                chunk = (2.0 * chunk).max(need.unwrap_or(0.0)).min(left);
                cur = r.final_state;
            }
        }
    }
}

/// One period of a detected sliding orbit, resampled at `nodes` uniform times.
pub fn sliding_orbit(report: &AsymptoticsReport, dynamics: &Dynamics, nodes: usize, dt: f64) -> Result<Trajectory> {
    let t0 = report
        .verdict
        .period()
        .ok_or_else(|| FkError::Precondition("the report is not a sliding verdict".into()))?;
    let s = &report.final_state;
    let h = t0 / nodes.max(1) as f64;
    integrate(s, dynamics, (s.t, s.t + t0), dt.min(h), h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulationBin {
    pub x: f64,
    pub m: f64,
    pub count: usize,
    /// Largest deviation of the bin's points from its local quadratic fit.
    pub spread: f64,
    #[serde(skip)]
    fit: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulationTable {
    pub bins: Vec<ModulationBin>,
    pub alpha: f64,
    pub rho: f64,
    pub v: f64,
    pub consistency_residual: f64,
    pub reconstruction_error: f64,
}

impl ModulationTable {
    /// `m(x)` from the local fit of the bin containing `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let nb = self.bins.len();
        let x = x.rem_euclid(1.0);
        let i = ((x * nb as f64) as usize).min(nb - 1);
        let b = &self.bins[i];
        let s = (x - b.x) * nb as f64;
        b.fit[0] + b.fit[1] * s + b.fit[2] * s * s
    }

    /// CSV `(x, m, count, spread)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "m", "count", "spread"]).map_err(csv_err)?;
        for b in &self.bins {
            w.write_record([
                format!("{:.8}", b.x),
                format!("{:.12}", b.m),
                b.count.to_string(),
                format!("{:.3e}", b.spread),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares polynomial of degree at most 2 through `(s, y)`, with the
/// degree capped by the number of distinct abscissae.
fn quad_fit(pts: &[(f64, f64)]) -> [f64; 3] {
    let n = pts.len();
    if n == 0 {
        return [0.0; 3];
    }
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    // x is in bin-width units; clusters closer than 1e-3 of a bin count once
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    let mut distinct = 1;
    let mut anchor = xs[0];
    for &x in &xs[1..] {
        if x - anchor >= 1e-3 {
            distinct += 1;
            anchor = x;
        }
    }
    let mut degree = distinct.min(3) - 1;
    while degree > 0 {
        if let Some(c) = poly_fit(pts, degree) {
            return c;
        }
        degree -= 1;
    }
    [mean, 0.0, 0.0]
}

fn poly_fit(pts: &[(f64, f64)], degree: usize) -> Option<[f64; 3]> {
    let m = degree + 1;
    let mut a = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(s, y) in pts {
        let phi = [1.0, s, s * s];
        for i in 0..m {
            r[i] += phi[i] * y;
            for j in 0..m {
                a[i][j] += phi[i] * phi[j];
            }
        }
    }
    for i in m..3 {
        a[i][i] = 1.0;
    }
    solve3(a, r)
}

fn solve3(mut a: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in c + 1..3 {
            let f = a[i][c] / a[c][c];
            for j in c..3 {
                a[i][j] -= f * a[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|j| a[c][j] * x[j]).sum();
        x[c] = (r[c] - s) / a[c][c];
    }
    Some(x)
}

fn bin_points(points: &[(f64, f64)], nb: usize) -> Vec<ModulationBin> {
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); nb];
    for &(x, y) in points {
        let i = ((x * nb as f64) as usize).min(nb - 1);
        buckets[i].push((x, y));
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let xc = (i as f64 + 0.5) / nb as f64;
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| ((x - xc) * nb as f64, y)).collect();
            let fit = quad_fit(&scaled);
            let spread = scaled
                .iter()
                .map(|&(s, y)| (y - fit[0] - fit[1] * s - fit[2] * s * s).abs())
                .fold(0.0, f64::max);
            ModulationBin { x: xc, m: fit[0], count: pts.len(), spread, fit }
        })
        .collect()
}

/// Hull function of a sliding trajectory:
/// `u_j(t) = jρ + vt + α + m(jρ + vt + α)` with `mean(m) = 0`.
pub fn extract_modulation(traj: &Trajectory, rho: f64, v: f64) -> Result<ModulationTable> {
    if v == 0.0 || !v.is_finite() {
        return Err(FkError::Precondition("a modulation function needs a nonzero speed".into()));
    }
    let nb = MODULATION_BINS;
    let raw: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .flat_map(|s| {
            s.u.iter().enumerate().map(move |(j, &u)| {
                let x0 = j as f64 * rho + v * s.t;
                (x0, u - x0)
            })
        })
        .collect();
    // circle mean of y0 over x0 gives alpha
    let first = bin_points(&raw.iter().map(|&(x, y)| (x.rem_euclid(1.0), y)).collect::<Vec<_>>(), nb);
    let filled: Vec<f64> = first.iter().filter(|b| b.count > 0).map(|b| b.m).collect();
    let alpha = filled.iter().sum::<f64>() / filled.len() as f64;
    let shifted: Vec<(f64, f64)> = raw.iter().map(|&(x, y)| ((x + alpha).rem_euclid(1.0), y - alpha)).collect();
    let bins = bin_points(&shifted, nb);
    let consistency = bins.iter().map(|b| b.spread).fold(0.0, f64::max);
    let mut table = ModulationTable {
        bins,
        alpha,
        rho,
        v,
        consistency_residual: consistency,
        reconstruction_error: 0.0,
    };
    table.reconstruction_error = raw
        .iter()
        .map(|&(x0, y0)| {
            let x = x0 + alpha;
            (x0 + y0 - (x + table.eval(x))).abs()
        })
        .fold(0.0, f64::max);
    let worst = table.consistency_residual.max(table.reconstruction_error);
    if worst > TOL_M {
        return Err(FkError::NotSliding { residual: worst, tol: TOL_M });
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationReport {
    /// `F v` with `v` the mean displacement speed over the segment.
    pub work: f64,
    /// Time and site average of `(du/dt)^2`.
    pub dissipation: f64,
    pub residual: f64,
}

/// `|F v - <(u')^2>| / max(F v, 1e-12)` over the sampled segment (trapezoid in time).
pub fn dissipation_residual(traj: &Trajectory, f: f64) -> Result<DissipationReport> {
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(FkError::Precondition("need at least two samples".into()));
    }
    let span = traj.t_end() - traj.t_start();
    let n = s[0].u.len() as f64;
    let mean_u = |k: usize| s[k].u.iter().sum::<f64>() / n;
    let v = (mean_u(s.len() - 1) - mean_u(0)) / span;
    let sq = |k: usize| s[k].du.iter().map(|x| x * x).sum::<f64>() / n;
    let mut integral = 0.0;
    for k in 1..s.len() {
        integral += 0.5 * (sq(k - 1) + sq(k)) * (s[k].t - s[k - 1].t);
    }
    let dissipation = integral / span;
    let work = f * v;
    let residual = (work - dissipation).abs() / work.abs().max(1e-12);
    Ok(DissipationReport { work, dissipation, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub f: f64,
    pub v: f64,
    pub verdict: String,
    pub t0: Option<f64>,
    pub residual_dissipation: Option<f64>,
    /// Speed dropped below the previous grid point by more than `tol_v`.
    pub non_monotone: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepOptions {
    pub classify: ClassifyOptions,
    /// Contiguous F-intervals handled by separate warm-started chains.
    pub blocks: usize,
    pub orbit_nodes: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { classify: ClassifyOptions::default(), blocks: 4, orbit_nodes: 1024 }
    }
}

fn sweep_point(state: &ChainState, pot: &Potential, f: f64, opts: &SweepOptions) -> (SweepRow, Option<ChainState>) {
    let dynamics = Dynamics::new(pot.clone(), Forcing::dc(f));
    let run = || -> Result<(SweepRow, ChainState)> {
        let r = classify_asymptotics(state, &dynamics, &opts.classify)?;
        let residual = match r.verdict {
            Verdict::PeriodicSliding { .. } => {
                let orbit = sliding_orbit(&r, &dynamics, opts.orbit_nodes, opts.classify.dt)?;
                Some(dissipation_residual(&orbit, f)?.residual)
            }
            _ => None,
        };
        let row = SweepRow {
            f,
            v: r.speed,
            verdict: r.verdict.label().into(),
            t0: r.verdict.period(),
            residual_dissipation: residual,
            non_monotone: false,
            error: None,
        };
        Ok((row, r.final_state))
    };
    match run() {
        Ok((row, s)) => (row, Some(s)),
        Err(e) => (
            SweepRow {
                f,
                v: f64::NAN,
                verdict: "error".into(),
                t0: None,
                residual_dissipation: None,
                non_monotone: false,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

/// Classify along an ascending F grid. Each block starts from `state`;
/// inside a block each point starts from the previous point's end state.
pub fn depinning_sweep(state: &ChainState, pot: &Potential, f_grid: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if f_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(FkError::InvalidArgument("the F grid must be ascending".into()));
    }
    if f_grid.is_empty() {
        return Ok(Vec::new());
    }
    let blocks = opts.blocks.clamp(1, f_grid.len());
    let size = f_grid.len().div_ceil(blocks);
    let chunks: Vec<&[f64]> = f_grid.chunks(size).collect();
    let per_block = par::map(&chunks, |fs| {
        let mut cur = state.clone();
        let mut rows = Vec::with_capacity(fs.len());
        for &f in fs.iter() {
            let (row, end) = sweep_point(&cur, pot, f, opts);
            if let Some(s) = end {
                cur = s;
            }
            rows.push(row);
        }
        rows
    });
    let mut rows: Vec<SweepRow> = per_block.into_iter().flatten().collect();
    for k in 1..rows.len() {
        rows[k].non_monotone = rows[k].v.abs() < rows[k - 1].v.abs() - opts.classify.tol_v;
    }
    Ok(rows)
}

/// CSV `(F, v, verdict, t0, residual_dissipation)`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["F", "v", "verdict", "t0", "residual_dissipation"]).map_err(csv_err)?;
    let opt = |x: Option<f64>, p: usize| x.map(|v| format!("{v:.p$e}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            format!("{:.8}", r.f),
            format!("{:.10}", r.v),
            r.verdict.clone(),
            opt(r.t0, 10),
            opt(r.residual_dissipation, 3),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ResidenceOptions {
    pub time_samples: usize,
    pub dt: f64,
    pub window: i64,
    pub decay: i64,
}

impl Default for ResidenceOptions {
    fn default() -> Self {
        ResidenceOptions { time_samples: 200, dt: 1e-2, window: DEFAULT_DISTANCE_WINDOW, decay: DEFAULT_DISTANCE_DECAY }
    }
}

/// Fraction of `(member, time)` pairs, time uniform on `[0, S)`, with
/// `phi^t u` within `eps` of the reference set closed under translations.
pub fn attractor_residence(
    mu: &Ensemble,
    a_hat: &[ChainState],
    dynamics: &Dynamics,
    s: f64,
    eps: f64,
    opts: &ResidenceOptions,
) -> Result<f64> {
    if a_hat.is_empty() {
        return Err(FkError::InvalidArgument("the reference set is empty".into()));
    }
    if !(s > 0.0) || opts.time_samples == 0 {
        return Err(FkError::InvalidArgument("horizon and sample count must be positive".into()));
    }
    let mut closure: Vec<ChainState> = Vec::new();
    for a in a_hat {
        for p in 0..a.period() as i64 {
            let c = a.translate(p, 0);
            if !closure.iter().any(|b| b.winding == c.winding && config_distance(b, &c, opts.window, opts.decay) < 1e-12) {
                closure.push(c);
            }
        }
    }
    let h = s / opts.time_samples as f64;
    let near = |u: &ChainState| closure.iter().any(|a| config_distance(u, a, opts.window, opts.decay) < eps);
    let per_member = par::map(&mu.members, |m| -> Result<f64> {
        let mut hits = 0usize;
        let mut seen = 0usize;
        let t0 = m.t;
        integrate_streaming(m, dynamics, (t0, t0 + s), opts.dt, h, |t, u, _| {
            if seen < opts.time_samples {
                let st = ChainState { winding: m.winding, u: u.to_vec(), t };
                hits += near(&st) as usize;
                seen += 1;
            }
            Ok(true)
        })?;
        Ok(hits as f64 / seen as f64)
    });
    let mut total = 0.0;
    for (w, f) in mu.weights.iter().zip(per_member) {
        total += w * f?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pendulum(f_over_a: f64) -> (Dynamics, f64) {
        let a = 1.0 / (2.0 * PI);
        (Dynamics::new(Potential::standard(1.0), Forcing::dc(f_over_a * a)), a)
    }

    #[test]
    fn harmonic_translation_speed() {
        let d = Dynamics::new(Potential::harmonic(), Forcing::dc(0.7));
        let traj = integrate(&ChainState::linear(4, 1, 0.2), &d, (0.0, 10.0), 1e-2, 0.1).unwrap();
        let est = average_speed(&traj);
        assert!((est.v - 0.7).abs() < 1e-10 && est.spread < 1e-10);
        let diss = dissipation_residual(&traj, 0.7).unwrap();
        assert!(diss.residual < 1e-10);
    }

    #[test]
    fn equilibrium_speed_and_dissipation() {
        let d = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.0));
        let traj = integrate(&ChainState::linear(3, 0, 0.0), &d, (0.0, 5.0), 1e-2, 0.5).unwrap();
        assert_eq!(average_speed(&traj).v, 0.0);
        assert_eq!(dissipation_residual(&traj, 0.0).unwrap().residual, 0.0);
    }

    #[test]
    fn pendulum_sliding_period() {
        let (d, a) = pendulum(2.0);
        let r = classify_asymptotics(&ChainState::linear(1, 0, 0.0), &d, &ClassifyOptions::default()).unwrap();
        let t0 = r.verdict.period().expect("sliding");
        assert!((t0 - 1.0 / (a * 3f64.sqrt())).abs() < 1e-5, "t0 = {t0}");
        assert!((r.speed - a * 3f64.sqrt()).abs() < 1e-5);
        assert!((r.speed * t0 - 1.0).abs() < 1e-5);
        assert_eq!(r.orbit_ordered, Some(true));
        let orbit = sliding_orbit(&r, &d, 4096, 1e-2).unwrap();
        assert!(dissipation_residual(&orbit, 2.0 * a).unwrap().residual < 1e-6);
        let table = extract_modulation(&orbit, 0.0, r.speed).unwrap();
        assert!(table.consistency_residual < 1e-6 && table.reconstruction_error < 1e-6);
        let mean = table.bins.iter().map(|b| b.m).sum::<f64>() / table.bins.len() as f64;
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn pendulum_pinned() {
        let (d, _) = pendulum(0.9);
        let r = classify_asymptotics(&ChainState::linear(1, 0, 0.3), &d, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Equilibrium);
        assert!(r.speed.abs() <= 1e-8);
    }

    #[test]
    fn harmonic_modulation_is_zero() {
        let d = Dynamics::new(Potential::harmonic(), Forcing::dc(0.5));
        let traj = integrate(&ChainState::linear(3, 1, 0.1), &d, (0.0, 4.0), 1e-2, 0.01).unwrap();
        let t = extract_modulation(&traj, 1.0 / 3.0, 0.5).unwrap();
        assert!(t.bins.iter().all(|b| b.m.abs() < 1e-12));
        assert!((t.alpha - 0.1).abs() < 1e-12);
    }

    #[test]
    fn modulation_ignores_sample_order() {
        let (d, _) = pendulum(1.5);
        let r = classify_asymptotics(&ChainState::linear(1, 0, 0.0), &d, &ClassifyOptions::default()).unwrap();
        let orbit = sliding_orbit(&r, &d, 1024, 1e-2).unwrap();
        let mut shuffled = orbit.clone();
        shuffled.samples.reverse();
        shuffled.samples.swap(3, 700);
        let a = extract_modulation(&orbit, 0.0, r.speed).unwrap();
        let b = extract_modulation(&shuffled, 0.0, r.speed).unwrap();
        assert_eq!(a.bins, b.bins);
    }

    #[test]
    fn scrambled_cloud_is_rejected() {
        let d = Dynamics::new(Potential::harmonic(), Forcing::dc(0.5));
        let mut traj = integrate(&ChainState::linear(2, 0, 0.0), &d, (0.0, 4.0), 1e-2, 0.01).unwrap();
        for (k, s) in traj.samples.iter_mut().enumerate() {
            s.u[1] += 0.01 * (k % 3) as f64;
        }
        assert!(matches!(extract_modulation(&traj, 0.0, 0.5), Err(FkError::NotSliding { .. })));
    }

    #[test]
    fn harmonic_sweep() {
        let rows = depinning_sweep(
            &ChainState::linear(2, 1, 0.0),
            &Potential::harmonic(),
            &[0.1, 0.2, 0.4],
            &SweepOptions { blocks: 2, ..Default::default() },
        )
        .unwrap();
        for r in &rows {
            assert!((r.v - r.f).abs() < 1e-10, "{r:?}");
            assert!(!r.non_monotone);
        }
        assert!(depinning_sweep(&ChainState::linear(1, 0, 0.0), &Potential::harmonic(), &[0.2, 0.1], &Default::default()).is_err());
    }

    #[test]
    fn residence_trivial_cases() {
        let d = Dynamics::new(Potential::standard(1.0), Forcing::dc(0.0));
        let eq = ChainState::linear(2, 0, 0.0);
        let mu = Ensemble::single(eq.clone());
        let o = ResidenceOptions { time_samples: 10, ..Default::default() };
        assert_eq!(attractor_residence(&mu, &[eq.clone()], &d, 5.0, 1e-6, &o).unwrap(), 1.0);
        let other = Ensemble::single(ChainState::linear(2, 0, 0.3));
        assert_eq!(attractor_residence(&other, &[eq.clone()], &d, 5.0, 10.0, &o).unwrap(), 1.0);
        assert!(attractor_residence(&mu, &[], &d, 5.0, 1e-2, &o).is_err());
    }
}
