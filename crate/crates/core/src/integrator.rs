//! Fixed-step fourth-order Runge-Kutta integration of the chain and of the
//! linear cooperative system `dw_j/dt = a_j w_{j-1} + b_j w_{j+1} + c_j w_j`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{FkError, Result};
use crate::interp::HermiteCubic;
use crate::model::{rhs_into, ChainState, Dynamics, Forcing, Potential};
use crate::zeroset::{derivative_coeffs, linearized_coeffs};

pub const DEFAULT_DT: f64 = 1e-3;

/// Scratch buffers for one RK4 step.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, h: f64, y: &mut [f64]) {
        let n = y.len();
        rhs(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Drive `y` from `t0` to `t1`, calling `emit` at `t0`, every `dt_out`, and at
/// `t1`. Steps are `dt` long except the last one before each output, which
/// is shortened to land on the output time. `emit` returns `false` to stop.
pub(crate) fn drive<F, G>(
    y: &mut [f64],
    t0: f64,
    t1: f64,
    dt: f64,
    dt_out: f64,
    mut rhs: F,
    mut emit: G,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> Result<bool>,
{
    if !(dt > 0.0) || !(dt_out > 0.0) {
        return Err(FkError::Precondition(format!("dt = {dt} and dt_out = {dt_out} must be positive")));
    }
    if !(t1 > t0) {
        return Err(FkError::Precondition(format!("empty time span [{t0}, {t1}]")));
    }
    let mut rk = Rk4::new(y.len());
    if !emit(t0, y)? {
        return Ok(t0);
    }
    let span = t1 - t0;
    let n_out = ((span / dt_out) - 1e-9).ceil().max(1.0) as u64;
    let mut t = t0;
    for k in 1..=n_out {
        let target = if k == n_out { t1 } else { t0 + k as f64 * dt_out };
        let eps = 1e-12 * target.abs().max(1.0);
        while target - t > eps {
            let h = if target - t <= dt + eps { target - t } else { dt };
            rk.step(&mut rhs, t, h, y);
            if y.iter().any(|x| !x.is_finite()) {
                return Err(FkError::Blowup {
                    last_good_time: t,
                    detail: "non-finite state".into(),
                });
            }
            t = if target - t <= dt + eps { target } else { t + h };
        }
        t = target;
        if !emit(t, y)? {
            return Ok(t);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrationMeta {
    pub method: &'static str,
    pub dt: f64,
    pub dt_out: f64,
    /// Step-doubling estimate of the end-state error, when requested.
    pub error_estimate: Option<f64>,
    pub initial_spacing: f64,
    pub max_spacing: f64,
}

/// Sampled solution of the chain equation; all samples share `(N, M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub winding: i64,
    pub samples: Vec<TrajectorySample>,
    pub meta: IntegrationMeta,
}

impl Trajectory {
    pub fn state(&self, i: usize) -> ChainState {
        let s = &self.samples[i];
        ChainState { winding: self.winding, u: s.u.clone(), t: s.t }
    }

    pub fn first_state(&self) -> ChainState {
        self.state(0)
    }

    pub fn last_state(&self) -> ChainState {
        self.state(self.samples.len() - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Index `i` of the sample interval `[t_i, t_{i+1}]` containing `t`.
    fn bracket(&self, t: f64) -> usize {
        let n = self.samples.len();
        match self.samples.binary_search_by(|s| s.t.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation of the lift at time `t` (clamped to the span).
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        if self.samples.len() == 1 {
            return self.samples[0].u.clone();
        }
        let t = t.clamp(self.t_start(), self.t_end());
        let i = self.bracket(t);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        (0..a.u.len())
            .map(|j| HermiteCubic::new(a.t, b.t, a.u[j], a.du[j], b.u[j], b.du[j]).eval(t))
            .collect()
    }

    /// Samples with `t >= t_from`.
    pub fn tail_from(&self, t_from: f64) -> &[TrajectorySample] {
        let start = self.samples.partition_point(|s| s.t < t_from);
        &self.samples[start..]
    }
}

/// Stream the solution without storing it. The callback sees `(t, u, du)` at
/// every output time and returns `false` to stop early. Returns the final state.
pub fn integrate_streaming<G>(
    state: &ChainState,
    dynamics: &Dynamics,
    t_span: (f64, f64),
    dt: f64,
    dt_out: f64,
    mut on_sample: G,
) -> Result<ChainState>
where
    G: FnMut(f64, &[f64], &[f64]) -> Result<bool>,
{
    let winding = state.winding;
    let wf = winding as f64;
    let mut y = state.u.clone();
    let mut du = vec![0.0; y.len()];
    let pot = &dynamics.potential;
    let force = &dynamics.forcing;
    let t_last = drive(
        &mut y,
        t_span.0,
        t_span.1,
        dt,
        dt_out,
        |t, u, out| rhs_into(pot, force.eval(t), u, wf, out),
        |t, u| {
            rhs_into(pot, force.eval(t), u, wf, &mut du);
            on_sample(t, u, &du)
        },
    )?;
    Ok(ChainState { winding, u: y, t: t_last })
}

/// Integrate over `t_span` and keep samples every `dt_out`.
pub fn integrate(
    state: &ChainState,
    dynamics: &Dynamics,
    t_span: (f64, f64),
    dt: f64,
    dt_out: f64,
) -> Result<Trajectory> {
    let mut samples = Vec::new();
    let initial_spacing = state.spacing_bound();
    let mut max_spacing = initial_spacing;
    let winding = state.winding;
    integrate_streaming(state, dynamics, t_span, dt, dt_out, |t, u, du| {
        let s = ChainState { winding, u: u.to_vec(), t };
        max_spacing = max_spacing.max(s.spacing_bound());
        samples.push(TrajectorySample { t, u: s.u, du: du.to_vec() });
        Ok(true)
    })?;
    Ok(Trajectory {
        winding,
        samples,
        meta: IntegrationMeta {
            method: "rk4",
            dt,
            dt_out,
            error_estimate: None,
            initial_spacing,
            max_spacing,
        },
    })
}

/// [`integrate`] plus a step-doubling error estimate of the end state.
pub fn integrate_with_error_estimate(
    state: &ChainState,
    dynamics: &Dynamics,
    t_span: (f64, f64),
    dt: f64,
    dt_out: f64,
) -> Result<Trajectory> {
    let mut traj = integrate(state, dynamics, t_span, dt, dt_out)?;
    let fine = integrate_streaming(state, dynamics, t_span, 0.5 * dt, t_span.1 - t_span.0, |_, _, _| Ok(true))?;
    let coarse = traj.last_state();
    let diff = coarse.u.iter().zip(&fine.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    traj.meta.error_estimate = Some(diff / 15.0);
    Ok(traj)
}

/// Advance `state` by `horizon` and return only the end state.
pub fn advance(state: &ChainState, dynamics: &Dynamics, horizon: f64, dt: f64) -> Result<ChainState> {
    if horizon == 0.0 {
        return Ok(state.clone());
    }
    integrate_streaming(state, dynamics, (state.t, state.t + horizon), dt, horizon, |_, _, _| Ok(true))
}

/// Time-one map of an AC-driven chain, started from the state's own time stamp.
pub fn stroboscopic_map(state: &ChainState, dynamics: &Dynamics, dt: f64) -> Result<ChainState> {
    if dynamics.forcing.is_dc() {
        return Err(FkError::Unsupported("the stroboscopic map needs AC forcing".into()));
    }
    advance(state, dynamics, 1.0, dt)
}

/// Coefficients `a, b, c` of the linear cooperative system at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSystemCoeffs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: f64,
}

impl LinearSystemCoeffs {
    pub fn constant(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.len() != c.len() || a.is_empty() {
            return Err(FkError::InvalidArgument("coefficient arrays must share a positive length".into()));
        }
        let delta = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
        let coeffs = LinearSystemCoeffs { a, b, c, delta };
        coeffs.check()?;
        Ok(coeffs)
    }

    pub fn uniform(n: usize, a: f64, b: f64, c: f64) -> Result<Self> {
        Self::constant(vec![a; n], vec![b; n], vec![c; n])
    }

    /// The cooperativity condition `a_j, b_j >= delta > 0`.
    pub fn check(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(FkError::Precondition(format!(
                "cooperativity floor must be positive, got {}",
                self.delta
            )));
        }
        let floor = self.delta * (1.0 - 1e-9);
        if let Some(j) = (0..self.a.len()).find(|&j| self.a[j] < floor || self.b[j] < floor) {
            return Err(FkError::Precondition(format!(
                "a[{j}] = {}, b[{j}] = {} below the floor {}",
                self.a[j], self.b[j], self.delta
            )));
        }
        Ok(())
    }

    /// `out_j = a_j w_{j-1} + b_j w_{j+1} + c_j w_j` on the periodic ring.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let n = w.len();
        for j in 0..n {
            let l = w[(j + n - 1) % n];
            let r = w[(j + 1) % n];
            out[j] = self.a[j] * l + self.b[j] * r + self.c[j] * w[j];
        }
    }
}

/// RK4 solution of a constant-coefficient system after time `t` (either
/// sign) in `steps` equal steps.
pub fn evolve_constant_linear(coeffs: &LinearSystemCoeffs, w0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let mut y = w0.to_vec();
    let mut rk = Rk4::new(y.len());
    let h = t / steps.max(1) as f64;
    let mut rhs = |_: f64, w: &[f64], out: &mut [f64]| coeffs.apply(w, out);
    for i in 0..steps.max(1) {
        rk.step(&mut rhs, i as f64 * h, h, &mut y);
    }
    y
}

pub type CoeffFn = Arc<dyn Fn(f64) -> LinearSystemCoeffs + Send + Sync>;

/// Where the linear system takes its coefficients from.
#[derive(Clone)]
pub enum CoefficientSource {
    Constant(LinearSystemCoeffs),
    /// Explicit time dependence.
    Function(CoeffFn),
    /// Difference of two carried solutions `w = u2 - u1`.
    Difference { u1: ChainState, u2: ChainState, dynamics: Dynamics },
    /// Time derivative of a carried DC solution.
    Derivative { u: ChainState, dynamics: Dynamics },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSample {
    pub t: f64,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
}

fn carried_coeffs(source: &CoefficientSource, t: f64, bases: &[f64], n: usize) -> Result<LinearSystemCoeffs> {
    match source {
        CoefficientSource::Constant(c) => Ok(c.clone()),
        CoefficientSource::Function(f) => Ok(f(t)),
        CoefficientSource::Difference { u1, u2, dynamics } => {
            let s1 = ChainState { winding: u1.winding, u: bases[..n].to_vec(), t };
            let s2 = ChainState { winding: u2.winding, u: bases[n..2 * n].to_vec(), t };
            linearized_coeffs(&s1, &s2, &dynamics.potential)
        }
        CoefficientSource::Derivative { u, dynamics } => {
            let s = ChainState { winding: u.winding, u: bases[..n].to_vec(), t };
            Ok(derivative_coeffs(&s, &dynamics.potential))
        }
    }
}

/// Integrate the N-periodic linear system. Base trajectories named by the
/// source are integrated alongside `w`, and the coefficients are re-evaluated
/// from them at every stage.
pub fn integrate_linear(
    w0: &[f64],
    source: &CoefficientSource,
    t_span: (f64, f64),
    dt: f64,
    dt_out: f64,
) -> Result<Vec<LinearSample>> {
    let mut out = Vec::new();
    integrate_linear_streaming(w0, source, t_span, dt, dt_out, |t, w, dw| {
        out.push(LinearSample { t, w: w.to_vec(), dw: dw.to_vec() });
        Ok(true)
    })?;
    Ok(out)
}

pub fn integrate_linear_streaming<G>(
    w0: &[f64],
    source: &CoefficientSource,
    t_span: (f64, f64),
    dt: f64,
    dt_out: f64,
    mut on_sample: G,
) -> Result<Vec<f64>>
where
    G: FnMut(f64, &[f64], &[f64]) -> Result<bool>,
{
    let n = w0.len();
    let (bases, windings, dynamics): (Vec<f64>, Vec<f64>, Option<&Dynamics>) = match source {
        CoefficientSource::Constant(c) => {
            if c.a.len() != n {
                return Err(FkError::InvalidArgument("coefficient length differs from w0".into()));
            }
            c.check()?;
            (vec![], vec![], None)
        }
        CoefficientSource::Function(f) => {
            f(t_span.0).check()?;
            (vec![], vec![], None)
        }
        CoefficientSource::Difference { u1, u2, dynamics } => {
            if u1.period() != n || u2.period() != n || u1.winding != u2.winding {
                return Err(FkError::Incompatible("base states must share (N, M) with w0".into()));
            }
            let mut b = u1.u.clone();
            b.extend_from_slice(&u2.u);
            (b, vec![u1.winding as f64, u2.winding as f64], Some(dynamics))
        }
        CoefficientSource::Derivative { u, dynamics } => {
            if !dynamics.forcing.is_dc() {
                return Err(FkError::Unsupported("the derivative system is DC only".into()));
            }
            if u.period() != n {
                return Err(FkError::Incompatible("base state must have period len(w0)".into()));
            }
            (u.u.clone(), vec![u.winding as f64], Some(dynamics))
        }
    };
    let nb = bases.len();
    let mut y = w0.to_vec();
    y.extend_from_slice(&bases);
    let mut dw = vec![0.0; n];

    let eval = |t: f64, y: &[f64], out: &mut [f64], failure: &mut Option<FkError>| {
        let (w, b) = y.split_at(n);
        match carried_coeffs(source, t, b, n) {
            Ok(c) => {
                if failure.is_none() {
                    if let Err(e) = c.check() {
                        *failure = Some(e);
                    }
                }
                c.apply(w, &mut out[..n]);
            }
            Err(e) => {
                failure.get_or_insert(e);
                out[..n].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        if let Some(d) = dynamics {
            let (pot, f) = (&d.potential, d.forcing.eval(t));
            for (k, &m) in windings.iter().enumerate() {
                let seg = n + k * n..n + (k + 1) * n;
                let (src, dst) = (&y[seg.clone()], &mut out[seg]);
                rhs_into(pot, f, src, m, dst);
            }
        }
    };

    let mut fail_rhs: Option<FkError> = None;
    let mut fail_emit: Option<FkError> = None;
    let mut scratch = vec![0.0; n + nb];
    drive(
        &mut y,
        t_span.0,
        t_span.1,
        dt,
        dt_out,
        |t, y, out| eval(t, y, out, &mut fail_rhs),
        |t, y| {
            eval(t, y, &mut scratch, &mut fail_emit);
            if let Some(e) = fail_emit.take() {
                return Err(e);
            }
            dw.copy_from_slice(&scratch[..n]);
            on_sample(t, &y[..n], &dw)
        },
    )?;
    if let Some(e) = fail_rhs {
        return Err(e);
    }
    y.truncate(n);
    Ok(y)
}

/// Convenience: build the potential-bundle from parts.
pub fn dynamics(potential: Potential, forcing: Forcing) -> Dynamics {
    Dynamics::new(potential, forcing)
}
