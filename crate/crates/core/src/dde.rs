//! Fixed-step method-of-steps integration with cubic Hermite dense output.
//!
//! Each step is classical RK4. Delayed arguments are read from the dense
//! interpolant of the solution computed so far. When a delayed time lands
//! inside the step being computed (delay shorter than the step, including
//! zero), the step is first taken with constant extrapolation from the last
//! accepted point, then recomputed `overlap_iterations` times against the
//! provisional Hermite interpolant of the step itself. A delay that is
//! exactly zero reads the current stage state, so the all-zero-delay case is
//! plain RK4.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{HistorySegment, SystemDef};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_end: f64,
    pub overlap_iterations: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-2,
            t_end: 100.0,
            overlap_iterations: 2,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, t_end: f64) -> Self {
        IntegratorConfig {
            step,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if self.overlap_iterations == 0 {
            return Err(Error::Config("overlap_iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of forward steps; the last one may be shorter than `step`.
    fn steps(&self) -> usize {
        ((self.t_end / self.step) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Direction for [`is_monotone`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

/// Solution `x(t, phi)` on `[-tau_max, t_end]`.
///
/// The mesh covers the history interval (for output) and the forward
/// interval. Dense evaluation on the history interval calls the history
/// function itself; on the forward interval it is cubic Hermite using the
/// stored right-hand-side values.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    step: f64,
    history: HistorySegment,
    times: Vec<f64>,
    states: Vec<f64>,
    first_forward: usize,
    derivs: Vec<f64>,
}

impl Trajectory {
    fn start(history: HistorySegment, step: f64) -> Result<Self> {
        let dim = history.dim();
        let tau_max = history.tau_max();
        let mut times = Vec::new();
        let mut states = Vec::new();
        if tau_max > 0.0 {
            let m = ((tau_max / step) - 1e-9).ceil().max(1.0) as usize;
            let mut buf = vec![0.0; dim];
            for i in 0..m {
                let t = -tau_max + tau_max * i as f64 / m as f64;
                history.eval_into(t, &mut buf)?;
                times.push(t);
                states.extend_from_slice(&buf);
            }
        }
        let first_forward = times.len();
        Ok(Trajectory {
            dim,
            step,
            history,
            times,
            states,
            first_forward,
            derivs: Vec::new(),
        })
    }

    fn push(&mut self, t: f64, x: &[f64], d: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.derivs.extend_from_slice(d);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau_max(&self) -> f64 {
        self.history.tau_max()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    /// Full mesh, starting at `-tau_max`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, index: usize) -> &[f64] {
        &self.states[index * self.dim..(index + 1) * self.dim]
    }

    /// Index of `t = 0` in the mesh.
    pub fn first_forward(&self) -> usize {
        self.first_forward
    }

    pub fn forward_times(&self) -> &[f64] {
        &self.times[self.first_forward..]
    }

    /// `(t, x(t))` over every mesh point with `t >= 0`.
    pub fn forward(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (self.first_forward..self.len()).map(move |k| (self.times[k], self.state(k)))
    }

    /// `(t, x(t))` over the whole mesh.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..self.len()).map(move |k| (self.times[k], self.state(k)))
    }

    /// Stored right-hand-side value at forward point `k` (`k = 0` is `t = 0`).
    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least t = 0")
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    fn forward_len(&self) -> usize {
        self.len() - self.first_forward
    }

    /// Dense value at any `t` in `[-tau_max, last_time]`.
    pub fn dense_eval(&self, t: f64) -> Result<Vec<f64>> {
        let start = -self.tau_max();
        let end = self.last_time();
        let slack = 1e-12 * end.abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfRange { t, start, end });
        }
        if t <= 0.0 {
            return self.history.eval(t);
        }
        let t = t.min(end);
        Ok((0..self.dim).map(|j| self.forward_component(j, t)).collect())
    }

    /// Locate `k` with `t_k <= t <= t_{k+1}` in the forward mesh (`t > 0`).
    #[inline]
    fn forward_interval(&self, t: f64) -> usize {
        let fwd = &self.times[self.first_forward..];
        let last = fwd.len().saturating_sub(2);
        let mut k = ((t / self.step) as usize).min(last);
        while k > 0 && fwd[k] > t {
            k -= 1;
        }
        while k < last && fwd[k + 1] < t {
            k += 1;
        }
        k
    }

    /// Hermite value of component `j` at `t` in `(0, last_time]`.
    #[inline]
    fn forward_component(&self, j: usize, t: f64) -> f64 {
        if self.forward_len() == 1 {
            return self.state(self.first_forward)[j];
        }
        let k = self.forward_interval(t);
        let a = self.first_forward + k;
        let (t0, t1) = (self.times[a], self.times[a + 1]);
        if t == t0 {
            return self.state(a)[j];
        }
        if t == t1 {
            return self.state(a + 1)[j];
        }
        hermite(
            t0,
            self.state(a)[j],
            self.derivative(k)[j],
            t1,
            self.state(a + 1)[j],
            self.derivative(k + 1)[j],
            t,
        )
    }

    /// Component `j` at `t` in `[-tau_max, last_time]` without range checks
    /// beyond the history call.
    #[inline]
    fn component(&self, j: usize, t: f64, scratch: &mut [f64]) -> Result<f64> {
        if t <= 0.0 {
            if let Some(c) = self.history.as_constant() {
                return Ok(c[j]);
            }
            self.history.eval_into(t, scratch)?;
            Ok(scratch[j])
        } else {
            Ok(self.forward_component(j, t))
        }
    }
}

/// Cubic Hermite interpolation on `[t0, t1]`.
#[inline]
pub fn hermite(t0: f64, y0: f64, d0: f64, t1: f64, y1: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let r = 1.0 - s;
    let h00 = (1.0 + 2.0 * s) * r * r;
    let h10 = s * r * r;
    let h01 = s2 * (3.0 - 2.0 * s);
    let h11 = s2 * (s - 1.0);
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Dense evaluation of a trajectory.
pub fn dense_eval(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    traj.dense_eval(t)
}

/// True iff consecutive forward mesh values are ordered within `tol`.
pub fn is_monotone(traj: &Trajectory, direction: Direction, tol: f64) -> bool {
    let mut prev: Option<&[f64]> = None;
    for (_, x) in traj.forward() {
        if let Some(p) = prev {
            let ok = p.iter().zip(x).all(|(a, b)| match direction {
                Direction::NonIncreasing => *b <= *a + tol,
                Direction::NonDecreasing => *b >= *a - tol,
            });
            if !ok {
                return false;
            }
        }
        prev = Some(x);
    }
    true
}

/// Provisional values on the step being computed.
#[derive(Clone, Copy)]
enum Provisional<'a> {
    Constant,
    Hermite { t1: f64, x1: &'a [f64], d1: &'a [f64] },
}

struct Stepper<'a> {
    sys: &'a SystemDef,
    traj: Trajectory,
    f_buf: Vec<f64>,
    g_buf: Vec<f64>,
    row: Vec<f64>,
    prev_row: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    /// Right-hand side at `(t, y)`; returns whether any delayed time fell
    /// after the last accepted mesh point.
    fn rhs(&mut self, t: f64, y: &[f64], prov: Provisional<'_>, out: &mut [f64]) -> Result<bool> {
        let sys = self.sys;
        let n = sys.dim();
        let domain = sys.domain();
        if !domain.contains(y) {
            return Err(Error::DomainExit { t, state: y.to_vec() });
        }
        let last = self.traj.len() - 1;
        let tk = self.traj.times[last];
        let kf = last - self.traj.first_forward;

        sys.f().eval(y, &mut self.f_buf);
        let mut overlap = false;
        let mut have_prev = false;
        for i in 0..n {
            for j in 0..n {
                let tau = sys.delays().lookup(i, j, t)?;
                let value = if tau == 0.0 {
                    y[j]
                } else {
                    let s = t - tau;
                    if s <= tk {
                        self.traj.component(j, s, &mut self.scratch)?
                    } else {
                        overlap = true;
                        let xk = self.traj.state(last)[j];
                        match prov {
                            Provisional::Constant => xk,
                            Provisional::Hermite { t1, x1, d1 } => {
                                let dk = self.traj.derivative(kf)[j];
                                hermite(tk, xk, dk, t1, x1[j], d1[j], s)
                            }
                        }
                    }
                };
                if !(value >= domain.lo()[j] && value <= domain.hi()[j]) {
                    let mut state = self.row.clone();
                    state[j] = value;
                    return Err(Error::DomainExit { t, state });
                }
                self.row[j] = value;
            }
            if !(have_prev && self.row == self.prev_row) {
                sys.g().eval(&self.row, &mut self.g_buf);
                self.prev_row.copy_from_slice(&self.row);
                have_prev = true;
            }
            out[i] = self.f_buf[i] + self.g_buf[i];
            if !out[i].is_finite() {
                let mut args = y.to_vec();
                args.extend_from_slice(&self.row);
                return Err(Error::Evaluation { component: i, t, args });
            }
        }
        Ok(overlap)
    }

    /// One RK4 step from the last accepted point to `t1`. Returns the new
    /// state, the last stage slope and the overlap flag.
    fn rk4(&mut self, t1: f64, prov: Provisional<'_>) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let n = self.sys.dim();
        let last = self.traj.len() - 1;
        let tk = self.traj.times[last];
        let h = t1 - tk;
        let xk = self.traj.state(last).to_vec();
        let k1 = self.traj.derivative(last - self.traj.first_forward).to_vec();
        let mut y = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];

        for i in 0..n {
            y[i] = xk[i] + 0.5 * h * k1[i];
        }
        let mut overlap = self.rhs(tk + 0.5 * h, &y, prov, &mut k2)?;
        for i in 0..n {
            y[i] = xk[i] + 0.5 * h * k2[i];
        }
        overlap |= self.rhs(tk + 0.5 * h, &y, prov, &mut k3)?;
        for i in 0..n {
            y[i] = xk[i] + h * k3[i];
        }
        overlap |= self.rhs(t1, &y, prov, &mut k4)?;
        for i in 0..n {
            y[i] = xk[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok((y, k4, overlap))
    }
}

/// Integrate the system from history `phi` up to `cfg.t_end`.
pub fn integrate(sys: &SystemDef, phi: &HistorySegment, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = sys.dim();
    if phi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: phi.dim() });
    }
    let tau_max = sys.tau_max();
    if (phi.tau_max() - tau_max).abs() > 1e-12 * tau_max.max(1.0) {
        return Err(Error::Precondition(format!(
            "history covers [-{}, 0] but the system needs [-{tau_max}, 0]",
            phi.tau_max()
        )));
    }
    if tau_max > 0.0 && cfg.step > tau_max {
        warn!("step {} exceeds tau_max {tau_max}", cfg.step);
    }

    let traj = Trajectory::start(phi.clone(), cfg.step)?;
    for (t, x) in traj.iter() {
        if !sys.domain().contains(x) {
            return Err(Error::DomainExit { t, state: x.to_vec() });
        }
    }
    let mut stepper = Stepper {
        sys,
        traj,
        f_buf: vec![0.0; n],
        g_buf: vec![0.0; n],
        row: vec![0.0; n],
        prev_row: vec![0.0; n],
        scratch: vec![0.0; n],
    };

    let x0 = phi.eval(0.0)?;
    let mut d0 = vec![0.0; n];
    // no derivative stored yet, so seed t = 0 with a placeholder the first
    // rhs call never reads (all lookups at t = 0 fall in the history)
    stepper.traj.push(0.0, &x0, &d0);
    stepper.rhs(0.0, &x0, Provisional::Constant, &mut d0)?;
    let k0 = stepper.traj.derivs.len() - n;
    stepper.traj.derivs[k0..].copy_from_slice(&d0);

    let steps = cfg.steps();
    let mut d1 = vec![0.0; n];
    for k in 0..steps {
        let t1 = if k + 1 == steps { cfg.t_end } else { (k + 1) as f64 * cfg.step };

        let (mut x1, mut k4, overlap) = stepper.rk4(t1, Provisional::Constant)?;
        if overlap {
            for _ in 0..cfg.overlap_iterations {
                let prov = Provisional::Hermite { t1, x1: &x1, d1: &k4 };
                let (x, s, _) = stepper.rk4(t1, prov)?;
                x1 = x;
                k4 = s;
            }
        }

        let prov = Provisional::Hermite { t1, x1: &x1, d1: &k4 };
        let overlap = stepper.rhs(t1, &x1, prov, &mut d1)?;
        if overlap {
            for _ in 0..cfg.overlap_iterations {
                let slope = d1.clone();
                let prov = Provisional::Hermite { t1, x1: &x1, d1: &slope };
                stepper.rhs(t1, &x1, prov, &mut d1)?;
            }
        }
        stepper.traj.push(t1, &x1, &d1);
    }
    Ok(stepper.traj)
}
