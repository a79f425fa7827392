//! Shared domain types: vector fields, delay matrices, histories, order
//! intervals and the delayed right-hand side.
//!
//! A system has the form
//!
//! ```text
//! x_i'(t) = f_i(x(t)) + g_i(x_1(t - tau[i][1](t)), ..., x_n(t - tau[i][n](t)))
//! ```
//!
//! where row `i` of the delay matrix holds the delays seen by component `i`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the default domain box `[-1e6, 1e6]^n`.
pub const DEFAULT_DOMAIN_RADIUS: f64 = 1e6;

/// Default slack for order comparisons on computed quantities.
pub const COMPUTED_ORDER_TOL: f64 = 1e-9;

/// A map `R^n -> R^n`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]);

    fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, &mut out);
        out[i]
    }

    fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, &mut out);
        out
    }
}

pub type Field = Arc<dyn VectorField>;

/// Closure-backed vector field.
pub struct FnField<F> {
    dim: usize,
    func: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    pub fn new(dim: usize, func: F) -> Self {
        FnField { dim, func }
    }

    pub fn shared(dim: usize, func: F) -> Field {
        Arc::new(Self::new(dim, func))
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.func)(x, out)
    }
}

/// `x -> M x`.
#[derive(Debug, Clone)]
pub struct LinearField {
    matrix: DMatrix<f64>,
}

impl LinearField {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        assert!(matrix.is_square(), "linear field needs a square matrix");
        LinearField { matrix }
    }

    pub fn shared(matrix: DMatrix<f64>) -> Field {
        Arc::new(Self::new(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(i, x);
        }
    }

    fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        self.matrix
            .row(i)
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// The identity map on `R^n`.
pub fn identity_field(dim: usize) -> Field {
    FnField::shared(dim, |x, out| out.copy_from_slice(x))
}

/// The zero map on `R^n`.
pub fn zero_field(dim: usize) -> Field {
    FnField::shared(dim, |_, out| out.fill(0.0))
}

/// A scalar delay function `tau(t)` on `[0, inf)`.
#[derive(Clone)]
pub enum Delay {
    Constant(f64),
    Varying(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Delay {
    pub fn varying(func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Delay::Varying(Arc::new(func))
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Delay::Constant(c) => *c,
            Delay::Varying(func) => func(t),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Delay::Constant(c) => Some(*c),
            Delay::Varying(_) => None,
        }
    }
}

impl fmt::Debug for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Constant(c) => write!(f, "Constant({c})"),
            Delay::Varying(_) => write!(f, "Varying(..)"),
        }
    }
}

/// `n x n` matrix of delays. Entry `(i, j)` is the delay applied to argument
/// `x_j` inside `g_i`.
#[derive(Clone, Debug)]
pub struct DelayMatrix {
    dim: usize,
    entries: Vec<Delay>,
    tau_max: f64,
}

impl DelayMatrix {
    pub fn zeros(dim: usize) -> Self {
        DelayMatrix {
            dim,
            entries: vec![Delay::Constant(0.0); dim * dim],
            tau_max: 0.0,
        }
    }

    /// Every entry set to the same delay.
    pub fn uniform(dim: usize, delay: Delay, tau_max: f64) -> Result<Self> {
        Self::from_entries(dim, vec![delay; dim * dim], tau_max)
    }

    pub fn constant(dim: usize, tau: f64) -> Result<Self> {
        Self::uniform(dim, Delay::Constant(tau), tau)
    }

    /// Row-major entries, `entries[i * dim + j]` = delay of `x_j` in `g_i`.
    pub fn from_entries(dim: usize, entries: Vec<Delay>, tau_max: f64) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if !(tau_max >= 0.0 && tau_max.is_finite()) {
            return Err(Error::Config(format!("tau_max must be finite and >= 0, got {tau_max}")));
        }
        for (k, e) in entries.iter().enumerate() {
            if let Some(c) = e.as_constant() {
                if !(0.0..=tau_max).contains(&c) {
                    return Err(Error::DelayBound {
                        i: k / dim,
                        j: k % dim,
                        t: 0.0,
                        value: c,
                        tau_max,
                    });
                }
            }
        }
        Ok(DelayMatrix {
            dim,
            entries,
            tau_max,
        })
    }

    /// Replace one entry, raising `tau_max` if a constant entry exceeds it.
    pub fn with_entry(mut self, i: usize, j: usize, delay: Delay, tau_max: f64) -> Result<Self> {
        if i >= self.dim || j >= self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: i.max(j) + 1,
            });
        }
        self.entries[i * self.dim + j] = delay;
        let tau_max = tau_max.max(self.tau_max);
        Self::from_entries(self.dim, self.entries, tau_max)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn entry(&self, i: usize, j: usize) -> &Delay {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[Delay] {
        &self.entries
    }

    /// True when no entry varies in time.
    pub fn all_constant(&self) -> bool {
        self.entries.iter().all(|e| e.as_constant().is_some())
    }

    /// Evaluate entry `(i, j)` at `t`, checking `0 <= tau <= tau_max`.
    ///
    /// Values within `1e-12 * max(1, tau_max)` of the bounds are clamped.
    #[inline]
    pub fn lookup(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        let value = self.entries[i * self.dim + j].at(t);
        let slack = 1e-12 * self.tau_max.max(1.0);
        if value >= 0.0 && value <= self.tau_max {
            Ok(value)
        } else if value > -slack && value < self.tau_max + slack {
            Ok(value.clamp(0.0, self.tau_max))
        } else {
            Err(Error::DelayBound {
                i,
                j,
                t,
                value,
                tau_max: self.tau_max,
            })
        }
    }

    /// Sampled bound and continuity check on `[0, horizon]`.
    ///
    /// Continuity is tested as `|tau(t +- eta) - tau(t)| <= 1e-6` with
    /// `eta = 1e-9` at every grid point.
    pub fn check_sampled(&self, horizon: f64, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let entry = self.entry(i, j);
                if entry.as_constant().is_some() {
                    continue;
                }
                for k in 0..samples {
                    let t = horizon * k as f64 / (samples - 1) as f64;
                    let a = self.lookup(i, j, t)?;
                    let b = self.lookup(i, j, t + 1e-9)?;
                    let c = self.lookup(i, j, (t - 1e-9).max(0.0))?;
                    if (b - a).abs() > 1e-6 || (c - a).abs() > 1e-6 {
                        return Err(Error::Precondition(format!(
                            "delay tau[{i}][{j}] appears discontinuous near t = {t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Componentwise order interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderInterval {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl OrderInterval {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(OrderInterval { lo, hi })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn default_domain(dim: usize) -> Self {
        Self::cube(dim, -DEFAULT_DOMAIN_RADIUS, DEFAULT_DOMAIN_RADIUS).expect("valid cube")
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_slack(x, 0.0)
    }

    pub fn contains_with_slack(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }

    /// Intersection with the non-negative orthant, if non-empty.
    pub fn positive_part(&self) -> Option<Self> {
        let lo: Vec<f64> = self.lo.iter().map(|v| v.max(0.0)).collect();
        OrderInterval::new(lo, self.hi.clone()).ok()
    }

    pub fn extends_below_zero(&self) -> bool {
        self.lo.iter().any(|v| *v < 0.0)
    }
}

impl fmt::Display for OrderInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

/// `a <= b + tol` componentwise.
pub fn order_leq(a: &[f64], b: &[f64], tol: f64) -> Result<bool> {
    same_len(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| *x <= *y + tol))
}

/// `a < b - tol` componentwise.
pub fn order_lt(a: &[f64], b: &[f64], tol: f64) -> Result<bool> {
    same_len(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| *x < *y - tol))
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub(crate) fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(crate) fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// A system of the delayed form above, plus the box on which its fields are
/// defined.
#[derive(Clone)]
pub struct SystemDef {
    dim: usize,
    f: Field,
    g: Field,
    delays: DelayMatrix,
    domain: OrderInterval,
    /// Fields are assumed continuously differentiable on the domain; this is
    /// never verified globally.
    pub assumes_c1: bool,
}

impl fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDef")
            .field("dim", &self.dim)
            .field("delays", &self.delays)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl SystemDef {
    pub fn new(f: Field, g: Field, delays: DelayMatrix) -> Result<Self> {
        let dim = f.dim();
        for found in [g.dim(), delays.dim()] {
            if found != dim {
                return Err(Error::DimensionMismatch { expected: dim, found });
            }
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(SystemDef {
            dim,
            f,
            g,
            delays,
            domain: OrderInterval::default_domain(dim),
            assumes_c1: true,
        })
    }

    pub fn with_domain(mut self, domain: OrderInterval) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_delays(mut self, delays: DelayMatrix) -> Result<Self> {
        if delays.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: delays.dim(),
            });
        }
        self.delays = delays;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn f(&self) -> &Field {
        &self.f
    }

    pub fn g(&self) -> &Field {
        &self.g
    }

    pub fn delays(&self) -> &DelayMatrix {
        &self.delays
    }

    pub fn tau_max(&self) -> f64 {
        self.delays.tau_max()
    }

    pub fn domain(&self) -> &OrderInterval {
        &self.domain
    }

    /// `f(x) + g(x)`, the equilibrium residual.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut fx = self.f.eval_vec(x);
        let gx = self.g.eval_vec(x);
        for (i, (a, b)) in fx.iter_mut().zip(gx).enumerate() {
            *a += b;
            if !a.is_finite() {
                return Err(Error::Evaluation {
                    component: i,
                    t: 0.0,
                    args: x.to_vec(),
                });
            }
        }
        Ok(fx)
    }

    /// Right-hand side at time `t`.
    ///
    /// `delayed` is row-major `n x n`: `delayed[i * n + j] = x_j(t - tau[i][j](t))`.
    pub fn evaluate_rhs(&self, t: f64, current: &[f64], delayed: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(current)?;
        if delayed.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim * self.dim,
                found: delayed.len(),
            });
        }
        if !self.domain.contains(current) {
            return Err(Error::DomainExit {
                t,
                state: current.to_vec(),
            });
        }
        let mut out = self.f.eval_vec(current);
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &delayed[i * n..(i + 1) * n];
            *o += self.g.eval_component(i, row);
            if !o.is_finite() {
                let mut args = current.to_vec();
                args.extend_from_slice(row);
                return Err(Error::Evaluation {
                    component: i,
                    t,
                    args,
                });
            }
        }
        Ok(out)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Initial condition on `[-tau_max, 0]`.
#[derive(Clone)]
pub struct HistorySegment {
    dim: usize,
    tau_max: f64,
    constant: Option<Vec<f64>>,
    func: Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>,
}

impl fmt::Debug for HistorySegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistorySegment")
            .field("dim", &self.dim)
            .field("tau_max", &self.tau_max)
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

impl HistorySegment {
    pub fn constant(value: Vec<f64>, tau_max: f64) -> Self {
        let v = value.clone();
        HistorySegment {
            dim: value.len(),
            tau_max,
            constant: Some(value),
            func: Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&v)),
        }
    }

    pub fn from_fn(
        dim: usize,
        tau_max: f64,
        func: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        HistorySegment {
            dim,
            tau_max,
            constant: None,
            func: Arc::new(func),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn as_constant(&self) -> Option<&[f64]> {
        self.constant.as_deref()
    }

    fn in_range(&self, t: f64) -> bool {
        let slack = 1e-12 * self.tau_max.max(1.0);
        t >= -self.tau_max - slack && t <= slack
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !self.in_range(t) {
            return Err(Error::HistoryRange {
                t,
                tau_max: self.tau_max,
            });
        }
        (self.func)(t, out);
        Ok(())
    }

    /// Sampled continuity check: `|phi(t + eta) - phi(t)| <= 1e-6` with
    /// `eta = 1e-9` on a uniform grid.
    pub fn check_continuity(&self, samples: usize) -> Result<()> {
        if self.constant.is_some() || self.tau_max == 0.0 {
            return Ok(());
        }
        let samples = samples.max(2);
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        for k in 0..samples {
            let t = -self.tau_max + self.tau_max * k as f64 / (samples - 1) as f64;
            let t2 = (t + 1e-9).min(0.0);
            self.eval_into(t, &mut a)?;
            self.eval_into(t2, &mut b)?;
            if max_dist(&a, &b) > 1e-6 {
                return Err(Error::Precondition(format!(
                    "history appears discontinuous near t = {t}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> SystemDef {
        let f = FnField::shared(2, |x, out| {
            out[0] = -x[0] - 1.0;
            out[1] = x[0] - x[1] * (x[1] * x[1] - 9.0) + 2.0;
        });
        let g = FnField::shared(2, |x, out| {
            out[0] = 0.0;
            out[1] = x[0];
        });
        SystemDef::new(f, g, DelayMatrix::zeros(2)).unwrap()
    }

    #[test]
    fn rhs_of_example1_at_origin() {
        let sys = example1();
        let rhs = sys.evaluate_rhs(0.0, &[0.0, 0.0], &[0.0; 4]).unwrap();
        assert_eq!(rhs, vec![-1.0, 2.0]);
    }

    #[test]
    fn rhs_reads_row_i_for_component_i() {
        // g_2 depends on x_1 only, so row 2 (index 1) carries the delayed x_1
        let sys = example1();
        let rhs = sys
            .evaluate_rhs(0.0, &[0.0, 0.0], &[100.0, 100.0, 5.0, 100.0])
            .unwrap();
        assert_eq!(rhs, vec![-1.0, 7.0]);
    }

    #[test]
    fn rhs_with_zero_g_is_f() {
        let f = FnField::shared(1, |x, out| out[0] = 1.0 - x[0]);
        let sys = SystemDef::new(f, zero_field(1), DelayMatrix::zeros(1)).unwrap();
        assert_eq!(sys.evaluate_rhs(3.0, &[1.0], &[42.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn rhs_reports_non_finite() {
        let f = FnField::shared(1, |x, out| out[0] = 1.0 / x[0]);
        let sys = SystemDef::new(f, zero_field(1), DelayMatrix::zeros(1)).unwrap();
        let err = sys.evaluate_rhs(0.5, &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Evaluation { component: 0, .. }));
    }

    #[test]
    fn rhs_outside_domain_raises() {
        let sys = example1()
            .with_domain(OrderInterval::cube(2, 0.0, 1.0).unwrap())
            .unwrap();
        let err = sys.evaluate_rhs(0.0, &[-0.5, 0.0], &[0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::DomainExit { .. }));
    }

    #[test]
    fn order_examples() {
        assert!(order_leq(&[0.0, 0.0], &[0.0, 0.0], 0.0).unwrap());
        assert!(order_leq(&[-3.0, -5.0], &[1.0, -1.0], 0.0).unwrap());
        assert!(!order_leq(&[1.0, 0.0], &[0.0, 1.0], 0.0).unwrap());
        assert!(order_lt(&[-3.0, -5.0], &[1.0, -1.0], 0.0).unwrap());
        assert!(!order_lt(&[0.0, 0.0], &[0.0, 1.0], 0.0).unwrap());
        assert!(matches!(
            order_leq(&[0.0], &[0.0, 1.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn delay_lookup_is_bounded() {
        let d = DelayMatrix::uniform(1, Delay::varying(|t| 4.0 + t.sin()), 5.0).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.1;
            assert!((0.0..=5.0).contains(&d.lookup(0, 0, t).unwrap()));
        }
        let bad = DelayMatrix::uniform(1, Delay::varying(|t| t), 1.0).unwrap();
        assert!(matches!(bad.lookup(0, 0, 2.0), Err(Error::DelayBound { .. })));
        assert!(DelayMatrix::constant(1, -1.0).is_err());
    }

    #[test]
    fn delay_continuity_check_catches_jumps() {
        let smooth = DelayMatrix::uniform(1, Delay::varying(|t| 2.0 + t.sin()), 3.0).unwrap();
        smooth.check_sampled(20.0, 500).unwrap();
        let jump = DelayMatrix::uniform(
            1,
            Delay::varying(|t| if t < 1.0 { 0.0 } else { 1.0 }),
            1.0,
        )
        .unwrap();
        assert!(jump.check_sampled(2.0, 3).is_err());
    }

    #[test]
    fn history_range() {
        let h = HistorySegment::constant(vec![1.0, 2.0], 5.0);
        assert_eq!(h.eval(-5.0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(h.eval(0.0).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(h.eval(0.1), Err(Error::HistoryRange { .. })));
        assert!(matches!(h.eval(-5.1), Err(Error::HistoryRange { .. })));
    }

    #[test]
    fn interval_validation() {
        assert!(OrderInterval::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        let b = OrderInterval::new(vec![-1.0, 0.5], vec![1.0, 2.0]).unwrap();
        assert!(b.extends_below_zero());
        assert_eq!(b.positive_part().unwrap().lo(), &[0.0, 0.5]);
        assert!(OrderInterval::cube(2, -2.0, -1.0).unwrap().positive_part().is_none());
    }

    proptest::proptest! {
        #[test]
        fn order_leq_is_a_partial_order(
            a in proptest::collection::vec(-3i32..3, 3),
            b in proptest::collection::vec(-3i32..3, 3),
            c in proptest::collection::vec(-3i32..3, 3),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let c: Vec<f64> = c.into_iter().map(f64::from).collect();
            proptest::prop_assert!(order_leq(&a, &a, 0.0).unwrap());
            if order_leq(&a, &b, 0.0).unwrap() && order_leq(&b, &a, 0.0).unwrap() {
                proptest::prop_assert_eq!(&a, &b);
            }
            if order_leq(&a, &b, 0.0).unwrap() && order_leq(&b, &c, 0.0).unwrap() {
                proptest::prop_assert!(order_leq(&a, &c, 0.0).unwrap());
            }
        }

        #[test]
        fn zero_delay_rhs_equals_residual(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0) {
            let sys = example1();
            let x = [x0, x1];
            let delayed = [x0, x1, x0, x1];
            let rhs = sys.evaluate_rhs(0.0, &x, &delayed).unwrap();
            proptest::prop_assert_eq!(rhs, sys.residual(&x).unwrap());
        }
    }
}
