//! Constant-delay comparison systems and sandwich checks on simulated
//! trajectories.
//!
//! All checks run on `[0, t_end]` only and compare at shared mesh points.

use crate::certify::{check_sub_equilibrium, check_super_equilibrium};
use crate::dde::{integrate, is_monotone, Direction, IntegratorConfig, Trajectory};
use crate::error::{Error, Result};
use crate::model::{order_leq, Delay, DelayMatrix, HistorySegment, SystemDef};

pub const DEFAULT_ORDER_TOL: f64 = 1e-6;

/// A system together with its copy whose delays are all `tau_max`.
#[derive(Debug, Clone)]
pub struct ComparisonSystem {
    pub base: SystemDef,
    pub derived: SystemDef,
}

pub fn make_comparison(sys: &SystemDef) -> Result<ComparisonSystem> {
    let tau = sys.tau_max();
    let n = sys.dim();
    let delays = DelayMatrix::from_entries(n, vec![Delay::Constant(tau); n * n], tau)?;
    Ok(ComparisonSystem {
        base: sys.clone(),
        derived: sys.clone().with_delays(delays)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichConfig {
    pub integrator: IntegratorConfig,
    pub tol: f64,
}

impl SandwichConfig {
    pub fn new(step: f64, t_end: f64) -> Self {
        SandwichConfig {
            integrator: IntegratorConfig::new(step, t_end),
            tol: DEFAULT_ORDER_TOL,
        }
    }
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig::new(1e-2, 100.0)
    }
}

#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub holds: bool,
    /// Largest `lower - upper` over mesh points and components; `<= 0` when
    /// strictly ordered.
    pub max_violation: f64,
    /// First mesh time where the order failed.
    pub first_violation: Option<f64>,
    /// Ordering is only verified on `[0, horizon]`.
    pub horizon: f64,
    pub mesh_points: usize,
    pub original: Trajectory,
    pub comparison: Trajectory,
}

fn run_pair(cmp: &ComparisonSystem, phi: &HistorySegment, cfg: &IntegratorConfig) -> Result<(Trajectory, Trajectory)> {
    let (x, y) = rayon::join(
        || integrate(&cmp.base, phi, cfg),
        || integrate(&cmp.derived, phi, cfg),
    );
    Ok((x?, y?))
}

/// Largest `lower_i(t) - upper_i(t)` over the forward mesh.
fn order_gap(lower: &Trajectory, upper: &Trajectory, tol: f64) -> Result<(f64, Option<f64>)> {
    if lower.forward_times() != upper.forward_times() {
        return Err(Error::Precondition("trajectories do not share a mesh".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut first = None;
    for ((t, a), (_, b)) in lower.forward().zip(upper.forward()) {
        for (x, y) in a.iter().zip(b) {
            let gap = x - y;
            worst = worst.max(gap);
            if gap > tol && first.is_none() {
                first = Some(t);
            }
        }
    }
    Ok((worst, first))
}

fn report(original: Trajectory, comparison: Trajectory, upper_is_comparison: bool, tol: f64) -> Result<SandwichReport> {
    let (max_violation, first_violation) = if upper_is_comparison {
        order_gap(&original, &comparison, tol)?
    } else {
        order_gap(&comparison, &original, tol)?
    };
    Ok(SandwichReport {
        holds: first_violation.is_none(),
        max_violation,
        first_violation,
        horizon: original.last_time(),
        mesh_points: original.forward_times().len(),
        original,
        comparison,
    })
}

/// `x(t, phi_v) <= y(t, psi_v) + tol` for the sub-equilibrium `v`.
pub fn verify_sandwich_upper(sys: &SystemDef, v: &[f64], cfg: &SandwichConfig) -> Result<SandwichReport> {
    let sub = check_sub_equilibrium(sys, v)?;
    if !sub.holds {
        return Err(Error::Precondition(format!(
            "{v:?} is not a sub-equilibrium: f(v)+g(v) = {:?}",
            sub.residual
        )));
    }
    let cmp = make_comparison(sys)?;
    let phi = HistorySegment::constant(v.to_vec(), sys.tau_max());
    let (x, y) = run_pair(&cmp, &phi, &cfg.integrator)?;
    report(x, y, true, cfg.tol)
}

/// `y(t, psi_w) <= x(t, phi_w) + tol` for the super-equilibrium `w`.
pub fn verify_sandwich_lower(sys: &SystemDef, w: &[f64], cfg: &SandwichConfig) -> Result<SandwichReport> {
    let sup = check_super_equilibrium(sys, w)?;
    if !sup.holds {
        return Err(Error::Precondition(format!(
            "{w:?} is not a super-equilibrium: f(w)+g(w) = {:?}",
            sup.residual
        )));
    }
    let cmp = make_comparison(sys)?;
    let phi = HistorySegment::constant(w.to_vec(), sys.tau_max());
    let (x, y) = run_pair(&cmp, &phi, &cfg.integrator)?;
    report(x, y, false, cfg.tol)
}

#[derive(Debug, Clone)]
pub struct BetweenReport {
    pub holds: bool,
    pub max_violation: f64,
    pub trajectory: Trajectory,
    pub lower: Trajectory,
    pub upper: Trajectory,
}

/// `y(t, psi_w) <= x(t, phi) <= y(t, psi_v)` for a history
/// `w <= phi <= v`; `phi` is checked at `samples` points of
/// `[-tau_max, 0]`.
pub fn verify_sandwich_between(
    sys: &SystemDef,
    phi: &HistorySegment,
    w: &[f64],
    v: &[f64],
    cfg: &SandwichConfig,
) -> Result<BetweenReport> {
    if !check_super_equilibrium(sys, w)?.holds || !check_sub_equilibrium(sys, v)?.holds {
        return Err(Error::Precondition("(w, v) is not a super/sub-equilibrium pair".into()));
    }
    let tau = sys.tau_max();
    const SAMPLES: usize = 64;
    for k in 0..=SAMPLES {
        let t = -tau * k as f64 / SAMPLES as f64;
        let p = phi.eval(t)?;
        if !order_leq(w, &p, 0.0)? || !order_leq(&p, v, 0.0)? {
            return Err(Error::Precondition(format!("history leaves [w, v] at t = {t}: {p:?}")));
        }
    }
    let cmp = make_comparison(sys)?;
    let psi_w = HistorySegment::constant(w.to_vec(), tau);
    let psi_v = HistorySegment::constant(v.to_vec(), tau);
    let cfg_i = &cfg.integrator;
    let (x, (lower, upper)) = rayon::join(
        || integrate(sys, phi, cfg_i),
        || {
            rayon::join(
                || integrate(&cmp.derived, &psi_w, cfg_i),
                || integrate(&cmp.derived, &psi_v, cfg_i),
            )
        },
    );
    let (x, lower, upper) = (x?, lower?, upper?);
    let (below, _) = order_gap(&lower, &x, cfg.tol)?;
    let (above, _) = order_gap(&x, &upper, cfg.tol)?;
    let max_violation = below.max(above);
    Ok(BetweenReport {
        holds: max_violation <= cfg.tol,
        max_violation,
        trajectory: x,
        lower,
        upper,
    })
}

/// Consecutive forward mesh values ordered in `direction` within `tol`.
pub fn verify_trajectory_monotone(traj: &Trajectory, direction: Direction, tol: f64) -> bool {
    is_monotone(traj, direction, tol)
}
