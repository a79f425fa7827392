//! Constant equilibria `f(x*) + g(x*) = 0` by multi-start damped Newton.
//!
//! Uniqueness is always relative to the searched grid.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{max_dist, max_norm, OrderInterval, SystemDef};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEDUPE_RADIUS: f64 = 1e-4;
const BOX_SLACK: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 40;
const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    /// Sorted lexicographically.
    pub points: Vec<Vec<f64>>,
    /// `max_i |f_i(x*) + g_i(x*)|` for each point.
    pub residuals: Vec<f64>,
    pub search_box: OrderInterval,
    pub grid_per_dim: usize,
    pub dedupe_radius: f64,
    pub tol: f64,
    /// Starts skipped for a singular Jacobian or lying outside the domain.
    pub skipped_starts: usize,
    /// Starts that ran but did not converge.
    pub failed_starts: usize,
}

impl EquilibriumSet {
    pub fn in_box<'a>(&'a self, region: &'a OrderInterval) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.points
            .iter()
            .map(Vec::as_slice)
            .filter(move |p| region.contains_with_slack(p, BOX_SLACK))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True iff `other` lies within the search box.
    pub fn covers(&self, other: &OrderInterval) -> bool {
        self.search_box.contains(other.lo()) && self.search_box.contains(other.hi())
    }
}

/// True iff exactly one stored point lies in `region`.
pub fn is_unique_in(eqset: &EquilibriumSet, region: &OrderInterval) -> bool {
    eqset.in_box(region).count() == 1
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Every point of the tensor grid with `per_dim` points per coordinate.
pub(crate) fn grid_points(region: &OrderInterval, per_dim: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = region
        .lo()
        .iter()
        .zip(region.hi())
        .map(|(a, b)| linspace(*a, *b, per_dim))
        .collect();
    let n = axes.len();
    let total = per_dim.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; n];
            for d in (0..n).rev() {
                p[d] = axes[d][idx % per_dim];
                idx /= per_dim;
            }
            p
        })
        .collect()
}

enum Outcome {
    Converged(Vec<f64>, f64),
    Skipped,
    Failed,
}

fn residual_norm(sys: &SystemDef, x: &[f64]) -> Option<(Vec<f64>, f64)> {
    if !sys.domain().contains(x) {
        return None;
    }
    let r = sys.residual(x).ok()?;
    let norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Some((r, norm))
}

fn jacobian(sys: &SystemDef, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = FD_STEP * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let (fp, _) = residual_norm(sys, &xp)?;
        xp[j] = x[j] - h;
        let (fm, _) = residual_norm(sys, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

fn newton(sys: &SystemDef, start: &[f64], tol: f64) -> Outcome {
    let Some((mut r, mut norm)) = residual_norm(sys, start) else {
        return Outcome::Skipped;
    };
    let mut x = start.to_vec();
    // Iterates past `tol` while the residual keeps falling, so that starts
    // converging linearly onto a multiple root still agree to the dedupe radius.
    for iteration in 0..MAX_ITERATIONS {
        if norm == 0.0 {
            break;
        }
        let Some(jac) = jacobian(sys, &x) else {
            break;
        };
        let rhs = -DVector::from_column_slice(&r);
        let step = match jac.lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ if norm <= tol => break,
            _ => {
                return if iteration == 0 { Outcome::Skipped } else { Outcome::Failed };
            }
        };
        if norm <= tol && step.amax() <= 1e-15 * (1.0 + max_norm(&x)) {
            break;
        }
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + damping * d).collect();
            if let Some((rt, nt)) = residual_norm(sys, &trial) {
                if nt < norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm <= tol {
        Outcome::Converged(x, norm)
    } else {
        Outcome::Failed
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Damped Newton from every point of a `grid_per_dim^n` grid on `region`.
pub fn find_equilibria(
    sys: &SystemDef,
    region: &OrderInterval,
    grid_per_dim: usize,
    tol: f64,
) -> Result<EquilibriumSet> {
    if region.dim() != sys.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: sys.dim(),
            found: region.dim(),
        });
    }
    if grid_per_dim == 0 {
        return Err(crate::Error::Config("grid_per_dim must be >= 1".into()));
    }
    let starts = grid_points(region, grid_per_dim);
    let outcomes: Vec<Outcome> = starts.par_iter().map(|s| newton(sys, s, tol)).collect();

    let mut skipped = 0;
    let mut failed = 0;
    let mut found = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Converged(x, norm) => {
                if region.contains_with_slack(&x, BOX_SLACK) {
                    found.push((x, norm));
                }
            }
            Outcome::Skipped => skipped += 1,
            Outcome::Failed => failed += 1,
        }
    }
    found.sort_by(|a, b| lexicographic(&a.0, &b.0));

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut residuals = Vec::new();
    for (x, norm) in found {
        if points.iter().all(|p| max_dist(p, &x) > DEDUPE_RADIUS) {
            points.push(x);
            residuals.push(norm);
        }
    }
    Ok(EquilibriumSet {
        points,
        residuals,
        search_box: region.clone(),
        grid_per_dim,
        dedupe_radius: DEDUPE_RADIUS,
        tol,
        skipped_starts: skipped,
        failed_starts: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{zero_field, DelayMatrix, FnField};

    #[test]
    fn unique_root_of_decay() {
        let f = FnField::shared(3, |x, out| {
            for i in 0..3 {
                out[i] = -x[i];
            }
        });
        let sys = SystemDef::new(f, zero_field(3), DelayMatrix::zeros(3)).unwrap();
        let region = OrderInterval::cube(3, -1.0, 1.0).unwrap();
        let eq = find_equilibria(&sys, &region, 4, DEFAULT_TOL).unwrap();
        assert_eq!(eq.points.len(), 1);
        assert!(eq.points[0].iter().all(|v| v.abs() < 1e-12));
        assert!(is_unique_in(&eq, &region));
    }

    #[test]
    fn empty_set_is_not_unique() {
        let f = FnField::shared(1, |x, out| out[0] = 1.0 + x[0] * x[0]);
        let sys = SystemDef::new(f, zero_field(1), DelayMatrix::zeros(1)).unwrap();
        let region = OrderInterval::cube(1, -2.0, 2.0).unwrap();
        let eq = find_equilibria(&sys, &region, 9, DEFAULT_TOL).unwrap();
        assert!(eq.is_empty());
        assert!(!is_unique_in(&eq, &region));
    }

    #[test]
    fn grid_covers_corners() {
        let region = OrderInterval::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let g = grid_points(&region, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, -1.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(grid_points(&region, 1), vec![vec![0.5, 0.0]]);
    }

    #[test]
    fn singular_start_is_skipped() {
        // x^2 has a singular Jacobian at its root and at the start 0
        let f = FnField::shared(1, |x, out| out[0] = x[0] * x[0] - 1.0);
        let sys = SystemDef::new(f, zero_field(1), DelayMatrix::zeros(1)).unwrap();
        let region = OrderInterval::cube(1, -2.0, 2.0).unwrap();
        let eq = find_equilibria(&sys, &region, 5, DEFAULT_TOL).unwrap();
        assert_eq!(eq.skipped_starts, 1);
        assert_eq!(eq.points.len(), 2);
        assert!((eq.points[0][0] + 1.0).abs() < 1e-10);
        assert!((eq.points[1][0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn double_root_dedupes_to_one_point() {
        let f = FnField::shared(2, |x, out| {
            out[0] = -x[0];
            out[1] = -x[1].powi(4);
        });
        let sys = SystemDef::new(f, zero_field(2), DelayMatrix::zeros(2)).unwrap();
        let region = OrderInterval::cube(2, 0.0, 3.0).unwrap();
        let eq = find_equilibria(&sys, &region, 10, DEFAULT_TOL).unwrap();
        assert_eq!(eq.points.len(), 1, "{:?}", eq.points);
    }
}
