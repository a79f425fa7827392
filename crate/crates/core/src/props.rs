//! Sampled verifiers for the structural hypotheses: cooperative fields,
//! order-preserving maps, (sub-)homogeneity and the positivity condition.
//!
//! All checks are falsification searches over a seeded sample of the region.
//! A `Pass` verdict means no violation was found among `samples_used`
//! samples; a `Fail` always carries a witness that reproduces the violation
//! when re-evaluated. Samples are drawn sequentially from the seed and then
//! evaluated in parallel; the reported witness is the one with the smallest
//! sample index, so reports do not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{OrderInterval, SystemDef, VectorField};

pub const DEFAULT_LAMBDAS: [f64; 4] = [1.0, 1.5, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCheckConfig {
    pub region: OrderInterval,
    pub n_samples: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl SampledCheckConfig {
    pub fn new(region: OrderInterval) -> Self {
        SampledCheckConfig {
            region,
            n_samples: 2000,
            fd_step: 1e-6,
            tol: 1e-7,
            seed: 0,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Config("fd_step must be > 0".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tol must be >= 0".into()));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Where and how a sampled check was violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Off-diagonal Jacobian entry `(row, col)` below `-tol`.
    Jacobian {
        sample: usize,
        point: Vec<f64>,
        row: usize,
        col: usize,
        value: f64,
    },
    /// `field(lower)[component] > field(upper)[component] + tol` with
    /// `lower <= upper`.
    OrderedPair {
        sample: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        component: usize,
        excess: f64,
    },
    /// Scaling inequality violated at `point` for factor `lambda`.
    Scaling {
        sample: usize,
        point: Vec<f64>,
        lambda: f64,
        component: usize,
        excess: f64,
        /// Equality (homogeneous) rather than inequality was required.
        exact: bool,
    },
}

impl Witness {
    pub fn sample(&self) -> usize {
        match self {
            Witness::Jacobian { sample, .. }
            | Witness::OrderedPair { sample, .. }
            | Witness::Scaling { sample, .. } => *sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub samples_used: usize,
    pub tolerance: f64,
    pub region: OrderInterval,
    pub notes: Vec<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn from_search(
        property: &str,
        cfg: &SampledCheckConfig,
        region: OrderInterval,
        found: Option<Witness>,
    ) -> Self {
        PropertyReport {
            property: property.to_string(),
            verdict: if found.is_some() { Verdict::Fail } else { Verdict::Pass },
            witness: found,
            samples_used: cfg.n_samples,
            tolerance: cfg.tol,
            region,
            notes: Vec::new(),
        }
    }
}

/// Every off-diagonal entry `>= -tol`. Non-square input is not Metzler.
pub fn is_metzler(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= -tol))
}

/// Entrywise `>= -tol`.
pub fn is_nonnegative(m: &DMatrix<f64>, tol: f64) -> bool {
    m.iter().all(|v| *v >= -tol)
}

fn eval_checked(field: &dyn VectorField, x: &[f64]) -> Result<Vec<f64>> {
    let y = field.eval_vec(x);
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            component: i,
            t: 0.0,
            args: x.to_vec(),
        });
    }
    Ok(y)
}

/// Central finite-difference Jacobian with step `rel_step * max(1, |x_j|)`.
pub fn fd_jacobian(field: &dyn VectorField, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let m = field.dim();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = eval_checked(field, &xp)?;
        xp[j] = x[j] - h;
        let fm = eval_checked(field, &xp)?;
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn uniform_point(rng: &mut ChaCha8Rng, region: &OrderInterval) -> Vec<f64> {
    region
        .lo()
        .iter()
        .zip(region.hi())
        .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..=*b) })
        .collect()
}

/// `x` uniform in the region, `y = min(x + d, hi)` with `d_j` exponential of
/// mean a quarter of the region width.
fn ordered_pair(rng: &mut ChaCha8Rng, region: &OrderInterval) -> (Vec<f64>, Vec<f64>) {
    let x = uniform_point(rng, region);
    let y = x
        .iter()
        .zip(region.lo().iter().zip(region.hi()))
        .map(|(v, (a, b))| {
            let e: f64 = Exp1.sample(rng);
            (v + 0.25 * (b - a) * e).min(*b)
        })
        .collect();
    (x, y)
}

/// Run `check` on every sample in parallel; return the failure with the
/// smallest index.
fn first_violation<S, F>(samples: Vec<S>, check: F) -> Result<Option<Witness>>
where
    S: Send + Sync,
    F: Fn(usize, &S) -> Result<Option<Witness>> + Send + Sync,
{
    let hit = samples
        .par_iter()
        .enumerate()
        .map(|(k, s)| check(k, s))
        .find_first(|r| !matches!(r, Ok(None)));
    match hit {
        None => Ok(None),
        Some(r) => r,
    }
}

/// Jacobian of `field` Metzler at every sample.
pub fn check_cooperative(field: &dyn VectorField, cfg: &SampledCheckConfig) -> Result<PropertyReport> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let samples: Vec<Vec<f64>> = (0..cfg.n_samples)
        .map(|_| uniform_point(&mut rng, &cfg.region))
        .collect();
    let found = first_violation(samples, |k, x| jacobian_violation(field, x, cfg.fd_step, cfg.tol, k))?;
    Ok(PropertyReport::from_search("cooperative", cfg, cfg.region.clone(), found))
}

fn jacobian_violation(
    field: &dyn VectorField,
    x: &[f64],
    fd_step: f64,
    tol: f64,
    sample: usize,
) -> Result<Option<Witness>> {
    let jac = fd_jacobian(field, x, fd_step)?;
    let n = jac.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && jac[(i, j)] < -tol {
                return Ok(Some(Witness::Jacobian {
                    sample,
                    point: x.to_vec(),
                    row: i,
                    col: j,
                    value: jac[(i, j)],
                }));
            }
        }
    }
    Ok(None)
}

/// `x <= y` implies `field(x) <= field(y) + tol` on sampled pairs.
pub fn check_order_preserving(field: &dyn VectorField, cfg: &SampledCheckConfig) -> Result<PropertyReport> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let samples: Vec<_> = (0..cfg.n_samples)
        .map(|_| ordered_pair(&mut rng, &cfg.region))
        .collect();
    let found = first_violation(samples, |k, (x, y)| pair_violation(field, x, y, None, cfg.tol, k))?;
    Ok(PropertyReport::from_search("order_preserving", cfg, cfg.region.clone(), found))
}

fn pair_violation(
    field: &dyn VectorField,
    x: &[f64],
    y: &[f64],
    only: Option<usize>,
    tol: f64,
    sample: usize,
) -> Result<Option<Witness>> {
    let fx = eval_checked(field, x)?;
    let fy = eval_checked(field, y)?;
    let components: Vec<usize> = match only {
        Some(i) => vec![i],
        None => (0..fx.len()).collect(),
    };
    for i in components {
        if fx[i] > fy[i] + tol {
            return Ok(Some(Witness::OrderedPair {
                sample,
                lower: x.to_vec(),
                upper: y.to_vec(),
                component: i,
                excess: fx[i] - fy[i],
            }));
        }
    }
    Ok(None)
}

/// Quasimonotonicity: `x <= y` with `x_i = y_i` implies
/// `f_i(x) <= f_i(y) + tol`. Holds for every cooperative field.
pub fn check_quasimonotone(field: &dyn VectorField, cfg: &SampledCheckConfig) -> Result<PropertyReport> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let n = cfg.region.dim();
    let samples: Vec<_> = (0..cfg.n_samples)
        .map(|_| {
            let (x, mut y) = ordered_pair(&mut rng, &cfg.region);
            let i = rng.random_range(0..n);
            y[i] = x[i];
            (x, y, i)
        })
        .collect();
    let found = first_violation(samples, |k, (x, y, i)| pair_violation(field, x, y, Some(*i), cfg.tol, k))?;
    Ok(PropertyReport::from_search("quasimonotone", cfg, cfg.region.clone(), found))
}

fn scaling_region(cfg: &SampledCheckConfig, notes: &mut Vec<String>) -> Result<OrderInterval> {
    if cfg.region.extends_below_zero() {
        notes.push(format!(
            "region {} extends below 0; only its non-negative part was sampled",
            cfg.region
        ));
    }
    cfg.region
        .positive_part()
        .ok_or_else(|| Error::Precondition(format!("region {} misses the non-negative orthant", cfg.region)))
}

fn scaling_violation(
    field: &dyn VectorField,
    x: &[f64],
    lambda: f64,
    alpha: f64,
    exact: bool,
    tol: f64,
    sample: usize,
) -> Result<Option<Witness>> {
    let fx = eval_checked(field, x)?;
    let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
    let fl = eval_checked(field, &scaled)?;
    let factor = lambda.powf(alpha);
    for i in 0..fx.len() {
        let excess = fl[i] - factor * fx[i];
        let bad = if exact { excess.abs() > tol } else { excess > tol };
        if bad {
            return Ok(Some(Witness::Scaling {
                sample,
                point: x.to_vec(),
                lambda,
                component: i,
                excess,
                exact,
            }));
        }
    }
    Ok(None)
}

/// `f(lambda x) <= lambda^alpha f(x) + tol` for sampled `x` in the
/// non-negative part of the region and every `lambda` in `lambdas`.
pub fn check_subhomogeneous(
    field: &dyn VectorField,
    alpha: f64,
    cfg: &SampledCheckConfig,
    lambdas: &[f64],
) -> Result<PropertyReport> {
    cfg.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be > 0, got {alpha}")));
    }
    if lambdas.iter().any(|l| !(*l >= 1.0)) {
        return Err(Error::Config("scaling factors must be >= 1".into()));
    }
    let mut notes = Vec::new();
    let region = scaling_region(cfg, &mut notes)?;
    let mut rng = cfg.rng();
    let samples: Vec<Vec<f64>> = (0..cfg.n_samples)
        .map(|_| uniform_point(&mut rng, &region))
        .collect();
    let found = first_violation(samples, |k, x| {
        for &lambda in lambdas {
            if let Some(w) = scaling_violation(field, x, lambda, alpha, false, cfg.tol, k)? {
                return Ok(Some(w));
            }
        }
        Ok(None)
    })?;
    let mut report = PropertyReport::from_search("sub_homogeneous", cfg, region, found);
    report.notes = notes;
    Ok(report)
}

/// `|f(lambda x) - lambda^alpha f(x)| <= tol` with three `lambda` drawn in
/// `(0, 5]` per sample.
pub fn check_homogeneous(field: &dyn VectorField, alpha: f64, cfg: &SampledCheckConfig) -> Result<PropertyReport> {
    cfg.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be > 0, got {alpha}")));
    }
    let mut notes = Vec::new();
    let region = scaling_region(cfg, &mut notes)?;
    let mut rng = cfg.rng();
    let samples: Vec<(Vec<f64>, [f64; 3])> = (0..cfg.n_samples)
        .map(|_| {
            let x = uniform_point(&mut rng, &region);
            let mut lambdas = [0.0; 3];
            for l in &mut lambdas {
                // (0, 5]
                *l = 5.0 * (1.0 - rng.random::<f64>());
            }
            (x, lambdas)
        })
        .collect();
    let found = first_violation(samples, |k, (x, lambdas)| {
        for &lambda in lambdas {
            if let Some(w) = scaling_violation(field, x, lambda, alpha, true, cfg.tol, k)? {
                return Ok(Some(w));
            }
        }
        Ok(None)
    })?;
    let mut report = PropertyReport::from_search("homogeneous", cfg, region, found);
    report.notes = notes;
    Ok(report)
}

/// Re-evaluate a stored witness; true iff the violation reproduces.
pub fn witness_reproduces(
    field: &dyn VectorField,
    witness: &Witness,
    cfg: &SampledCheckConfig,
    alpha: f64,
) -> Result<bool> {
    Ok(match witness {
        Witness::Jacobian { point, row, col, .. } => {
            let jac = fd_jacobian(field, point, cfg.fd_step)?;
            jac[(*row, *col)] < -cfg.tol
        }
        Witness::OrderedPair { lower, upper, component, .. } => {
            let fx = eval_checked(field, lower)?;
            let fy = eval_checked(field, upper)?;
            fx[*component] > fy[*component] + cfg.tol
        }
        Witness::Scaling { point, lambda, component, exact, .. } => {
            let fx = eval_checked(field, point)?;
            let scaled: Vec<f64> = point.iter().map(|v| lambda * v).collect();
            let fl = eval_checked(field, &scaled)?;
            let excess = fl[*component] - lambda.powf(alpha) * fx[*component];
            if *exact {
                excess.abs() > cfg.tol
            } else {
                excess > cfg.tol
            }
        }
    })
}

/// Outcome of the positivity condition `f(0) + g(0) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityCheck {
    pub holds: bool,
    pub value: Vec<f64>,
}

/// `f(0) + g(0) >= 0`, exact.
pub fn check_positivity_condition(sys: &SystemDef) -> Result<PositivityCheck> {
    let zero = vec![0.0; sys.dim()];
    if !sys.domain().contains(&zero) {
        return Err(Error::Precondition("the origin is outside the domain box".into()));
    }
    let value = sys.residual(&zero)?;
    Ok(PositivityCheck {
        holds: value.iter().all(|v| *v >= 0.0),
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayMatrix, FnField, LinearField};

    fn cube(n: usize, lo: f64, hi: f64) -> SampledCheckConfig {
        SampledCheckConfig::new(OrderInterval::cube(n, lo, hi).unwrap())
    }

    fn example1_f() -> FnField<impl Fn(&[f64], &mut [f64]) + Send + Sync> {
        FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = -x[0] - 1.0;
            out[1] = x[0] - x[1] * (x[1] * x[1] - 9.0) + 2.0;
        })
    }

    #[test]
    fn metzler_examples() {
        assert!(is_metzler(&DMatrix::identity(3, 3), 0.0));
        let jac = fd_jacobian(&example1_f(), &[0.0, 0.0], 1e-6).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 9.0]);
        assert!((jac.clone() - expected).abs().max() < 1e-8);
        assert!(is_metzler(&jac, 1e-7));
        assert!(!is_metzler(&DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]), 0.0));
        assert!(!is_metzler(&DMatrix::zeros(2, 3), 0.0));
    }

    #[test]
    fn cooperative_examples() {
        let region = OrderInterval::new(vec![-4.0, -6.0], vec![2.0, 6.0]).unwrap();
        let r = check_cooperative(&example1_f(), &SampledCheckConfig::new(region)).unwrap();
        assert!(r.passed(), "{r:?}");

        let f2 = FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = -x[0] * x[0] + x[1];
            out[1] = -x[1];
        });
        assert!(check_cooperative(&f2, &cube(2, 0.0, 2.0)).unwrap().passed());

        let bad = FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = -x[1];
            out[1] = 0.0;
        });
        let cfg = cube(2, 0.0, 1.0);
        let r = check_cooperative(&bad, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        assert!(matches!(w, Witness::Jacobian { sample: 0, row: 0, col: 1, .. }));
        assert!(witness_reproduces(&bad, &w, &cfg, 1.0).unwrap());
    }

    #[test]
    fn order_preserving_examples() {
        let swap = FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = x[0];
        });
        assert!(check_order_preserving(&swap, &cube(2, 0.0, 3.0)).unwrap().passed());
        let id = crate::model::identity_field(3);
        assert!(check_order_preserving(id.as_ref(), &cube(3, -5.0, 5.0)).unwrap().passed());

        let neg = FnField::new(1, |x: &[f64], out: &mut [f64]| out[0] = -x[0]);
        let cfg = cube(1, 0.0, 1.0);
        let r = check_order_preserving(&neg, &cfg).unwrap();
        assert!(!r.passed());
        assert!(witness_reproduces(&neg, r.witness.as_ref().unwrap(), &cfg, 1.0).unwrap());
    }

    #[test]
    fn affine_is_subhomogeneous_not_homogeneous() {
        let affine = FnField::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0] + 1.0);
        let cfg = cube(1, 0.0, 4.0);
        assert!(check_subhomogeneous(&affine, 1.0, &cfg, &DEFAULT_LAMBDAS).unwrap().passed());
        let r = check_homogeneous(&affine, 1.0, &cfg).unwrap();
        assert!(!r.passed());
        assert!(witness_reproduces(&affine, r.witness.as_ref().unwrap(), &cfg, 1.0).unwrap());
    }

    #[test]
    fn linear_is_homogeneous() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.5, -3.0]);
        let lin = LinearField::new(a);
        let cfg = cube(2, 0.0, 10.0);
        assert!(check_subhomogeneous(&lin, 1.0, &cfg, &DEFAULT_LAMBDAS).unwrap().passed());
        assert!(check_homogeneous(&lin, 1.0, &cfg).unwrap().passed());
    }

    #[test]
    fn negative_region_is_flagged() {
        let affine = FnField::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0] + 1.0);
        let r = check_subhomogeneous(&affine, 1.0, &cube(1, -2.0, 4.0), &DEFAULT_LAMBDAS).unwrap();
        assert_eq!(r.notes.len(), 1);
        assert_eq!(r.region.lo(), &[0.0]);
        assert!(check_subhomogeneous(&affine, 1.0, &cube(1, -2.0, -1.0), &DEFAULT_LAMBDAS).is_err());
    }

    #[test]
    fn positivity_condition_examples() {
        let f = FnField::shared(2, |x: &[f64], out: &mut [f64]| {
            out[0] = -x[0] - 1.0;
            out[1] = x[0] - x[1] * (x[1] * x[1] - 9.0) + 2.0;
        });
        let g = FnField::shared(2, |x: &[f64], out: &mut [f64]| {
            out[0] = 0.0;
            out[1] = x[0];
        });
        let sys = SystemDef::new(f, g, DelayMatrix::zeros(2)).unwrap();
        let p = check_positivity_condition(&sys).unwrap();
        assert!(!p.holds);
        assert_eq!(p.value, vec![-1.0, 2.0]);
    }

    #[test]
    fn evaluation_failure_propagates() {
        let pole = FnField::new(1, |x: &[f64], out: &mut [f64]| out[0] = 1.0 / (x[0] - x[0]));
        assert!(matches!(
            check_order_preserving(&pole, &cube(1, 0.0, 1.0)),
            Err(Error::Evaluation { .. })
        ));
    }

    #[test]
    fn reports_are_deterministic() {
        let bad = FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = -(x[1] - 0.7).max(0.0);
            out[1] = 0.0;
        });
        let cfg = cube(2, 0.0, 1.0).with_seed(11);
        let a = check_order_preserving(&bad, &cfg).unwrap();
        let b = check_order_preserving(&bad, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.passed());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn linear_cooperative_iff_metzler(entries in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let a = DMatrix::from_row_slice(3, 3, &entries);
            let lin = LinearField::new(a.clone());
            let cfg = cube(3, -1.0, 1.0).with_samples(20);
            let jac = fd_jacobian(&lin, &[0.3, -0.2, 0.9], 1e-6).unwrap();
            proptest::prop_assert!((jac - a.clone()).abs().max() <= 1e-9);
            let r = check_cooperative(&lin, &cfg).unwrap();
            proptest::prop_assert_eq!(r.passed(), is_metzler(&a, 1e-7));
        }

        #[test]
        fn lambda_one_never_fails(seed in 0u64..1000) {
            let weird = FnField::new(2, |x: &[f64], out: &mut [f64]| {
                out[0] = (x[0] * 3.0).sin() - x[1].exp();
                out[1] = x[0] * x[1] - 7.0;
            });
            let cfg = cube(2, 0.0, 3.0).with_samples(50).with_seed(seed);
            proptest::prop_assert!(check_subhomogeneous(&weird, 2.0, &cfg, &[1.0]).unwrap().passed());
        }

        #[test]
        fn cooperative_fields_are_quasimonotone(seed in 0u64..1000) {
            let f = FnField::new(2, |x: &[f64], out: &mut [f64]| {
                out[0] = -2.0 * x[0] + x[1] / (x[1] + 2.0);
                out[1] = -2.0 * x[1] + x[0] / (x[0] + 2.0);
            });
            let cfg = cube(2, 0.0, 3.0).with_samples(100).with_seed(seed);
            proptest::prop_assert!(check_cooperative(&f, &cfg).unwrap().passed());
            proptest::prop_assert!(check_quasimonotone(&f, &cfg).unwrap().passed());
        }
    }
}
