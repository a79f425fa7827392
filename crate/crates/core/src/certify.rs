//! Stability certificates built from super- and sub-equilibrium vectors.
//!
//! Every [`Certificate`] is assembled from residuals evaluated at
//! construction; stored vectors can be re-verified with [`reverify`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{find_equilibria, grid_points, is_unique_in, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::model::{max_dist, max_norm, Delay, DelayMatrix, LinearField, OrderInterval, SystemDef};
use crate::props::{
    check_cooperative, check_order_preserving, check_positivity_condition, check_subhomogeneous,
    is_metzler, is_nonnegative, PropertyReport, SampledCheckConfig, DEFAULT_LAMBDAS,
};

/// A strict inequality `r < 0` requires every component `<= -STRICT_MARGIN`.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Largest residual accepted for a claimed equilibrium.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_POWER_ITERATIONS: usize = 100_000;
const PERRON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    BoxStability,
    Gas,
    GasDisproof,
    Linear,
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateKind::BoxStability => "box_stability",
            CertificateKind::Gas => "gas",
            CertificateKind::GasDisproof => "gas_disproof",
            CertificateKind::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub w: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub residual_w: Option<Vec<f64>>,
    pub residual_v: Option<Vec<f64>>,
    pub equilibrium: Option<Vec<f64>>,
    pub verified: bool,
    /// Box the certificate speaks about: `[w, v]`, the uniqueness box, or the
    /// disproof search box.
    #[serde(rename = "box")]
    pub region: Option<OrderInterval>,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub conclusion: String,
    #[serde(skip)]
    pub notes: Vec<String>,
}

fn fmt_vec(v: &Option<Vec<f64>>) -> String {
    match v {
        None => "-".into(),
        Some(v) => {
            let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            format!("({})", parts.join(", "))
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate   {}", self.kind)?;
        writeln!(f, "verified      {}", self.verified)?;
        writeln!(f, "w             {}", fmt_vec(&self.w))?;
        writeln!(f, "f(w)+g(w)     {}", fmt_vec(&self.residual_w))?;
        writeln!(f, "v             {}", fmt_vec(&self.v))?;
        writeln!(f, "f(v)+g(v)     {}", fmt_vec(&self.residual_v))?;
        writeln!(f, "equilibrium   {}", fmt_vec(&self.equilibrium))?;
        match &self.region {
            Some(r) => writeln!(f, "box           {r}")?,
            None => writeln!(f, "box           -")?,
        }
        if let Some(seed) = self.seed {
            writeln!(f, "seed          {seed}")?;
        }
        writeln!(f, "conclusion    {}", self.conclusion)?;
        for note in &self.notes {
            writeln!(f, "note          {note}")?;
        }
        Ok(())
    }
}

impl Certificate {
    fn empty(kind: CertificateKind) -> Self {
        Certificate {
            kind,
            w: None,
            v: None,
            residual_w: None,
            residual_v: None,
            equilibrium: None,
            verified: false,
            region: None,
            seed: None,
            conclusion: String::new(),
            notes: Vec::new(),
        }
    }
}

/// Residual `f(x) + g(x)` together with the verdict of a sign test.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCheck {
    pub holds: bool,
    pub residual: Vec<f64>,
}

fn residual_in_domain(sys: &SystemDef, x: &[f64]) -> Result<Vec<f64>> {
    sys.check_dim(x)?;
    if !sys.domain().contains(x) {
        return Err(Error::Precondition(format!("{x:?} lies outside the domain box")));
    }
    sys.residual(x)
}

/// `f(w) + g(w) >= 0`, exact.
pub fn check_super_equilibrium(sys: &SystemDef, w: &[f64]) -> Result<ResidualCheck> {
    let residual = residual_in_domain(sys, w)?;
    Ok(ResidualCheck {
        holds: residual.iter().all(|r| *r >= 0.0),
        residual,
    })
}

/// `f(v) + g(v) <= 0`, exact.
pub fn check_sub_equilibrium(sys: &SystemDef, v: &[f64]) -> Result<ResidualCheck> {
    let residual = residual_in_domain(sys, v)?;
    Ok(ResidualCheck {
        holds: residual.iter().all(|r| *r <= 0.0),
        residual,
    })
}

/// `f(v) + g(v) < 0` with every component `<= -STRICT_MARGIN`.
pub fn check_strict_sub_equilibrium(sys: &SystemDef, v: &[f64]) -> Result<ResidualCheck> {
    let residual = residual_in_domain(sys, v)?;
    Ok(ResidualCheck {
        holds: strictly_negative(&residual),
        residual,
    })
}

fn strictly_negative(r: &[f64]) -> bool {
    r.iter().all(|x| *x <= -STRICT_MARGIN)
}

/// Box certificate for the unique equilibrium in `[w, v]`.
pub fn certify_box(
    sys: &SystemDef,
    w: &[f64],
    v: &[f64],
    eqset: &crate::equilibria::EquilibriumSet,
) -> Result<Certificate> {
    let region = OrderInterval::new(w.to_vec(), v.to_vec())?;
    if !eqset.covers(&region) {
        return Err(Error::Precondition(format!(
            "equilibrium search box {} does not cover {region}",
            eqset.search_box
        )));
    }
    let sup = check_super_equilibrium(sys, w)?;
    let sub = check_sub_equilibrium(sys, v)?;
    let inside: Vec<Vec<f64>> = eqset.in_box(&region).map(<[f64]>::to_vec).collect();

    let mut cert = Certificate::empty(CertificateKind::BoxStability);
    if !sup.holds {
        cert.notes.push("w is not a super-equilibrium: f(w)+g(w) has a negative component".into());
    }
    if !sub.holds {
        cert.notes.push("v is not a sub-equilibrium: f(v)+g(v) has a positive component".into());
    }
    match inside.len() {
        1 => {}
        0 => cert.notes.push(format!("no equilibrium found in {region}")),
        k => cert.notes.push(format!("{k} equilibria found in {region}")),
    }
    cert.verified = sup.holds && sub.holds && is_unique_in(eqset, &region);
    if inside.len() == 1 {
        cert.equilibrium = Some(inside[0].clone());
    }
    cert.conclusion = if cert.verified {
        format!(
            "the unique equilibrium {} in [w, v] is asymptotically stable for every history \
             with w <= phi <= v and all bounded delays",
            fmt_vec(&cert.equilibrium)
        )
    } else {
        "no stability conclusion".into()
    };
    cert.notes.push(format!(
        "uniqueness checked on a {}-per-dimension Newton grid over {}",
        eqset.grid_per_dim, eqset.search_box
    ));
    cert.w = Some(w.to_vec());
    cert.v = Some(v.to_vec());
    cert.residual_w = Some(sup.residual);
    cert.residual_v = Some(sub.residual);
    cert.region = Some(region);
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisproofConfig {
    pub grid_per_dim: usize,
    pub random_samples: usize,
    pub seed: u64,
}

impl Default for DisproofConfig {
    fn default() -> Self {
        DisproofConfig {
            grid_per_dim: 20,
            random_samples: 10_000,
            seed: 0,
        }
    }
}

fn check_equilibrium(sys: &SystemDef, x_star: &[f64]) -> Result<()> {
    let r = residual_in_domain(sys, x_star)?;
    let norm = max_norm(&r);
    if norm > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(Error::Precondition(format!(
            "{x_star:?} is not an equilibrium: residual norm {norm:e}"
        )));
    }
    Ok(())
}

fn uniform_point(rng: &mut ChaCha8Rng, region: &OrderInterval) -> Vec<f64> {
    region
        .lo()
        .iter()
        .zip(region.hi())
        .map(|(a, b)| a + (b - a) * rng.random::<f64>())
        .collect()
}

/// Search `search_box ∩ {w >= x*, w != x*}` for `f(w) + g(w) >= 0`.
///
/// Grid points are tried before random samples; the first hit in that order
/// is returned. `None` means none was found, not that none exists.
pub fn disprove_gas(
    sys: &SystemDef,
    x_star: &[f64],
    search_box: &OrderInterval,
    cfg: &DisproofConfig,
) -> Result<Option<Certificate>> {
    check_equilibrium(sys, x_star)?;
    if search_box.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: search_box.dim(),
        });
    }
    let lo: Vec<f64> = search_box.lo().iter().zip(x_star).map(|(a, b)| a.max(*b)).collect();
    if lo.iter().zip(search_box.hi()).any(|(a, b)| a > b) {
        return Ok(None);
    }
    let region = OrderInterval::new(lo, search_box.hi().to_vec())?;

    let mut candidates = if cfg.grid_per_dim > 0 {
        grid_points(&region, cfg.grid_per_dim)
    } else {
        Vec::new()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    candidates.extend((0..cfg.random_samples).map(|_| uniform_point(&mut rng, &region)));

    let hit = candidates.par_iter().find_first(|w| {
        *w != x_star
            && sys.domain().contains(w)
            && matches!(sys.residual(w), Ok(r) if r.iter().all(|x| *x >= 0.0))
    });
    let Some(w) = hit else {
        return Ok(None);
    };
    let sup = check_super_equilibrium(sys, w)?;
    let mut cert = Certificate::empty(CertificateKind::GasDisproof);
    cert.verified = sup.holds;
    cert.w = Some(w.clone());
    cert.residual_w = Some(sup.residual);
    cert.equilibrium = Some(x_star.to_vec());
    cert.region = Some(search_box.clone());
    cert.seed = Some(cfg.seed);
    cert.conclusion = format!(
        "{} is not globally asymptotically stable for any bounded delays: trajectories from \
         history w never fall below w",
        fmt_vec(&cert.equilibrium)
    );
    Ok(Some(cert))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasConfig {
    /// Sub-homogeneity degree.
    pub alpha: f64,
    /// Random candidate directions tried after the deterministic one.
    pub ray_samples: usize,
    pub gamma_max: f64,
    /// Non-negative box for hypothesis checks and uniqueness; derived from
    /// `x*` when absent.
    pub region: Option<OrderInterval>,
    pub check_samples: usize,
    pub equilibrium_grid: usize,
    pub seed: u64,
}

impl Default for GasConfig {
    fn default() -> Self {
        GasConfig {
            alpha: 1.0,
            ray_samples: 1000,
            gamma_max: 10.0,
            region: None,
            check_samples: 2000,
            equilibrium_grid: 15,
            seed: 0,
        }
    }
}

impl GasConfig {
    /// `[0, max(3, 2 max x* + 1)]^n` unless a region was given.
    pub fn region_for(&self, x_star: &[f64]) -> Result<OrderInterval> {
        match &self.region {
            Some(r) => Ok(r.clone()),
            None => {
                let top = x_star.iter().fold(0.0_f64, |m, v| m.max(*v));
                OrderInterval::cube(x_star.len(), 0.0, (2.0 * top + 1.0).max(3.0))
            }
        }
    }
}

/// Reports from the structural checks that gate a GAS certificate.
pub fn gas_hypotheses(sys: &SystemDef, region: &OrderInterval, cfg: &GasConfig) -> Result<Vec<PropertyReport>> {
    let check_cfg = SampledCheckConfig::new(region.clone())
        .with_samples(cfg.check_samples)
        .with_seed(cfg.seed);
    let mut reports = vec![
        check_cooperative(sys.f().as_ref(), &check_cfg)?,
        check_order_preserving(sys.g().as_ref(), &check_cfg)?,
    ];
    let mut sub_f = check_subhomogeneous(sys.f().as_ref(), cfg.alpha, &check_cfg, &DEFAULT_LAMBDAS)?;
    sub_f.property = "sub_homogeneous_f".into();
    let mut sub_g = check_subhomogeneous(sys.g().as_ref(), cfg.alpha, &check_cfg, &DEFAULT_LAMBDAS)?;
    sub_g.property = "sub_homogeneous_g".into();
    reports.push(sub_f);
    reports.push(sub_g);
    Ok(reports)
}

fn hypothesis(property: &str, detail: String) -> Error {
    Error::Hypothesis {
        property: property.into(),
        detail,
    }
}

/// GAS certificate for the unique non-negative equilibrium `x_star`.
///
/// Refuses with [`Error::Hypothesis`] when any structural check fails or
/// uniqueness on the checked box cannot be confirmed. `None` means no
/// candidate `v` passed the strict ray test.
pub fn certify_gas(sys: &SystemDef, x_star: &[f64], cfg: &GasConfig) -> Result<Option<Certificate>> {
    if !(cfg.gamma_max >= 2.0) {
        return Err(Error::Config("gamma_max must be >= 2".into()));
    }
    check_equilibrium(sys, x_star)?;
    if x_star.iter().any(|v| *v < 0.0) {
        return Err(Error::Precondition(format!("{x_star:?} is not non-negative")));
    }
    let region = cfg.region_for(x_star)?;
    if region.extends_below_zero() || !region.contains(x_star) {
        return Err(Error::Precondition(format!(
            "{region} must be a non-negative box containing the equilibrium"
        )));
    }

    let positivity = check_positivity_condition(sys)?;
    if !positivity.holds {
        return Err(hypothesis(
            "positivity",
            format!("f(0)+g(0) = {:?} has a negative component", positivity.value),
        ));
    }
    for report in gas_hypotheses(sys, &region, cfg)? {
        if !report.passed() {
            let detail = match &report.witness {
                Some(w) => format!("violated on {}: {w:?}", report.region),
                None => format!("failed on {}", report.region),
            };
            return Err(hypothesis(&report.property, detail));
        }
    }
    let eqset = find_equilibria(sys, &region, cfg.equilibrium_grid, DEFAULT_TOL)?;
    let unique = is_unique_in(&eqset, &region)
        && eqset.in_box(&region).all(|p| max_dist(p, x_star) <= eqset.dedupe_radius);
    if !unique {
        return Err(hypothesis(
            "unique_equilibrium",
            format!("equilibria found in {region}: {:?}", eqset.points),
        ));
    }

    let base: Vec<f64> = x_star.iter().map(|v| v.max(0.0)).collect();
    let spread = region
        .lo()
        .iter()
        .zip(region.hi())
        .fold(0.0_f64, |m, (a, b)| m.max(b - a));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut candidates = vec![base.iter().map(|b| b + 1.0).collect::<Vec<f64>>()];
    candidates.extend((0..cfg.ray_samples).map(|_| {
        base.iter()
            .map(|b| b + spread * (1.0 - rng.random::<f64>()))
            .collect()
    }));
    let gammas = [1.0, 2.0, cfg.gamma_max];
    let ray_ok = |v: &Vec<f64>| {
        gammas.iter().all(|g| {
            let scaled: Vec<f64> = v.iter().map(|x| g * x).collect();
            sys.domain().contains(&scaled)
                && matches!(sys.residual(&scaled), Ok(r) if strictly_negative(&r))
        })
    };
    let Some(v) = candidates.iter().find(|v| ray_ok(v)) else {
        return Ok(None);
    };
    let sub = check_strict_sub_equilibrium(sys, v)?;

    let mut cert = Certificate::empty(CertificateKind::Gas);
    cert.verified = sub.holds;
    cert.v = Some(v.clone());
    cert.residual_v = Some(sub.residual);
    cert.equilibrium = Some(x_star.to_vec());
    cert.region = Some(region.clone());
    cert.seed = Some(cfg.seed);
    cert.conclusion = format!(
        "{} is globally asymptotically stable for all non-negative histories and all bounded \
         heterogeneous time-varying delays",
        fmt_vec(&cert.equilibrium)
    );
    cert.notes.push(format!(
        "residual(gamma v) < 0 checked for gamma in {:?}",
        gammas
    ));
    cert.notes.push(format!(
        "uniqueness and structural checks hold on {region} only ({} grid, {} samples)",
        cfg.equilibrium_grid, cfg.check_samples
    ));
    Ok(Some(cert))
}

/// Re-check a certificate's stored vectors against its kind's invariants,
/// with exact comparisons and fresh residuals.
pub fn reverify(sys: &SystemDef, cert: &Certificate) -> Result<bool> {
    let missing = |what: &str| Error::Precondition(format!("{} certificate has no {what}", cert.kind));
    Ok(match cert.kind {
        CertificateKind::BoxStability => {
            let w = cert.w.as_ref().ok_or_else(|| missing("w"))?;
            let v = cert.v.as_ref().ok_or_else(|| missing("v"))?;
            crate::model::order_leq(w, v, 0.0)?
                && check_super_equilibrium(sys, w)?.holds
                && check_sub_equilibrium(sys, v)?.holds
        }
        CertificateKind::Gas | CertificateKind::Linear => {
            let v = cert.v.as_ref().ok_or_else(|| missing("v"))?;
            let x = cert.equilibrium.as_ref().ok_or_else(|| missing("equilibrium"))?;
            v.iter().all(|c| *c > 0.0)
                && crate::model::order_lt(x, v, 0.0)?
                && check_strict_sub_equilibrium(sys, v)?.holds
        }
        CertificateKind::GasDisproof => {
            let w = cert.w.as_ref().ok_or_else(|| missing("w"))?;
            let x = cert.equilibrium.as_ref().ok_or_else(|| missing("equilibrium"))?;
            crate::model::order_leq(x, w, 0.0)? && w != x && check_super_equilibrium(sys, w)?.holds
        }
    })
}

/// `x' = A x(t) + B x(t - tau(t))` with `A` Metzler and `B >= 0`.
#[derive(Debug, Clone)]
pub struct LinearSystemDef {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    delay: Delay,
    tau_max: f64,
}

impl LinearSystemDef {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, delay: Delay, tau_max: f64) -> Result<Self> {
        if !a.is_square() || a.shape() != b.shape() || a.nrows() == 0 {
            return Err(Error::Config(format!(
                "A and B must be square of equal size, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if !is_metzler(&a, 0.0) {
            return Err(Error::Config("A is not Metzler".into()));
        }
        if !is_nonnegative(&b, 0.0) {
            return Err(Error::Config("B has a negative entry".into()));
        }
        // Validates the delay bound on constant delays.
        DelayMatrix::uniform(a.nrows(), delay.clone(), tau_max)?;
        Ok(LinearSystemDef { a, b, delay, tau_max })
    }

    pub fn undelayed(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        Self::new(a, b, Delay::Constant(0.0), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn delay(&self) -> &Delay {
        &self.delay
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn sum(&self) -> DMatrix<f64> {
        &self.a + &self.b
    }

    pub fn to_system(&self) -> Result<SystemDef> {
        SystemDef::new(
            LinearField::shared(self.a.clone()),
            LinearField::shared(self.b.clone()),
            DelayMatrix::uniform(self.dim(), self.delay.clone(), self.tau_max)?,
        )
    }

    pub fn with_delay(mut self, delay: Delay, tau_max: f64) -> Result<Self> {
        DelayMatrix::uniform(self.dim(), delay.clone(), tau_max)?;
        self.delay = delay;
        self.tau_max = tau_max;
        Ok(self)
    }
}

/// Result of shifted power iteration on a Metzler matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronEstimate {
    /// Collatz-Wielandt bracket `[lower, upper]` on the spectral abscissa.
    pub lower: f64,
    pub upper: f64,
    /// Positive iterate, max-norm 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// First iterate with `S v < 0` proven by the upper bound, if any.
    pub stable_witness: Option<Vec<f64>>,
}

impl PerronEstimate {
    pub fn abscissa(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Power iteration on `S + cI`, `c = 1 + max |S_ii|`, from the all-ones
/// vector. The iterate stays strictly positive because `S + cI` is
/// non-negative with diagonal `>= 1`.
///
/// Stops once the bracket width is below `1e-12 (1 + c)` or the sign of the
/// abscissa relative to `-STRICT_MARGIN` is settled from below.
pub fn perron_estimate(s: &DMatrix<f64>, max_iterations: usize) -> Result<PerronEstimate> {
    if !is_metzler(s, 0.0) {
        return Err(Error::Config("matrix is not Metzler".into()));
    }
    let n = s.nrows();
    let c = 1.0 + s.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let mut shifted = s.clone();
    for i in 0..n {
        shifted[(i, i)] += c;
    }
    let width_tol = 1e-12 * (1.0 + c);
    let mut x = DVector::from_element(n, 1.0);
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut witness = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Computation("power iteration produced non-finite values".into()));
        }
        lower = lower.max(lo - c);
        upper = upper.min(hi - c);
        if witness.is_none() && hi - c < -STRICT_MARGIN {
            witness = Some(normalized(x.as_slice()));
        }
        let scale = y.amax();
        x = y / scale;
        if upper - lower <= width_tol {
            converged = true;
            break;
        }
        if lower >= -STRICT_MARGIN {
            // Not strictly stable; the bracket cannot move back below.
            converged = true;
            break;
        }
    }
    Ok(PerronEstimate {
        lower,
        upper,
        vector: normalized(x.as_slice()),
        iterations,
        converged,
        stable_witness: witness,
    })
}

fn normalized(x: &[f64]) -> Vec<f64> {
    let m = max_norm(x);
    x.iter()
        .map(|v| {
            let v = v / m;
            if v <= PERRON_FLOOR {
                v + PERRON_FLOOR
            } else {
                v
            }
        })
        .collect()
}

fn product(s: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (s * DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Feasible point of `(A+B) v < 0, v > 0` and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCertificate {
    /// Strictly positive, max-norm 1.
    pub v: Vec<f64>,
    /// `(A+B) v`, every component `<= -STRICT_MARGIN`.
    pub product: Vec<f64>,
    /// Estimated spectral abscissa of `A+B`.
    pub abscissa: f64,
    pub source: WitnessSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessSource {
    Perron,
    /// `v = -(A+B)^{-1} 1`, used when the Perron iterate fails verification
    /// (reducible or defective `A+B`).
    InverseSolve,
    /// Early iterate that the Collatz-Wielandt upper bound already proved.
    BoundWitness,
}

fn verified(s: &DMatrix<f64>, v: &[f64]) -> Option<Vec<f64>> {
    if !v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        return None;
    }
    let p = product(s, v);
    strictly_negative(&p).then_some(p)
}

/// Feasibility of `(A+B) v < 0, v > 0`, decided by the sign of the spectral
/// abscissa of `A+B`. Any returned `v` has been re-verified by direct
/// multiplication.
pub fn linear_certificate(lin: &LinearSystemDef) -> Result<Option<LinearCertificate>> {
    let s = lin.sum();
    let est = perron_estimate(&s, MAX_POWER_ITERATIONS)?;
    if est.lower >= -STRICT_MARGIN {
        return Ok(None);
    }
    let stable = est.upper < -STRICT_MARGIN;
    let abscissa = est.abscissa();

    if stable {
        if let Some(p) = verified(&s, &est.vector) {
            return Ok(Some(LinearCertificate {
                v: est.vector,
                product: p,
                abscissa,
                source: WitnessSource::Perron,
            }));
        }
    }
    // Undecided, or the Perron iterate is too close to the boundary.
    if let Some(v) = s
        .clone()
        .lu()
        .solve(&DVector::from_element(s.nrows(), -1.0))
        .map(|v| normalized(v.as_slice()))
    {
        if let Some(p) = verified(&s, &v) {
            return Ok(Some(LinearCertificate {
                v,
                product: p,
                abscissa,
                source: WitnessSource::InverseSolve,
            }));
        }
    }
    if let Some(v) = est.stable_witness {
        if let Some(p) = verified(&s, &v) {
            return Ok(Some(LinearCertificate {
                v,
                product: p,
                abscissa,
                source: WitnessSource::BoundWitness,
            }));
        }
    }
    if !est.converged {
        return Err(Error::Computation(format!(
            "power iteration did not settle the abscissa sign after {} steps: bracket [{:e}, {:e}]",
            est.iterations, est.lower, est.upper
        )));
    }
    if stable {
        return Err(Error::Computation(
            "abscissa is negative but no candidate passed verification".into(),
        ));
    }
    // Converged to within the bracket tolerance of -STRICT_MARGIN from above.
    Ok(None)
}

/// [`linear_certificate`] packaged as a [`Certificate`] with `x* = 0`.
pub fn linear_report(lin: &LinearSystemDef) -> Result<Certificate> {
    let mut cert = Certificate::empty(CertificateKind::Linear);
    cert.equilibrium = Some(vec![0.0; lin.dim()]);
    match linear_certificate(lin)? {
        Some(lc) => {
            cert.verified = true;
            cert.v = Some(lc.v);
            cert.residual_v = Some(lc.product);
            cert.conclusion = "(A+B) v < 0 with v > 0: the origin is globally asymptotically stable \
                               without delay and under every bounded time-varying delay"
                .into();
            cert.notes.push(format!("spectral abscissa of A+B ~ {:e}", lc.abscissa));
        }
        None => {
            cert.conclusion = "A+B is not Hurwitz: no v > 0 with (A+B) v < 0 exists".into();
        }
    }
    Ok(cert)
}
