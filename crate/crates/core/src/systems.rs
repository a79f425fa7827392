//! Built-in example systems and random positive linear systems.
//!
//! Delay entries an example leaves unspecified are `0`.

use nalgebra::{dmatrix, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::LinearSystemDef;
use crate::error::{Error, Result};
use crate::model::{identity_field, Delay, DelayMatrix, FnField, OrderInterval, SystemDef};

pub const IDS: [&str; 5] = ["example1", "example2", "example3", "example4", "linear_demo"];

/// Distance from the origin that the example3 trajectory from `(2, 1)` keeps
/// at `t = 100`: half the Euclidean distance of a reference run with
/// `h = 1e-3` (reference value 27.2387, with `x1` still growing).
pub const EXAMPLE3_DELTA: f64 = 13.6;

/// A box `[w, v]` whose unique equilibrium attracts every history inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxClaim {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub equilibrium: Vec<f64>,
}

/// Trajectory from a constant history that stays away from the equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonconvergence {
    pub history: Vec<f64>,
    pub t_end: f64,
    /// Lower bound on `|x(t_end) - x*|_2`.
    pub delta: f64,
}

/// Global stability claim for the non-negative equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub enum GasClaim {
    /// Not applicable: the system is not positive.
    None,
    /// GAS, with a strict sub-equilibrium `v > x*`.
    Certified { equilibrium: Vec<f64>, v: Vec<f64> },
    /// Not GAS, with a super-equilibrium `w >= x*` inside `search_box`.
    Disproved {
        equilibrium: Vec<f64>,
        w: Vec<f64>,
        search_box: OrderInterval,
    },
    /// Not GAS although no super-equilibrium exists in `search_box` and
    /// `sub_equilibrium` is strict.
    NotGas {
        equilibrium: Vec<f64>,
        sub_equilibrium: Vec<f64>,
        search_box: OrderInterval,
        nonconvergence: Nonconvergence,
    },
}

#[derive(Debug, Clone)]
pub struct Metadata {
    pub summary: &'static str,
    pub delays: &'static str,
    pub equilibria: Vec<Vec<f64>>,
    /// Box `find_equilibria` should search to recover `equilibria`.
    pub equilibrium_box: OrderInterval,
    /// Outcome of `f(0) + g(0) >= 0`.
    pub positive: bool,
    pub boxes: Vec<BoxClaim>,
    pub gas: GasClaim,
    /// Horizon for demonstration runs.
    pub t_end: f64,
    pub linear: Option<LinearSystemDef>,
}

#[derive(Debug, Clone)]
pub struct NamedSystem {
    pub id: &'static str,
    pub sys: SystemDef,
    pub meta: Metadata,
}

fn interval(lo: &[f64], hi: &[f64]) -> OrderInterval {
    OrderInterval::new(lo.to_vec(), hi.to_vec()).expect("static interval")
}

pub fn get(id: &str) -> Result<NamedSystem> {
    match id {
        "example1" => example1(),
        "example2" => example2(),
        "example3" => example3(),
        "example4" => example4(),
        "linear_demo" => linear_demo(),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

fn example1() -> Result<NamedSystem> {
    let f = FnField::shared(2, |x, out| {
        out[0] = -x[0] - 1.0;
        out[1] = x[0] - x[1] * (x[1] * x[1] - 9.0) + 2.0;
    });
    let g = FnField::shared(2, |x, out| {
        out[0] = 0.0;
        out[1] = x[0];
    });
    let delays = DelayMatrix::zeros(2).with_entry(1, 0, Delay::varying(|t| 4.0 + t.sin()), 5.0)?;
    Ok(NamedSystem {
        id: "example1",
        sys: SystemDef::new(f, g, delays)?,
        meta: Metadata {
            summary: "monotone on R^2 but not positive; three equilibria, two of them locally \
                      stable with attraction boxes",
            delays: "x1 enters component 2 with delay 4 + sin t; all other delays 0",
            equilibria: vec![vec![-1.0, -3.0], vec![-1.0, 0.0], vec![-1.0, 3.0]],
            equilibrium_box: interval(&[-4.0, -6.0], &[2.0, 6.0]),
            positive: false,
            boxes: vec![
                BoxClaim {
                    w: vec![-3.0, -5.0],
                    v: vec![1.0, -1.0],
                    equilibrium: vec![-1.0, -3.0],
                },
                BoxClaim {
                    w: vec![-3.0, 1.0],
                    v: vec![1.0, 5.0],
                    equilibrium: vec![-1.0, 3.0],
                },
            ],
            gas: GasClaim::None,
            t_end: 60.0,
            linear: None,
        },
    })
}

fn example2() -> Result<NamedSystem> {
    let f = FnField::shared(2, |x, out| {
        out[0] = -x[0] * x[0] + x[1];
        out[1] = -x[1];
    });
    let g = FnField::shared(2, |x, out| {
        out[0] = x[1];
        out[1] = x[0];
    });
    let delays = DelayMatrix::uniform(2, Delay::varying(|t| 2.0 + t.sin()), 3.0)?;
    Ok(NamedSystem {
        id: "example2",
        sys: SystemDef::new(f, g, delays)?,
        meta: Metadata {
            summary: "positive monotone system whose origin is not globally stable: (1, 1) is a \
                      super-equilibrium",
            delays: "every delay 2 + sin t",
            equilibria: vec![vec![0.0, 0.0], vec![2.0, 2.0]],
            equilibrium_box: interval(&[-1.0, -1.0], &[3.0, 3.0]),
            positive: true,
            boxes: Vec::new(),
            gas: GasClaim::Disproved {
                equilibrium: vec![0.0, 0.0],
                w: vec![1.0, 1.0],
                search_box: interval(&[0.0, 0.0], &[2.0, 2.0]),
            },
            t_end: 60.0,
            linear: None,
        },
    })
}

fn example3() -> Result<NamedSystem> {
    let f = FnField::shared(2, |x, out| {
        out[0] = -x[0] / (1.0 + x[0] * x[0] * x[0]);
        out[1] = -x[1].powi(4);
    });
    let g = FnField::shared(2, |x, out| {
        out[0] = x[1];
        out[1] = 0.0;
    });
    let delays = DelayMatrix::zeros(2).with_entry(0, 1, Delay::varying(|t| 5.0 - t.cos()), 6.0)?;
    // f1 has a pole at x1 = -1.
    let domain = interval(&[-0.5, -1e6], &[1e6, 1e6]);
    Ok(NamedSystem {
        id: "example3",
        sys: SystemDef::new(f, g, delays)?.with_domain(domain)?,
        meta: Metadata {
            summary: "positive monotone system meeting both necessary conditions for global \
                      stability, yet trajectories need not converge; f is not sub-homogeneous",
            delays: "x2 enters component 1 with delay 5 - cos t; all other delays 0",
            equilibria: vec![vec![0.0, 0.0]],
            equilibrium_box: interval(&[0.0, 0.0], &[3.0, 3.0]),
            positive: true,
            boxes: Vec::new(),
            gas: GasClaim::NotGas {
                equilibrium: vec![0.0, 0.0],
                sub_equilibrium: vec![1.0, 0.25],
                search_box: interval(&[0.0, 0.0], &[3.0, 3.0]),
                nonconvergence: Nonconvergence {
                    history: vec![2.0, 1.0],
                    t_end: 100.0,
                    delta: EXAMPLE3_DELTA,
                },
            },
            t_end: 100.0,
            linear: None,
        },
    })
}

fn example4() -> Result<NamedSystem> {
    let f = FnField::shared(2, |x, out| {
        out[0] = -2.0 * x[0] + x[1] / (x[1] + 2.0);
        out[1] = -2.0 * x[1] + x[0] / (x[0] + 2.0);
    });
    // Both components have a pole at -2.
    let domain = interval(&[-1.99, -1.99], &[1e6, 1e6]);
    Ok(NamedSystem {
        id: "example4",
        sys: SystemDef::new(f, identity_field(2), DelayMatrix::zeros(2))?.with_domain(domain)?,
        meta: Metadata {
            summary: "sub-homogeneous positive monotone system; the origin is its only \
                      non-negative equilibrium and is globally stable under any bounded delays",
            delays: "all delays 0 by default; any bounded delays preserve the conclusion",
            equilibria: vec![vec![-1.0, -1.0], vec![0.0, 0.0]],
            equilibrium_box: interval(&[-2.0, -2.0], &[2.0, 2.0]),
            positive: true,
            boxes: Vec::new(),
            gas: GasClaim::Certified {
                equilibrium: vec![0.0, 0.0],
                v: vec![1.0, 1.0],
            },
            t_end: 80.0,
            linear: None,
        },
    })
}

fn linear_demo() -> Result<NamedSystem> {
    let lin = LinearSystemDef::new(
        dmatrix![-2.0, 0.0; 0.0, -2.0],
        dmatrix![0.0, 1.0; 1.0, 0.0],
        Delay::varying(|t| 2.0 + t.sin()),
        3.0,
    )?;
    Ok(NamedSystem {
        id: "linear_demo",
        sys: lin.to_system()?,
        meta: Metadata {
            summary: "positive linear system with Metzler A and non-negative B; A + B is Hurwitz",
            delays: "every delay 2 + sin t",
            equilibria: vec![vec![0.0, 0.0]],
            equilibrium_box: interval(&[-1.0, -1.0], &[1.0, 1.0]),
            positive: true,
            boxes: Vec::new(),
            gas: GasClaim::Certified {
                equilibrium: vec![0.0, 0.0],
                v: vec![1.0, 1.0],
            },
            t_end: 60.0,
            linear: Some(lin),
        },
    })
}

/// Random `A` (Metzler) and `B >= 0` with delay `2 + sin t`.
///
/// Off-diagonals of `A` and all entries of `B` are uniform in `[0, 1/n)`.
/// The diagonal of `A` is set so that every row sum of `A + B` equals
/// `-m_i` (stable) or `+m_i` (unstable) with margins `m_i` uniform in
/// `[0.5, 1.5)`; the spectral abscissa then lies in `(-1.5, -0.5]` or
/// `[0.5, 1.5)`.
pub fn random_positive_linear(n: usize, seed: u64, stable: bool) -> Result<LinearSystemDef> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / n as f64;
    loop {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let bij = scale * rng.random::<f64>();
                b[(i, j)] = bij;
                row += bij;
                if i != j {
                    let aij = scale * rng.random::<f64>();
                    a[(i, j)] = aij;
                    row += aij;
                }
            }
            let margin = 0.5 + rng.random::<f64>();
            a[(i, i)] = if stable { -row - margin } else { -row + margin };
        }
        // Row sums of A + B bound the abscissa from both sides.
        let sums = (&a + &b) * nalgebra::DVector::from_element(n, 1.0);
        let settled = if stable {
            sums.iter().all(|s| *s < 0.0)
        } else {
            sums.iter().all(|s| *s > 0.0)
        };
        if settled {
            return LinearSystemDef::new(a, b, Delay::varying(|t| 2.0 + t.sin()), 3.0);
        }
    }
}
