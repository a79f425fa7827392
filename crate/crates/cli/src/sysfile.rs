//! TOML system-definition files.
//!
//! ```toml
//! dim = 2
//! f = ["-2*x1 + x2/(x2 + 2)", "-2*x2 + x1/(x1 + 2)"]
//! g = ["x1", "x2"]
//! delays = [["1 + 0.5*sin(t)", 0], [0, "2 - cos(t)"]]   # or: delay = "2 + sin(t)"
//! tau_max = 3
//! history = ["0.5", "0.5 + 0.1*sin(t)"]                 # optional
//!
//! [domain]                                              # optional
//! lo = [-1.99, -1.99]
//! hi = [1e6, 1e6]
//! ```
//!
//! A linear system replaces `f` and `g` with matrices `A` and `B`, which
//! also enables `certify --mode linear`. Entries of `f`, `g`, `delays`,
//! `delay` and `history` are expression strings or plain numbers.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use posidyn::certify::LinearSystemDef;
use posidyn::model::{Delay, DelayMatrix, HistorySegment, LinearField, OrderInterval, SystemDef, VectorField};
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::expr::{state_vars, Expr, ExprError, ExprErrorKind};

const DELAY_CHECK_HORIZON: f64 = 100.0;
const DELAY_CHECK_SAMPLES: usize = 2001;

#[derive(Debug, Error)]
pub enum SysFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("line {line}, column {column}: {key}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        key: String,
        message: String,
    },
    #[error("line {line}, column {column}: {key}: unknown identifier {name:?}")]
    UnknownIdentifier {
        line: usize,
        column: usize,
        key: String,
        name: String,
    },
    #[error("{key}: expected {expected} entries, found {found}")]
    Dimension {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] posidyn::Error),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

type SpannedList = Spanned<Vec<Spanned<Entry>>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    dim: usize,
    f: Option<SpannedList>,
    g: Option<SpannedList>,
    #[serde(rename = "A")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Option<Vec<Vec<f64>>>,
    delays: Option<Spanned<Vec<SpannedList>>>,
    delay: Option<Spanned<Entry>>,
    tau_max: Option<f64>,
    domain: Option<RawDomain>,
    history: Option<SpannedList>,
}

/// What a system file defines beyond the system itself.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub sys: SystemDef,
    pub history: Option<HistorySegment>,
    pub linear: Option<LinearSystemDef>,
}

/// Vector field given by one expression per component.
#[derive(Debug)]
pub struct ExprField {
    exprs: Vec<Expr>,
}

impl ExprField {
    pub fn new(exprs: Vec<Expr>) -> Self {
        ExprField { exprs }
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.exprs.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.exprs) {
            *o = e.eval(x);
        }
    }

    fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        self.exprs[i].eval(x)
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn expr(&self, key: &str, entry: &Spanned<Entry>, vars: &[&str]) -> Result<Expr, SysFileError> {
        let span: Range<usize> = entry.span();
        match entry.get_ref() {
            Entry::Number(v) => Ok(Expr::constant(*v)),
            Entry::Text(s) => Expr::parse(s, vars).map_err(|e| self.locate(key, span.start, s, e)),
        }
    }

    /// Maps an offset inside a quoted string value to a file position.
    fn locate(&self, key: &str, value_start: usize, source: &str, e: ExprError) -> SysFileError {
        let byte_in_expr: usize = source.chars().take(e.offset).map(char::len_utf8).sum();
        // Skip the opening quote.
        let (line, column) = line_col(self.text, value_start + 1 + byte_in_expr);
        let key = key.to_string();
        match e.kind {
            ExprErrorKind::Syntax(message) => SysFileError::Syntax { line, column, key, message },
            ExprErrorKind::UnknownIdentifier(name) => SysFileError::UnknownIdentifier { line, column, key, name },
        }
    }

    fn exprs(
        &self,
        key: &str,
        list: &SpannedList,
        n: usize,
        vars: &[&str],
    ) -> Result<Vec<Expr>, SysFileError> {
        let items = list.get_ref();
        if items.len() != n {
            return Err(SysFileError::Dimension {
                key: key.into(),
                expected: n,
                found: items.len(),
            });
        }
        items
            .iter()
            .enumerate()
            .map(|(i, e)| self.expr(&format!("{key}[{}]", i + 1), e, vars))
            .collect()
    }
}

fn delay_of(e: Expr) -> Delay {
    match e.as_constant() {
        Some(c) => Delay::Constant(c),
        None => Delay::varying(move |t| e.eval(&[t])),
    }
}

fn matrix(key: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, SysFileError> {
    if rows.len() != n {
        return Err(SysFileError::Dimension {
            key: key.into(),
            expected: n,
            found: rows.len(),
        });
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(SysFileError::Dimension {
                key: format!("{key}[{}]", i + 1),
                expected: n,
                found: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn default_tau_max(delays: &[Delay]) -> Result<f64, SysFileError> {
    let mut tau: f64 = 0.0;
    for d in delays {
        match d.as_constant() {
            Some(c) => tau = tau.max(c),
            None => {
                return Err(SysFileError::Invalid(
                    "tau_max is required when a delay depends on t".into(),
                ))
            }
        }
    }
    Ok(tau)
}

pub fn parse_system_str(text: &str) -> Result<LoadedSystem, SysFileError> {
    let raw: RawFile = toml::from_str(text)?;
    let n = raw.dim;
    if n == 0 {
        return Err(SysFileError::Invalid("dim must be >= 1".into()));
    }
    let ctx = Ctx { text };
    let names = state_vars(n);
    let vars: Vec<&str> = names.iter().map(String::as_str).collect();

    let delays: Vec<Delay> = match (&raw.delays, &raw.delay) {
        (Some(_), Some(_)) => return Err(SysFileError::Invalid("give either delays or delay, not both".into())),
        (Some(rows), None) => {
            let rows = rows.get_ref();
            if rows.len() != n {
                return Err(SysFileError::Dimension {
                    key: "delays".into(),
                    expected: n,
                    found: rows.len(),
                });
            }
            let mut out = Vec::with_capacity(n * n);
            for (i, row) in rows.iter().enumerate() {
                let key = format!("delays[{}]", i + 1);
                for e in ctx.exprs(&key, row, n, &["t"])? {
                    out.push(delay_of(e));
                }
            }
            out
        }
        (None, Some(d)) => {
            let e = ctx.expr("delay", d, &["t"])?;
            vec![delay_of(e); n * n]
        }
        (None, None) => vec![Delay::Constant(0.0); n * n],
    };
    let tau_max = match raw.tau_max {
        Some(t) => t,
        None => default_tau_max(&delays)?,
    };
    let delay_matrix = DelayMatrix::from_entries(n, delays.clone(), tau_max)?;
    // Integration rechecks every lookup; this catches bad files early.
    delay_matrix.check_sampled(DELAY_CHECK_HORIZON, DELAY_CHECK_SAMPLES)?;

    let (sys, linear) = match (&raw.f, &raw.g, &raw.a, &raw.b) {
        (Some(f), Some(g), None, None) => {
            let f = ctx.exprs("f", f, n, &vars)?;
            let g = ctx.exprs("g", g, n, &vars)?;
            let sys = SystemDef::new(Arc::new(ExprField::new(f)), Arc::new(ExprField::new(g)), delay_matrix)?;
            (sys, None)
        }
        (None, None, Some(a), Some(b)) => {
            let a = matrix("A", a, n)?;
            let b = matrix("B", b, n)?;
            let linear = match (&raw.delays, Delay::clone(&delays[0])) {
                // Linear systems share one delay across all entries.
                (None, d) => Some(LinearSystemDef::new(a.clone(), b.clone(), d, tau_max)?),
                (Some(_), _) => None,
            };
            let sys = SystemDef::new(LinearField::shared(a), LinearField::shared(b), delay_matrix)?;
            (sys, linear)
        }
        _ => {
            return Err(SysFileError::Invalid(
                "define either f and g, or A and B".into(),
            ))
        }
    };
    let sys = match raw.domain {
        Some(d) => {
            for (key, v) in [("domain.lo", &d.lo), ("domain.hi", &d.hi)] {
                if v.len() != n {
                    return Err(SysFileError::Dimension {
                        key: key.into(),
                        expected: n,
                        found: v.len(),
                    });
                }
            }
            sys.with_domain(OrderInterval::new(d.lo, d.hi)?)?
        }
        None => sys,
    };
    let history = match &raw.history {
        Some(h) => Some(history_from(ctx.exprs("history", h, n, &["t"])?, tau_max)),
        None => None,
    };
    Ok(LoadedSystem { sys, history, linear })
}

/// History whose component `i` is `exprs[i]` evaluated at `t`.
pub fn history_from(exprs: Vec<Expr>, tau_max: f64) -> HistorySegment {
    let constants: Option<Vec<f64>> = exprs.iter().map(Expr::as_constant).collect();
    match constants {
        Some(c) => HistorySegment::constant(c, tau_max),
        None => HistorySegment::from_fn(exprs.len(), tau_max, move |t, out| {
            for (o, e) in out.iter_mut().zip(&exprs) {
                *o = e.eval(&[t]);
            }
        }),
    }
}

pub fn parse_system_file(path: &Path) -> Result<LoadedSystem, SysFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| SysFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_system_str(&text)
}
