//! Simulation and stability certification for nonlinear positive monotone
//! systems with bounded heterogeneous time-varying delays.
pub mod certify;
pub mod compare;
pub mod dde;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod props;
pub mod systems;

pub use error::{Error, ErrorClass, Result};
