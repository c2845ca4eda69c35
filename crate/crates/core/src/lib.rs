//! Markov trace models of mobility.
//!
//! A model is a set of traces (finite point sequences) plus, for every
//! point, a distribution over the traces starting there. An agent walks a
//! trace one point per step and, at its end, picks the next trace from the
//! end point's distribution. This crate computes the exact stationary
//! behaviour of such models and builds two concrete families: the
//! Manhattan random way-point grid and the DownTown street model.

pub mod chain;
pub mod distributions;
pub mod downtown;
pub mod error;
pub mod io;
pub mod linalg;
pub mod manhattan;
pub mod modular;
pub mod scalar;
pub mod simulate;
pub mod trace;
pub mod verify;

pub use error::{MtmError, Result};
pub use scalar::{Exact, NumericMode, Scalar};
pub use trace::{ChainState, MTModel, Point, PointId, SelectionRule, Trace, TraceId, TraceSet};
