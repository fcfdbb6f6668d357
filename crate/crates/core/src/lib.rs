//! Hyperbolic distance geometry in the Lorentz ('Loid) model: distance matrix
//! completion via a split-PSD relaxation, spectral embedding, and experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embedding;
pub mod error;
pub mod experiments;
pub mod gramian;
pub mod io;
pub mod lorentz;
pub mod par;
pub mod solver;

pub use error::{HdmError, Result};
