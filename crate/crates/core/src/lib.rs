//! Spectral analysis of the discrete Schrödinger operators of two and three
//! identical bosons on `Z^d` (`d = 1, 2`) with on-site attraction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsolver;
pub mod energy;
pub mod error;
pub mod esspec;
pub mod grid;
pub mod numerics;
pub mod oracle;
pub mod realspace;
pub mod twobody;
pub mod validation;

pub use error::{Error, Result};
