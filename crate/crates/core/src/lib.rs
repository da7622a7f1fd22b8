//! Periodic Schrödinger flow on the sphere, solved through its NLS invariant.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backlund;
pub mod config;
pub mod curve;
pub mod diagnostics;
pub mod error;
pub mod frame;
pub mod io;
pub mod lift;
pub mod nls;
pub mod pipeline;
pub mod spectral;
pub mod su2;
pub mod vfe;

pub use error::{Error, Result};
