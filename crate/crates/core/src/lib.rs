//! Sparse spike deconvolution on thin grids.
//!
//! The crate implements the machinery needed to study how the LASSO and the
//! Continuous Basis-Pursuit recover spike trains observed through a smooth
//! convolution kernel: exact solution paths, dual certificates in closed
//! form, extended-support predictions, and the compressed-sensing experiment
//! layer. It is `no_std` (with `alloc`); all IO lives in the companion CLI
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cone;
pub mod cs;
pub mod error;
pub mod kernel;
pub mod lasso;
pub mod linalg;
pub mod qp;
pub mod thingrid;

pub use error::{Error, Result};
pub use kernel::{GridSpec, ImageVector, KernelSpec, TorusKernel};
