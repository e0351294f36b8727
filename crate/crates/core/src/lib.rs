//! Weighted-norm toolkit and pseudo-spectral solvers for incompressible flow
//! on a periodic cube.
//!
//! The crate is `no_std` with `alloc`. Everything that touches files, the
//! command line or configuration lives in the companion `wlry` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dss;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod field;
pub mod fields;
pub mod grid;
pub mod ledger;
pub mod mollifier;
pub mod quadrature;
pub mod region;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use field::{ScalarField, TensorField, VectorField};
pub use grid::GridSpec;
pub use weights::WeightSpec;
