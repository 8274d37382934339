//! Discrete bidomain operators for cardiac electrophysiology.

pub mod bidomain;
pub mod conductivity;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod ionic;
pub mod linalg;
pub mod probe;
pub mod semigroup;
pub mod simulate;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
