//! Newton-type methods for generalized self-concordant minimization.

pub mod error;
pub mod atoms;
pub mod bench;
pub mod bench_io;
pub mod kernel;
pub mod linops;
pub mod models;
pub mod newton;
pub mod prox;
pub mod prox_newton;
pub mod quasi_newton;
pub mod trace;

pub use error::{Error, Result};
pub use kernel::GscParams;
