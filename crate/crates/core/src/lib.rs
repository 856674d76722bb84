//! Complex-valued optimization with the CR (Wirtinger) calculus.

pub mod checks;
pub mod cli;
pub mod config;
pub mod cr_core;
pub mod error;
pub mod hessian;
pub mod linalg;
pub mod lms;
pub mod lsq;
pub mod optim;
pub mod poly;
pub mod problems;
pub mod trace;
pub mod wirtinger;

pub use error::{CrError, Result};
