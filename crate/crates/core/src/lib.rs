//! Semiparametric penalized spline regression.

pub mod config;
pub mod data;
pub mod error;
pub mod kernelreg;
pub mod linalg;
pub mod modelselect;
pub mod parametric;
pub mod pls;
pub mod quadrature;
pub mod spse;
pub mod simlab;
pub mod splinecore;
pub mod theory;

pub use error::{Error, Result};
