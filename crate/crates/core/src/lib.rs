//! Data-driven predictive control for linear time-invariant systems.
//!
//! The crate collects input/output data from a plant, checks the data
//! assumptions, identifies a multistep predictor and solves the DeePC and
//! SPC optimal control problems, both as quadratic programs and through
//! their explicit unconstrained solutions. The `bench` module runs the
//! closed-loop experiments.

pub mod bench;
pub mod cli;
pub mod data;
pub mod equivalence;
pub mod error;
pub mod linalg;
pub mod ocp;
pub mod lti;
pub mod plant;
pub mod predictor;
pub mod qp;
pub mod rng;

pub use error::{Error, QpError, Result};
