//! Density measures, approximate limits and generalized derivatives by
//! shrinking-neighborhood sampling.
//!
//! The crate turns pointwise notions that are defined through limits of
//! averages over shrinking neighborhoods into computable, bracketed
//! estimates:
//!
//! - [`geometry`]: implicit regions (balls, cones, cusps, tubes, balls around
//!   infinity), their δ-neighborhoods, measures and densities.
//! - [`meanvalue`]: mean-value sequences, limit brackets, essential bounds.
//! - [`local_limits`]: essential and approximate limits, Lebesgue points,
//!   precise representatives, essential values.
//! - [`derivatives`]: approximate, essential and precise derivatives and the
//!   mean value theorem.
//! - [`clarke`]: Clarke generalized Jacobians by gradient sampling and their
//!   calculus rules.
//! - [`weakconv`]: one-sided tests for weak-* convergence in L∞.
//! - [`finite_measures`]: exact finitely additive measures on finite algebras.
//! - [`cli`]: the command-line front end and the example corpus.

pub mod clarke;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod derivatives;
pub mod error;
pub mod expr;
pub mod extended;
pub mod field;
pub mod finite_measures;
pub mod geometry;
pub mod local_limits;
pub mod meanvalue;
pub mod report;
pub mod weakconv;

pub use error::{Error, Result};
pub use expr::Expr;
pub use field::{Field, FnField, PiecewiseField};
pub use geometry::{Bounds, DeltaSchedule, Region, SampleBudget};
pub use meanvalue::Bracket;
