//! Weighted progression-rate estimands for longitudinal trajectories.
//!
//! A progression rate is a weighted average of a trajectory's slope over
//! follow-up: the integral of w(t) f'(t) with w a density on [0, 1]. On a
//! finite visit grid the same idea becomes a weighted mean of per-interval
//! slopes, and either form reduces to a linear contrast of the visit
//! values. This crate builds those contrasts, evaluates their variance
//! under standard longitudinal covariance models, and sweeps the resulting
//! signal-to-noise comparisons across trajectory shapes and designs.

pub mod covariance;
pub mod error;
pub mod estimands;
pub mod quadrature;
pub mod study;
pub mod trajectories;
pub mod weights;

pub use error::{PprError, Result};
