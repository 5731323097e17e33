//! Training stack for a simulated 8-DOF table-tennis robot.
//!
//! The crate is organized around five building blocks:
//!
//! * [`sim`] — deterministic 100 Hz simulation of the gantry-mounted arm, the
//!   ballistic ball, paddle/table contacts, throw generation, and the
//!   observation noise/delay model.
//! * [`policy`] — gated dilated temporal-CNN and MLP controllers operating on
//!   a flat parameter vector, plus observation normalization and an optional
//!   low-pass action filter.
//! * [`es`] — antithetic evolutionary search with top-direction filtering and
//!   reward normalization, driving a coordinator/worker rollout loop.
//! * [`rewards`] — composable reward terms (sparse, style penalties, pose
//!   rewards, success shaping) and the staged curriculum scheduler.
//! * [`eval`] — batch evaluation with success/hit rates, smoothness metrics,
//!   and the rules-based hierarchical baseline.
//!
//! Rollout batches are data-parallel. With the default `parallel` feature the
//! batch evaluators fan out over a rayon pool; without it they fall back to a
//! sequential loop with identical results (aggregation is keyed by rollout
//! index, never by completion order).

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod es;
pub mod eval;
pub mod policy;
pub mod rewards;
pub mod rng;
pub mod rollout;
pub mod sim;

pub use error::{Error, Result};
