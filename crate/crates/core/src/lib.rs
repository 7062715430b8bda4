//! Simulation toolkit for label quality-assurance sessions.
//!
//! The library predicts the total time cost of a session in which a user
//! reviews machine-assigned labels batch by batch, optionally applying
//! batch-wide edit commands and queue-reordering (rank) methods. It ships
//! with a sweep runner for comparing interface layouts and user profiles,
//! and an estimator that fits unit time costs from captured interaction logs.

pub mod error;
pub mod estimate;
pub mod mock;
pub mod profile;
pub mod rank;
pub mod report;
pub mod session;
pub mod strategy;
pub mod sweep;

pub use error::SimError;
