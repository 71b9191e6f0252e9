//! Multi-fidelity hyperparameter optimization.
//!
//! The engine combines per-fidelity surrogate ensembles, successive halving
//! with a global ranking over previously stopped configurations, and an
//! adaptive HyperBand bracket arrangement.

pub mod ensemble;
pub mod rank;
pub mod records;
pub mod seeding;
pub mod space;
pub mod surrogate;
pub mod bench;
pub mod exec;
pub mod harness;
pub mod sched;
