//! Set-based reachability for linear systems whose single discrete
//! transition is triggered periodically by a clock, possibly with jitter.
//!
//! The pipeline is: build a [`models::PeriodicHybridSystem`], run
//! [`hybrid_engine::reach_periodic`] (or a streaming variant with a
//! [`hybrid_engine::RunObserver`]), then query the run with
//! [`verification`] or test it against simulations from [`sim_oracle`].

pub mod cli;
pub mod continuous_reach;
pub mod discretization;
pub mod error;
pub mod hybrid_engine;
pub mod models;
pub mod set_calculus;
pub mod sim_oracle;
pub mod verification;

pub use error::{ReachError, Result};
pub use hybrid_engine::{reach_periodic, reach_periodic_exact, Algorithm, HybridRun, ReachOptions};
pub use models::{Jitter, PeriodicHybridSystem};
pub use set_calculus::{IntervalMatrix, Zonotope};
