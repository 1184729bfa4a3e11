//! Euler-Poisson schemes for SDEs driven by Lévy processes.
//!
//! The scheme replaces the deterministic grid `iT/n` of the Euler method by
//! the arrival times of a Poisson process of rate `n/T`, so each step needs
//! only a sample of the driver at an exponential time. The crate provides
//! the driving models ([`levy`]), resolvent sampling ([`resolvent`]), the
//! schemes ([`scheme`]), path-coupled exact solutions ([`reference`]), grid
//! statistics ([`grid_stats`]), strong-error estimation ([`convergence`])
//! and the companion implicit PIDE solver ([`pide`]).
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait)]

pub mod config;
pub mod convergence;
pub mod error;
pub mod grid_stats;
pub mod levy;
pub mod output;
pub mod pide;
pub mod reference;
pub mod resolvent;
pub mod rng;
pub mod scheme;
pub mod stats;

pub use config::KvMap;
pub use convergence::{estimate_mse, rate_ladder, ConvergenceReport, Scheme};
pub use error::{Error, Result};
pub use levy::{Capabilities, ExpPhase, JumpLaw, JumpMeasure, LevyModel, LevyTriplet};
pub use output::Csv;
pub use reference::CoupledPath;
pub use resolvent::{ResolventSample, ResolventSampler, WienerHopfFactors};
pub use rng::{substream, Parallelism, PathRng};
pub use scheme::{Coefficient, RandomGrid, SchemeTrajectory, SdeProblem, StopRule};
pub use stats::{Estimate, SlopeFit};
