//! Resilient state estimation and control for discrete-time linear systems
//! whose sensors and actuators may be corrupted by a sparse adversary.
//!
//! The crate provides:
//! * [`model`] — plant representation, trajectory simulation under attacks,
//!   and the stacked linear maps every other module consumes;
//! * [`resilience`] — how many attacked nodes a system can tolerate while the
//!   state stays uniquely recoverable, with certificates when it cannot;
//! * [`solver`] — an operator-splitting solver for sum-of-row-norms
//!   minimization, the engine behind the convex decoders;
//! * [`decode`] — exact combinatorial and convex-relaxed decoders for sensor
//!   and sensor+actuator attacks, plus attack-signal identification;
//! * [`feedback`] — single-input pole placement that simultaneously maximizes
//!   the number of correctable sensor errors;
//! * [`swing`] — a linearized swing-equation model builder for generator/bus
//!   networks (a 14-bus description ships with the crate);
//! * [`experiment`] — a seeded Monte-Carlo harness with CSV emission;
//! * [`io`] — JSON/CSV file formats shared with the command-line tool.

pub mod decode;
pub mod error;
pub mod experiment;
pub mod feedback;
pub mod io;
pub mod linalg;
pub mod model;
pub mod resilience;
pub mod solver;
pub mod swing;

pub use decode::{DecodeResult, DecodeStatus};
pub use error::Error;
pub use model::{AttackScenario, LinearSystem, MeasurementBlock, Trajectory};
pub use resilience::{AttackPattern, ResilienceReport};
pub use solver::{InnerNorm, RowNormProblem, SolverConfig, SolverResult};
