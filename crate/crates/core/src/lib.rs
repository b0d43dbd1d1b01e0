//! Classicality and consistency checks for quantum states against classical
//! phase-space data with error margins.
//!
//! The crate covers polynomial Hamiltonian flows with propagated error
//! margins, grid-discretized quantum states, error kets, the consistency and
//! classicality criteria, and split-step propagation of builtin systems.

pub mod classical;
pub mod commands;
pub mod config;
pub mod criteria;
pub mod error;
pub mod evolution;
pub mod gaussian;
pub mod grid;
pub mod kets;
pub mod poly;
pub mod selftest;

pub use commands::{execute, Command, Outcome, RunOptions};
pub use config::{parse_config, parse_config_with_overrides, RunConfig};
pub use classical::{
    builtin_trajectory, enumerate_fundamental_sequences, lie_series_trajectory, monte_carlo_margin_check,
    propagate_error_margin, ClassicalData, SequenceSpec, System, Trajectory,
};
pub use criteria::{
    classicality_first, classicality_second, consistency_first, consistency_second, gaussian_fastpath,
    sufficient_consistency_order, ClassicalityOptions, CriterionKind, CriterionReport,
};
pub use error::{Error, Result};
pub use evolution::{split_step_evolve, verify_consistency_over_time, EvolutionOptions, EvolutionRecord};
pub use gaussian::GaussianPacket;
pub use grid::{make_gaussian, GridAxis, GridState, Rep};
pub use kets::{apply_error_factor, mixed_error_ket, nth_order_spread, ErrorKet};
pub use poly::{poisson_bracket, PhaseSpace, Polynomial};
