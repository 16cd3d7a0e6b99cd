//! Periodic steady-state simulation of nonlinear RLC and FitzHugh-Nagumo
//! networks by difference-of-monotone Douglas-Rachford splitting.
//!
//! The lossless part (capacitors, inductors, interconnect) is inverted per
//! frequency bin after an FFT; the static resistive part is inverted sample
//! by sample in the time domain.

pub mod bench;
pub mod config;
pub mod derivative;
pub mod dmdr;
pub mod error;
pub mod init;
pub mod lossless;
pub mod metrics;
pub mod netbuild;
pub mod reference;
pub mod registry;
pub mod resistive;
pub mod signal;
pub mod trajectory;
pub mod validation;

pub use dmdr::{solve, DmdrConfig, Problem, SolveReport};
pub use error::{Error, Result};
pub use lossless::{FactorizedResolvent, LosslessOperator, Resolvent};
pub use netbuild::{build_fhn_cell, build_network, CellParams, NetworkSpec};
pub use trajectory::StackedTrajectory;
