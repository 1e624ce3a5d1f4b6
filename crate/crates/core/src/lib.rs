//! Thermal processes on energy-diagonal states.
//!
//! States are population vectors over energy eigenstates and processes are
//! column-stochastic matrices acting on them. Every protocol in this crate is
//! composed from two-level operations (partial thermalizations and β-swaps),
//! and every closed-form result is paired with an explicit simulation of the
//! corresponding operation sequence so the two can be compared.
//!
//! Module map:
//!
//! - [`thermal`]: Hamiltonians, Gibbs states, population vectors, transition
//!   matrices and the elementary two-level operations.
//! - [`majorization`]: Lorenz curves, thermo-majorization and extreme points of
//!   the thermal-process reachable set.
//! - [`combinatorics`]: the binomial/Catalan machinery (`f`, `L`, `K`, `I`,
//!   `δ_d`, `I_d`) in exact and floating-point arithmetic.
//! - [`memory`]: the β-swap simulation with a `d`-dimensional maximally mixed
//!   memory.
//! - [`cooling`]: coherent and incoherent cooling rounds.
//! - [`extraction`]: single-shot work extraction from an excited qubit.
//! - [`reachable`]: qutrit reachable-set regions and their CSV export.

pub mod combinatorics;
pub mod cooling;
mod error;
pub mod extraction;
pub mod majorization;
pub mod memory;
pub mod reachable;
pub mod thermal;

pub use error::{Error, Result};
pub use thermal::{
    Hamiltonian, PairOp, PopulationVector, ProtocolTrace, ThermalContext, TransitionMatrix,
};
