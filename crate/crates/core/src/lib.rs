//! Simulation and pulse optimization for state transfer between two qubits
//! through a lossy cavity in the ultrastrong-coupling regime.
//!
//! The system is one cavity mode (truncated at `n_max` photons) coupled to two
//! resonant qubits. An excitation stored in qubit 1 is moved to qubit 2 by
//! time-dependent couplings `g1(t)`, `g2(t)`, either a counterintuitive
//! Gaussian pair or optimized step functions. Cavity loss enters through a
//! non-Hermitian term, so the transfer efficiency is the squared overlap of
//! the (sub-normalized) final state with the target.

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pulses;
pub mod qoc;
pub mod sweep;

pub use num_complex::Complex64;

pub use dynamics::{propagate, propagate_piecewise, Generator, Method, PropagationOptions, Trajectory};
pub use error::{Error, Result};
pub use metrics::{leakage, mean_photon, populations, transfer_efficiency, PopulationSelector, RunRecord};
pub use model::{
    annihilation, basis_state, build_rabi, build_rwa, effective_hamiltonian, excitation_operator,
    parity_operator, qubit_lowering, superposition_initial, superposition_target, BasisIndex, Model,
    ModelParams, Operator, QuantumState,
};
pub use pulses::{Control, GaussianPair, OutsideRule, PiecewiseConstantSchedule, PulseSchedule};
pub use qoc::{gradient, objective, optimize, InitStrategy, OptimizationConfig, OptimizationResult};
pub use sweep::{run_point, run_sweep, PointSettings, SweepGrid};
