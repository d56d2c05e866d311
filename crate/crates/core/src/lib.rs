//! Linear Gaussian model of an optomechanical cavity placed inside an
//! in-loop feedback circuit, operated as a polariton quantum Otto engine.
//!
//! Everything is expressed in units of the mechanical frequency (`omega_m = 1`,
//! `hbar = 1`): energies in `hbar * omega_m`, times in `1 / omega_m`.
//!
//! Operator vectors and all 4x4 matrices share the ordering `(a, b, a†, b†)`,
//! where `a` is the cavity mode and `b` the mechanical mode.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std` feature.
//! The `parallel` feature runs sweep cells on a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod polariton;
pub mod sweep;
pub mod thermo;

pub use error::{Error, Result};
pub use linalg::{Complex, Mat4};
pub use lyapunov::{classify_stability, steady_state, CorrelationMatrix, StabilityReport};
pub use model::{
    build_drift, build_hamiltonian, build_noise, effective_feedback, invert_feedback, DriftMatrix,
    FeedbackConfig, HamiltonianMatrix, NoiseMatrix, SystemParams,
};
pub use polariton::{
    polariton_basis, polariton_frequencies, to_polariton, PolaritonBasis, PolaritonState,
};
pub use sweep::{run_sweep, Axis, Cell, CellStatus, SweepParam, SweepResult, SweepSpec};
pub use thermo::{
    check_hierarchy, detuning_at, estimate_cycle, heat_rate, internal_energy, propagate, run_cycle,
    work_rate, CycleLedger, HierarchyCheck, StrokeSchedule, Variant,
};
