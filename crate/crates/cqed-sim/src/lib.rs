//! Steady-state reflection spectra and parameter estimation for double
//! quantum dot charge qubits coupled to a single lossy microwave resonator.
//!
//! The crate is organized along the pipeline:
//! - [`operators`]: dense operator algebra on the truncated Fock ⊗ qubit space;
//! - [`model`]: physical parameters → Hamiltonian and collapse operators;
//! - [`steady`]: Liouvillian, steady states, reflection spectra;
//! - [`eigen`]: closed-form and numeric one-excitation eigenstructure;
//! - [`fit`]: Lorentzian peak extraction, Hamiltonian and master-equation fits.

pub mod eigen;
pub mod fit;
pub mod model;
pub mod operators;
pub mod steady;

pub use model::{DqdParams, ParamPath, ProbeParams, ResonatorParams, SystemConfig};
pub use operators::{HilbertLayout, OperatorMatrix};
pub use steady::{DensityMatrix, Liouvillian, SpectrumTrace, SweepSpec};
