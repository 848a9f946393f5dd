//! Operator algebra on a tensor product of one truncated bosonic mode and a
//! set of two-level systems.
//!
//! Conventions used throughout the crate:
//! - slot order is fixed: resonator first, then qubit 1 .. qubit K;
//! - the bosonic mode is truncated to `fock_cutoff` Fock states |0⟩..|N−1⟩;
//! - the qubit basis is (|g⟩, |e⟩) with |g⟩ the +1 eigenvector of σ_z, so the
//!   free qubit Hamiltonian is −(ω/2)σ_z and σ_− = |g⟩⟨e| lowers |e⟩ → |g⟩.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense complex square matrix on the tensor-product Hilbert space.
pub type OperatorMatrix = DMatrix<Complex64>;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("invalid truncation: fock cutoff must be >= 2, got {0}")]
    InvalidTruncation(usize),
    #[error("slot {slot} out of range for layout with {slots} slots")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("dimension mismatch: operator is {got}x{got}, slot {slot} has local dimension {expected}")]
    DimensionMismatch { slot: usize, expected: usize, got: usize },
}

/// Shape of the composite Hilbert space: one truncated bosonic mode followed
/// by `num_qubits` two-level systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    pub fock_cutoff: usize,
    pub num_qubits: usize,
}

impl HilbertLayout {
    pub fn new(fock_cutoff: usize, num_qubits: usize) -> Result<Self, OperatorError> {
        if fock_cutoff < 2 {
            return Err(OperatorError::InvalidTruncation(fock_cutoff));
        }
        Ok(Self { fock_cutoff, num_qubits })
    }

    /// Total Hilbert-space dimension, `fock_cutoff * 2^num_qubits`.
    pub fn dim(&self) -> usize {
        self.fock_cutoff * (1usize << self.num_qubits)
    }

    /// Number of tensor slots (resonator + qubits).
    pub fn num_slots(&self) -> usize {
        1 + self.num_qubits
    }

    /// Local dimension of a slot: the Fock cutoff for slot 0, two otherwise.
    pub fn slot_dim(&self, slot: usize) -> Result<usize, OperatorError> {
        if slot >= self.num_slots() {
            return Err(OperatorError::SlotOutOfRange { slot, slots: self.num_slots() });
        }
        Ok(if slot == 0 { self.fock_cutoff } else { 2 })
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.fock_cutoff < 2 {
            return Err(OperatorError::InvalidTruncation(self.fock_cutoff));
        }
        Ok(())
    }
}

/// Pauli operator axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Truncated bosonic annihilation operator: a|n⟩ = √n |n−1⟩.
pub fn fock_destroy(cutoff: usize) -> Result<OperatorMatrix, OperatorError> {
    if cutoff < 2 {
        return Err(OperatorError::InvalidTruncation(cutoff));
    }
    let mut a = OperatorMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Truncated bosonic creation operator, the conjugate transpose of [`fock_destroy`].
pub fn fock_create(cutoff: usize) -> Result<OperatorMatrix, OperatorError> {
    Ok(fock_destroy(cutoff)?.adjoint())
}

/// Number operator a†a, diagonal (0, 1, .., cutoff−1).
pub fn number_operator(cutoff: usize) -> Result<OperatorMatrix, OperatorError> {
    let a = fock_destroy(cutoff)?;
    Ok(a.adjoint() * a)
}

/// Standard 2x2 Pauli matrix; σ_z = diag(+1, −1).
pub fn pauli(axis: PauliAxis) -> OperatorMatrix {
    match axis {
        PauliAxis::X => OperatorMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0), c(1.0, 0.0),
            c(1.0, 0.0), c(0.0, 0.0),
        ]),
        PauliAxis::Y => OperatorMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0), c(0.0, -1.0),
            c(0.0, 1.0), c(0.0, 0.0),
        ]),
        PauliAxis::Z => OperatorMatrix::from_row_slice(2, 2, &[
            c(1.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(-1.0, 0.0),
        ]),
    }
}

/// Qubit lowering operator |g⟩⟨e| in the (|g⟩, |e⟩) basis.
pub fn sigma_minus() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[
        c(0.0, 0.0), c(1.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0),
    ])
}

/// Qubit raising operator |e⟩⟨g|.
pub fn sigma_plus() -> OperatorMatrix {
    sigma_minus().adjoint()
}

/// Identity on an `n`-dimensional space.
pub fn identity(n: usize) -> OperatorMatrix {
    OperatorMatrix::identity(n, n)
}

/// Embed a local operator into the full space as I ⊗ .. ⊗ op ⊗ .. ⊗ I,
/// with the factors in fixed slot order.
pub fn embed(
    op: &OperatorMatrix,
    slot: usize,
    layout: &HilbertLayout,
) -> Result<OperatorMatrix, OperatorError> {
    let local = layout.slot_dim(slot)?;
    if op.nrows() != local || op.ncols() != local {
        return Err(OperatorError::DimensionMismatch { slot, expected: local, got: op.nrows() });
    }
    let mut full = identity(1);
    for s in 0..layout.num_slots() {
        let factor_dim = layout.slot_dim(s).expect("slot in range");
        if s == slot {
            full = full.kronecker(op);
        } else {
            full = full.kronecker(&identity(factor_dim));
        }
    }
    Ok(full)
}

/// Conjugate transpose.
pub fn dagger(m: &OperatorMatrix) -> OperatorMatrix {
    m.adjoint()
}

/// Commutator [a, b] = ab − ba.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    a * b - b * a
}

/// Largest entry magnitude; useful for closeness checks.
pub fn max_abs_entry(m: &OperatorMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Deviation from Hermiticity, max |M − M†| entrywise.
pub fn hermiticity_error(m: &OperatorMatrix) -> f64 {
    max_abs_entry(&(m - m.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn destroy_cutoff_two_is_single_superdiagonal() {
        let a = fock_destroy(2).unwrap();
        assert_eq!(a[(0, 1)], c(1.0, 0.0));
        assert_eq!(a[(0, 0)], c(0.0, 0.0));
        assert_eq!(a[(1, 0)], c(0.0, 0.0));
        assert_eq!(a[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn number_operator_diagonal() {
        let n = number_operator(4).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(n[(k, k)].re, k as f64, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(max_abs_entry(&(n.clone() - OperatorMatrix::from_diagonal(&n.diagonal()))), 0.0);
    }

    #[test]
    fn destroy_lowers_fock_states_exactly() {
        let cutoff = 7;
        let a = fock_destroy(cutoff).unwrap();
        for n in 1..cutoff {
            let mut ket = nalgebra::DVector::<Complex64>::zeros(cutoff);
            ket[n] = c(1.0, 0.0);
            let lowered = &a * ket;
            assert_abs_diff_eq!(lowered[n - 1].re, (n as f64).sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn commutator_truncation_artifact_at_cutoff_six() {
        // [a, a†] = 1 except for the corner entry (5,5) = −5 left by the cutoff.
        let a = fock_destroy(6).unwrap();
        let comm = commutator(&a, &a.adjoint());
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i != j {
                    0.0
                } else if i == 5 {
                    -5.0
                } else {
                    1.0
                };
                assert_abs_diff_eq!(comm[(i, j)].re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(comm[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn destroy_rejects_tiny_cutoff() {
        assert_eq!(fock_destroy(1).unwrap_err(), OperatorError::InvalidTruncation(1));
        assert_eq!(fock_destroy(0).unwrap_err(), OperatorError::InvalidTruncation(0));
    }

    #[test]
    fn pauli_matrices_standard() {
        let x = pauli(PauliAxis::X);
        assert_eq!(x[(0, 1)], c(1.0, 0.0));
        assert_eq!(x[(1, 0)], c(1.0, 0.0));
        let z = pauli(PauliAxis::Z);
        assert_eq!(z[(0, 0)], c(1.0, 0.0));
        assert_eq!(z[(1, 1)], c(-1.0, 0.0));
    }

    #[test]
    fn pauli_algebra_identity() {
        // σ_x σ_y − σ_y σ_x = 2i σ_z
        let lhs = commutator(&pauli(PauliAxis::X), &pauli(PauliAxis::Y));
        let rhs = pauli(PauliAxis::Z) * c(0.0, 2.0);
        assert_abs_diff_eq!(max_abs_entry(&(lhs - rhs)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sigma_minus_lowers_excited_state() {
        let sm = sigma_minus();
        let e = nalgebra::DVector::from_column_slice(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let g = &sm * e;
        assert_eq!(g[0], c(1.0, 0.0));
        assert_eq!(g[1], c(0.0, 0.0));
    }

    #[test]
    fn embed_identity_gives_full_identity() {
        let layout = HilbertLayout::new(3, 2).unwrap();
        for slot in 0..layout.num_slots() {
            let local = layout.slot_dim(slot).unwrap();
            let full = embed(&identity(local), slot, &layout).unwrap();
            assert_abs_diff_eq!(max_abs_entry(&(full - identity(layout.dim()))), 0.0);
        }
    }

    #[test]
    fn embed_dimension_is_product() {
        let layout = HilbertLayout::new(3, 2).unwrap();
        assert_eq!(layout.dim(), 12);
        let m = embed(&pauli(PauliAxis::X), 1, &layout).unwrap();
        assert_eq!(m.nrows(), 12);
    }

    #[test]
    fn embedded_ops_on_distinct_slots_commute() {
        let layout = HilbertLayout::new(3, 2).unwrap();
        let sx = embed(&pauli(PauliAxis::X), 1, &layout).unwrap();
        let sz = embed(&pauli(PauliAxis::Z), 2, &layout).unwrap();
        assert!(max_abs_entry(&commutator(&sx, &sz)) < 1e-12);
        let a = embed(&fock_destroy(3).unwrap(), 0, &layout).unwrap();
        assert!(max_abs_entry(&commutator(&a, &sx)) < 1e-12);
    }

    #[test]
    fn embed_rejects_bad_slot_and_dimension() {
        let layout = HilbertLayout::new(3, 1).unwrap();
        assert!(matches!(
            embed(&identity(2), 5, &layout),
            Err(OperatorError::SlotOutOfRange { slot: 5, slots: 2 })
        ));
        assert!(matches!(
            embed(&identity(3), 1, &layout),
            Err(OperatorError::DimensionMismatch { slot: 1, expected: 2, got: 3 })
        ));
    }

    #[test]
    fn embed_commutes_with_dagger() {
        let layout = HilbertLayout::new(4, 1).unwrap();
        let a = fock_destroy(4).unwrap();
        let lhs = dagger(&embed(&a, 0, &layout).unwrap());
        let rhs = embed(&dagger(&a), 0, &layout).unwrap();
        assert_abs_diff_eq!(max_abs_entry(&(lhs - rhs)), 0.0);
    }
}
