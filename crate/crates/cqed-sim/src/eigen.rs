//! Eigenstructure of the one-excitation subspace: the resonant triplet, the
//! dispersive regime with its perturbative expansion, bright/dark
//! classification, and the exchange splitting 2J.
//!
//! Basis order is fixed as {|e,g,0⟩, |g,g,1⟩, |g,e,0⟩} and energies are
//! quoted relative to the common qubit energy.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{mixing_angle, qubit_frequency, SystemConfig};

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("degenerate input: g1 and g2 are both zero")]
    DegenerateCouplings,
    #[error("delta_r = 0 has no dispersive splitting; use the resonant triplet instead")]
    ZeroDetuning,
}

/// Convention for the dispersive exchange splitting 2J.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// 2J = 2 g₁ g₂ / Δ_r, the splitting at the crossing of the *dressed*
    /// qubit frequencies.
    DressedResonant,
    /// 2J = (g₁² + g₂²) / Δ_r, the splitting when the *bare* qubit
    /// frequencies are resonant.
    BareResonant,
}

/// One-excitation model: two qubit-like states coupled to one resonator
/// state detuned by `delta_r` = ν_r − ν_q.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OneExcitationModel {
    pub g1: f64,
    pub g2: f64,
    pub delta_r: f64,
}

/// Eigen-decomposition of the one-excitation space.
///
/// `brightness` is the resonator weight |⟨g,g,1|ψ⟩|² (what reflection
/// read-out sees); `drive_brightness` is the symmetric-drive weight
/// |(⟨e,g,0| + ⟨g,e,0|)ψ|²/2, the criterion for dark-state formation under a
/// probe acting with the same phase on both qubits.
#[derive(Clone, Debug, Serialize)]
pub struct EigenTriple {
    pub energies: [f64; 3],
    pub states: [[Complex64; 3]; 3],
    pub brightness: [f64; 3],
    pub drive_brightness: [f64; 3],
}

impl EigenTriple {
    fn from_parts(mut entries: Vec<(f64, Vector3<f64>)>) -> Self {
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut energies = [0.0; 3];
        let mut states = [[Complex64::new(0.0, 0.0); 3]; 3];
        let mut brightness = [0.0; 3];
        let mut drive_brightness = [0.0; 3];
        for (i, (e, v)) in entries.into_iter().enumerate() {
            let v = v.normalize();
            energies[i] = e;
            for j in 0..3 {
                states[i][j] = Complex64::new(v[j], 0.0);
            }
            brightness[i] = v[1] * v[1];
            drive_brightness[i] = (v[0] + v[2]).powi(2) / 2.0;
        }
        Self { energies, states, brightness, drive_brightness }
    }

    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: Complex64 = (0..3).map(|k| self.states[i][k].conj() * self.states[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).norm());
            }
        }
        worst
    }
}

/// Hamiltonian of the one-excitation subspace in the fixed basis order,
/// with the qubit energy subtracted.
pub fn one_excitation_hamiltonian(model: &OneExcitationModel) -> Matrix3<f64> {
    Matrix3::new(
        0.0, model.g1, 0.0,
        model.g1, model.delta_r, model.g2,
        0.0, model.g2, 0.0,
    )
}

/// Triplet at full resonance (Δ_r = 0): energies {−g_c, 0, +g_c} with
/// g_c = √(g₁²+g₂²), the dark state (g₁|g,e,0⟩ − g₂|e,g,0⟩)/g_c at zero.
pub fn resonant_triplet(g1: f64, g2: f64) -> Result<EigenTriple, EigenError> {
    let g_c = (g1 * g1 + g2 * g2).sqrt();
    if g_c == 0.0 {
        return Err(EigenError::DegenerateCouplings);
    }
    let dark = Vector3::new(-g2, 0.0, g1) / g_c;
    let minus = Vector3::new(g1, -g_c, g2) / (std::f64::consts::SQRT_2 * g_c);
    let plus = Vector3::new(g1, g_c, g2) / (std::f64::consts::SQRT_2 * g_c);
    Ok(EigenTriple::from_parts(vec![(-g_c, minus), (0.0, dark), (g_c, plus)]))
}

/// Report of the exact 3×3 diagonalization of the detuned one-excitation
/// Hamiltonian together with the second-order perturbative energies
/// {0, −g_c²/Δ_r, Δ_r + g_c²/Δ_r} and states.
#[derive(Clone, Debug, Serialize)]
pub struct DispersiveReport {
    pub exact: EigenTriple,
    /// Ordered as (dark, bright qubit-like, resonator-like).
    pub perturbative_energies: [f64; 3],
    pub perturbative_states: [[f64; 3]; 3],
    /// max over the three levels of |exact − perturbative| energy.
    pub max_energy_deviation: f64,
}

/// Exact and perturbative eigenstructure for Δ_r ≠ 0.
pub fn dispersive_eigensystem(model: &OneExcitationModel) -> Result<DispersiveReport, EigenError> {
    if model.delta_r == 0.0 {
        return Err(EigenError::ZeroDetuning);
    }
    let h = one_excitation_hamiltonian(model);
    let eig = h.symmetric_eigen();
    let mut parts: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (eig.eigenvalues[i], Vector3::from(eig.eigenvectors.column(i).into_owned())))
        .collect();
    // fix the overall sign so the largest-magnitude component is positive
    for (_, v) in parts.iter_mut() {
        let mut idx = 0;
        for j in 1..3 {
            if v[j].abs() > v[idx].abs() {
                idx = j;
            }
        }
        if v[idx] < 0.0 {
            *v = -*v;
        }
    }
    let exact = EigenTriple::from_parts(parts);

    let g_c2 = model.g1 * model.g1 + model.g2 * model.g2;
    let g_c = g_c2.sqrt();
    let dr = model.delta_r;
    let dark = [
        -model.g2 / g_c.max(f64::MIN_POSITIVE),
        0.0,
        model.g1 / g_c.max(f64::MIN_POSITIVE),
    ];
    let bright_norm = (g_c2 + (g_c2 / dr).powi(2)).sqrt();
    let bright = [
        model.g1 / bright_norm,
        -g_c2 / dr / bright_norm,
        model.g2 / bright_norm,
    ];
    let res_norm = (g_c2 + dr * dr).sqrt();
    let res_like = [model.g1 / res_norm, dr / res_norm, model.g2 / res_norm];

    let pert_e = [0.0, -g_c2 / dr, dr + g_c2 / dr];
    // match perturbative levels to exact ones by nearest energy
    let mut max_dev = 0.0f64;
    for &pe in &pert_e {
        let nearest = exact
            .energies
            .iter()
            .map(|e| (e - pe).abs())
            .fold(f64::INFINITY, f64::min);
        max_dev = max_dev.max(nearest);
    }
    Ok(DispersiveReport {
        exact,
        perturbative_energies: pert_e,
        perturbative_states: [dark, bright, res_like],
        max_energy_deviation: max_dev,
    })
}

/// Virtual-photon exchange splitting 2J in the chosen convention.
pub fn exchange_splitting(
    g1: f64,
    g2: f64,
    delta_r: f64,
    convention: Convention,
) -> Result<f64, EigenError> {
    if delta_r == 0.0 {
        return Err(EigenError::ZeroDetuning);
    }
    Ok(match convention {
        Convention::DressedResonant => 2.0 * g1 * g2 / delta_r,
        Convention::BareResonant => (g1 * g1 + g2 * g2) / delta_r,
    })
}

/// Second-order effective two-qubit Hamiltonian (1/Δ_r)[[g₁², g₁g₂], [g₁g₂, g₂²]]
/// in the basis {|e,g⟩, |g,e⟩}. It is rank one; the dark state
/// (g₁|g,e⟩ − g₂|e,g⟩)/g_c spans its kernel and the two levels are split by
/// the bare-resonant exchange g_c²/Δ_r (the bright level lies below the dark
/// one for Δ_r > 0).
pub fn perturbative_two_qubit_hamiltonian(
    g1: f64,
    g2: f64,
    delta_r: f64,
) -> Result<Matrix2<f64>, EigenError> {
    if delta_r == 0.0 {
        return Err(EigenError::ZeroDetuning);
    }
    Ok(Matrix2::new(g1 * g1, g1 * g2, g1 * g2, g2 * g2) / delta_r)
}

/// Per-detuning entry of the fixed-frequency dark-state report.
#[derive(Clone, Debug, Serialize)]
pub struct DarkStateEntry {
    pub delta_r: f64,
    /// Exact energy of the dark qubit-like branch (zero for all Δ_r).
    pub dark_energy: f64,
    /// Exact energy of the bright qubit-like branch (≈ −g_c²/Δ_r).
    pub bright_energy: f64,
    /// |⟨g,g,1|bright⟩| of the exact eigenvector, ∝ 1/Δ_r.
    pub bright_resonator_amplitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DarkStateReport {
    pub entries: Vec<DarkStateEntry>,
    /// Spread of the dark-branch energy across the Δ_r list.
    pub dark_energy_variation: f64,
    /// True when the dark branch varies by less than 1% of g_c²/min Δ_r.
    pub dark_branch_fixed: bool,
    /// max relative deviation of the bright branch from −g_c²/Δ_r, over
    /// entries in the perturbative window Δ_r ≥ 8·max(g₁, g₂).
    pub bright_branch_deviation: f64,
}

/// Track the two qubit-like branches across a list of resonator detunings:
/// the dark branch stays at fixed frequency while the bright branch shifts
/// as −g_c²/Δ_r and its resonator admixture falls off as 1/Δ_r.
pub fn dark_state_fixed_frequency_check(
    g1: f64,
    g2: f64,
    delta_r_list: &[f64],
) -> Result<DarkStateReport, EigenError> {
    if g1 == 0.0 && g2 == 0.0 {
        return Err(EigenError::DegenerateCouplings);
    }
    let g_c2 = g1 * g1 + g2 * g2;
    let g_max = g1.max(g2);
    let mut entries = Vec::with_capacity(delta_r_list.len());
    let mut bright_dev = 0.0f64;
    for &dr in delta_r_list {
        if dr == 0.0 {
            return Err(EigenError::ZeroDetuning);
        }
        let report = dispersive_eigensystem(&OneExcitationModel { g1, g2, delta_r: dr })?;
        // qubit-like branches: the two exact levels nearest zero
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by(|&a, &b| {
            report.exact.energies[a]
                .abs()
                .partial_cmp(&report.exact.energies[b].abs())
                .unwrap()
        });
        let (dark_i, bright_i) = (idx[0], idx[1]);
        let dark_energy = report.exact.energies[dark_i];
        let bright_energy = report.exact.energies[bright_i];
        let amp = report.exact.states[bright_i][1].norm();
        if dr >= 8.0 * g_max {
            let expected = -g_c2 / dr;
            bright_dev = bright_dev.max((bright_energy - expected).abs() / expected.abs());
        }
        entries.push(DarkStateEntry {
            delta_r: dr,
            dark_energy,
            bright_energy,
            bright_resonator_amplitude: amp,
        });
    }
    let dark_min = entries.iter().map(|e| e.dark_energy).fold(f64::INFINITY, f64::min);
    let dark_max = entries.iter().map(|e| e.dark_energy).fold(f64::NEG_INFINITY, f64::max);
    let variation = dark_max - dark_min;
    let min_dr = delta_r_list.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
    let scale = g_c2 / min_dr;
    Ok(DarkStateReport {
        entries,
        dark_energy_variation: variation,
        dark_branch_fixed: variation < 0.01 * scale,
        bright_branch_deviation: bright_dev,
    })
}

/// One-excitation transition matrix of a full system configuration, in the
/// basis {qubit 1, resonator[, qubit 2]} with absolute frequencies on the
/// diagonal and effective couplings g_k sinθ_k off it. Its eigenvalues are
/// the observable resonance positions.
pub fn one_excitation_matrix(config: &SystemConfig) -> DMatrix<f64> {
    let k = config.num_dqds();
    let n = k + 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    // basis order mirrors {|e,g,0⟩, |g,g,1⟩, |g,e,0⟩}: qubit 1, resonator, qubit 2
    let res_idx = if k == 0 { 0 } else { 1 };
    m[(res_idx, res_idx)] = config.resonator.omega_r;
    for (i, dqd) in config.dqds.iter().enumerate() {
        let q_idx = if i == 0 { 0 } else { 2 };
        let (sin_th, _) = mixing_angle(dqd);
        m[(q_idx, q_idx)] = qubit_frequency(dqd);
        let g_eff = config.couplings[i] * sin_th;
        m[(q_idx, res_idx)] = g_eff;
        m[(res_idx, q_idx)] = g_eff;
    }
    m
}

/// Sorted one-excitation transition frequencies of the configuration.
pub fn one_excitation_transitions(config: &SystemConfig) -> Vec<f64> {
    let m = one_excitation_matrix(config);
    let eig = m.symmetric_eigen();
    let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    evs
}
