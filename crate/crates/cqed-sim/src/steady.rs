//! Liouvillian construction, steady-state solution, and scattered-field
//! observables.
//!
//! The master equation ρ̇ = −i[H, ρ] + Σ_c D[c]ρ is vectorized with
//! column-stacking (vec(AρB) = (Bᵀ ⊗ A) vec(ρ)) into a dense d²×d² complex
//! matrix. The steady state is the kernel vector, found by replacing one row
//! of the linear system with the trace constraint and LU-factorizing.

use faer::linalg::solvers::Solve;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    build_collapse_ops, build_hamiltonian, qubit_frequency, ModelError, ParamPath, SystemConfig,
};
use crate::operators::{
    embed, max_abs_entry, number_operator, pauli, OperatorMatrix, PauliAxis,
};

#[derive(Debug, Error)]
pub enum SteadyError {
    #[error("dimension mismatch: operator is {got}x{got}, expected {expected}x{expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-unique steady state: Liouvillian kernel dimension is {kernel_dim}")]
    NonUniqueSteadyState { kernel_dim: usize },
    #[error("steady-state solve failed: {0}")]
    SolveFailed(String),
    #[error("reflection requires a nonzero probe amplitude")]
    ZeroProbe,
    #[error("empty probe grid")]
    EmptyGrid,
    #[error("probe grid must be strictly increasing")]
    NonMonotoneGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Operator(#[from] crate::operators::OperatorError),
    #[error("trace csv parse error at line {line}: {reason}")]
    CsvParse { line: usize, reason: String },
}

/// Dense superoperator acting on vectorized density matrices.
pub struct Liouvillian {
    /// Hilbert-space dimension d; the matrix is d²×d².
    pub dim: usize,
    pub mat: faer::Mat<faer::c64>,
}

fn to_faer(m: &DMatrix<Complex64>) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Superoperator of ρ ↦ AρB as (Bᵀ ⊗ A) under column-stacking.
fn sandwich(a: &OperatorMatrix, b: &OperatorMatrix) -> DMatrix<Complex64> {
    b.transpose().kronecker(a)
}

fn superoperator(h: &OperatorMatrix, collapse: &[OperatorMatrix]) -> Result<DMatrix<Complex64>, SteadyError> {
    let d = h.nrows();
    let eye = OperatorMatrix::identity(d, d);
    let i = Complex64::new(0.0, 1.0);
    // −i[H, ρ]
    let mut sup = (sandwich(h, &eye) - sandwich(&eye, h)) * (-i);
    for c in collapse {
        if c.nrows() != d || c.ncols() != d {
            return Err(SteadyError::DimensionMismatch { expected: d, got: c.nrows() });
        }
        let cdc = c.adjoint() * c;
        sup += sandwich(c, &c.adjoint())
            - sandwich(&cdc, &eye) * Complex64::new(0.5, 0.0)
            - sandwich(&eye, &cdc) * Complex64::new(0.5, 0.0);
    }
    Ok(sup)
}

/// Build the Liouvillian superoperator for −i[H, ·] + Σ_c D[c]·.
pub fn build_liouvillian(
    h: &OperatorMatrix,
    collapse: &[OperatorMatrix],
) -> Result<Liouvillian, SteadyError> {
    if h.nrows() != h.ncols() {
        return Err(SteadyError::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let sup = superoperator(h, collapse)?;
    Ok(Liouvillian { dim: h.nrows(), mat: to_faer(&sup) })
}

impl Liouvillian {
    /// Residual of the trace functional as a left null vector,
    /// max_j |Σ_r L[(r,r), j]|.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        let mut worst = 0.0f64;
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..d {
                acc += *self.mat.get(r * d + r, j);
            }
            worst = worst.max(acc.norm());
        }
        worst
    }

    /// ‖L · vec(ρ)‖₂.
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        let d = self.dim;
        let v = faer::Mat::from_fn(d * d, 1, |i, _| rho.entries[(i % d, i / d)]);
        (&self.mat * &v).norm_l2()
    }
}

/// Hermitian, unit-trace, positive-semidefinite state.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diagonal().iter().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs_entry(&(&self.entries - self.entries.adjoint()))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Expectation value Tr(Oρ).
    pub fn expect(&self, op: &OperatorMatrix) -> Complex64 {
        (op * &self.entries).diagonal().iter().sum()
    }
}

/// Solve L vec(ρ) = 0 with Tr ρ = 1 by replacing the first row with the
/// trace constraint. One step of iterative refinement keeps the residual at
/// rounding level even for strongly detuned configurations.
pub fn steady_state(liou: &Liouvillian) -> Result<DensityMatrix, SteadyError> {
    let d = liou.dim;
    let n = d * d;
    let mut t = liou.mat.clone();
    // Row 0 corresponds to the (0,0) matrix element; overwrite with Tr(ρ) = 1.
    for j in 0..n {
        *t.get_mut(0, j) = faer::c64::new(0.0, 0.0);
    }
    for r in 0..d {
        *t.get_mut(0, r * d + r) = faer::c64::new(1.0, 0.0);
    }
    let mut rhs = faer::Mat::<faer::c64>::zeros(n, 1);
    *rhs.get_mut(0, 0) = faer::c64::new(1.0, 0.0);

    let lu = t.partial_piv_lu();
    let mut x = lu.solve(&rhs);
    for _ in 0..2 {
        let r = &t * &x - &rhs;
        if r.norm_l2() < 1e-14 {
            break;
        }
        let dx = lu.solve(&r);
        x = &x - &dx;
    }

    if x.col(0).iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(diagnose_kernel(liou));
    }
    let rho = DensityMatrix {
        entries: DMatrix::from_fn(d, d, |r, c| *x.get(c * d + r, 0)),
    };
    let resid = liou.residual(&rho);
    let scale = 1.0_f64.max(frobenius(&liou.mat));
    if resid > 1e-6 * scale {
        return Err(diagnose_kernel(liou));
    }
    Ok(rho)
}

fn frobenius(m: &faer::Mat<faer::c64>) -> f64 {
    m.norm_l2()
}

fn diagnose_kernel(liou: &Liouvillian) -> SteadyError {
    let svd = match liou.mat.svd() {
        Ok(s) => s,
        Err(_) => return SteadyError::SolveFailed("SVD for kernel diagnosis failed".into()),
    };
    let sv = svd.S();
    let smax = sv.column_vector().iter().map(|s| s.re).fold(0.0f64, f64::max);
    let tol = smax * 1e-10 * (liou.dim as f64);
    let kernel_dim = sv.column_vector().iter().filter(|s| s.re <= tol).count();
    if kernel_dim > 1 {
        SteadyError::NonUniqueSteadyState { kernel_dim }
    } else {
        SteadyError::SolveFailed(format!(
            "linear solve did not converge (kernel dimension {kernel_dim})"
        ))
    }
}

/// Scattered-field amplitude β = Tr(Lρ) and photon flux n = Tr(L†Lρ).
pub fn scattering(rho: &DensityMatrix, l_op: &OperatorMatrix) -> (Complex64, f64) {
    let beta = rho.expect(l_op);
    let n = rho.expect(&(l_op.adjoint() * l_op));
    (beta, n.re)
}

/// Photon number expectation ⟨a†a⟩ of a state on the given layout.
pub fn photon_number(rho: &DensityMatrix, config: &SystemConfig) -> f64 {
    let num = embed(
        &number_operator(config.layout.fock_cutoff).expect("valid cutoff"),
        0,
        &config.layout,
    )
    .expect("layout consistent");
    rho.expect(&num).re
}

/// Precomputed ν_p-affine decomposition of the Liouvillian for fast
/// frequency sweeps: L(ν_p) = base + ν_p · slope.
pub struct LiouvillianFamily {
    dim: usize,
    base: DMatrix<Complex64>,
    slope: DMatrix<Complex64>,
    monitored: OperatorMatrix,
}

impl LiouvillianFamily {
    pub fn new(config: &SystemConfig) -> Result<Self, SteadyError> {
        config.validate()?;
        let mut at_zero = config.clone();
        at_zero.probe.omega_p = 0.0;
        let h0 = build_hamiltonian(&at_zero)?;
        let collapse = build_collapse_ops(&at_zero)?;
        let base = superoperator(&h0, &collapse.ops)?;

        // d/dν_p of the rotating-frame Hamiltonian: a†a − ½ Σ_k σ_z
        let layout = config.layout;
        let dim = layout.dim();
        let mut n_op = embed(&number_operator(layout.fock_cutoff).expect("cutoff"), 0, &layout)?;
        for k in 0..config.num_dqds() {
            n_op += embed(&pauli(PauliAxis::Z), k + 1, &layout)? * Complex64::new(-0.5, 0.0);
        }
        let slope = superoperator(&n_op, &[])?;
        Ok(Self { dim, base, slope, monitored: collapse.monitored_op().clone() })
    }

    pub fn liouvillian_at(&self, nu_p: f64) -> Liouvillian {
        let mat = &self.base + &self.slope * Complex64::new(nu_p, 0.0);
        Liouvillian { dim: self.dim, mat: to_faer(&mat) }
    }

    pub fn monitored_op(&self) -> &OperatorMatrix {
        &self.monitored
    }
}

/// Complex reflection coefficient S11 = β/α at one probe frequency.
pub fn reflection_coefficient(config: &SystemConfig, nu_p: f64) -> Result<Complex64, SteadyError> {
    if config.probe.alpha.norm() == 0.0 {
        return Err(SteadyError::ZeroProbe);
    }
    let family = LiouvillianFamily::new(config)?;
    reflection_at(&family, config.probe.alpha, nu_p).map(|(s11, _)| s11)
}

fn reflection_at(
    family: &LiouvillianFamily,
    alpha: Complex64,
    nu_p: f64,
) -> Result<(Complex64, f64), SteadyError> {
    let liou = family.liouvillian_at(nu_p);
    let rho = steady_state(&liou)?;
    let (beta, n) = scattering(&rho, family.monitored_op());
    Ok((beta / alpha, n))
}

/// Value of a swept parameter recorded in trace metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweptValue {
    pub path: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config: SystemConfig,
    pub swept: Option<SweptValue>,
}

/// Reflection spectrum on a probe-frequency grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub probe_freqs: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub n_flux: Vec<f64>,
    pub metadata: TraceMeta,
}

impl SpectrumTrace {
    pub fn len(&self) -> usize {
        self.probe_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probe_freqs.is_empty()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.s11.iter().map(|z| z.norm()).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.s11.iter().map(|z| z.arg()).collect()
    }

    /// CSV serialization: header `nu_p_MHz,re_s11,im_s11,abs_s11,phase_rad,n_flux`,
    /// 12 significant digits, '.' decimal separator, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(96 * (self.len() + 1));
        out.push_str("nu_p_MHz,re_s11,im_s11,abs_s11,phase_rad,n_flux\n");
        for i in 0..self.len() {
            let z = self.s11[i];
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_sig(self.probe_freqs[i]),
                fmt_sig(z.re),
                fmt_sig(z.im),
                fmt_sig(z.norm()),
                fmt_sig(z.arg()),
                fmt_sig(self.n_flux[i]),
            ));
        }
        out
    }
}

/// Format with 12 significant digits, byte-stable across runs.
pub fn fmt_sig(x: f64) -> String {
    format!("{:.11e}", x)
}

/// One parsed row of the trace CSV schema.
#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub nu_p: f64,
    pub s11: Complex64,
    pub abs: f64,
    pub phase: f64,
    pub n_flux: f64,
}

pub const TRACE_CSV_HEADER: &str = "nu_p_MHz,re_s11,im_s11,abs_s11,phase_rad,n_flux";

/// Parse the trace CSV schema produced by [`SpectrumTrace::to_csv`].
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, SteadyError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(SteadyError::CsvParse { line: 1, reason: "empty file".into() })?;
    if header.trim() != TRACE_CSV_HEADER {
        return Err(SteadyError::CsvParse {
            line: 1,
            reason: format!("expected header '{TRACE_CSV_HEADER}'"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(SteadyError::CsvParse {
                line: idx + 1,
                reason: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, SteadyError> {
            s.trim().parse().map_err(|_| SteadyError::CsvParse {
                line: idx + 1,
                reason: format!("bad number '{s}'"),
            })
        };
        rows.push(TraceRow {
            nu_p: parse(fields[0])?,
            s11: Complex64::new(parse(fields[1])?, parse(fields[2])?),
            abs: parse(fields[3])?,
            phase: parse(fields[4])?,
            n_flux: parse(fields[5])?,
        });
    }
    Ok(rows)
}

fn check_grid(grid: &[f64]) -> Result<(), SteadyError> {
    if grid.is_empty() {
        return Err(SteadyError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SteadyError::NonMonotoneGrid);
    }
    Ok(())
}

/// Steady-state reflection spectrum over a probe grid. Points are computed
/// in parallel; output ordering follows the grid regardless of scheduling.
pub fn spectrum_trace(config: &SystemConfig, grid: &[f64]) -> Result<SpectrumTrace, SteadyError> {
    check_grid(grid)?;
    if config.probe.alpha.norm() == 0.0 {
        return Err(SteadyError::ZeroProbe);
    }
    let family = LiouvillianFamily::new(config)?;
    let alpha = config.probe.alpha;
    let results: Vec<Result<(Complex64, f64), SteadyError>> = grid
        .par_iter()
        .map(|&nu_p| reflection_at(&family, alpha, nu_p))
        .collect();
    let mut s11 = Vec::with_capacity(grid.len());
    let mut n_flux = Vec::with_capacity(grid.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((s, n)) => {
                s11.push(s);
                n_flux.push(n);
            }
            Err(e) => {
                return Err(SteadyError::SolveFailed(format!(
                    "probe point {} (nu_p = {} MHz): {e}",
                    i, grid[i]
                )))
            }
        }
    }
    Ok(SpectrumTrace {
        probe_freqs: grid.to_vec(),
        s11,
        n_flux,
        metadata: TraceMeta { config: config.clone(), swept: None },
    })
}

/// Sweep specification: one scalar parameter and the values it takes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub path: ParamPath,
    pub values: Vec<f64>,
}

/// One spectrum per sweep value, metadata recording the swept scalar.
pub fn sweep_2d(
    config: &SystemConfig,
    sweep: &SweepSpec,
    grid: &[f64],
) -> Result<Vec<SpectrumTrace>, SteadyError> {
    check_grid(grid)?;
    let mut traces = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let mut cfg = config.clone();
        sweep.path.set(&mut cfg, value)?;
        let mut trace = spectrum_trace(&cfg, grid)?;
        trace.metadata.swept = Some(SweptValue { path: sweep.path.to_string(), value });
        traces.push(trace);
    }
    Ok(traces)
}

/// Scaled and offset resonator phase-shift trace, the single-tone stand-in
/// for two-tone qubit spectroscopy in the dispersive regime.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseShiftTrace {
    pub freqs: Vec<f64>,
    /// scale · Δφ + offset, with Δφ referenced to the first grid point.
    pub values: Vec<f64>,
    pub scale: f64,
    pub offset: f64,
    /// arg S11 at the first grid point, the Δφ reference.
    pub baseline_phase: f64,
    /// False when the dispersive precondition |ν_r − ν_k| > 3·max g is not met.
    pub dispersive_ok: bool,
}

/// Probe-swept phase shift across the qubit-like resonances:
/// returns scale·Δφ + offset with Δφ = arg S11 referenced to the first grid
/// point (phases unwrapped along the grid).
pub fn qubit_spectroscopy_trace(
    config: &SystemConfig,
    grid: &[f64],
    scale: f64,
    offset: f64,
) -> Result<PhaseShiftTrace, SteadyError> {
    let trace = spectrum_trace(config, grid)?;
    let g_max = config.couplings.iter().copied().fold(0.0, f64::max);
    let dispersive_ok = config.dqds.iter().all(|d| {
        (config.resonator.omega_r - qubit_frequency(d)).abs() > 3.0 * g_max
    });
    let phases = trace.phase();
    let mut unwrapped = Vec::with_capacity(phases.len());
    let mut acc = phases[0];
    unwrapped.push(acc);
    for w in phases.windows(2) {
        let mut d = w[1] - w[0];
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        acc += d;
        unwrapped.push(acc);
    }
    let baseline = unwrapped[0];
    let values = unwrapped.iter().map(|p| scale * (p - baseline) + offset).collect();
    Ok(PhaseShiftTrace {
        freqs: grid.to_vec(),
        values,
        scale,
        offset,
        baseline_phase: baseline,
        dispersive_ok,
    })
}

/// Relative change of ⟨a†a⟩ and max |S11| change when the Fock cutoff is
/// incremented; used to verify the truncation convergence contract.
pub struct FockConvergence {
    pub photon_rel_change: f64,
    pub s11_abs_change: f64,
}

pub fn fock_convergence(config: &SystemConfig, nu_p: f64) -> Result<FockConvergence, SteadyError> {
    let evaluate = |cutoff: usize| -> Result<(f64, Complex64), SteadyError> {
        let mut cfg = config.clone();
        cfg.layout.fock_cutoff = cutoff;
        let family = LiouvillianFamily::new(&cfg)?;
        let liou = family.liouvillian_at(nu_p);
        let rho = steady_state(&liou)?;
        let (beta, _) = scattering(&rho, family.monitored_op());
        Ok((photon_number(&rho, &cfg), beta / cfg.probe.alpha))
    };
    let (n0, s0) = evaluate(config.layout.fock_cutoff)?;
    let (n1, s1) = evaluate(config.layout.fock_cutoff + 1)?;
    Ok(FockConvergence {
        photon_rel_change: (n1 - n0).abs() / n1.abs().max(1e-300),
        s11_abs_change: (s1 - s0).norm(),
    })
}

/// Inclusive linearly spaced grid.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let step = (stop - start) / (count as f64 - 1.0);
    (0..count).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProbeParams, ResonatorParams};
    use crate::operators::{fock_destroy, identity, sigma_minus, HilbertLayout};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn cavity_config(alpha: f64, cutoff: usize) -> SystemConfig {
        SystemConfig {
            resonator: ResonatorParams { omega_r: 5170.0, kappa_int: 17.0, kappa_ext: 6.0 },
            dqds: vec![],
            couplings: vec![],
            probe: ProbeParams { omega_p: 5170.0, alpha: Complex64::new(alpha, 0.0) },
            layout: HilbertLayout { fock_cutoff: cutoff, num_qubits: 0 },
            rwa: true,
        }
    }

    /// Analytic single-port reflection with Δ = ν_p − ν_r.
    fn analytic_s11(kappa_int: f64, kappa_ext: f64, delta: f64) -> Complex64 {
        let num = Complex64::new((kappa_int - kappa_ext) / 2.0, delta);
        let den = Complex64::new((kappa_int + kappa_ext) / 2.0, delta);
        num / den
    }

    #[test]
    fn zero_hamiltonian_no_collapse_gives_zero_liouvillian() {
        let h = OperatorMatrix::zeros(4, 4);
        let liou = build_liouvillian(&h, &[]).unwrap();
        assert_abs_diff_eq!(liou.mat.norm_l2(), 0.0, epsilon = 1e-300);
    }

    #[test]
    fn decaying_qubit_relaxation_eigenvalue() {
        // single qubit with only √γ₁ σ₋: the |e⟩⟨e| component decays at γ₁
        let gamma1 = 3.0f64;
        let h = OperatorMatrix::zeros(2, 2);
        let c = sigma_minus() * Complex64::new(gamma1.sqrt(), 0.0);
        let liou = build_liouvillian(&h, &[c]).unwrap();
        // vec index of (1,1) under column stacking is 1*2+1 = 3
        let mut v = faer::Mat::<faer::c64>::zeros(4, 1);
        *v.get_mut(3, 0) = faer::c64::new(1.0, 0.0);
        let lv = &liou.mat * &v;
        assert_abs_diff_eq!(lv.get(3, 0).re, -gamma1, epsilon = 1e-12);
        // and population is transferred to (0,0)
        assert_abs_diff_eq!(lv.get(0, 0).re, gamma1, epsilon = 1e-12);
    }

    #[test]
    fn trace_vector_is_left_null() {
        let config = {
            let mut c = crate::model::tests::base_config(2);
            c.dqds[1].delta = 200.0;
            c.probe.omega_p = 5150.0;
            c
        };
        let h = build_hamiltonian(&config).unwrap();
        let collapse = build_collapse_ops(&config).unwrap();
        let liou = build_liouvillian(&h, &collapse.ops).unwrap();
        assert!(liou.trace_preservation_residual() < 1e-9);
    }

    #[test]
    fn undriven_decaying_qubit_relaxes_to_ground() {
        // resonator with loss plus one decaying qubit, no drive
        let mut config = crate::model::tests::base_config(1);
        config.probe.alpha = Complex64::new(0.0, 0.0);
        let h = build_hamiltonian(&config).unwrap();
        let collapse = build_collapse_ops(&config).unwrap();
        let liou = build_liouvillian(&h, &collapse.ops).unwrap();
        let rho = steady_state(&liou).unwrap();
        // ground state = |g, 0⟩ = index 0
        assert_abs_diff_eq!(rho.entries[(0, 0)].re, 1.0, epsilon = 1e-9);
        assert!(liou.residual(&rho) < 1e-8);
    }

    #[test]
    fn driven_cavity_matches_coherent_state_amplitude() {
        let config = cavity_config(0.3, 8);
        let family = LiouvillianFamily::new(&config).unwrap();
        for delta in [-40.0, -5.0, 0.0, 3.0, 25.0] {
            let nu_p = config.resonator.omega_r + delta;
            let liou = family.liouvillian_at(nu_p);
            let rho = steady_state(&liou).unwrap();
            let a = embed(&fock_destroy(8).unwrap(), 0, &config.layout).unwrap();
            let a_expect = rho.expect(&a);
            let k_tot = config.resonator.kappa_tot();
            let expected = -config.resonator.kappa_ext.sqrt() * config.probe.alpha
                / Complex64::new(k_tot / 2.0, delta);
            assert!((a_expect - expected).norm() < 1e-9, "delta {delta}: {a_expect} vs {expected}");
        }
    }

    #[test]
    fn empty_cavity_reflection_matches_single_port_formula() {
        let config = cavity_config(0.25, 7);
        for delta in [-230.0, -23.0, 0.0, 11.5, 230.0] {
            let s11 = reflection_coefficient(&config, config.resonator.omega_r + delta).unwrap();
            let expected = analytic_s11(17.0, 6.0, delta);
            assert!((s11 - expected).norm() < 1e-8, "delta {delta}: {s11} vs {expected}");
        }
        // on resonance the magnitude is (κ_int − κ_ext)/(κ_int + κ_ext) = 11/23
        let s11 = reflection_coefficient(&config, config.resonator.omega_r).unwrap();
        assert_abs_diff_eq!(s11.norm(), 11.0 / 23.0, epsilon = 1e-9);
    }

    #[test]
    fn scattering_on_vacuum_returns_input() {
        let layout = HilbertLayout { fock_cutoff: 5, num_qubits: 0 };
        let d = layout.dim();
        let mut vac = DMatrix::<Complex64>::zeros(d, d);
        vac[(0, 0)] = Complex64::new(1.0, 0.0);
        let rho = DensityMatrix { entries: vac };
        let alpha = Complex64::new(0.7, 0.0);
        let kappa = 6.0f64;
        let l = embed(&fock_destroy(5).unwrap(), 0, &layout).unwrap() * Complex64::new(kappa.sqrt(), 0.0)
            + identity(d) * alpha;
        let (beta, n) = scattering(&rho, &l);
        assert!((beta - alpha).norm() < 1e-12);
        assert_abs_diff_eq!(n, alpha.norm_sqr(), epsilon = 1e-12);
    }

    #[test]
    fn scattering_on_fock_state_has_no_amplitude() {
        let layout = HilbertLayout { fock_cutoff: 5, num_qubits: 0 };
        let d = layout.dim();
        let mut one = DMatrix::<Complex64>::zeros(d, d);
        one[(1, 1)] = Complex64::new(1.0, 0.0);
        let rho = DensityMatrix { entries: one };
        let kappa = 4.0f64;
        let l = embed(&fock_destroy(5).unwrap(), 0, &layout).unwrap() * Complex64::new(kappa.sqrt(), 0.0);
        let (beta, n) = scattering(&rho, &l);
        assert!(beta.norm() < 1e-12);
        assert_abs_diff_eq!(n, kappa, epsilon = 1e-12);
    }

    #[test]
    fn scattering_on_coherent_state() {
        // coherent-state ρ at cutoff 12: β = √κ z + α
        let cutoff = 12;
        let z = Complex64::new(0.4, -0.3);
        let mut ket = DVector::<Complex64>::zeros(cutoff);
        let mut amp = Complex64::new((-z.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..cutoff {
            ket[n] = amp;
            amp *= z / Complex64::new(((n + 1) as f64).sqrt(), 0.0);
        }
        let norm = ket.norm();
        let ket = ket / Complex64::new(norm, 0.0);
        let rho = DensityMatrix { entries: &ket * ket.adjoint() };
        let kappa = 6.0f64;
        let alpha = Complex64::new(0.9, 0.1);
        let layout = HilbertLayout { fock_cutoff: cutoff, num_qubits: 0 };
        let l = embed(&fock_destroy(cutoff).unwrap(), 0, &layout).unwrap()
            * Complex64::new(kappa.sqrt(), 0.0)
            + identity(cutoff) * alpha;
        let (beta, _) = scattering(&rho, &l);
        let expected = Complex64::new(kappa.sqrt(), 0.0) * z + alpha;
        assert!((beta - expected).norm() < 1e-9, "{beta} vs {expected}");
    }

    #[test]
    fn monitored_channel_expands_to_textbook_driven_cavity() {
        // −i[H_P, ·] + D[L] = κ_ext D[a] − i[H_d, ·] with
        // H_d = −i√κ_ext(α a† − α* a); compare full superoperators on a
        // 4-dimensional space.
        let layout = HilbertLayout { fock_cutoff: 4, num_qubits: 0 };
        let kappa_ext = 6.0f64;
        let alpha = Complex64::new(0.37, 0.0);
        let a = embed(&fock_destroy(4).unwrap(), 0, &layout).unwrap();
        let adag = a.adjoint();
        let eye = identity(4);

        let h_p = (&adag * alpha - &a * alpha.conj()) * Complex64::new(0.0, -0.5 * kappa_ext.sqrt());
        let l = &a * Complex64::new(kappa_ext.sqrt(), 0.0) + &eye * alpha;
        let slh = superoperator(&h_p, std::slice::from_ref(&l)).unwrap();

        let h_d = (&adag * alpha - &a * alpha.conj()) * Complex64::new(0.0, -kappa_ext.sqrt());
        let ck = &a * Complex64::new(kappa_ext.sqrt(), 0.0);
        let textbook = superoperator(&h_d, std::slice::from_ref(&ck)).unwrap();

        // D[L] carries a constant |α|² that cancels between the two forms
        let diff = &slh - &textbook;
        assert!(diff.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn spectrum_trace_single_point_matches_reflection() {
        let config = cavity_config(0.3, 5);
        let nu = config.resonator.omega_r + 4.0;
        let trace = spectrum_trace(&config, &[nu]).unwrap();
        let s11 = reflection_coefficient(&config, nu).unwrap();
        assert!((trace.s11[0] - s11).norm() < 1e-12);
    }

    #[test]
    fn spectrum_rejects_bad_grids() {
        let config = cavity_config(0.3, 5);
        assert!(matches!(spectrum_trace(&config, &[]), Err(SteadyError::EmptyGrid)));
        assert!(matches!(
            spectrum_trace(&config, &[1.0, 1.0]),
            Err(SteadyError::NonMonotoneGrid)
        ));
        let mut undriven = config;
        undriven.probe.alpha = Complex64::new(0.0, 0.0);
        assert!(matches!(spectrum_trace(&undriven, &[5170.0]), Err(SteadyError::ZeroProbe)));
    }

    #[test]
    fn csv_round_trip() {
        let config = cavity_config(0.3, 5);
        let grid = linspace(5150.0, 5190.0, 5);
        let trace = spectrum_trace(&config, &grid).unwrap();
        let text = trace.to_csv();
        assert!(text.starts_with(TRACE_CSV_HEADER));
        assert!(!text.contains('\r'));
        let rows = parse_trace_csv(&text).unwrap();
        assert_eq!(rows.len(), trace.len());
        for (row, i) in rows.iter().zip(0..) {
            assert!((row.s11 - trace.s11[i]).norm() < 1e-9);
            assert!((row.nu_p - trace.probe_freqs[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn sweep_metadata_records_value() {
        let mut config = crate::model::tests::base_config(1);
        config.layout.fock_cutoff = 3;
        let sweep = SweepSpec {
            path: ParamPath::parse("dqds[1].delta").unwrap(),
            values: vec![-100.0, 0.0, 100.0],
        };
        let grid = linspace(5150.0, 5190.0, 3);
        let traces = sweep_2d(&config, &sweep, &grid).unwrap();
        assert_eq!(traces.len(), 3);
        assert_eq!(traces[1].metadata.swept.as_ref().unwrap().value, 0.0);
        assert_eq!(traces[0].metadata.config.dqds[0].delta, -100.0);
        // one-value sweep reduces to spectrum_trace
        let single = sweep_2d(
            &config,
            &SweepSpec { path: ParamPath::parse("dqds[1].delta").unwrap(), values: vec![0.0] },
            &grid,
        )
        .unwrap();
        let direct = spectrum_trace(&config, &grid).unwrap();
        for i in 0..grid.len() {
            assert!((single[0].s11[i] - direct.s11[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_trace_flat_without_qubits() {
        // probe swept far below the resonator: phase shift referenced to the
        // first point stays near zero
        let config = cavity_config(0.2, 4);
        let grid = linspace(4860.0, 4890.0, 21);
        let trace = qubit_spectroscopy_trace(&config, &grid, 1.0, 0.0).unwrap();
        assert!(trace.dispersive_ok);
        assert!(trace.values.iter().all(|v| v.abs() < 5e-3), "{:?}", trace.values);
        // linearity in scale and offset
        let scaled = qubit_spectroscopy_trace(&config, &grid, 2.0, 0.5).unwrap();
        for (v, w) in trace.values.iter().zip(scaled.values.iter()) {
            assert_abs_diff_eq!(2.0 * v + 0.5, *w, epsilon = 1e-12);
        }
    }

    #[test]
    fn fmt_sig_is_stable() {
        assert_eq!(fmt_sig(5170.25), "5.17025000000e3");
        assert_eq!(fmt_sig(-0.5), "-5.00000000000e-1");
        assert_eq!(fmt_sig(0.0), "0.00000000000e0");
    }
}
