//! Physical model: translates resonator/DQD parameters into the
//! rotating-frame Hamiltonian, collapse operators, and the monitored
//! scattering operator.
//!
//! All frequencies and rates are ν = ω/2π in MHz. Every formula in the model
//! is homogeneous of degree one in frequency, so the angular-frequency
//! expressions hold verbatim in these units.
//!
//! Sign convention: detunings entering the rotating-frame Hamiltonian are
//! taken as δν = ν_p − ν (probe minus system). This pins the empty-cavity
//! reflection to
//!   S11 = ((κ_int − κ_ext)/2 + iΔ) / ((κ_int + κ_ext)/2 + iΔ),  Δ = ν_p − ν_r,
//! so |S11| → 1 far off resonance and the on-resonance value is
//! (κ_int − κ_ext)/(κ_int + κ_ext).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{
    embed, fock_destroy, identity, pauli, sigma_minus, sigma_plus, HilbertLayout, OperatorError,
    OperatorMatrix, PauliAxis,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unsupported combination: the probe term is defined only in the rotating frame (rwa=true); set alpha = 0 to build the lab-frame Hamiltonian")]
    ProbeWithoutRotatingFrame,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid parameter path '{path}': {reason}")]
    InvalidPath { path: String, reason: String },
}

/// One double-quantum-dot charge qubit. `delta` is the charge detuning δ and
/// `t` the tunnel coupling, so the splitting at δ = 0 is 2t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqdParams {
    pub delta: f64,
    pub t: f64,
    pub gamma1: f64,
    pub gamma_phi: f64,
}

impl DqdParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.t > 0.0) {
            return Err(ModelError::InvalidConfig(format!("dqd tunnel coupling t must be > 0, got {}", self.t)));
        }
        if self.gamma1 < 0.0 || self.gamma_phi < 0.0 {
            return Err(ModelError::InvalidConfig("dqd rates gamma1 and gamma_phi must be >= 0".into()));
        }
        if !self.delta.is_finite() || !self.t.is_finite() {
            return Err(ModelError::InvalidConfig("dqd parameters must be finite".into()));
        }
        Ok(())
    }

    /// Total decoherence linewidth γ₂* = γ₁/2 + γ_φ.
    pub fn gamma2_star(&self) -> f64 {
        self.gamma1 / 2.0 + self.gamma_phi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub omega_r: f64,
    pub kappa_int: f64,
    pub kappa_ext: f64,
}

impl ResonatorParams {
    pub fn kappa_tot(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kappa_int < 0.0 {
            return Err(ModelError::InvalidConfig("kappa_int must be >= 0".into()));
        }
        if !(self.kappa_ext > 0.0) {
            return Err(ModelError::InvalidConfig("kappa_ext must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub omega_p: f64,
    pub alpha: Complex64,
}

impl ProbeParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(ModelError::InvalidConfig("probe amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// How qubit relaxation and dephasing rates are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    /// Use the rates stored on each [`DqdParams`] unchanged.
    ExplicitRates,
    /// Derive γ₁ = sin²θ C(ω) and γ_φ = cos²θ C(0) from a white-noise
    /// environmental spectral function.
    DerivedFromSpectrum,
}

/// White-noise environmental spectral function values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub c0: f64,
    pub c_omega: f64,
    pub mode: RateMode,
}

/// Full physical model of the coupled resonator + DQD system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub resonator: ResonatorParams,
    pub dqds: Vec<DqdParams>,
    pub couplings: Vec<f64>,
    pub probe: ProbeParams,
    pub layout: HilbertLayout,
    pub rwa: bool,
}

impl SystemConfig {
    pub fn num_dqds(&self) -> usize {
        self.dqds.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.resonator.validate()?;
        self.probe.validate()?;
        self.layout.validate()?;
        if self.dqds.len() > 2 {
            return Err(ModelError::InvalidConfig(format!(
                "at most two DQDs are supported, got {}",
                self.dqds.len()
            )));
        }
        if self.couplings.len() != self.dqds.len() {
            return Err(ModelError::InvalidConfig(format!(
                "couplings length {} must equal number of DQDs {}",
                self.couplings.len(),
                self.dqds.len()
            )));
        }
        if self.layout.num_qubits != self.dqds.len() {
            return Err(ModelError::InvalidConfig(format!(
                "layout.num_qubits {} must equal number of DQDs {}",
                self.layout.num_qubits,
                self.dqds.len()
            )));
        }
        for (k, d) in self.dqds.iter().enumerate() {
            d.validate().map_err(|e| ModelError::InvalidConfig(format!("dqds[{}]: {}", k + 1, e)))?;
        }
        for (k, &g) in self.couplings.iter().enumerate() {
            if g < 0.0 || !g.is_finite() {
                return Err(ModelError::InvalidConfig(format!("couplings[{}] must be >= 0", k + 1)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let cfg: SystemConfig = serde_json::from_str(text)
            .map_err(|e| ModelError::InvalidConfig(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Qubit transition frequency ν = √(4t² + δ²).
pub fn qubit_frequency(dqd: &DqdParams) -> f64 {
    (4.0 * dqd.t * dqd.t + dqd.delta * dqd.delta).sqrt()
}

/// Mixing angle of the DQD eigenbasis: (sin θ, cos θ) = (2t/ν, δ/ν).
pub fn mixing_angle(dqd: &DqdParams) -> (f64, f64) {
    let nu = qubit_frequency(dqd);
    (2.0 * dqd.t / nu, dqd.delta / nu)
}

/// Relaxation and pure-dephasing rates (γ₁, γ_φ). In explicit mode the stored
/// rates are returned unchanged; in spectrum mode they follow
/// γ₁ = sin²θ C(ω) and γ_φ = cos²θ C(0).
pub fn decay_rates(dqd: &DqdParams, noise: &NoiseSpectrum) -> (f64, f64) {
    match noise.mode {
        RateMode::ExplicitRates => (dqd.gamma1, dqd.gamma_phi),
        RateMode::DerivedFromSpectrum => {
            let (sin_th, cos_th) = mixing_angle(dqd);
            (sin_th * sin_th * noise.c_omega, cos_th * cos_th * noise.c0)
        }
    }
}

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Rotating-frame (rwa = true) or lab-frame (rwa = false) Hamiltonian.
///
/// With `rwa = true` the frame rotates at the probe frequency and
///   H = δν_r a†a − ½ Σ_k δν_k σ_z^(k)
///       + Σ_k g_k sinθ_k (σ₋^(k) a† + σ₊^(k) a) + H_P,
/// with δν = ν_p − ν (see the module note on the sign convention) and the
/// probe term H_P = (1/2i)√κ_ext (α a† − α* a).
///
/// With `rwa = false` the full lab-frame coupling
/// g_k (sinθ_k σ_x + cosθ_k σ_z)(a† + a) is kept; this form exists for
/// eigenvalue cross-checks only and requires α = 0.
pub fn build_hamiltonian(config: &SystemConfig) -> Result<OperatorMatrix, ModelError> {
    config.validate()?;
    let layout = config.layout;
    let dim = layout.dim();
    let a = embed(&fock_destroy(layout.fock_cutoff)?, 0, &layout)?;
    let adag = a.adjoint();

    let mut h = OperatorMatrix::zeros(dim, dim);

    if config.rwa {
        let nu_p = config.probe.omega_p;
        let d_nu_r = nu_p - config.resonator.omega_r;
        h += (&adag * &a) * cplx(d_nu_r, 0.0);
        for (k, dqd) in config.dqds.iter().enumerate() {
            let slot = k + 1;
            let nu_k = qubit_frequency(dqd);
            let (sin_th, _) = mixing_angle(dqd);
            let d_nu_k = nu_p - nu_k;
            let sz = embed(&pauli(PauliAxis::Z), slot, &layout)?;
            h += sz * cplx(-0.5 * d_nu_k, 0.0);
            let sm = embed(&sigma_minus(), slot, &layout)?;
            let sp = embed(&sigma_plus(), slot, &layout)?;
            let g_eff = config.couplings[k] * sin_th;
            h += (&sm * &adag + &sp * &a) * cplx(g_eff, 0.0);
        }
        // SLH probe term; the other half of the drive comes from D[L].
        let alpha = config.probe.alpha;
        if alpha.norm() > 0.0 {
            let pref = cplx(0.0, -0.5) * config.resonator.kappa_ext.sqrt();
            h += (&adag * alpha - &a * alpha.conj()) * pref;
        }
    } else {
        if config.probe.alpha.norm() > 0.0 {
            return Err(ModelError::ProbeWithoutRotatingFrame);
        }
        h += (&adag * &a) * cplx(config.resonator.omega_r, 0.0);
        let x_res = &adag + &a;
        for (k, dqd) in config.dqds.iter().enumerate() {
            let slot = k + 1;
            let nu_k = qubit_frequency(dqd);
            let (sin_th, cos_th) = mixing_angle(dqd);
            let sz_local = pauli(PauliAxis::Z);
            let sx_local = pauli(PauliAxis::X);
            let sz = embed(&sz_local, slot, &layout)?;
            h += &sz * cplx(-0.5 * nu_k, 0.0);
            let dipole = embed(&(sx_local * cplx(sin_th, 0.0) + sz_local * cplx(cos_th, 0.0)), slot, &layout)?;
            h += (&dipole * &x_res) * cplx(config.couplings[k], 0.0);
        }
    }
    Ok(h)
}

/// The set of Lindblad collapse channels, with the scattering operator
/// L = √κ_ext a + α·1 flagged as the monitored channel.
#[derive(Clone, Debug)]
pub struct CollapseSet {
    /// All channels in order: per-DQD relaxation √γ₁ σ₋, per-DQD dephasing
    /// √(γ_φ/2) σ_z, internal loss √κ_int a, then the monitored channel L.
    pub ops: Vec<OperatorMatrix>,
    /// Index of L in `ops`.
    pub monitored: usize,
}

impl CollapseSet {
    pub fn monitored_op(&self) -> &OperatorMatrix {
        &self.ops[self.monitored]
    }
}

/// Collapse operators for the master equation, including the monitored
/// scattering channel L = √κ_ext a + α·1.
pub fn build_collapse_ops(config: &SystemConfig) -> Result<CollapseSet, ModelError> {
    config.validate()?;
    let layout = config.layout;
    let dim = layout.dim();
    let a = embed(&fock_destroy(layout.fock_cutoff)?, 0, &layout)?;

    let mut ops = Vec::new();
    for (k, dqd) in config.dqds.iter().enumerate() {
        let slot = k + 1;
        if dqd.gamma1 > 0.0 {
            let sm = embed(&sigma_minus(), slot, &layout)?;
            ops.push(sm * cplx(dqd.gamma1.sqrt(), 0.0));
        }
        if dqd.gamma_phi > 0.0 {
            let sz = embed(&pauli(PauliAxis::Z), slot, &layout)?;
            ops.push(sz * cplx((dqd.gamma_phi / 2.0).sqrt(), 0.0));
        }
    }
    if config.resonator.kappa_int > 0.0 {
        ops.push(&a * cplx(config.resonator.kappa_int.sqrt(), 0.0));
    }
    let l_op = &a * cplx(config.resonator.kappa_ext.sqrt(), 0.0)
        + identity(dim) * config.probe.alpha;
    ops.push(l_op);
    let monitored = ops.len() - 1;
    Ok(CollapseSet { ops, monitored })
}

/// Addresses one scalar inside a [`SystemConfig`], e.g. `resonator.omega_r`,
/// `dqds[2].delta` (DQD indices are 1-based), `couplings[1]`, `probe.omega_p`,
/// or `probe.alpha` (the real part; α is real by convention).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamPath {
    ResonatorOmega,
    ResonatorKappaInt,
    ResonatorKappaExt,
    DqdDelta(usize),
    DqdT(usize),
    DqdGamma1(usize),
    DqdGammaPhi(usize),
    Coupling(usize),
    ProbeOmega,
    ProbeAlpha,
}

impl ParamPath {
    pub fn parse(path: &str) -> Result<Self, ModelError> {
        let err = |reason: &str| ModelError::InvalidPath { path: path.into(), reason: reason.into() };
        match path {
            "resonator.omega_r" => return Ok(Self::ResonatorOmega),
            "resonator.kappa_int" => return Ok(Self::ResonatorKappaInt),
            "resonator.kappa_ext" => return Ok(Self::ResonatorKappaExt),
            "probe.omega_p" => return Ok(Self::ProbeOmega),
            "probe.alpha" => return Ok(Self::ProbeAlpha),
            _ => {}
        }
        let parse_index = |inner: &str| -> Result<usize, ModelError> {
            let idx: usize = inner
                .parse()
                .map_err(|_| err("index must be an integer"))?;
            if idx == 0 {
                return Err(err("DQD and coupling indices are 1-based"));
            }
            Ok(idx)
        };
        if let Some(rest) = path.strip_prefix("dqds[") {
            let (idx_str, field) = rest
                .split_once("].")
                .ok_or_else(|| err("expected dqds[k].field"))?;
            let k = parse_index(idx_str)?;
            return match field {
                "delta" => Ok(Self::DqdDelta(k)),
                "t" => Ok(Self::DqdT(k)),
                "gamma1" => Ok(Self::DqdGamma1(k)),
                "gamma_phi" => Ok(Self::DqdGammaPhi(k)),
                _ => Err(err("unknown DQD field; expected delta, t, gamma1 or gamma_phi")),
            };
        }
        if let Some(rest) = path.strip_prefix("couplings[") {
            let idx_str = rest.strip_suffix(']').ok_or_else(|| err("expected couplings[k]"))?;
            return Ok(Self::Coupling(parse_index(idx_str)?));
        }
        Err(err("unknown parameter path"))
    }

    fn dqd_index(k: usize, config: &SystemConfig, path: &str) -> Result<usize, ModelError> {
        if k == 0 || k > config.dqds.len() {
            return Err(ModelError::InvalidPath {
                path: path.into(),
                reason: format!("index {} out of range for {} DQD(s)", k, config.dqds.len()),
            });
        }
        Ok(k - 1)
    }

    pub fn get(&self, config: &SystemConfig) -> Result<f64, ModelError> {
        let p = self.to_string();
        Ok(match self {
            Self::ResonatorOmega => config.resonator.omega_r,
            Self::ResonatorKappaInt => config.resonator.kappa_int,
            Self::ResonatorKappaExt => config.resonator.kappa_ext,
            Self::ProbeOmega => config.probe.omega_p,
            Self::ProbeAlpha => config.probe.alpha.re,
            Self::DqdDelta(k) => config.dqds[Self::dqd_index(*k, config, &p)?].delta,
            Self::DqdT(k) => config.dqds[Self::dqd_index(*k, config, &p)?].t,
            Self::DqdGamma1(k) => config.dqds[Self::dqd_index(*k, config, &p)?].gamma1,
            Self::DqdGammaPhi(k) => config.dqds[Self::dqd_index(*k, config, &p)?].gamma_phi,
            Self::Coupling(k) => config.couplings[Self::dqd_index(*k, config, &p)?],
        })
    }

    pub fn set(&self, config: &mut SystemConfig, value: f64) -> Result<(), ModelError> {
        let p = self.to_string();
        match self {
            Self::ResonatorOmega => config.resonator.omega_r = value,
            Self::ResonatorKappaInt => config.resonator.kappa_int = value,
            Self::ResonatorKappaExt => config.resonator.kappa_ext = value,
            Self::ProbeOmega => config.probe.omega_p = value,
            Self::ProbeAlpha => config.probe.alpha = cplx(value, 0.0),
            Self::DqdDelta(k) => {
                let i = Self::dqd_index(*k, config, &p)?;
                config.dqds[i].delta = value;
            }
            Self::DqdT(k) => {
                let i = Self::dqd_index(*k, config, &p)?;
                config.dqds[i].t = value;
            }
            Self::DqdGamma1(k) => {
                let i = Self::dqd_index(*k, config, &p)?;
                config.dqds[i].gamma1 = value;
            }
            Self::DqdGammaPhi(k) => {
                let i = Self::dqd_index(*k, config, &p)?;
                config.dqds[i].gamma_phi = value;
            }
            Self::Coupling(k) => {
                let i = Self::dqd_index(*k, config, &p)?;
                config.couplings[i] = value;
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for ParamPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ResonatorOmega => write!(f, "resonator.omega_r"),
            Self::ResonatorKappaInt => write!(f, "resonator.kappa_int"),
            Self::ResonatorKappaExt => write!(f, "resonator.kappa_ext"),
            Self::ProbeOmega => write!(f, "probe.omega_p"),
            Self::ProbeAlpha => write!(f, "probe.alpha"),
            Self::DqdDelta(k) => write!(f, "dqds[{k}].delta"),
            Self::DqdT(k) => write!(f, "dqds[{k}].t"),
            Self::DqdGamma1(k) => write!(f, "dqds[{k}].gamma1"),
            Self::DqdGammaPhi(k) => write!(f, "dqds[{k}].gamma_phi"),
            Self::Coupling(k) => write!(f, "couplings[{k}]"),
        }
    }
}

impl TryFrom<String> for ParamPath {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        ParamPath::parse(&s).map_err(|e| e.to_string())
    }
}

impl From<ParamPath> for String {
    fn from(p: ParamPath) -> String {
        p.to_string()
    }
}
