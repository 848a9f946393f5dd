//! Staged parameter extraction: Lorentzian peak positions, Hamiltonian fits
//! to resonance positions, and full master-equation least-squares fits, plus
//! synthetic-dataset generation for round-trip validation.

pub mod lorentzian;
pub mod simplex;

pub use lorentzian::{lorentzian_peaks, lorentzian_peaks_at, LorentzianFit, PeakEstimate};
pub use simplex::{SimplexOptions, SimplexResult};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::one_excitation_transitions;
use crate::model::{ModelError, ParamPath, SystemConfig};
use crate::steady::{
    parse_trace_csv, qubit_spectroscopy_trace, spectrum_trace, SteadyError, SweepSpec,
};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
    #[error("under-determined initialization: found {found} local extrema, need {requested} (supply initial centers)")]
    UnderDeterminedInitialization { found: usize, requested: usize },
    #[error("trace data error: {0}")]
    BadTrace(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Steady(#[from] SteadyError),
}

/// What a measured trace records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    /// |S11| versus probe frequency.
    ReflectionMagnitude,
    /// Resonator phase shift Δφ (radians) versus probe frequency.
    PhaseShift,
}

/// Measured (or synthetic) line cut to be fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasuredTrace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Per-point noise level; estimated from the trace tails when absent.
    pub sigma: Option<f64>,
    pub kind: TraceKind,
}

impl MeasuredTrace {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.x.len() != self.y.len() {
            return Err(FitError::BadTrace("x and y lengths differ".into()));
        }
        if self.x.len() < 3 {
            return Err(FitError::BadTrace("trace needs at least 3 points".into()));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FitError::BadTrace("grid must be strictly increasing".into()));
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(FitError::BadTrace("non-finite values".into()));
        }
        Ok(())
    }

    /// Noise estimate: the stored sigma, or the standard deviation of
    /// first differences over the outer 20% of points divided by √2
    /// (insensitive to a smooth baseline).
    pub fn sigma_estimate(&self) -> f64 {
        if let Some(s) = self.sigma {
            if s > 0.0 {
                return s;
            }
        }
        let n = self.y.len();
        let tail = (n / 10).max(3).min(n / 2);
        let mut diffs: Vec<f64> = Vec::new();
        for w in self.y[..tail].windows(2) {
            diffs.push(w[1] - w[0]);
        }
        for w in self.y[n - tail..].windows(2) {
            diffs.push(w[1] - w[0]);
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (diffs.len() as f64 - 1.0).max(1.0);
        let est = (var / 2.0).sqrt();
        let scale = self.y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        est.max(1e-9 * scale)
    }

    /// Parse the `x,y[,sigma]` CSV variant (header optional).
    pub fn from_xy_csv(text: &str, kind: TraceKind) -> Result<Self, FitError> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut sigmas = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
            if i == 0 && fields[0].parse::<f64>().is_err() {
                continue; // header row
            }
            if fields.len() < 2 {
                return Err(FitError::BadTrace(format!("line {}: expected x,y[,sigma]", i + 1)));
            }
            let parse = |s: &str| -> Result<f64, FitError> {
                s.parse().map_err(|_| FitError::BadTrace(format!("line {}: bad number '{s}'", i + 1)))
            };
            x.push(parse(fields[0])?);
            y.push(parse(fields[1])?);
            if fields.len() >= 3 {
                sigmas.push(parse(fields[2])?);
            }
        }
        let sigma = if sigmas.is_empty() {
            None
        } else {
            Some(sigmas.iter().sum::<f64>() / sigmas.len() as f64)
        };
        let trace = Self { x, y, sigma, kind };
        trace.validate()?;
        Ok(trace)
    }

    /// Ingest the simulator trace CSV. Reflection traces take |S11|; phase
    /// traces take the unwrapped phase column referenced to the first point.
    pub fn from_trace_csv(text: &str, kind: TraceKind) -> Result<Self, FitError> {
        let rows = parse_trace_csv(text)?;
        let x: Vec<f64> = rows.iter().map(|r| r.nu_p).collect();
        let y: Vec<f64> = match kind {
            TraceKind::ReflectionMagnitude => rows.iter().map(|r| r.abs).collect(),
            TraceKind::PhaseShift => {
                let mut acc = 0.0;
                let mut prev = rows.first().map(|r| r.phase).unwrap_or(0.0);
                rows.iter()
                    .map(|r| {
                        let mut d = r.phase - prev;
                        while d > std::f64::consts::PI {
                            d -= 2.0 * std::f64::consts::PI;
                        }
                        while d < -std::f64::consts::PI {
                            d += 2.0 * std::f64::consts::PI;
                        }
                        prev = r.phase;
                        acc += d;
                        acc
                    })
                    .collect()
            }
        };
        let trace = Self { x, y, sigma: None, kind };
        trace.validate()?;
        Ok(trace)
    }

    /// Detect the schema from the header line and parse accordingly.
    pub fn from_csv_auto(text: &str, kind: TraceKind) -> Result<Self, FitError> {
        if text.lines().next().map(|l| l.trim().starts_with("nu_p_MHz")).unwrap_or(false) {
            Self::from_trace_csv(text, kind)
        } else {
            Self::from_xy_csv(text, kind)
        }
    }
}

/// A parameter to be optimized, with its starting point and box bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeParam {
    pub path: ParamPath,
    pub initial: f64,
    pub min: f64,
    pub max: f64,
}

/// One trace with the config overrides that describe the line cut it was
/// taken at (e.g. the swept detuning value).
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub trace: MeasuredTrace,
    pub overrides: Vec<(ParamPath, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub ftol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 300, restarts: 3, seed: 7, ftol: 1e-10 }
    }
}

/// One master-equation fit: a config template, the free parameters, and the
/// traces entering the weighted least-squares objective.
#[derive(Clone, Debug)]
pub struct FitProblem {
    pub template: SystemConfig,
    pub free: Vec<FreeParam>,
    pub traces: Vec<TraceEntry>,
    pub stage: String,
    pub options: FitOptions,
}

/// A single estimated or echoed parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitEstimate {
    pub parameter: String,
    pub value: f64,
    pub uncertainty: f64,
    pub fixed: bool,
    /// Which stage produced the value; "input" for template values never fit.
    pub stage: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub stage: String,
    pub estimates: Vec<FitEstimate>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn value_of(&self, parameter: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.parameter == parameter).map(|e| e.value)
    }

    pub fn uncertainty_of(&self, parameter: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.parameter == parameter).map(|e| e.uncertainty)
    }
}

/// Central-difference Jacobian of a residual vector function, then 1σ
/// uncertainties from (JᵀJ)⁻¹ scaled by the reduced chi-square.
pub(crate) fn covariance_sigmas<F: FnMut(&[f64]) -> Option<Vec<f64>>>(
    mut residuals: F,
    x: &[f64],
    r0: &[f64],
) -> Option<Vec<f64>> {
    let k = x.len();
    let n = r0.len();
    if k == 0 {
        return Some(vec![]);
    }
    let mut jac = DMatrix::<f64>::zeros(n, k);
    for j in 0..k {
        let step = (x[j].abs() * 1e-6).max(1e-8);
        let mut xp = x.to_vec();
        xp[j] += step;
        let mut xm = x.to_vec();
        xm[j] -= step;
        let rp = residuals(&xp)?;
        let rm = residuals(&xm)?;
        if rp.len() != n || rm.len() != n {
            return None;
        }
        for i in 0..n {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    let jtj = jac.transpose() * &jac;
    let inv = jtj.try_inverse()?;
    let ssr: f64 = r0.iter().map(|r| r * r).sum();
    let dof = (n.saturating_sub(k)).max(1) as f64;
    let s2 = ssr / dof;
    Some((0..k).map(|i| (inv[(i, i)].max(0.0) * s2).sqrt()).collect())
}

fn enumerate_template_paths(config: &SystemConfig) -> Vec<ParamPath> {
    let mut paths = vec![
        ParamPath::ResonatorOmega,
        ParamPath::ResonatorKappaInt,
        ParamPath::ResonatorKappaExt,
        ParamPath::ProbeAlpha,
    ];
    for k in 1..=config.num_dqds() {
        paths.push(ParamPath::DqdDelta(k));
        paths.push(ParamPath::DqdT(k));
        paths.push(ParamPath::DqdGamma1(k));
        paths.push(ParamPath::DqdGammaPhi(k));
        paths.push(ParamPath::Coupling(k));
    }
    paths
}

/// Names of the nuisance parameters appended for phase-shift traces.
fn nuisance_names(trace_index: usize) -> (String, String) {
    (format!("traces[{trace_index}].scale"), format!("traces[{trace_index}].offset"))
}

struct ParamLayout {
    /// (label, min, max, initial)
    entries: Vec<(String, f64, f64, f64)>,
    n_config: usize,
    /// per phase-shift trace: (trace index, scale slot, offset slot)
    nuisance: Vec<(usize, usize, usize)>,
}

fn build_layout(problem: &FitProblem) -> Result<ParamLayout, FitError> {
    if problem.free.is_empty() {
        return Err(FitError::InvalidProblem("at least one free parameter required".into()));
    }
    let mut entries = Vec::new();
    for fp in &problem.free {
        if !(fp.min < fp.max) || !fp.initial.is_finite() {
            return Err(FitError::InvalidProblem(format!(
                "free parameter {} needs finite bounds with min < max",
                fp.path
            )));
        }
        fp.path.get(&problem.template)?;
        entries.push((fp.path.to_string(), fp.min, fp.max, fp.initial.clamp(fp.min, fp.max)));
    }
    let n_config = entries.len();
    let mut nuisance = Vec::new();
    for (t, entry) in problem.traces.iter().enumerate() {
        entry.trace.validate()?;
        if entry.trace.kind == TraceKind::PhaseShift {
            let (s_name, o_name) = nuisance_names(t);
            let scale_slot = entries.len();
            entries.push((s_name, -1e3, 1e3, 1.0));
            let offset_slot = entries.len();
            entries.push((o_name, -50.0, 50.0, 0.0));
            nuisance.push((t, scale_slot, offset_slot));
        }
    }
    if problem.traces.is_empty() {
        return Err(FitError::InvalidProblem("at least one trace required".into()));
    }
    Ok(ParamLayout { entries, n_config, nuisance })
}

fn apply_params(
    problem: &FitProblem,
    layout: &ParamLayout,
    theta: &[f64],
    entry: &TraceEntry,
) -> Result<SystemConfig, FitError> {
    let mut cfg = problem.template.clone();
    for (path, value) in &entry.overrides {
        path.set(&mut cfg, *value)?;
    }
    for (i, fp) in problem.free.iter().enumerate() {
        fp.path.set(&mut cfg, theta[i])?;
    }
    let _ = layout;
    Ok(cfg)
}

/// Weighted residual vector across all traces of the problem, or None when
/// the simulator fails at this parameter point.
fn residual_vector(problem: &FitProblem, layout: &ParamLayout, theta: &[f64]) -> Option<Vec<f64>> {
    let mut residuals = Vec::new();
    for (t, entry) in problem.traces.iter().enumerate() {
        let cfg = apply_params(problem, layout, theta, entry).ok()?;
        if cfg.validate().is_err() {
            return None;
        }
        let sigma = entry.trace.sigma_estimate();
        match entry.trace.kind {
            TraceKind::ReflectionMagnitude => {
                let sim = spectrum_trace(&cfg, &entry.trace.x).ok()?;
                for (i, s) in sim.s11.iter().enumerate() {
                    residuals.push((entry.trace.y[i] - s.norm()) / sigma);
                }
            }
            TraceKind::PhaseShift => {
                let (scale, offset) = layout
                    .nuisance
                    .iter()
                    .find(|(idx, _, _)| *idx == t)
                    .map(|&(_, s, o)| (theta[s], theta[o]))
                    .unwrap_or((1.0, 0.0));
                let sim = qubit_spectroscopy_trace(&cfg, &entry.trace.x, scale, offset).ok()?;
                for (i, v) in sim.values.iter().enumerate() {
                    residuals.push((entry.trace.y[i] - v) / sigma);
                }
            }
        }
    }
    Some(residuals)
}

/// Derivative-free least-squares fit of the full master-equation model to
/// the measured traces. Phase-shift traces carry scale and offset nuisance
/// parameters appended automatically.
pub fn master_equation_fit(problem: &FitProblem) -> Result<FitResult, FitError> {
    problem.template.validate()?;
    let layout = build_layout(problem)?;
    let x0: Vec<f64> = layout.entries.iter().map(|e| e.3).collect();
    let lo: Vec<f64> = layout.entries.iter().map(|e| e.1).collect();
    let hi: Vec<f64> = layout.entries.iter().map(|e| e.2).collect();

    let objective = |theta: &[f64]| -> f64 {
        match residual_vector(problem, &layout, theta) {
            Some(r) => r.iter().map(|v| v * v).sum(),
            None => f64::INFINITY,
        }
    };
    let opts = SimplexOptions {
        max_iter: problem.options.max_iter,
        ftol: problem.options.ftol,
        xtol: 1e-10,
        restarts: problem.options.restarts,
        seed: problem.options.seed,
    };
    let res = simplex::minimize(objective, &x0, &lo, &hi, &opts);

    if !res.fx.is_finite() {
        return Ok(FitResult {
            stage: problem.stage.clone(),
            estimates: vec![],
            residual_norm: f64::INFINITY,
            iterations: res.iterations,
            evaluations: res.evaluations,
            converged: false,
        });
    }

    let r0 = residual_vector(problem, &layout, &res.x)
        .ok_or_else(|| FitError::InvalidProblem("residuals undefined at optimum".into()))?;
    let sigmas = covariance_sigmas(
        |theta| residual_vector(problem, &layout, theta),
        &res.x,
        &r0,
    )
    .unwrap_or_else(|| vec![f64::INFINITY; res.x.len()]);

    let mut estimates = Vec::new();
    for (i, (name, _, _, _)) in layout.entries.iter().enumerate() {
        estimates.push(FitEstimate {
            parameter: name.clone(),
            value: res.x[i],
            uncertainty: sigmas[i],
            fixed: false,
            stage: problem.stage.clone(),
        });
    }
    // echo the remaining template scalars as fixed
    let free_names: Vec<String> = layout.entries[..layout.n_config]
        .iter()
        .map(|e| e.0.clone())
        .collect();
    for path in enumerate_template_paths(&problem.template) {
        let name = path.to_string();
        if !free_names.contains(&name) {
            estimates.push(FitEstimate {
                parameter: name,
                value: path.get(&problem.template)?,
                uncertainty: 0.0,
                fixed: true,
                stage: "input".into(),
            });
        }
    }

    Ok(FitResult {
        stage: problem.stage.clone(),
        estimates,
        residual_norm: r0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        iterations: res.iterations,
        evaluations: res.evaluations,
        converged: res.converged,
    })
}

/// Hamiltonian fit: match observed resonance positions against the
/// one-excitation transition frequencies as a control parameter varies.
#[derive(Clone, Debug)]
pub struct HamiltonianFitProblem {
    pub template: SystemConfig,
    /// The scalar swept in the experiment, e.g. `dqds[2].delta`.
    pub control: ParamPath,
    /// Optional multiplicative calibration from raw control units to MHz,
    /// fit simultaneously: (initial, min, max).
    pub control_scale: Option<(f64, f64, f64)>,
    pub free: Vec<FreeParam>,
    /// (control value, observed resonance MHz) pairs.
    pub data: Vec<(f64, f64)>,
    pub options: FitOptions,
}

/// Residuals: distance from each observed resonance to the nearest
/// one-excitation transition at its control setting.
fn hamiltonian_residuals(problem: &HamiltonianFitProblem, theta: &[f64]) -> Option<Vec<f64>> {
    let n_free = problem.free.len();
    let scale = if problem.control_scale.is_some() { theta[n_free] } else { 1.0 };
    let mut out = Vec::with_capacity(problem.data.len());
    for &(control, observed) in &problem.data {
        let mut cfg = problem.template.clone();
        for (i, fp) in problem.free.iter().enumerate() {
            fp.path.set(&mut cfg, theta[i]).ok()?;
        }
        problem.control.set(&mut cfg, scale * control).ok()?;
        if cfg.validate().is_err() {
            return None;
        }
        let transitions = one_excitation_transitions(&cfg);
        let nearest = transitions
            .iter()
            .map(|t| (t - observed).abs())
            .fold(f64::INFINITY, f64::min);
        out.push(nearest);
    }
    Some(out)
}

pub fn hamiltonian_fit(problem: &HamiltonianFitProblem) -> Result<FitResult, FitError> {
    problem.template.validate()?;
    let n_params = problem.free.len() + usize::from(problem.control_scale.is_some());
    if problem.data.len() < n_params + 1 {
        return Err(FitError::InvalidProblem(format!(
            "need at least {} data points for {} free parameters",
            n_params + 1,
            n_params
        )));
    }

    let mut x0 = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut names = Vec::new();
    for fp in &problem.free {
        if !(fp.min < fp.max) {
            return Err(FitError::InvalidProblem(format!("bad bounds for {}", fp.path)));
        }
        x0.push(fp.initial.clamp(fp.min, fp.max));
        lo.push(fp.min);
        hi.push(fp.max);
        names.push(fp.path.to_string());
    }
    if let Some((init, mn, mx)) = problem.control_scale {
        x0.push(init.clamp(mn, mx));
        lo.push(mn);
        hi.push(mx);
        names.push("control_scale".into());
    }

    // residual-only evaluation when nothing is free
    if x0.is_empty() {
        let r = hamiltonian_residuals(problem, &[])
            .ok_or_else(|| FitError::InvalidProblem("model evaluation failed".into()))?;
        return Ok(FitResult {
            stage: "hamiltonian".into(),
            estimates: vec![],
            residual_norm: r.iter().map(|v| v * v).sum::<f64>().sqrt(),
            iterations: 0,
            evaluations: 1,
            converged: true,
        });
    }

    let objective = |theta: &[f64]| -> f64 {
        match hamiltonian_residuals(problem, theta) {
            Some(r) => r.iter().map(|v| v * v).sum(),
            None => f64::INFINITY,
        }
    };
    let opts = SimplexOptions {
        max_iter: problem.options.max_iter,
        ftol: problem.options.ftol,
        xtol: 1e-12,
        restarts: problem.options.restarts,
        seed: problem.options.seed,
    };
    let res = simplex::minimize(objective, &x0, &lo, &hi, &opts);
    if !res.fx.is_finite() {
        return Ok(FitResult {
            stage: "hamiltonian".into(),
            estimates: vec![],
            residual_norm: f64::INFINITY,
            iterations: res.iterations,
            evaluations: res.evaluations,
            converged: false,
        });
    }
    let r0 = hamiltonian_residuals(problem, &res.x)
        .ok_or_else(|| FitError::InvalidProblem("residuals undefined at optimum".into()))?;
    let sigmas = covariance_sigmas(|t| hamiltonian_residuals(problem, t), &res.x, &r0)
        .unwrap_or_else(|| vec![f64::INFINITY; res.x.len()]);
    let estimates = names
        .iter()
        .zip(res.x.iter().zip(sigmas.iter()))
        .map(|(name, (&v, &s))| FitEstimate {
            parameter: name.clone(),
            value: v,
            uncertainty: s,
            fixed: false,
            stage: "hamiltonian".into(),
        })
        .collect();
    Ok(FitResult {
        stage: "hamiltonian".into(),
        estimates,
        residual_norm: r0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        iterations: res.iterations,
        evaluations: res.evaluations,
        converged: res.converged,
    })
}

/// Deterministic standard-normal sampler (Box-Muller on the ChaCha stream),
/// so synthetic datasets are bit-identical across runs and platforms.
struct NormalSampler {
    rng: ChaCha8Rng,
    cache: Option<f64>,
}

impl NormalSampler {
    fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), cache: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.cache.take() {
            return z;
        }
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cache = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Synthetic traces with the generating configuration recorded as ground
/// truth.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub traces: Vec<MeasuredTrace>,
    pub overrides: Vec<Vec<(ParamPath, f64)>>,
    pub truth: SystemConfig,
    pub sigma: f64,
    pub seed: u64,
}

/// Simulate traces and add seeded Gaussian noise: on the real and imaginary
/// parts of S11 for reflection traces, on Δφ for phase traces.
pub fn synthesize_dataset(
    config: &SystemConfig,
    sweep: Option<&SweepSpec>,
    grid: &[f64],
    kind: TraceKind,
    sigma: f64,
    seed: u64,
) -> Result<SyntheticDataset, FitError> {
    if sigma < 0.0 {
        return Err(FitError::InvalidProblem("noise sigma must be >= 0".into()));
    }
    let configs: Vec<(SystemConfig, Vec<(ParamPath, f64)>)> = match sweep {
        None => vec![(config.clone(), vec![])],
        Some(spec) => spec
            .values
            .iter()
            .map(|&v| {
                let mut cfg = config.clone();
                spec.path.set(&mut cfg, v)?;
                Ok((cfg, vec![(spec.path.clone(), v)]))
            })
            .collect::<Result<_, ModelError>>()?,
    };
    let mut traces = Vec::with_capacity(configs.len());
    let mut overrides = Vec::with_capacity(configs.len());
    for (t, (cfg, ovr)) in configs.into_iter().enumerate() {
        let mut sampler = NormalSampler::new(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let y = match kind {
            TraceKind::ReflectionMagnitude => {
                let sim = spectrum_trace(&cfg, grid)?;
                sim.s11
                    .iter()
                    .map(|s| {
                        (s + Complex64::new(sigma * sampler.next(), sigma * sampler.next())).norm()
                    })
                    .collect()
            }
            TraceKind::PhaseShift => {
                let sim = qubit_spectroscopy_trace(&cfg, grid, 1.0, 0.0)?;
                sim.values.iter().map(|v| v + sigma * sampler.next()).collect()
            }
        };
        traces.push(MeasuredTrace {
            x: grid.to_vec(),
            y,
            sigma: if sigma > 0.0 { Some(sigma) } else { None },
            kind,
        });
        overrides.push(ovr);
    }
    Ok(SyntheticDataset { traces, overrides, truth: config.clone(), sigma, seed })
}

/// Least-squares fit of 2J = A/Δ_r; returns (A, relative residual).
pub fn exchange_scaling_fit(points: &[(f64, f64)]) -> Result<(f64, f64), FitError> {
    if points.len() < 2 {
        return Err(FitError::InvalidProblem("need at least 2 (delta_r, 2J) points".into()));
    }
    if points.iter().any(|&(d, _)| d == 0.0) {
        return Err(FitError::InvalidProblem("delta_r = 0 point in scaling fit".into()));
    }
    let num: f64 = points.iter().map(|&(d, j)| j / d).sum();
    let den: f64 = points.iter().map(|&(d, _)| 1.0 / (d * d)).sum();
    let a = num / den;
    let ss_res: f64 = points.iter().map(|&(d, j)| (j - a / d).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|&(_, j)| j * j).sum();
    Ok((a, (ss_res / ss_tot.max(1e-300)).sqrt()))
}

/// One stage of the iterative extraction protocol: its free parameters and
/// the traces it fits. Parameters fit in earlier stages enter later stages
/// fixed at their fitted values.
#[derive(Clone, Debug)]
pub struct FitStage {
    pub name: String,
    pub free: Vec<FreeParam>,
    pub traces: Vec<TraceEntry>,
}

/// Run the staged protocol: after each stage the fitted values are written
/// into the template, and later results echo them as fixed with the stage
/// that produced them.
pub fn run_staged_fit(
    template: &SystemConfig,
    stages: &[FitStage],
    options: &FitOptions,
) -> Result<Vec<FitResult>, FitError> {
    let mut current = template.clone();
    let mut provenance: Vec<(String, String)> = Vec::new(); // (param, stage)
    let mut results = Vec::new();
    for stage in stages {
        let problem = FitProblem {
            template: current.clone(),
            free: stage.free.clone(),
            traces: stage.traces.clone(),
            stage: stage.name.clone(),
            options: options.clone(),
        };
        let mut result = master_equation_fit(&problem)?;
        // fold fitted values back into the template
        for fp in &stage.free {
            let name = fp.path.to_string();
            if let Some(v) = result.value_of(&name) {
                fp.path.set(&mut current, v)?;
                provenance.retain(|(p, _)| p != &name);
                provenance.push((name, stage.name.clone()));
            }
        }
        // annotate estimates fixed by earlier stages (the "*" convention)
        for est in result.estimates.iter_mut() {
            if est.fixed {
                if let Some((_, s)) = provenance.iter().find(|(p, _)| p == &est.parameter) {
                    if s != &stage.name {
                        est.stage = s.clone();
                    }
                }
            }
        }
        results.push(result);
    }
    Ok(results)
}
