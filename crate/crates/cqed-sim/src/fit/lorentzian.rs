//! Multi-Lorentzian peak extraction: constant baseline plus
//! A_j (w_j/2)² / ((x − c_j)² + (w_j/2)²) per peak, amplitudes negative for
//! dips. Initial centers come from the most prominent local extrema.

use serde::Serialize;

use super::simplex::{minimize, SimplexOptions};
use super::{covariance_sigmas, FitError, MeasuredTrace};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeakEstimate {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub center_sigma: f64,
    pub width_sigma: f64,
    pub amplitude_sigma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LorentzianFit {
    pub baseline: f64,
    pub peaks: Vec<PeakEstimate>,
    pub residual_norm: f64,
}

fn lorentz(x: f64, c: f64, w: f64, a: f64) -> f64 {
    let hw = w / 2.0;
    a * hw * hw / ((x - c) * (x - c) + hw * hw)
}

fn model(params: &[f64], x: f64) -> f64 {
    let mut y = params[0];
    for p in params[1..].chunks_exact(3) {
        y += lorentz(x, p[0], p[1].abs(), p[2]);
    }
    y
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Candidate peak centers: interior local extrema ranked by prominence above
/// the median baseline, ties broken toward lower frequency.
fn initial_centers(trace: &MeasuredTrace, n_peaks: usize) -> Result<Vec<usize>, FitError> {
    let y = &trace.y;
    let baseline = median(y);
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for i in 1..y.len() - 1 {
        let is_min = y[i] < y[i - 1] && y[i] <= y[i + 1];
        let is_max = y[i] > y[i - 1] && y[i] >= y[i + 1];
        if is_min || is_max {
            let prominence = (y[i] - baseline).abs();
            if prominence > 0.0 {
                candidates.push((i, prominence));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| trace.x[a.0].partial_cmp(&trace.x[b.0]).unwrap())
    });
    if candidates.len() < n_peaks {
        return Err(FitError::UnderDeterminedInitialization {
            found: candidates.len(),
            requested: n_peaks,
        });
    }
    Ok(candidates.into_iter().take(n_peaks).map(|(i, _)| i).collect())
}

/// Fit a constant baseline plus `n_peaks` Lorentzians, with centers
/// initialized from the most prominent local extrema.
pub fn lorentzian_peaks(trace: &MeasuredTrace, n_peaks: usize) -> Result<LorentzianFit, FitError> {
    trace.validate()?;
    if n_peaks == 0 {
        return Err(FitError::InvalidProblem("n_peaks must be >= 1".into()));
    }
    let picks = initial_centers(trace, n_peaks)?;
    let centers: Vec<f64> = picks.iter().map(|&i| trace.x[i]).collect();
    lorentzian_peaks_at(trace, &centers)
}

/// Same fit with caller-supplied initial centers, for traces whose extrema
/// are not resolvable automatically.
pub fn lorentzian_peaks_at(trace: &MeasuredTrace, centers: &[f64]) -> Result<LorentzianFit, FitError> {
    trace.validate()?;
    if centers.is_empty() {
        return Err(FitError::InvalidProblem("at least one initial center required".into()));
    }
    let x = &trace.x;
    let y = &trace.y;
    let n = x.len();
    let span = x[n - 1] - x[0];
    let step = span / (n as f64 - 1.0).max(1.0);
    let baseline0 = median(y);
    let y_lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = (y_hi - y_lo).max(1e-12);

    let mut params = vec![baseline0];
    let mut lo = vec![y_lo - range];
    let mut hi = vec![y_hi + range];
    for &c0 in centers {
        let idx = x
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - c0).abs().partial_cmp(&(b.1 - c0).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let a0 = y[idx] - baseline0;
        // half-prominence crossing on each side gives the width scale
        let target = baseline0 + a0 / 2.0;
        let mut left = idx;
        while left > 0 && (y[left] - target).signum() == (y[idx] - target).signum() {
            left -= 1;
        }
        let mut right = idx;
        while right + 1 < n && (y[right] - target).signum() == (y[idx] - target).signum() {
            right += 1;
        }
        let w0 = ((x[right] - x[left]).abs()).max(2.0 * step);
        params.extend_from_slice(&[c0, w0, a0]);
        lo.extend_from_slice(&[x[0], step / 2.0, -4.0 * range]);
        hi.extend_from_slice(&[x[n - 1], 2.0 * span, 4.0 * range]);
    }

    let obj = |p: &[f64]| -> f64 {
        let mut ss = 0.0;
        for i in 0..n {
            let r = y[i] - model(p, x[i]);
            ss += r * r;
        }
        ss
    };
    let opts = SimplexOptions {
        max_iter: 2000,
        ftol: 1e-14,
        xtol: 1e-12,
        restarts: 2,
        seed: 5,
    };
    let res = minimize(obj, &params, &lo, &hi, &opts);

    let residuals: Vec<f64> = (0..n).map(|i| y[i] - model(&res.x, x[i])).collect();
    let jac = |p: &[f64]| -> Option<Vec<f64>> {
        Some((0..n).map(|i| y[i] - model(p, x[i])).collect())
    };
    let sigmas = covariance_sigmas(jac, &res.x, &residuals)
        .unwrap_or_else(|| vec![f64::INFINITY; res.x.len()]);

    let mut peaks: Vec<PeakEstimate> = res.x[1..]
        .chunks_exact(3)
        .zip(sigmas[1..].chunks_exact(3))
        .map(|(p, s)| PeakEstimate {
            center: p[0],
            width: p[1].abs(),
            amplitude: p[2],
            center_sigma: s[0],
            width_sigma: s[1],
            amplitude_sigma: s[2],
        })
        .collect();
    peaks.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    Ok(LorentzianFit {
        baseline: res.x[0],
        peaks,
        residual_norm: residuals.iter().map(|r| r * r).sum::<f64>().sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::TraceKind;
    use crate::steady::linspace;

    fn synthetic(centers: &[(f64, f64, f64)], baseline: f64, grid: &[f64]) -> MeasuredTrace {
        let y = grid
            .iter()
            .map(|&x| {
                baseline + centers.iter().map(|&(c, w, a)| lorentz(x, c, w, a)).sum::<f64>()
            })
            .collect();
        MeasuredTrace {
            x: grid.to_vec(),
            y,
            sigma: Some(1.0),
            kind: TraceKind::ReflectionMagnitude,
        }
    }

    #[test]
    fn recovers_single_noiseless_dip() {
        let grid = linspace(5100.0, 5240.0, 401);
        let trace = synthetic(&[(5171.0, 23.0, -0.6)], 1.0, &grid);
        let fit = lorentzian_peaks(&trace, 1).unwrap();
        assert_eq!(fit.peaks.len(), 1);
        let p = fit.peaks[0];
        assert!((p.center - 5171.0).abs() < 0.01, "center {}", p.center);
        assert!((p.width - 23.0).abs() / 23.0 < 0.01, "width {}", p.width);
        assert!(p.amplitude < 0.0);
    }

    #[test]
    fn flat_trace_fails_initialization() {
        let grid = linspace(0.0, 10.0, 51);
        let trace = MeasuredTrace {
            x: grid.clone(),
            y: vec![1.0; grid.len()],
            sigma: None,
            kind: TraceKind::ReflectionMagnitude,
        };
        assert!(matches!(
            lorentzian_peaks(&trace, 1),
            Err(FitError::UnderDeterminedInitialization { .. })
        ));
    }

    #[test]
    fn recovers_doublet_separation() {
        // Rabi-doublet-like pair split by 2g = 106.8
        let grid = linspace(5050.0, 5290.0, 481);
        let trace = synthetic(
            &[(5170.0 - 53.4, 16.0, -0.5), (5170.0 + 53.4, 16.0, -0.5)],
            1.0,
            &grid,
        );
        let fit = lorentzian_peaks(&trace, 2).unwrap();
        assert_eq!(fit.peaks.len(), 2);
        let sep = fit.peaks[1].center - fit.peaks[0].center;
        assert!((sep - 106.8).abs() < 0.5, "separation {sep}");
    }

    #[test]
    fn centers_invariant_under_offset_and_scale() {
        let grid = linspace(-50.0, 50.0, 301);
        let base = synthetic(&[(3.0, 8.0, -0.4)], 0.2, &grid);
        let mut shifted = base.clone();
        for v in shifted.y.iter_mut() {
            *v += 5.0;
        }
        let mut scaled = base.clone();
        for v in scaled.y.iter_mut() {
            *v *= 3.0;
        }
        let f0 = lorentzian_peaks(&base, 1).unwrap();
        let f1 = lorentzian_peaks(&shifted, 1).unwrap();
        let f2 = lorentzian_peaks(&scaled, 1).unwrap();
        assert!((f0.peaks[0].center - f1.peaks[0].center).abs() < 1e-3);
        assert!((f0.peaks[0].center - f2.peaks[0].center).abs() < 1e-3);
        assert!((f0.peaks[0].width - f2.peaks[0].width).abs() / f0.peaks[0].width < 1e-2);
        assert!((f2.peaks[0].amplitude / f0.peaks[0].amplitude - 3.0).abs() < 1e-2);
        assert!((f1.baseline - f0.baseline - 5.0).abs() < 1e-3);
    }
}
