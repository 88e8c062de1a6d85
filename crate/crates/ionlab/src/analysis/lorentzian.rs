//! Weighted Lorentzian line fitting for sideband spectra.

use crate::error::{Error, Result};
use crate::sequence::ScanResult;

use super::fitting::{nelder_mead, LeastSquaresProblem};

/// One fitted Lorentzian h·w²/((x−c)² + w²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianPeak {
    pub center: f64,
    pub height: f64,
    /// Half width at half maximum.
    pub width: f64,
    pub center_err: f64,
    pub height_err: f64,
    pub width_err: f64,
}

fn lorentzian_sum(params: &[f64], x: f64) -> f64 {
    params
        .chunks_exact(3)
        .map(|p| {
            let (c, h, w) = (p[0], p[1], p[2].abs().max(1e-300));
            h * w * w / ((x - c).powi(2) + w * w)
        })
        .sum()
}

/// Fit weights from shot errors: 1/σ with a floor keeping zero-count points
/// finite; empty (unweighted) for oracle-mode data.
pub(super) fn scan_weights(scan: &ScanResult) -> Vec<f64> {
    if scan.points.iter().all(|p| p.stderr == 0.0) {
        return Vec::new();
    }
    let shots = scan
        .points
        .iter()
        .map(|p| p.shots)
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let floor = 0.5 / shots.sqrt() / shots.sqrt().sqrt();
    scan.points
        .iter()
        .map(|p| 1.0 / p.stderr.max(floor))
        .collect()
}

/// Fit `n_peaks` Lorentzians to a scan by greedy peak seeding, a simplex
/// pass, and Levenberg–Marquardt refinement with shot-error weights.
pub fn fit_lorentzian_peaks(scan: &ScanResult, n_peaks: usize) -> Result<Vec<LorentzianPeak>> {
    if n_peaks == 0 {
        return Err(Error::fit("n_peaks must be at least 1"));
    }
    let x = &scan.values;
    let y: Vec<f64> = scan.points.iter().map(|p| p.p_est).collect();
    if x.len() < 3 * n_peaks + 1 {
        return Err(Error::fit("too few points for the requested peak count"));
    }
    let weights = scan_weights(scan);
    let span = x.last().unwrap() - x.first().unwrap();
    let min_dx = x
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min)
        .max(1e-12 * span.abs().max(1.0));
    // a scan cannot resolve widths below its own step; the floor keeps the
    // optimizer away from single-point spike solutions
    let width_floor = 0.7 * min_dx;
    let model = move |params: &[f64], x: f64| -> f64 {
        params
            .chunks_exact(3)
            .map(|p| {
                let (c, h, w) = (p[0], p[1], p[2].abs().max(width_floor));
                h * w * w / ((x - c).powi(2) + w * w)
            })
            .sum()
    };

    // greedy seeding on the running residual
    let mut params: Vec<f64> = Vec::with_capacity(3 * n_peaks);
    for _ in 0..n_peaks {
        let residual: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(&xk, &yk)| yk - lorentzian_sum(&params, xk))
            .collect();
        let (k_max, &r_max) = residual
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let half = r_max / 2.0;
        let mut w_est = min_dx;
        for off in 1..x.len() {
            let lo = k_max.checked_sub(off).map(|k| residual[k] < half);
            let hi = residual.get(k_max + off).map(|&r| r < half);
            if lo == Some(true) || hi == Some(true) {
                w_est = off as f64 * min_dx;
                break;
            }
        }
        params.extend_from_slice(&[x[k_max], r_max.max(1e-6), w_est]);
    }

    let problem = LeastSquaresProblem {
        model: &model,
        x,
        y: &y,
        weights: &weights,
    };
    let objective = |p: &[f64]| problem.chi2(p);
    let steps: Vec<f64> = params
        .chunks_exact(3)
        .flat_map(|p| [p[2].max(min_dx), 0.3 * p[1].abs().max(1e-3), 0.5 * p[2]])
        .collect();
    let coarse = nelder_mead(&objective, &params, &steps, 400);
    let fit = problem.refine(&coarse, 200)?;

    if fit.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::fit(format!(
            "Lorentzian fit did not converge (best residual {:.3e})",
            fit.chi2
        )));
    }

    let mut peaks: Vec<LorentzianPeak> = fit
        .params
        .chunks_exact(3)
        .enumerate()
        .map(|(k, p)| LorentzianPeak {
            center: p[0],
            height: p[1].max(0.0),
            width: p[2].abs().max(width_floor),
            center_err: fit.stderr(3 * k),
            height_err: fit.stderr(3 * k + 1),
            width_err: fit.stderr(3 * k + 2),
        })
        .collect();
    peaks.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    Ok(peaks)
}

/// Height of a Lorentzian of known center and width: a weighted linear
/// least-squares estimate, usable even when the line is buried in shot
/// noise (the red sideband of a near-ground-state ion).
pub fn fixed_shape_height(scan: &ScanResult, center: f64, width: f64) -> Result<(f64, f64)> {
    if width <= 0.0 {
        return Err(Error::fit("shape width must be positive"));
    }
    let y: Vec<f64> = scan.points.iter().map(|p| p.p_est).collect();
    let weights = scan_weights(scan);
    let phi: Vec<f64> = scan
        .values
        .iter()
        .map(|&x| width * width / ((x - center).powi(2) + width * width))
        .collect();
    let w2: Vec<f64> = if weights.is_empty() {
        vec![1.0; y.len()]
    } else {
        weights.iter().map(|w| w * w).collect()
    };
    let denom: f64 = phi.iter().zip(&w2).map(|(p, w)| w * p * p).sum();
    if denom <= 0.0 {
        return Err(Error::fit("degenerate shape basis"));
    }
    let num: f64 = phi
        .iter()
        .zip(&y)
        .zip(&w2)
        .map(|((p, yk), w)| w * p * yk)
        .sum();
    let height = num / denom;
    let err = if weights.is_empty() {
        // scale by residual variance
        let n = y.len() as f64;
        let chi2: f64 = phi
            .iter()
            .zip(&y)
            .map(|(p, yk)| (yk - height * p).powi(2))
            .sum();
        (chi2 / (n - 1.0).max(1.0) / denom).sqrt()
    } else {
        (1.0 / denom).sqrt()
    };
    Ok((height, err))
}
