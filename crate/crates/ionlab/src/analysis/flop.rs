//! Fock-population extraction from blue-sideband Rabi flopping.
//!
//! The flop signal of a motional mixture is
//! P_D(τ) = Σ_n p_n sin²(Ω_{n,n+1}τ/2)·e^{−γτ} with the known frequencies
//! Ω_{n,n+1} = Ω·M_{n,n+1}(η). The populations follow from non-negative
//! least squares on that frequency basis (far better conditioned than a
//! raw Fourier transform at 50–100 samples); a periodogram is still
//! emitted for visualization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantum::coupling_strength;
use crate::sequence::ScanResult;

use super::fitting::nnls;

/// Extracted populations and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopAnalysis {
    /// Occupation probabilities p_n, n = 0..n_cut.
    pub populations: Vec<f64>,
    /// Shared contrast decay rate, 1/s.
    pub decay_rate: f64,
    /// Weighted residual norm of the fit.
    pub residual_norm: f64,
    /// (frequency Hz, power) pairs of the signal periodogram.
    pub periodogram: Vec<(f64, f64)>,
}

/// Blue-sideband flop frequencies Ω·M_{n,n+1}(η) for n = 0..n_cut.
pub fn flop_frequencies(eta: f64, omega_rabi: f64, n_cut: usize) -> Result<Vec<f64>> {
    (0..=n_cut)
        .map(|n| Ok(omega_rabi * coupling_strength(n, 1, eta)?))
        .collect()
}

/// Model flop signal for given populations (used by tests and synthesis).
pub fn flop_signal(populations: &[f64], eta: f64, omega_rabi: f64, gamma: f64, tau: f64) -> f64 {
    populations
        .iter()
        .enumerate()
        .map(|(n, &pn)| {
            let w = omega_rabi * coupling_strength(n, 1, eta).unwrap_or(0.0);
            pn * (w * tau / 2.0).sin().powi(2) * (-gamma * tau).exp()
        })
        .sum()
}

fn basis_matrix(
    taus: &[f64],
    freqs: &[f64],
    gamma: f64,
    weights: &[f64],
    sum_weight: f64,
) -> DMatrix<f64> {
    let m = taus.len();
    let n = freqs.len();
    let mut b = DMatrix::zeros(m + 1, n);
    for (k, &tau) in taus.iter().enumerate() {
        let w = if weights.is_empty() { 1.0 } else { weights[k] };
        let env = (-gamma * tau).exp();
        for (j, &fj) in freqs.iter().enumerate() {
            b[(k, j)] = w * env * (fj * tau / 2.0).sin().powi(2);
        }
    }
    // soft normalization row: Σ p_n = 1
    for j in 0..n {
        b[(m, j)] = sum_weight;
    }
    b
}

/// Extract Fock populations from a pulse-duration scan on the blue sideband.
///
/// `eta` and `omega_rabi` must match the scan; `n_cut` is the highest Fock
/// index retained. The τ grid must span at least three periods of the
/// slowest flop component.
pub fn extract_fock_populations(
    scan: &ScanResult,
    eta: f64,
    omega_rabi: f64,
    n_cut: usize,
) -> Result<FlopAnalysis> {
    let taus = &scan.values;
    if taus.len() < 2 * (n_cut + 2) {
        return Err(Error::fit("too few flop samples for the requested n_cut"));
    }
    let freqs = flop_frequencies(eta, omega_rabi, n_cut)?;
    let span = taus.last().unwrap() - taus.first().unwrap();
    let slow_period = 2.0 * std::f64::consts::PI / freqs[0];
    if span < 3.0 * slow_period {
        return Err(Error::fit(format!(
            "τ grid spans {:.1} slow periods; at least 3 are required",
            span / slow_period
        )));
    }

    let y: Vec<f64> = scan.points.iter().map(|p| p.p_est).collect();
    // uniform weights: plug-in binomial errors vanish on zero-count troughs
    // and would overweight them, biasing the amplitudes
    let weights: Vec<f64> = Vec::new();
    let sum_weight = 1.0; // soft Σp = 1 constraint at data-row strength

    let mut rhs = DVector::zeros(taus.len() + 1);
    for k in 0..taus.len() {
        let w = if weights.is_empty() { 1.0 } else { weights[k] };
        rhs[k] = w * y[k];
    }
    rhs[taus.len()] = sum_weight;

    // conditioning of the γ = 0 basis decides whether the grid can separate
    // the components at all
    let b0 = basis_matrix(taus, &freqs, 0.0, &weights, sum_weight);
    let gram = b0.transpose() * &b0;
    let eigs = nalgebra::SymmetricEigen::new(gram).eigenvalues;
    let (lo, hi) = eigs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    if lo <= 0.0 || hi / lo > 1e10 {
        return Err(Error::fit(format!(
            "ill-conditioned flop basis (condition number {:.2e}); extend the τ grid",
            if lo > 0.0 { hi / lo } else { f64::INFINITY }
        )));
    }

    // outer golden-section search over the shared decay rate
    let solve_at = |gamma: f64| -> Result<(DVector<f64>, f64)> {
        let b = basis_matrix(taus, &freqs, gamma, &weights, sum_weight);
        let p = nnls(&b, &rhs)?;
        let residual = (&b * &p - &rhs).norm();
        Ok((p, residual))
    };
    let gamma_hi = 10.0 / span;
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, gamma_hi);
    let mut x1 = b - gr * (b - a);
    let mut x2 = a + gr * (b - a);
    let mut f1 = solve_at(x1)?.1;
    let mut f2 = solve_at(x2)?.1;
    for _ in 0..50 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = solve_at(x1)?.1;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = solve_at(x2)?.1;
        }
    }
    let gamma = 0.5 * (a + b);
    let (p_vec, residual_at_gamma) = solve_at(gamma)?;
    // γ = 0 boundary may win outright
    let (p_vec, gamma, residual) = {
        let (p0_vec, r0) = solve_at(0.0)?;
        if r0 <= residual_at_gamma {
            (p0_vec, 0.0, r0)
        } else {
            (p_vec, gamma, residual_at_gamma)
        }
    };

    let populations: Vec<f64> = p_vec.iter().copied().collect();
    let periodogram = periodogram(taus, &y, freqs[freqs.len() - 1]);

    Ok(FlopAnalysis {
        populations,
        decay_rate: gamma,
        residual_norm: residual,
        periodogram,
    })
}

/// Direct power spectrum of the mean-subtracted signal on a uniform
/// frequency grid up to 1.2× the fastest expected flop frequency.
fn periodogram(taus: &[f64], y: &[f64], omega_max: f64) -> Vec<(f64, f64)> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let f_max = 1.2 * omega_max / (2.0 * std::f64::consts::PI);
    let n_bins = 200;
    (0..n_bins)
        .map(|k| {
            let f = f_max * (k + 1) as f64 / n_bins as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (&tau, &yk) in taus.iter().zip(y) {
                let phase = 2.0 * std::f64::consts::PI * f * tau;
                re += (yk - mean) * phase.cos();
                im -= (yk - mean) * phase.sin();
            }
            (f, (re * re + im * im) / taus.len() as f64)
        })
        .collect()
}
