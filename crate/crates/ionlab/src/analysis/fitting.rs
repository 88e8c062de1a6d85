//! Small least-squares toolbox: Nelder–Mead simplex, Levenberg–Marquardt
//! refinement with numerically differenced Jacobians, and non-negative
//! least squares by active-set projection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimize `f` with a Nelder–Mead simplex started at `x0`.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    initial_step: &[f64],
    max_iter: usize,
) -> Vec<f64> {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if initial_step[i] != 0.0 {
            initial_step[i]
        } else {
            0.1
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..max_iter {
        // order best → worst
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n.saturating_sub(1).min(n)];
        if (values[worst] - values[best]).abs() <= 1e-14 * (1.0 + values[best].abs()) {
            break;
        }
        // centroid of all but worst
        let mut centroid = vec![0.0; n];
        for (k, v) in simplex.iter().enumerate() {
            if k == worst {
                continue;
            }
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }
        let blend = |a: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + a * (simplex[worst][i] - centroid[i]))
                .collect()
        };
        let reflected = blend(-1.0);
        let fr = f(&reflected);
        if fr < values[best] {
            let expanded = blend(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = blend(0.5);
            let fc = f(&contracted);
            if fc < values[worst] {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                // shrink toward the best vertex
                let best_v = simplex[best].clone();
                for k in 0..=n {
                    if k == best {
                        continue;
                    }
                    for i in 0..n {
                        simplex[k][i] = best_v[i] + 0.5 * (simplex[k][i] - best_v[i]);
                    }
                    values[k] = f(&simplex[k]);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    simplex[order[0]].clone()
}

/// Weighted residual vector r_k = (model(x_k; p) − y_k)·w_k.
pub struct LeastSquaresProblem<'a> {
    pub model: &'a dyn Fn(&[f64], f64) -> f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// Weights 1/σ; uniform when empty.
    pub weights: &'a [f64],
}

impl LeastSquaresProblem<'_> {
    pub fn residuals(&self, params: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .enumerate()
                .map(|(k, (&xk, &yk))| {
                    let w = if self.weights.is_empty() {
                        1.0
                    } else {
                        self.weights[k]
                    };
                    ((self.model)(params, xk) - yk) * w
                }),
        )
    }

    pub fn chi2(&self, params: &[f64]) -> f64 {
        self.residuals(params).norm_squared()
    }

    fn jacobian(&self, params: &[f64]) -> DMatrix<f64> {
        let m = self.x.len();
        let n = params.len();
        let r0 = self.residuals(params);
        let mut jac = DMatrix::zeros(m, n);
        let mut p = params.to_vec();
        for j in 0..n {
            let h = 1e-7 * (1.0 + params[j].abs());
            p[j] = params[j] + h;
            let r1 = self.residuals(&p);
            p[j] = params[j];
            for i in 0..m {
                jac[(i, j)] = (r1[i] - r0[i]) / h;
            }
        }
        jac
    }

    /// Levenberg–Marquardt refinement from `p0`.
    pub fn refine(&self, p0: &[f64], max_iter: usize) -> Result<FitOutcome> {
        let mut p = p0.to_vec();
        let mut chi2 = self.chi2(&p);
        let mut lambda = 1e-3;
        for _ in 0..max_iter {
            let jac = self.jacobian(&p);
            let r = self.residuals(&p);
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &r;
            let mut improvement = 0.0;
            for _ in 0..20 {
                let mut damped = jtj.clone();
                for i in 0..p.len() {
                    damped[(i, i)] += lambda * (1.0 + jtj[(i, i)].abs());
                }
                let Some(step) = damped.lu().solve(&(-&jtr)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
                let trial_chi2 = self.chi2(&trial);
                if trial_chi2 < chi2 {
                    improvement = (chi2 - trial_chi2) / chi2.max(1e-300);
                    p = trial;
                    chi2 = trial_chi2;
                    lambda = (lambda * 0.3).max(1e-12);
                    break;
                }
                lambda *= 10.0;
            }
            if improvement < 1e-12 {
                break;
            }
        }
        let covariance = self.covariance(&p);
        Ok(FitOutcome {
            params: p,
            chi2,
            covariance,
        })
    }

    /// Parameter covariance (JᵀJ)⁻¹ scaled by the reduced χ² when the fit
    /// is unweighted.
    fn covariance(&self, params: &[f64]) -> Option<DMatrix<f64>> {
        let jac = self.jacobian(params);
        let jtj = jac.transpose() * &jac;
        let inv = jtj.try_inverse()?;
        let dof = self.x.len().saturating_sub(params.len()).max(1) as f64;
        let scale = if self.weights.is_empty() {
            self.chi2(params) / dof
        } else {
            1.0
        };
        Some(inv * scale)
    }
}

/// Converged parameters with goodness of fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    pub chi2: f64,
    pub covariance: Option<DMatrix<f64>>,
}

impl FitOutcome {
    pub fn stderr(&self, index: usize) -> f64 {
        self.covariance
            .as_ref()
            .map(|c| c[(index, index)].max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }
}

/// Non-negative least squares: minimize ‖A·x − b‖ subject to x ≥ 0 by
/// active-set projection (Lawson–Hanson).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::zeros(n);
    let mut residual = b - a * &x;

    for _outer in 0..(10 * n + 50) {
        let gradient = a.transpose() * &residual;
        // most promising inactive variable
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && gradient[j] > 1e-12 {
                if best.map(|(_, g)| gradient[j] > g).unwrap_or(true) {
                    best = Some((j, gradient[j]));
                }
            }
        }
        let Some((j_new, _)) = best else {
            break;
        };
        passive[j_new] = true;

        loop {
            // solve the unconstrained problem on the passive set
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(idx.iter());
            let ata = sub.transpose() * &sub;
            let atb = sub.transpose() * b;
            let z = ata
                .lu()
                .solve(&atb)
                .ok_or_else(|| Error::fit("singular normal equations in NNLS"))?;
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // step back to the feasible boundary and drop a variable
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let t = x[j] / (x[j] - z[k]);
                    alpha = alpha.min(t);
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 1e-14 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
        residual = b - a * &x;
    }
    Ok(x)
}

/// Weighted linear regression y = a + b·x; returns (a, b, σ_a, σ_b).
pub fn linear_regression(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::fit("linear regression needs at least two points"));
    }
    let w: Vec<f64> = if sigma.is_empty() {
        vec![1.0; x.len()]
    } else {
        sigma
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / (s * s) } else { 0.0 })
            .collect()
    };
    // guard against all-zero weights (oracle-mode data with exact values)
    let w: Vec<f64> = if w.iter().all(|&v| v == 0.0) {
        vec![1.0; x.len()]
    } else {
        w.iter().map(|&v| if v == 0.0 { 0.0 } else { v }).collect()
    };
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
    let sy: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| a * a * b).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((a, c), b)| a * c * b).sum();
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::fit("degenerate abscissa in linear regression"));
    }
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (sw * sxy - sx * sy) / det;
    let (mut var_a, mut var_b) = (sxx / det, sw / det);
    if sigma.is_empty() || sigma.iter().all(|&s| s == 0.0) {
        // scale by the residual variance when no errors were provided
        let dof = (x.len() as f64 - 2.0).max(1.0);
        let chi2: f64 = x
            .iter()
            .zip(y)
            .zip(&w)
            .map(|((a, c), b)| (c - intercept - slope * a).powi(2) * b)
            .sum();
        var_a *= chi2 / dof;
        var_b *= chi2 / dof;
    }
    Ok((
        intercept,
        slope,
        var_a.max(0.0).sqrt(),
        var_b.max(0.0).sqrt(),
    ))
}
