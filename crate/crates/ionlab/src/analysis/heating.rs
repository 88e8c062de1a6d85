//! Heating-rate estimation: weighted linear regression of n̄ against wait
//! time, fed by per-wait sideband thermometry.

use crate::error::{Error, Result};
use crate::sequence::ScanResult;

use super::thermometry::sideband_thermometry;

/// Fitted heating rate in quanta per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingRate {
    pub quanta_per_second: f64,
    pub stderr: f64,
    /// n̄ at zero wait from the regression intercept.
    pub intercept: f64,
    /// Set when the slope is negative by more than 2σ.
    pub negative_flag: bool,
}

/// Weighted linear regression of n̄(t); `errs` may be empty for exact data.
pub fn heating_rate(wait_times: &[f64], nbars: &[f64], errs: &[f64]) -> Result<HeatingRate> {
    if wait_times.len() < 3 {
        return Err(Error::fit("heating fit needs at least three wait times"));
    }
    if wait_times.len() != nbars.len() {
        return Err(Error::fit("wait/n̄ arrays differ in length"));
    }
    let (intercept, slope, _ia, sb) = super::fitting::linear_regression(wait_times, nbars, errs)?;
    Ok(HeatingRate {
        quanta_per_second: slope,
        stderr: sb,
        intercept,
        negative_flag: slope < 0.0 && slope.abs() > 2.0 * sb,
    })
}

/// Per-wait thermometry plus the heating-rate regression.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitScanThermometry {
    pub wait_times: Vec<f64>,
    pub nbars: Vec<f64>,
    pub nbar_errs: Vec<f64>,
    pub rate: HeatingRate,
}

/// Full wait-scan pipeline: matching red/blue sideband wait scans are
/// converted point-by-point into n̄(t) and regressed.
pub fn heating_from_wait_scans(red: &ScanResult, blue: &ScanResult) -> Result<WaitScanThermometry> {
    if red.values.len() != blue.values.len() {
        return Err(Error::schema("red and blue wait scans differ in length"));
    }
    for (a, b) in red.values.iter().zip(&blue.values) {
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(Error::schema("red and blue wait grids differ"));
        }
    }
    let mut nbars = Vec::with_capacity(red.values.len());
    let mut errs = Vec::with_capacity(red.values.len());
    for (k, (pr, pb)) in red.points.iter().zip(&blue.points).enumerate() {
        let r = sideband_thermometry(pr.p_est, pr.stderr, pb.p_est, pb.stderr)?;
        let th = r.thermal.ok_or_else(|| {
            Error::fit(format!(
                "sideband ratio ≥ 1 at wait {:.3e} s (not thermal-consistent)",
                red.values[k]
            ))
        })?;
        nbars.push(th.nbar);
        errs.push(th.nbar_err);
    }
    let all_exact = errs.iter().all(|&e| e == 0.0);
    let rate = heating_rate(&red.values, &nbars, if all_exact { &[] } else { &errs })?;
    Ok(WaitScanThermometry {
        wait_times: red.values.clone(),
        nbars,
        nbar_errs: errs,
        rate,
    })
}
