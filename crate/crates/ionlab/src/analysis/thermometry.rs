//! Sideband thermometry: for a thermal motional state the red/blue
//! excitation ratio is P_red/P_blue = n̄/(1+n̄), so the ratio alone fixes
//! the mean occupation and the ground-state population p₀ = 1 − R.

use crate::error::{Error, Result};
use crate::sequence::ScanResult;

use super::lorentzian::{fit_lorentzian_peaks, fixed_shape_height};

/// Thermal-state quantities derived from the sideband ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalEstimate {
    pub nbar: f64,
    pub nbar_err: f64,
    pub p0: f64,
    pub p0_err: f64,
}

/// Ratio measurement; `thermal` is `None` when R ≥ 1 (not consistent with
/// a thermal state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermometryResult {
    pub ratio: f64,
    pub ratio_err: f64,
    pub thermal: Option<ThermalEstimate>,
}

/// Convert red/blue sideband excitations (with 1σ errors) into n̄ and p₀,
/// propagating errors to first order.
pub fn sideband_thermometry(
    p_red: f64,
    red_err: f64,
    p_blue: f64,
    blue_err: f64,
) -> Result<ThermometryResult> {
    if p_blue <= 0.0 {
        return Err(Error::domain("blue-sideband excitation must be positive"));
    }
    let p_red = p_red.max(0.0);
    let ratio = p_red / p_blue;
    let ratio_err =
        ((red_err / p_blue).powi(2) + (p_red * blue_err / (p_blue * p_blue)).powi(2)).sqrt();
    let thermal = if ratio < 1.0 {
        let denom = 1.0 - ratio;
        Some(ThermalEstimate {
            nbar: ratio / denom,
            nbar_err: ratio_err / (denom * denom),
            p0: denom,
            p0_err: ratio_err,
        })
    } else {
        None
    };
    Ok(ThermometryResult {
        ratio,
        ratio_err,
        thermal,
    })
}

/// Full thermometry pipeline on a pair of sideband scans: fit a Lorentzian
/// to the blue line, reuse its mirrored center and width for a linear
/// height estimate on the (possibly noise-dominated) red line, and convert
/// the height ratio.
pub fn thermometry_from_sideband_scans(
    red: &ScanResult,
    blue: &ScanResult,
) -> Result<ThermometryResult> {
    let blue_peaks = fit_lorentzian_peaks(blue, 1)?;
    let bp = &blue_peaks[0];
    let (h_red, h_red_err) = fixed_shape_height(red, -bp.center, bp.width)?;
    sideband_thermometry(h_red.max(0.0), h_red_err, bp.height, bp.height_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_ratio_gives_999_permille_ground_state() {
        let r = sideband_thermometry(0.001, 1e-5, 1.0, 1e-4).unwrap();
        let th = r.thermal.unwrap();
        assert!((th.p0 - 0.999).abs() < 1e-12);
        assert!((th.nbar - 0.001 / 0.999).abs() < 1e-12);
    }

    #[test]
    fn zero_ratio_is_pure_ground_state() {
        let r = sideband_thermometry(0.0, 0.0, 0.5, 0.0).unwrap();
        let th = r.thermal.unwrap();
        assert_eq!(th.nbar, 0.0);
        assert_eq!(th.p0, 1.0);
    }

    #[test]
    fn half_ratio_is_one_phonon() {
        let r = sideband_thermometry(0.25, 0.0, 0.5, 0.0).unwrap();
        let th = r.thermal.unwrap();
        assert!((th.nbar - 1.0).abs() < 1e-12);
        assert!((th.p0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn super_unity_ratio_not_thermal() {
        let r = sideband_thermometry(0.6, 0.01, 0.5, 0.01).unwrap();
        assert!(r.thermal.is_none());
        assert!(r.ratio > 1.0);
    }

    #[test]
    fn rejects_zero_blue_excitation() {
        assert!(sideband_thermometry(0.1, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn nbar_ratio_round_trip_is_identity() {
        for &nbar in &[0.0, 1e-3, 0.1, 1.0, 10.0, 100.0] {
            let ratio = nbar / (1.0 + nbar);
            let r = sideband_thermometry(ratio, 0.0, 1.0, 0.0).unwrap();
            let th = r.thermal.unwrap();
            assert!(
                (th.nbar - nbar).abs() <= 1e-9 * (1.0 + nbar),
                "n̄ {nbar} → {}",
                th.nbar
            );
        }
    }

    #[test]
    fn error_bars_scale_with_shot_noise() {
        // σ_R ∝ 1/√shots: feeding 10× smaller input errors gives 10× smaller
        // output errors (100 vs 10⁴ shots)
        let a = sideband_thermometry(0.05, 0.02, 0.5, 0.02).unwrap();
        let b = sideband_thermometry(0.05, 0.002, 0.5, 0.002).unwrap();
        let ratio = a.thermal.unwrap().nbar_err / b.thermal.unwrap().nbar_err;
        assert!((ratio - 10.0).abs() < 1e-9, "{ratio}");
    }
}
