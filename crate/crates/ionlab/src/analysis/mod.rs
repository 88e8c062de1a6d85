//! Turn scan data back into physical quantities: sideband thermometry,
//! Lorentzian line fitting, Fock-population extraction from Rabi flopping,
//! Ramsey fringe fitting, and heating-rate estimation.
//!
//! Every fitter consumes the scan CSV schema produced by the sequence
//! executor and reports values with 1σ errors propagated from the
//! binomial shot noise.

pub mod fitting;
mod flop;
mod heating;
mod lorentzian;
mod ramsey;
mod thermometry;

pub use flop::{extract_fock_populations, flop_frequencies, flop_signal, FlopAnalysis};
pub use heating::{heating_from_wait_scans, heating_rate, HeatingRate, WaitScanThermometry};
pub use lorentzian::{fit_lorentzian_peaks, fixed_shape_height, LorentzianPeak};
pub use ramsey::{fit_ramsey, ramsey_probability, RamseyFit};
pub use thermometry::{
    sideband_thermometry, thermometry_from_sideband_scans, ThermalEstimate, ThermometryResult,
};
