//! Desk-scale simulator for trapped-ion quantum state engineering.
//!
//! The crate models a single laser-driven ion (or a small ion crystal) in a
//! Paul trap: resolved-sideband cooling to the motional ground state, Fock
//! state preparation, Rabi and Ramsey coherence measurements, normal-mode
//! spectroscopy, and the speed limit of sideband gate operations. A small
//! pulse-sequence language drives the simulation, and the analysis module
//! turns sampled shot records back into physical quantities (mean phonon
//! numbers, Fock populations, decay rates, heating rates).

pub mod analysis;
pub mod constants;
pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod quantum;
pub mod sequence;

pub use error::{Error, Result};
