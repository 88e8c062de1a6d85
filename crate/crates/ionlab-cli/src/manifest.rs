//! Run manifests: a JSON snapshot written alongside every output CSV with
//! everything needed to reproduce it byte-identically.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use ionlab::quantum::Axis;
use ionlab::sequence::{ModeKind, RunConfig};

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub species: String,
    pub mass_kg: f64,
    pub qubit_wavelength_m: f64,
    pub dipole_linewidth_rad_s: f64,
    pub d_state_lifetime_s: f64,
    pub trap_hz: [f64; 3],
    pub laser_direction: [f64; 3],
    pub noise: [f64; 3],
    pub n_ions: usize,
    pub mode_kind: String,
    pub s_max: usize,
    pub resonant_only: bool,
    pub rwa_cutoff_rad_s: f64,
    pub detection_efficiency: f64,
    pub tol: f64,
    pub n_max_override: Option<usize>,
}

impl ResolvedConfig {
    pub fn from_run_config(name: &str, cfg: &RunConfig) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        ResolvedConfig {
            species: name.to_string(),
            mass_kg: cfg.species.mass(),
            qubit_wavelength_m: cfg.species.qubit_wavelength(),
            dipole_linewidth_rad_s: cfg.species.dipole_linewidth(),
            d_state_lifetime_s: cfg.species.d_state_lifetime(),
            trap_hz: [
                cfg.trap.secular_frequency(Axis::X) / two_pi,
                cfg.trap.secular_frequency(Axis::Y) / two_pi,
                cfg.trap.secular_frequency(Axis::Z) / two_pi,
            ],
            laser_direction: cfg.trap.laser_direction(),
            noise: [
                cfg.noise.dephasing_rate,
                cfg.noise.d_decay_rate,
                cfg.noise.heating_rate,
            ],
            n_ions: cfg.n_ions,
            mode_kind: match cfg.mode_kind {
                ModeKind::Com => "com".into(),
                ModeKind::Rocking => "rocking".into(),
            },
            s_max: cfg.s_max,
            resonant_only: cfg.resonant_only,
            rwa_cutoff_rad_s: cfg.rwa_cutoff,
            detection_efficiency: cfg.detection_efficiency,
            tol: cfg.tol,
            n_max_override: cfg.n_max_override,
        }
    }
}

/// Everything needed to reproduce one CLI output file.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub master_seed: u64,
    pub shots_override: Option<u64>,
    pub output: String,
    pub resolved_config: Option<ResolvedConfig>,
    /// Subcommand-specific settings (grid bounds, fit options, ...).
    pub extra: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            inputs: Vec::new(),
            master_seed: 0,
            shots_override: None,
            output: String::new(),
            resolved_config: None,
            extra: BTreeMap::new(),
        }
    }

    /// Write next to the output CSV as `<output>.manifest.json`.
    pub fn write_alongside(&self, output: &Path) -> anyhow::Result<()> {
        let path = manifest_path(output);
        let body = serde_json::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(&path, body + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
