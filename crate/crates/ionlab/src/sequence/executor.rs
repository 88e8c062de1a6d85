//! Sequence executor: replays a parsed protocol through the dynamics
//! engine, with Bernoulli shot sampling and deterministic parameter scans.
//!
//! Scan points are independent tasks with per-point seeds derived from the
//! master seed, so results are bit-identical across runs and across any
//! execution order or worker count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{
    build_drive, evolve_lindblad, sideband_cool, CoolingParams, DriveTerm, NoiseModel,
    UnitaryPropagator, DEFAULT_S_MAX, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::quantum::{
    coupling_strength, default_n_max, doppler_limit_nbar, lamb_dicke, thermal_distribution, Axis,
    Electronic, IonSpecies, PhononDistribution, QuantumState, TrapConfig, C64,
};

use super::{
    point_seed, PulseLength, PulseTarget, ScanPoint, ScanResult, ScanSite, ScanSpec, Sequence,
    SequenceHeader, Step, ThermalInit,
};

/// Which normal mode of an ion crystal a sideband pulse addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// Center-of-mass mode at the bare secular frequency.
    Com,
    /// Two-ion transverse rocking mode at √(ω_axis² − ω_crystal²).
    Rocking,
}

/// Resolved execution configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub species: IonSpecies,
    pub trap: TrapConfig,
    pub noise: NoiseModel,
    /// Number of ions in the crystal (mode bookkeeping only; the dynamics
    /// always treat one motional mode).
    pub n_ions: usize,
    pub mode_kind: ModeKind,
    /// Sideband orders retained on each side of the carrier.
    pub s_max: usize,
    /// Keep only the drive term closest to resonance (oracle/testing knob).
    pub resonant_only: bool,
    /// Open-system segments drop drive terms oscillating faster than this
    /// (rad/s); their effect is O((Ω/Δ)²) while they dominate the step cost.
    pub rwa_cutoff: f64,
    /// Probability that a shelved ion is detected as shelved.
    pub detection_efficiency: f64,
    /// Integrator tolerance.
    pub tol: f64,
    /// Fock truncation override; derived from the init step when `None`.
    pub n_max_override: Option<usize>,
}

impl RunConfig {
    pub fn new(species: IonSpecies, trap: TrapConfig) -> Self {
        RunConfig {
            species,
            trap,
            noise: NoiseModel::none(),
            n_ions: 1,
            mode_kind: ModeKind::Com,
            s_max: DEFAULT_S_MAX,
            resonant_only: false,
            rwa_cutoff: 2.0 * std::f64::consts::PI * 200e3,
            detection_efficiency: 1.0,
            tol: DEFAULT_TOL,
            n_max_override: None,
        }
    }
}

/// Partially specified configuration, as read from a config file, a program
/// header, or command-line flags; later sources override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub trap_hz: [Option<f64>; 3],
    pub species: Option<String>,
    pub laser_direction: Option<[f64; 3]>,
    pub dephasing_rate: Option<f64>,
    pub d_decay_rate: Option<f64>,
    pub heating_rate: Option<f64>,
    pub n_ions: Option<usize>,
    pub mode_kind: Option<ModeKind>,
    pub s_max: Option<usize>,
    pub resonant_only: Option<bool>,
    pub rwa_cutoff: Option<f64>,
    pub detection_efficiency: Option<f64>,
    pub tol: Option<f64>,
    pub n_max: Option<usize>,
}

impl PartialConfig {
    pub fn from_header(header: &SequenceHeader) -> Self {
        PartialConfig {
            trap_hz: header.trap_hz,
            species: if header.species.is_empty() {
                None
            } else {
                Some(header.species.clone())
            },
            ..PartialConfig::default()
        }
    }

    /// Overlay `other` on `self`; fields set in `other` win.
    pub fn merge(mut self, other: &PartialConfig) -> Self {
        for i in 0..3 {
            if other.trap_hz[i].is_some() {
                self.trap_hz[i] = other.trap_hz[i];
            }
        }
        macro_rules! take {
            ($($f:ident),*) => {
                $(if other.$f.is_some() { self.$f = other.$f.clone(); })*
            };
        }
        take!(
            species,
            laser_direction,
            dephasing_rate,
            d_decay_rate,
            heating_rate,
            n_ions,
            mode_kind,
            s_max,
            resonant_only,
            rwa_cutoff,
            detection_efficiency,
            tol,
            n_max
        );
        self
    }

    /// Resolve into a full [`RunConfig`]. Undeclared trap axes are assumed
    /// as stiff as the stiffest declared one, so the weakest declared axis
    /// stays the crystal axis.
    pub fn resolve(&self) -> Result<RunConfig> {
        let species_name = self.species.as_deref().unwrap_or("Ca40");
        let species = species_by_name(species_name)
            .ok_or_else(|| Error::domain(format!("unknown ion species `{species_name}`")))?;
        let declared_max = self.trap_hz.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        if declared_max <= 0.0 {
            return Err(Error::domain("no trap frequency configured"));
        }
        let freqs = [
            self.trap_hz[0].unwrap_or(declared_max),
            self.trap_hz[1].unwrap_or(declared_max),
            self.trap_hz[2].unwrap_or(declared_max),
        ];
        let direction = self.laser_direction.unwrap_or([
            0.0,
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ]);
        let trap = TrapConfig::from_cycle_frequencies(freqs, direction)?;
        let noise = NoiseModel::new(
            self.dephasing_rate.unwrap_or(0.0),
            self.d_decay_rate.unwrap_or(0.0),
            self.heating_rate.unwrap_or(0.0),
        )?;
        let mut cfg = RunConfig::new(species, trap);
        cfg.noise = noise;
        cfg.n_ions = self.n_ions.unwrap_or(1);
        cfg.mode_kind = self.mode_kind.unwrap_or(ModeKind::Com);
        cfg.s_max = self.s_max.unwrap_or(DEFAULT_S_MAX);
        cfg.resonant_only = self.resonant_only.unwrap_or(false);
        if let Some(c) = self.rwa_cutoff {
            cfg.rwa_cutoff = c;
        }
        cfg.detection_efficiency = self.detection_efficiency.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&cfg.detection_efficiency) {
            return Err(Error::domain("detection efficiency must lie in [0,1]"));
        }
        cfg.tol = self.tol.unwrap_or(DEFAULT_TOL);
        cfg.n_max_override = self.n_max;
        if cfg.n_ions == 0 || cfg.n_ions > 32 {
            return Err(Error::domain("crystal size must be between 1 and 32 ions"));
        }
        if cfg.mode_kind == ModeKind::Rocking && cfg.n_ions != 2 {
            return Err(Error::domain("rocking-mode runs require exactly 2 ions"));
        }
        Ok(cfg)
    }
}

/// Species registry for names used in programs and config files.
pub fn species_by_name(name: &str) -> Option<IonSpecies> {
    match name.to_ascii_lowercase().as_str() {
        "ca40" | "40ca" | "ca" => Some(IonSpecies::ca40()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// mode resolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct ModeInfo {
    omega: f64,
    eta: f64,
}

/// The single motional mode addressed by a sequence: taken from the axis of
/// its cooling and sideband steps (which must agree), defaulting to z for
/// carrier-only programs.
fn resolve_mode(steps: &[Step], config: &RunConfig) -> Result<ModeInfo> {
    let mut axis: Option<Axis> = None;
    for step in steps {
        let a = match step {
            Step::SidebandCool { axis, .. } => Some(*axis),
            Step::Pulse(p) => p.target.axis(),
            _ => None,
        };
        if let Some(a) = a {
            match axis {
                None => axis = Some(a),
                Some(prev) if prev != a => {
                    return Err(Error::domain(format!(
                        "sequence addresses two motional modes ({prev} and {a}); \
                         each run treats a single mode"
                    )))
                }
                _ => {}
            }
        }
    }
    let axis = axis.unwrap_or(Axis::Z);
    let omega_axis = config.trap.secular_frequency(axis);
    let (omega, amplitude) = match (config.n_ions, config.mode_kind) {
        (1, _) => (omega_axis, 1.0),
        (n, ModeKind::Com) => (omega_axis, 1.0 / (n as f64).sqrt()),
        (2, ModeKind::Rocking) => {
            let crystal_axis = config.trap.crystal_axis();
            if axis == crystal_axis {
                return Err(Error::domain(
                    "rocking mode is transverse; the addressed axis is the crystal axis",
                ));
            }
            let w_ax = config.trap.secular_frequency(crystal_axis);
            let lam = omega_axis * omega_axis - w_ax * w_ax;
            if lam <= 0.0 {
                return Err(Error::domain("rocking mode unstable (ω_radial ≤ ω_axial)"));
            }
            (lam.sqrt(), std::f64::consts::FRAC_1_SQRT_2)
        }
        (_, ModeKind::Rocking) => {
            return Err(Error::domain("rocking-mode runs require exactly 2 ions"))
        }
    };
    let projection = config.trap.laser_projection(axis);
    let eta = lamb_dicke(&config.species, omega, projection)? * amplitude;
    Ok(ModeInfo { omega, eta })
}

// ---------------------------------------------------------------------------
// instantaneous maps
// ---------------------------------------------------------------------------

/// Electronic reset to |S⟩, preserving the phonon block.
fn apply_optical_pump(state: &mut QuantumState) {
    let block = state.n_max() + 1;
    let rho = state.density_matrix().clone();
    let out = state.density_matrix_mut();
    out.fill(C64::new(0.0, 0.0));
    for n in 0..block {
        for m in 0..block {
            out[(n, m)] = rho[(n, m)] + rho[(block + n, block + m)];
        }
    }
}

/// 854 nm repump |D,n⟩ → |S,n⟩, phonon-conserving: a fraction `fidelity` of
/// each D population transfers; D coherences are destroyed, S coherences kept.
fn apply_repump(state: &mut QuantumState, fidelity: f64) {
    let block = state.n_max() + 1;
    let rho = state.density_matrix().clone();
    let out = state.density_matrix_mut();
    out.fill(C64::new(0.0, 0.0));
    for n in 0..block {
        for m in 0..block {
            out[(n, m)] = rho[(n, m)];
        }
    }
    for n in 0..block {
        let pd = rho[(block + n, block + n)];
        out[(n, n)] += fidelity * pd;
        out[(block + n, block + n)] = (1.0 - fidelity) * pd;
    }
}

/// Rebuild the state as |S⟩ ⊗ diag(p) after a rate-equation cooling step;
/// the many scattered photons destroy motional coherences.
fn apply_cooling(state: &mut QuantumState, a_minus: f64, a_plus: f64, duration: f64) -> Result<()> {
    let p = state.phonon_populations();
    let sum: f64 = p.iter().sum();
    let normalized: Vec<f64> = p.iter().map(|x| (x / sum).max(0.0)).collect();
    let dist = PhononDistribution::new(normalized)?;
    let params = CoolingParams::new(a_minus, a_plus, duration)?;
    let cooled = sideband_cool(&dist, &params)?;
    *state = QuantumState::from_phonon_distribution(&cooled);
    Ok(())
}

// ---------------------------------------------------------------------------
// propagator cache
// ---------------------------------------------------------------------------

/// Cache of exact pulse propagators, keyed by the bit patterns of the drive
/// terms; scans over pulse duration reuse one eigendecomposition.
struct PropCache {
    map: Mutex<HashMap<Vec<u64>, Arc<UnitaryPropagator>>>,
}

impl PropCache {
    fn new() -> Self {
        PropCache {
            map: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, n_max: usize, terms: &[DriveTerm]) -> Result<Arc<UnitaryPropagator>> {
        let mut key = Vec::with_capacity(1 + 5 * terms.len());
        key.push(n_max as u64);
        for t in terms {
            key.push(t.sideband as i64 as u64);
            key.push(t.half_rabi.to_bits());
            key.push(t.detuning.to_bits());
            key.push(t.phase.to_bits());
            key.push(t.eta.to_bits());
        }
        let mut map = self.map.lock().expect("propagator cache poisoned");
        if let Some(prop) = map.get(&key) {
            return Ok(prop.clone());
        }
        let prop = Arc::new(UnitaryPropagator::new(n_max, terms)?);
        map.insert(key, prop.clone());
        Ok(prop)
    }
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct ExecOutcome {
    p_true: f64,
    truncation_warning: bool,
}

fn reference_coupling(target: PulseTarget, eta: f64) -> Result<f64> {
    match target {
        PulseTarget::Carrier => coupling_strength(0, 0, eta),
        PulseTarget::BlueSideband(_) => coupling_strength(0, 1, eta),
        PulseTarget::RedSideband(_) => coupling_strength(1, -1, eta),
    }
}

fn execute_once(steps: &[Step], config: &RunConfig, cache: &PropCache) -> Result<ExecOutcome> {
    let mode = resolve_mode(steps, config)?;

    // truncation from the init step
    let init_nbar = match steps.first() {
        Some(Step::InitGround) => 0.0,
        Some(Step::InitThermal(ThermalInit::Nbar(v))) => *v,
        Some(Step::InitThermal(ThermalInit::Doppler)) => {
            doppler_limit_nbar(&config.species, mode.omega)?.nbar
        }
        _ => return Err(Error::domain("first step must be an init")),
    };
    let n_max = config.n_max_override.unwrap_or(default_n_max(init_nbar));

    let mut state = match &steps[0] {
        Step::InitGround => QuantumState::ground(n_max),
        Step::InitThermal(_) => {
            QuantumState::from_phonon_distribution(&thermal_distribution(init_nbar, n_max)?)
        }
        _ => unreachable!(),
    };

    let mut global_time = 0.0f64;
    for step in &steps[1..] {
        match step {
            Step::InitGround | Step::InitThermal(_) => {
                return Err(Error::domain("duplicate init step"))
            }
            Step::OpticalPump => apply_optical_pump(&mut state),
            Step::Repump { fidelity } => apply_repump(&mut state, *fidelity),
            Step::SidebandCool {
                a_minus,
                a_plus,
                duration,
                ..
            } => {
                apply_cooling(&mut state, *a_minus, *a_plus, *duration)?;
                global_time += duration;
            }
            Step::Wait(t) => {
                if !config.noise.is_zero() {
                    state = evolve_lindblad(&state, &[], &config.noise, *t, config.tol)?;
                }
                global_time += t;
            }
            Step::Pulse(pulse) => {
                if pulse.rabi_frequency <= 0.0 {
                    return Err(Error::domain("pulse Rabi frequency must be positive"));
                }
                let duration = match pulse.length {
                    PulseLength::Duration(t) => t,
                    PulseLength::Area(area) => {
                        let m_ref = reference_coupling(pulse.target, mode.eta)?;
                        if m_ref < 1e-300 {
                            return Err(Error::domain(
                                "area pulse on a transition with zero coupling",
                            ));
                        }
                        area / (pulse.rabi_frequency * m_ref)
                    }
                };
                if duration < 0.0 {
                    return Err(Error::domain("pulse duration must be ≥ 0"));
                }
                let mut terms = build_drive(pulse, mode.eta, mode.omega, config.s_max)?;
                if config.resonant_only {
                    let best = terms
                        .iter()
                        .map(|t| t.detuning.abs())
                        .enumerate()
                        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                        .map(|(k, _)| k)
                        .unwrap();
                    terms = vec![terms[best]];
                }
                let shifted: Vec<DriveTerm> = terms
                    .iter()
                    .map(|t| t.with_phase_shift(global_time))
                    .collect();
                if config.noise.is_zero() {
                    let prop = cache.get(n_max, &shifted)?;
                    state = prop.evolve(&state, duration);
                } else {
                    let retained: Vec<DriveTerm> = shifted
                        .iter()
                        .filter(|t| t.detuning.abs() <= config.rwa_cutoff)
                        .cloned()
                        .collect();
                    state =
                        evolve_lindblad(&state, &retained, &config.noise, duration, config.tol)?;
                }
                global_time += duration;
            }
            Step::Measure { .. } => {
                let p_d = state.p_excited().clamp(0.0, 1.0);
                let p_true = (config.detection_efficiency * p_d).clamp(0.0, 1.0);
                let top =
                    state.population(Electronic::S, n_max) + state.population(Electronic::D, n_max);
                return Ok(ExecOutcome {
                    p_true,
                    truncation_warning: top > 1e-4,
                });
            }
        }
    }
    Err(Error::domain("sequence did not end with a measure step"))
}

fn sample_shots(p_true: f64, shots: u64, seed: u64) -> (f64, f64) {
    if shots == 0 {
        return (p_true, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    for _ in 0..shots {
        if rng.gen::<f64>() < p_true {
            successes += 1;
        }
    }
    let p_est = successes as f64 / shots as f64;
    let stderr = (p_est * (1.0 - p_est) / shots as f64).sqrt();
    (p_est, stderr)
}

/// Result of one executed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub p_true: f64,
    pub p_est: f64,
    pub stderr: f64,
    pub shots: u64,
    pub seed: u64,
    pub truncation_warning: bool,
}

/// Execute a scan-free sequence once and draw its shot record.
pub fn run_point(seq: &Sequence, config: &RunConfig, rng_seed: u64) -> Result<PointResult> {
    seq.validate()?;
    if seq.scan.is_some() {
        return Err(Error::domain(
            "sequence contains a scan placeholder; use scan()",
        ));
    }
    let cache = PropCache::new();
    let outcome = execute_once(&seq.steps, config, &cache)?;
    let shots = seq.shots();
    let (p_est, stderr) = sample_shots(outcome.p_true, shots, rng_seed);
    Ok(PointResult {
        p_true: outcome.p_true,
        p_est,
        stderr,
        shots,
        seed: rng_seed,
        truncation_warning: outcome.truncation_warning,
    })
}

fn substitute(steps: &mut [Step], site: ScanSite, value: f64) -> Result<()> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match site {
        ScanSite::PulseDuration(i) => match &mut steps[i] {
            Step::Pulse(p) => {
                p.length = PulseLength::Duration(value);
                Ok(())
            }
            _ => Err(Error::domain("scan site is not a pulse")),
        },
        ScanSite::PulseDetuning(i) => {
            if !matches!(steps[i], Step::Pulse(_)) {
                return Err(Error::domain("scan site is not a pulse"));
            }
            // the laser is shared: a detuning scan offsets every pulse
            for step in steps.iter_mut() {
                if let Step::Pulse(p) = step {
                    p.extra_detuning += value * two_pi;
                }
            }
            Ok(())
        }
        ScanSite::PulseRabi(i) => match &mut steps[i] {
            Step::Pulse(p) => {
                if value <= 0.0 {
                    return Err(Error::domain("scanned Rabi frequency must stay positive"));
                }
                p.rabi_frequency = value * two_pi;
                Ok(())
            }
            _ => Err(Error::domain("scan site is not a pulse")),
        },
        ScanSite::Wait(i) => match &mut steps[i] {
            Step::Wait(t) => {
                *t = value;
                Ok(())
            }
            _ => Err(Error::domain("scan site is not a wait")),
        },
    }
}

/// Run a scan: one execution per grid value, per-point derived seeds,
/// deterministic regardless of execution order.
///
/// `shots_override` replaces the measure step's shot count; zero selects
/// oracle mode (exact probabilities, zero-width errors).
pub fn scan(
    seq: &Sequence,
    config: &RunConfig,
    master_seed: u64,
    shots_override: Option<u64>,
) -> Result<ScanResult> {
    seq.validate()?;
    let spec: &ScanSpec = seq
        .scan
        .as_ref()
        .ok_or_else(|| Error::domain("sequence has no scan placeholder"))?;
    let values = spec.values();
    if values.is_empty() {
        return Err(Error::domain("scan grid is empty"));
    }
    let shots = shots_override.unwrap_or_else(|| seq.shots());
    let cache = PropCache::new();

    let run_one = |(k, value): (usize, &f64)| -> Result<ScanPoint> {
        let mut steps = seq.steps.clone();
        substitute(&mut steps, spec.site, *value)?;
        let outcome = execute_once(&steps, config, &cache)?;
        let seed = point_seed(master_seed, k as u64);
        let (p_est, stderr) = sample_shots(outcome.p_true, shots, seed);
        Ok(ScanPoint {
            p_true: outcome.p_true,
            p_est,
            stderr,
            shots,
            seed,
            truncation_warning: outcome.truncation_warning,
        })
    };

    let points: Result<Vec<ScanPoint>> = if values.len() > 1 {
        values.par_iter().enumerate().map(run_one).collect()
    } else {
        values.iter().enumerate().map(run_one).collect()
    };

    let result = ScanResult {
        parameter: spec.site.parameter_name().to_string(),
        values,
        points: points?,
        master_seed,
    };
    result.validate()?;
    Ok(result)
}

/// Execute a scan-free sequence and wrap it as a one-row [`ScanResult`].
pub fn single_point_scan(
    seq: &Sequence,
    config: &RunConfig,
    master_seed: u64,
    shots_override: Option<u64>,
) -> Result<ScanResult> {
    seq.validate()?;
    if seq.scan.is_some() {
        return Err(Error::domain("sequence contains a scan placeholder"));
    }
    let cache = PropCache::new();
    let outcome = execute_once(&seq.steps, config, &cache)?;
    let shots = shots_override.unwrap_or_else(|| seq.shots());
    let seed = point_seed(master_seed, 0);
    let (p_est, stderr) = sample_shots(outcome.p_true, shots, seed);
    let result = ScanResult {
        parameter: "none".to_string(),
        values: vec![0.0],
        points: vec![ScanPoint {
            p_true: outcome.p_true,
            p_est,
            stderr,
            shots,
            seed,
            truncation_warning: outcome.truncation_warning,
        }],
        master_seed,
    };
    result.validate()?;
    Ok(result)
}

// silence an unused-import lint when nalgebra is only used in tests below
#[allow(unused)]
fn _keep(_: DMatrix<C64>) {}
