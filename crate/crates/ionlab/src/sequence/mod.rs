//! Declarative experiment protocol: a small pulse-sequence language, its
//! parser, and an executor that replays the pulsed measurement cycle
//! (initialize, pump, cool, pulse, detect) with Bernoulli shot sampling
//! and parameter scans.

mod executor;
mod parser;

pub use executor::{
    run_point, scan, single_point_scan, species_by_name, ModeKind, PartialConfig, PointResult,
    RunConfig,
};
pub use parser::{parse_config, parse_sequence, DEFAULT_RABI_HZ};

use crate::error::{Error, Result};
use crate::quantum::Axis;

/// Transition addressed by a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseTarget {
    /// Electronic transition only, n → n.
    Carrier,
    /// n → n−1 transition of the mode along the given axis.
    RedSideband(Axis),
    /// n → n+1 transition of the mode along the given axis.
    BlueSideband(Axis),
}

impl PulseTarget {
    pub fn axis(&self) -> Option<Axis> {
        match self {
            PulseTarget::Carrier => None,
            PulseTarget::RedSideband(a) | PulseTarget::BlueSideband(a) => Some(*a),
        }
    }
}

/// Pulse length, given either as an area (rad) or a duration (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseLength {
    /// Rotation angle on the reference transition; converted to a duration
    /// with the exact coupling matrix element of that transition.
    Area(f64),
    /// Explicit duration in seconds.
    Duration(f64),
}

/// One laser pulse of the state-engineering step.
///
/// Frequencies are angular (rad/s); the parser multiplies Hz-family inputs
/// by 2π on ingestion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub target: PulseTarget,
    /// Detuning added to the target's nominal laser frequency, rad/s.
    pub extra_detuning: f64,
    pub length: PulseLength,
    /// Drive phase, rad.
    pub phase: f64,
    /// Bare Rabi frequency Ω, rad/s.
    pub rabi_frequency: f64,
}

/// Initial motional state of the sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalInit {
    /// Thermal state of the given mean occupation.
    Nbar(f64),
    /// Thermal state at the Doppler limit of the addressed mode.
    Doppler,
}

/// One step of an experimental sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Pure |S, 0⟩ start.
    InitGround,
    /// Electronic ground state with a thermal phonon distribution.
    InitThermal(ThermalInit),
    /// Instantaneous electronic reset to |S⟩ (optical pumping).
    OpticalPump,
    /// Rate-equation sideband cooling of the mode along `axis`.
    SidebandCool {
        axis: Axis,
        a_minus: f64,
        a_plus: f64,
        duration: f64,
    },
    Pulse(Pulse),
    /// 854 nm repump: |D,n⟩ → |S,n⟩ with the given transfer fidelity.
    Repump {
        fidelity: f64,
    },
    /// Free evolution for the given time (s).
    Wait(f64),
    /// Final electron-shelving detection.
    Measure {
        shots: u64,
    },
}

/// Trap/ion declaration from the program header (or a config file).
///
/// Frequencies here are stored as the user wrote them, in cycle Hz, so that
/// parse → pretty-print → parse is exact; the executor multiplies by 2π.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceHeader {
    /// Cycle secular frequencies in Hz per axis, where declared.
    pub trap_hz: [Option<f64>; 3],
    /// Ion species name, e.g. "Ca40".
    pub species: String,
}

/// Which value of which step a scan sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanSite {
    /// Duration of the pulse at this step index (seconds).
    PulseDuration(usize),
    /// Laser detuning offset (cycle Hz), written at this step index; the
    /// laser is shared, so the offset applies to every pulse of the program.
    PulseDetuning(usize),
    /// Rabi frequency of the pulse at this step index (cycle Hz).
    PulseRabi(usize),
    /// Wait time at this step index (seconds).
    Wait(usize),
}

impl ScanSite {
    /// CSV parameter name, unit included.
    pub fn parameter_name(&self) -> &'static str {
        match self {
            ScanSite::PulseDuration(_) => "pulse_duration_s",
            ScanSite::PulseDetuning(_) => "detuning_hz",
            ScanSite::PulseRabi(_) => "rabi_hz",
            ScanSite::Wait(_) => "wait_s",
        }
    }
}

/// A swept parameter: `points` values evenly spaced over [start, stop].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub site: ScanSite,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl ScanSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points)
            .map(|k| self.start + (self.stop - self.start) * k as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// A parsed experimental protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub header: SequenceHeader,
    pub steps: Vec<Step>,
    pub scan: Option<ScanSpec>,
}

impl Sequence {
    /// Validate the structural invariants: the first step initializes the
    /// state, exactly one measure step exists and it is last.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::domain(
                "sequence has no steps (missing init/measure)",
            ));
        }
        let inits = self
            .steps
            .iter()
            .filter(|s| matches!(s, Step::InitGround | Step::InitThermal(_)))
            .count();
        if inits == 0 {
            return Err(Error::domain("sequence has no init step"));
        }
        if inits > 1 {
            return Err(Error::domain("duplicate init step"));
        }
        if !matches!(self.steps[0], Step::InitGround | Step::InitThermal(_)) {
            return Err(Error::domain("first step must be an init"));
        }
        let measures = self
            .steps
            .iter()
            .filter(|s| matches!(s, Step::Measure { .. }))
            .count();
        if measures == 0 {
            return Err(Error::domain("sequence has no measure step"));
        }
        if measures > 1 {
            return Err(Error::domain("more than one measure step"));
        }
        if !matches!(self.steps.last(), Some(Step::Measure { .. })) {
            return Err(Error::domain("measure must be the last step"));
        }
        for step in &self.steps {
            if let Step::Pulse(p) = step {
                if p.rabi_frequency <= 0.0 {
                    return Err(Error::domain("pulse Rabi frequency must be positive"));
                }
            }
        }
        if let Some(scan) = &self.scan {
            if scan.points == 0 {
                return Err(Error::domain("scan grid must contain at least one point"));
            }
            let idx = match scan.site {
                ScanSite::PulseDuration(i)
                | ScanSite::PulseDetuning(i)
                | ScanSite::PulseRabi(i)
                | ScanSite::Wait(i) => i,
            };
            if idx >= self.steps.len() {
                return Err(Error::domain("scan site references a missing step"));
            }
        }
        Ok(())
    }

    /// Number of shots requested by the measure step.
    pub fn shots(&self) -> u64 {
        match self.steps.last() {
            Some(Step::Measure { shots }) => *shots,
            _ => 0,
        }
    }

    /// Canonical text form; parsing it back yields an identical sequence.
    pub fn pretty_print(&self) -> String {
        parser::pretty_print(self)
    }
}

// ---------------------------------------------------------------------------
// scan results and the CSV schema
// ---------------------------------------------------------------------------

/// Outcome of one scan point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Exact D-state population at measure time.
    pub p_true: f64,
    /// Shot-sampled estimate (equal to `p_true` in oracle mode).
    pub p_est: f64,
    /// Binomial standard error √(p̂(1−p̂)/N); zero in oracle mode.
    pub stderr: f64,
    pub shots: u64,
    /// Per-point RNG seed derived from the master seed and point index.
    pub seed: u64,
    /// Set when population accumulated near the Fock truncation boundary.
    pub truncation_warning: bool,
}

/// Sampled excitation probabilities over a swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Swept parameter name (`none` for a single-point run).
    pub parameter: String,
    pub values: Vec<f64>,
    pub points: Vec<ScanPoint>,
    pub master_seed: u64,
}

impl ScanResult {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.points.len() {
            return Err(Error::domain("scan values and points length mismatch"));
        }
        for p in &self.points {
            if !(0.0..=1.0).contains(&p.p_est) || !(0.0..=1.0).contains(&p.p_true) {
                return Err(Error::domain("probability estimates must lie in [0,1]"));
            }
        }
        Ok(())
    }

    pub fn any_truncation_warning(&self) -> bool {
        self.points.iter().any(|p| p.truncation_warning)
    }

    /// Serialize to the `param,value,p_true,p_est,stderr,shots,seed` CSV
    /// schema, floats with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,value,p_true,p_est,stderr,shots,seed\n");
        for (v, p) in self.values.iter().zip(self.points.iter()) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.parameter,
                fmt_float(*v),
                fmt_float(p.p_true),
                fmt_float(p.p_est),
                fmt_float(p.stderr),
                p.shots,
                p.seed
            ));
        }
        out
    }

    /// Parse a CSV produced by [`ScanResult::to_csv`].
    pub fn from_csv(text: &str) -> Result<ScanResult> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::schema("empty CSV input"))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let col = |name: &str| -> Result<usize> {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::schema(format!("missing column `{name}`")))
        };
        let c_param = col("param")?;
        let c_value = col("value")?;
        let c_ptrue = col("p_true")?;
        let c_pest = col("p_est")?;
        let c_stderr = col("stderr")?;
        let c_shots = col("shots")?;
        let c_seed = col("seed")?;

        let mut parameter = String::new();
        let mut values = Vec::new();
        let mut points = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < cols.len() {
                return Err(Error::schema(format!(
                    "row {} has {} fields, expected {}",
                    k + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            let fl = |i: usize, name: &str| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|_| Error::schema(format!("row {}: bad {name} value", k + 2)))
            };
            parameter = fields[c_param].to_string();
            values.push(fl(c_value, "value")?);
            points.push(ScanPoint {
                p_true: fl(c_ptrue, "p_true")?,
                p_est: fl(c_pest, "p_est")?,
                stderr: fl(c_stderr, "stderr")?,
                shots: fields[c_shots]
                    .parse::<u64>()
                    .map_err(|_| Error::schema(format!("row {}: bad shots value", k + 2)))?,
                seed: fields[c_seed]
                    .parse::<u64>()
                    .map_err(|_| Error::schema(format!("row {}: bad seed value", k + 2)))?,
                truncation_warning: false,
            });
        }
        if values.is_empty() {
            return Err(Error::schema("CSV contains no data rows"));
        }
        let result = ScanResult {
            parameter,
            values,
            points,
            master_seed: 0,
        };
        result.validate()?;
        Ok(result)
    }
}

/// Format a float with 17 significant digits (exact f64 round-trip).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-point seed: a splitmix64-style hash of (master seed, point index),
/// so scan points may execute in any order with identical results.
pub fn point_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
