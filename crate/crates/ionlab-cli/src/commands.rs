//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;

use ionlab::analysis::{
    extract_fock_populations, fit_lorentzian_peaks, fit_ramsey, heating_from_wait_scans,
    thermometry_from_sideband_scans,
};
use ionlab::crystal::{equilibrium_positions, full_spectrum, identify_sidebands, physical_spacing};
use ionlab::error::Error as IonError;
use ionlab::quantum::Axis;
use ionlab::sequence::{
    fmt_float, parse_config, parse_sequence, scan, single_point_scan, PartialConfig, RunConfig,
    ScanResult, Sequence,
};

use crate::manifest::{ResolvedConfig, RunManifest};

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

pub fn parse_time_arg(s: &str) -> anyhow::Result<f64> {
    let (num, factor) = if let Some(v) = s.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = s.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| IonError::domain(format!("bad time value `{s}`")))?;
    Ok(v * factor)
}

/// Frequency flag in cycle units → rad/s.
pub fn parse_freq_arg(s: &str) -> anyhow::Result<f64> {
    let (num, factor) = if let Some(v) = s.strip_suffix("MHz") {
        (v, 1e6)
    } else if let Some(v) = s.strip_suffix("kHz") {
        (v, 1e3)
    } else if let Some(v) = s.strip_suffix("Hz") {
        (v, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| IonError::domain(format!("bad frequency value `{s}`")))?;
    Ok(v * factor * 2.0 * std::f64::consts::PI)
}

fn read_to_string(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Resolve the execution configuration: built-in defaults, then the config
/// file, then the program header (most specific wins).
fn resolve_config(
    header: Option<&ionlab::sequence::SequenceHeader>,
    config_path: Option<&Path>,
) -> anyhow::Result<(String, RunConfig)> {
    let mut partial = PartialConfig::default();
    if let Some(path) = config_path {
        partial = partial.merge(&parse_config(&read_to_string(path)?)?);
    }
    if let Some(h) = header {
        partial = partial.merge(&PartialConfig::from_header(h));
    }
    let name = partial.species.clone().unwrap_or_else(|| "Ca40".into());
    let config = partial.resolve()?;
    Ok((name, config))
}

fn write_output(out: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn report_csv(rows: &[(String, f64, f64)]) -> String {
    let mut body = String::from("quantity,value,stderr\n");
    for (name, value, err) in rows {
        body.push_str(&format!(
            "{name},{},{}\n",
            fmt_float(*value),
            fmt_float(*err)
        ));
    }
    body
}

fn load_scan(path: &Path) -> anyhow::Result<ScanResult> {
    let text = read_to_string(path)?;
    let result = ScanResult::from_csv(&text)?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// modes
// ---------------------------------------------------------------------------

pub fn cmd_modes(
    config_path: Option<&Path>,
    ions: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let mut partial = PartialConfig::default();
    if let Some(path) = config_path {
        partial = partial.merge(&parse_config(&read_to_string(path)?)?);
    }
    if partial.trap_hz.iter().all(|f| f.is_none()) {
        // spherical-trap defaults so `ionlab modes` works out of the box
        partial.trap_hz = [Some(2.16e6), Some(2.07e6), Some(4.51e6)];
    }
    let species_name = partial.species.clone().unwrap_or_else(|| "Ca40".into());
    let config = partial.resolve()?;
    let n_ions = ions.unwrap_or(config.n_ions);

    let crystal_axis = config.trap.crystal_axis();
    let omega_axial = config.trap.secular_frequency(crystal_axis);
    let equilibrium = equilibrium_positions(n_ions)?;
    let positions = physical_spacing(n_ions, omega_axial, &config.species)?;
    let spectrum = full_spectrum(n_ions, &config.trap)?;
    let lines = identify_sidebands(&spectrum, 2)?;

    let two_pi = 2.0 * std::f64::consts::PI;
    println!(
        "crystal: {} ion(s) along {} (ω/2π = {:.4} MHz)",
        n_ions,
        crystal_axis,
        omega_axial / two_pi / 1e6
    );
    println!("equilibrium positions:");
    for (k, (u, x)) in equilibrium.u.iter().zip(&positions).enumerate() {
        println!("  ion {k}:  u = {u:+.6}   x = {:+.3} um", x * 1e6);
    }
    println!("normal modes:");
    for m in &spectrum.modes {
        let ev: Vec<String> = m.eigenvector.iter().map(|v| format!("{v:+.4}")).collect();
        println!(
            "  {}  {:<10}  {:.6} MHz   [{}]",
            m.axis,
            m.label.to_string(),
            m.frequency / two_pi / 1e6,
            ev.join(", ")
        );
    }
    println!("sideband lines to order 2:");
    for (k, line) in lines.iter().enumerate() {
        println!(
            "  {:>3}  {:.6} MHz  order {}  {}",
            k,
            line.detuning / two_pi / 1e6,
            line.order,
            line.describe(&spectrum)
        );
    }

    if out.is_some() {
        let mut csv =
            String::from("kind,index,axis,label,order,frequency_hz,position_m,composition\n");
        for (k, (u, x)) in equilibrium.u.iter().zip(&positions).enumerate() {
            csv.push_str(&format!(
                "position,{k},{},,{},{},{},u={u}\n",
                crystal_axis,
                0,
                "",
                fmt_float(*x)
            ));
        }
        for (k, m) in spectrum.modes.iter().enumerate() {
            csv.push_str(&format!(
                "mode,{k},{},{},0,{},,\n",
                m.axis,
                m.label,
                fmt_float(m.frequency / two_pi)
            ));
        }
        for (k, line) in lines.iter().enumerate() {
            csv.push_str(&format!(
                "sideband,{k},,,{},{},,{}\n",
                line.order,
                fmt_float(line.detuning / two_pi),
                line.describe(&spectrum).replace(',', ";")
            ));
        }
        write_output(out, &csv)?;
        let mut manifest = RunManifest::new("modes");
        manifest.inputs = config_path
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        manifest.output = out.unwrap().display().to_string();
        manifest.resolved_config = Some(ResolvedConfig::from_run_config(&species_name, &config));
        manifest.extra.insert("n_ions".into(), n_ions.to_string());
        manifest.write_alongside(out.unwrap())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

pub struct RunArgs<'a> {
    pub sequence: &'a Path,
    pub config: Option<&'a Path>,
    pub seed: u64,
    pub shots: Option<u64>,
    pub oracle: bool,
    pub out: Option<&'a Path>,
    pub gnuplot_script: Option<&'a Path>,
}

pub fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let text = read_to_string(args.sequence)?;
    let seq: Sequence = parse_sequence(&text)?;
    let (species_name, config) = resolve_config(Some(&seq.header), args.config)?;

    let shots_override = if args.oracle { Some(0) } else { args.shots };
    let result = if seq.scan.is_some() {
        scan(&seq, &config, args.seed, shots_override)?
    } else {
        single_point_scan(&seq, &config, args.seed, shots_override)?
    };
    if result.any_truncation_warning() {
        eprintln!(
            "warning: population accumulated near the Fock truncation boundary; \
             consider a larger n_max"
        );
    }
    let csv = result.to_csv();
    write_output(args.out, &csv)?;

    if let Some(out) = args.out {
        let mut manifest = RunManifest::new("run");
        manifest.inputs = std::iter::once(args.sequence.display().to_string())
            .chain(args.config.iter().map(|p| p.display().to_string()))
            .collect();
        manifest.master_seed = args.seed;
        manifest.shots_override = shots_override;
        manifest.output = out.display().to_string();
        manifest.resolved_config = Some(ResolvedConfig::from_run_config(&species_name, &config));
        manifest.write_alongside(out)?;
    }

    if let Some(script) = args.gnuplot_script {
        let data = args
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "scan.csv".into());
        let body = format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set xlabel 'scan parameter'\n\
             set ylabel 'P_D'\n\
             plot '{data}' using 2:4:5 with yerrorlines title 'P_D estimate', \\\n\
             \x20    '{data}' using 2:3 with lines title 'P_D exact'\n"
        );
        std::fs::write(script, body).with_context(|| format!("writing {}", script.display()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub fn cmd_fit_thermometry(red: &Path, blue: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let red_scan = load_scan(red)?;
    let blue_scan = load_scan(blue)?;
    let result = thermometry_from_sideband_scans(&red_scan, &blue_scan)?;
    let mut rows = vec![("ratio".to_string(), result.ratio, result.ratio_err)];
    match result.thermal {
        Some(th) => {
            rows.push(("nbar".into(), th.nbar, th.nbar_err));
            rows.push(("p0".into(), th.p0, th.p0_err));
            eprintln!(
                "thermometry: R = {:.4e} ± {:.1e} → n̄ = {:.4e}, p₀ = {:.5} ± {:.5}",
                result.ratio, result.ratio_err, th.nbar, th.p0, th.p0_err
            );
        }
        None => {
            eprintln!(
                "thermometry: R = {:.4} ≥ 1 — not thermal-consistent",
                result.ratio
            );
        }
    }
    write_output(out, &report_csv(&rows))?;
    write_fit_manifest("fit-thermometry", &[red, blue], out)?;
    Ok(())
}

pub fn cmd_fit_lorentzian(input: &Path, peaks: usize, out: Option<&Path>) -> anyhow::Result<()> {
    let scan = load_scan(input)?;
    let fitted = fit_lorentzian_peaks(&scan, peaks)?;
    let mut rows = Vec::new();
    for (k, p) in fitted.iter().enumerate() {
        rows.push((format!("peak{k}_center"), p.center, p.center_err));
        rows.push((format!("peak{k}_height"), p.height, p.height_err));
        rows.push((format!("peak{k}_width"), p.width, p.width_err));
        eprintln!(
            "peak {k}: center {:.6e}, height {:.4e} ± {:.1e}, width {:.4e}",
            p.center, p.height, p.height_err, p.width
        );
    }
    write_output(out, &report_csv(&rows))?;
    write_fit_manifest("fit-lorentzian", &[input], out)?;
    Ok(())
}

pub fn cmd_fit_flop(
    input: &Path,
    eta: f64,
    omega: f64,
    n_cut: usize,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let scan = load_scan(input)?;
    let analysis = extract_fock_populations(&scan, eta, omega, n_cut)?;
    let mut rows = Vec::new();
    for (n, p) in analysis.populations.iter().enumerate() {
        rows.push((format!("p{n}"), *p, 0.0));
    }
    rows.push(("decay_rate".into(), analysis.decay_rate, 0.0));
    rows.push(("residual_norm".into(), analysis.residual_norm, 0.0));
    let summary: Vec<String> = analysis
        .populations
        .iter()
        .enumerate()
        .map(|(n, p)| format!("p{n} = {p:.3}"))
        .collect();
    eprintln!("fock populations: {}", summary.join(", "));
    write_output(out, &report_csv(&rows))?;
    write_fit_manifest("fit-flop", &[input], out)?;
    Ok(())
}

pub fn cmd_fit_ramsey(
    input: &Path,
    pulse: f64,
    gap: f64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let scan = load_scan(input)?;
    let fit = fit_ramsey(&scan, pulse, gap)?;
    let rows = vec![
        ("area_error".to_string(), fit.area_error, fit.area_error_err),
        ("decay_rate".to_string(), fit.decay_rate, fit.decay_rate_err),
        ("fringe_spacing_hz".to_string(), fit.fringe_spacing_hz, 0.0),
        ("contrast".to_string(), fit.contrast, 0.0),
    ];
    eprintln!(
        "ramsey: pulse area (π/2)·(1 + {:.4} ± {:.4}), γ_⊥ = {:.1} ± {:.1} 1/s, \
         fringe spacing {:.1} Hz, contrast {:.3}",
        fit.area_error,
        fit.area_error_err,
        fit.decay_rate,
        fit.decay_rate_err,
        fit.fringe_spacing_hz,
        fit.contrast
    );
    write_output(out, &report_csv(&rows))?;
    write_fit_manifest("fit-ramsey", &[input], out)?;
    Ok(())
}

pub fn cmd_fit_heating(red: &Path, blue: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let red_scan = load_scan(red)?;
    let blue_scan = load_scan(blue)?;
    let result = heating_from_wait_scans(&red_scan, &blue_scan)?;
    let mut rows = vec![
        (
            "heating_rate".to_string(),
            result.rate.quanta_per_second,
            result.rate.stderr,
        ),
        ("nbar_intercept".to_string(), result.rate.intercept, 0.0),
    ];
    for ((t, nbar), err) in result
        .wait_times
        .iter()
        .zip(&result.nbars)
        .zip(&result.nbar_errs)
    {
        rows.push((format!("nbar_at_{t}s"), *nbar, *err));
    }
    if result.rate.negative_flag {
        eprintln!("warning: fitted heating rate is negative beyond 2σ");
    }
    eprintln!(
        "heating rate: {:.4} ± {:.4} quanta/s ({:.1} ms per phonon)",
        result.rate.quanta_per_second,
        result.rate.stderr,
        1e3 / result.rate.quanta_per_second.abs().max(1e-12)
    );
    write_output(out, &report_csv(&rows))?;
    write_fit_manifest("fit-heating", &[red, blue], out)?;
    Ok(())
}

fn write_fit_manifest(kind: &str, inputs: &[&Path], out: Option<&Path>) -> anyhow::Result<()> {
    if let Some(out) = out {
        let mut manifest = RunManifest::new(kind);
        manifest.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
        manifest.output = out.display().to_string();
        manifest.write_alongside(out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gatespeed
// ---------------------------------------------------------------------------

pub struct GateSpeedArgs<'a> {
    pub config: Option<&'a Path>,
    pub target: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub axis: Axis,
    pub out: Option<&'a Path>,
}

pub fn cmd_gatespeed(args: &GateSpeedArgs) -> anyhow::Result<()> {
    let (species_name, config) = resolve_config(None, args.config)?;
    if args.points < 2 || args.t_min <= 0.0 || args.t_max <= args.t_min {
        return Err(IonError::domain("need an ascending positive time grid").into());
    }
    let omega_mode = config.trap.secular_frequency(args.axis);
    let projection = config.trap.laser_projection(args.axis);
    let eta = ionlab::quantum::lamb_dicke(&config.species, omega_mode, projection)?;
    let ratio = args.t_max / args.t_min;
    let grid: Vec<f64> = (0..args.points)
        .map(|k| args.t_min * ratio.powf(k as f64 / (args.points - 1) as f64))
        .collect();

    let scan =
        ionlab::dynamics::gate_speed_scan(&config.species, omega_mode, eta, args.target, &grid)?;

    let two_pi = 2.0 * std::f64::consts::PI;
    let recoil = config.species.recoil_frequency();
    eprintln!(
        "blue-sideband π-pulse speed scan: ω/2π = {:.4} MHz, η = {:.5}, \
         recoil ω_rec/2π = {:.2} kHz (1/ω_rec = {:.1} μs)",
        omega_mode / two_pi / 1e6,
        eta,
        recoil / two_pi / 1e3,
        1e6 / recoil
    );

    let mut csv = String::from("t_s,infidelity,envelope\n");
    for ((t, inf), env) in scan.times.iter().zip(&scan.infidelity).zip(&scan.envelope) {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_float(*t),
            fmt_float(*inf),
            fmt_float(*env)
        ));
    }
    write_output(args.out, &csv)?;

    let t_min = match scan.t_min {
        Some(t) => t,
        None => {
            return Err(IonError::domain(format!(
                "fidelity target {} unreachable on the grid (infidelity stays above {:.2e})",
                args.target,
                1.0 - args.target
            ))
            .into())
        }
    };
    let gamma = config.noise.dephasing_rate;
    if gamma > 0.0 {
        let t_coh = 1.0 / gamma;
        println!(
            "t_min={:.6e}s, ops_within_coherence={}",
            t_min,
            (t_coh / t_min).floor() as u64
        );
    } else {
        println!("t_min={t_min:.6e}s, ops_within_coherence=n/a (no dephasing configured)");
    }

    if let Some(out) = args.out {
        let mut manifest = RunManifest::new("gatespeed");
        manifest.inputs = args
            .config
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        manifest.output = out.display().to_string();
        manifest.resolved_config = Some(ResolvedConfig::from_run_config(&species_name, &config));
        let mut extra = BTreeMap::new();
        extra.insert("target".to_string(), args.target.to_string());
        extra.insert("t_grid_min_s".to_string(), args.t_min.to_string());
        extra.insert("t_grid_max_s".to_string(), args.t_max.to_string());
        extra.insert("points".to_string(), args.points.to_string());
        extra.insert("axis".to_string(), args.axis.to_string());
        extra.insert("t_min_s".to_string(), format!("{t_min:.6e}"));
        manifest.extra = extra;
        manifest.write_alongside(out)?;
    }
    Ok(())
}
