//! Independent numerical oracles for the coupling matrix elements and for
//! closed-form pulse dynamics. The oracles here share no code with the
//! implementation paths they check.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use ionlab::analysis::ramsey_probability;
use ionlab::quantum::{coupling_strength, thermal_distribution, IonSpecies, TrapConfig};
use ionlab::sequence::{parse_sequence, run_point, scan, RunConfig, Step};

const TWO_PI: f64 = 2.0 * PI;

/// exp(iη(a + a†)) on a generously truncated space by scaling-and-squaring
/// of the Taylor series.
fn displacement_by_matrix_exponential(dim: usize, eta: f64) -> DMatrix<C64> {
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    for n in 1..dim {
        let v = (n as f64).sqrt();
        a[(n - 1, n)] += C64::new(0.0, eta) * v; // iη·a
        a[(n, n - 1)] += C64::new(0.0, eta) * v; // iη·a†
    }
    // scale so the Taylor series converges fast, then square back
    let norm = a.norm();
    let mut squarings = 0u32;
    let mut scaled = a;
    while norm / 2f64.powi(squarings as i32) > 0.25 {
        squarings += 1;
    }
    scaled /= C64::new(2f64.powi(squarings as i32), 0.0);

    let mut result = DMatrix::<C64>::identity(dim, dim);
    let mut term = DMatrix::<C64>::identity(dim, dim);
    for k in 1..=24 {
        term = (&term * &scaled) / C64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[test]
fn laguerre_couplings_match_matrix_exponential() {
    for &eta in &[0.01, 0.05, 0.1, 0.2, 0.3] {
        // margin above the probed levels keeps truncation error negligible
        let dim = 20 + 45;
        let u = displacement_by_matrix_exponential(dim, eta);
        for n in 0..=20usize {
            for s in -3i32..=3 {
                let m = n as i32 + s;
                if m < 0 {
                    continue;
                }
                let expected = u[(m as usize, n)].norm();
                let got = coupling_strength(n, s, eta).unwrap();
                assert!(
                    (got - expected).abs() < 1e-8,
                    "n={n} s={s} η={eta}: {got} vs {expected}"
                );
            }
        }
    }
}

fn paper_config() -> RunConfig {
    let species = IonSpecies::ca40();
    let trap = TrapConfig::from_cycle_frequencies(
        [2.16e6, 2.07e6, 4.51e6],
        [
            0.0,
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
    )
    .unwrap();
    RunConfig::new(species, trap)
}

#[test]
fn oracle_scan_matches_rabi_closed_form() {
    // thermal mixture on the resonant blue sideband: P_D(τ) = Σ p_n sin²(Ω_{n,n+1}τ/2)
    let seq = parse_sequence(
        "trap z=4.51MHz\nion Ca40\ninit thermal nbar=2\n\
         pulse bsb(z) t=scan(0us,150us,31) omega=21kHz\nmeasure shots=0\n",
    )
    .unwrap();
    let mut config = paper_config();
    config.resonant_only = true;
    let result = scan(&seq, &config, 1, Some(0)).unwrap();

    let n_max = ionlab::quantum::default_n_max(2.0);
    let dist = thermal_distribution(2.0, n_max).unwrap();
    let eta = ionlab::quantum::lamb_dicke(
        &config.species,
        TWO_PI * 4.51e6,
        std::f64::consts::FRAC_1_SQRT_2,
    )
    .unwrap();
    let omega = TWO_PI * 21e3;
    for (tau, point) in result.values.iter().zip(&result.points) {
        let expected: f64 = dist
            .probabilities()
            .iter()
            .enumerate()
            .take(n_max) // the top level has no blue partner
            .map(|(n, &pn)| {
                let w = omega * coupling_strength(n, 1, eta).unwrap();
                pn * (w * tau / 2.0).sin().powi(2)
            })
            .sum();
        assert!(
            (point.p_true - expected).abs() < 1e-6,
            "τ={tau}: {} vs {expected}",
            point.p_true
        );
    }
}

#[test]
fn executor_ramsey_matches_two_pulse_model() {
    // carrier Ramsey from |S,0⟩ reduces exactly to a two-level problem with
    // Rabi frequency Ω·M₀₀(η)
    let t_p = 22e-6;
    let gap = 0.2e-3;
    let omega_dsl_hz = 250e3 / TWO_PI; // printed back exactly below
    let text = format!(
        "trap z=4.51MHz\nion Ca40\ninit ground\n\
         pulse carrier t={t_p}s omega={omega_dsl_hz}Hz\n\
         wait {gap}s\n\
         pulse carrier t={t_p}s omega={omega_dsl_hz}Hz\n\
         measure shots=0\n"
    );
    let seq = parse_sequence(&text).unwrap();
    let mut config = paper_config();
    config.resonant_only = true;

    let eta = ionlab::quantum::lamb_dicke(
        &config.species,
        TWO_PI * 4.51e6,
        std::f64::consts::FRAC_1_SQRT_2,
    )
    .unwrap();
    let omega = match &seq.steps[1] {
        Step::Pulse(p) => p.rabi_frequency,
        _ => unreachable!(),
    };
    let omega_eff = omega * coupling_strength(0, 0, eta).unwrap();

    for &delta_hz in &[-9e3, -4.2e3, 0.0, 1.7e3, 6.3e3, 12e3] {
        let mut s = seq.clone();
        for step in &mut s.steps {
            if let Step::Pulse(p) = step {
                p.extra_detuning = TWO_PI * delta_hz;
            }
        }
        let got = run_point(&s, &config, 1).unwrap().p_true;
        let expected = ramsey_probability(TWO_PI * delta_hz, omega_eff, t_p, gap, 0.0);
        assert!(
            (got - expected).abs() < 1e-9,
            "δ = {delta_hz} Hz: {got} vs {expected}"
        );
    }
}

#[test]
fn detuning_scan_is_a_laser_offset() {
    // Fig. 2-style program: the scanned detuning shifts both pulses
    let seq = parse_sequence(
        "trap z=4.51MHz\nion Ca40\ninit ground\n\
         pulse carrier pi/2 omega=18.06kHz\n\
         wait 0.2ms\n\
         pulse carrier pi/2 omega=18.06kHz detune=scan(-12kHz,12kHz,97)\n\
         measure shots=0\n",
    )
    .unwrap();
    let mut config = paper_config();
    config.resonant_only = true;
    let result = scan(&seq, &config, 1, Some(0)).unwrap();

    // fringes of period 1/T = 5 kHz in detuning
    let y: Vec<f64> = result.points.iter().map(|p| p.p_true).collect();
    let mut maxima = 0;
    for k in 1..y.len() - 1 {
        if y[k] > y[k - 1] && y[k] >= y[k + 1] {
            maxima += 1;
        }
    }
    let expected = (24e3f64 / 5e3).round() as i32;
    assert!(
        (maxima as i32 - expected).abs() <= 1,
        "{maxima} fringe maxima over 24 kHz, expected ≈ {expected}"
    );
}
