//! End-to-end pipeline tests that chain the sequence engine and analysis:
//! two-ion rocking-mode runs, heating in the slow-trap regime, and the shot
//! scaling of fitted error bars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ionlab::analysis::{
    fit_lorentzian_peaks, heating_from_wait_scans, thermometry_from_sideband_scans,
};
use ionlab::sequence::{parse_config, parse_sequence, scan, PartialConfig, ScanPoint, ScanResult};

const LINEAR_TRAP_CFG: &str = "\
trap x=1.4MHz, y=1.4MHz, z=0.7MHz
ion Ca40
laser cx=0.5, cy=0.5, cz=0.7071067811865476
crystal ions=2 mode=rocking
";

#[test]
fn two_ion_rocking_heating_recovered() {
    // heating of one quantum per 30 ms, inside the 20–50 ms/phonon band
    let injected = 1.0 / 0.030;
    let cfg_text = format!("{LINEAR_TRAP_CFG}noise heating={injected}\n");
    let make = |target: &str| {
        parse_sequence(&format!(
            "trap x=1.4MHz, y=1.4MHz, z=0.7MHz\nion Ca40\ninit ground\n\
             wait scan(2ms,29ms,4)\npulse {target}(x) t=0.15ms omega=15kHz\nmeasure shots=0\n"
        ))
        .unwrap()
    };
    let red_seq = make("rsb");
    let blue_seq = make("bsb");
    let config = PartialConfig::from_header(&red_seq.header)
        .merge(&parse_config(&cfg_text).unwrap())
        .resolve()
        .unwrap();
    let red = scan(&red_seq, &config, 1, Some(0)).unwrap();
    let blue = scan(&blue_seq, &config, 1, Some(0)).unwrap();
    let result = heating_from_wait_scans(&red, &blue).unwrap();
    assert!(
        (result.rate.quanta_per_second / injected - 1.0).abs() < 0.10,
        "slope {} vs {injected}",
        result.rate.quanta_per_second
    );
}

#[test]
fn two_ion_rocking_thermometry_oracle() {
    // cool the rocking mode to p₀ = 0.95 and read it back from the windows
    let make = |window: &str| {
        parse_sequence(&format!(
            "trap x=1.4MHz, y=1.4MHz, z=0.7MHz\nion Ca40\ninit thermal nbar=5\n\
             cool mode=x A-=30000 A+=1500 t=3ms\n\
             pulse carrier t=0.8ms omega=20kHz detune={window}\nmeasure shots=0\n"
        ))
        .unwrap()
    };
    let red_seq = make("scan(-1.2144MHz,-1.2104MHz,33)");
    let blue_seq = make("scan(1.2104MHz,1.2144MHz,33)");
    let config = PartialConfig::from_header(&red_seq.header)
        .merge(&parse_config(LINEAR_TRAP_CFG).unwrap())
        .resolve()
        .unwrap();
    let red = scan(&red_seq, &config, 1, Some(0)).unwrap();
    let blue = scan(&blue_seq, &config, 1, Some(0)).unwrap();
    let result = thermometry_from_sideband_scans(&red, &blue).unwrap();
    let th = result.thermal.unwrap();
    assert!((th.p0 - 0.95).abs() < 0.005, "p₀ = {}", th.p0);
}

#[test]
fn fitted_errors_scale_as_inverse_sqrt_shots() {
    let (c, h, w) = (0.0, 0.6, 2.0);
    let x: Vec<f64> = (0..61).map(|k| -15.0 + 0.5 * k as f64).collect();
    let sample = |shots: u64, seed: u64| -> ScanResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<ScanPoint> = x
            .iter()
            .map(|&xk| {
                let p: f64 = h * w * w / ((xk - c).powi(2) + w * w);
                let hits = (0..shots).filter(|_| rng.gen::<f64>() < p).count();
                let p_est = hits as f64 / shots as f64;
                ScanPoint {
                    p_true: p,
                    p_est,
                    stderr: (p_est * (1.0 - p_est) / shots as f64).sqrt(),
                    shots,
                    seed,
                    truncation_warning: false,
                }
            })
            .collect();
        ScanResult {
            parameter: "detuning_hz".into(),
            values: x.clone(),
            points,
            master_seed: seed,
        }
    };
    let coarse = fit_lorentzian_peaks(&sample(100, 5), 1).unwrap();
    let fine = fit_lorentzian_peaks(&sample(10_000, 5), 1).unwrap();
    let ratio = coarse[0].height_err / fine[0].height_err;
    assert!(
        (7.0..13.0).contains(&ratio),
        "height error ratio {ratio} not consistent with 1/√shots"
    );
    assert!((fine[0].height - h).abs() < 0.02);
}
