//! Property tests: parser round-trips, coupling symmetries, distribution
//! invariants, scan determinism.

use proptest::prelude::*;

use ionlab::quantum::{coupling_strength, thermal_distribution, Axis};
use ionlab::sequence::{
    parse_sequence, scan, Pulse, PulseLength, PulseTarget, RunConfig, ScanSite, ScanSpec, Sequence,
    SequenceHeader, Step, ThermalInit,
};

fn finite_positive(max: f64) -> impl Strategy<Value = f64> {
    (1e-9..max).prop_map(|x| x)
}

fn arb_axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

fn arb_pulse() -> impl Strategy<Value = Pulse> {
    let target = prop_oneof![
        Just(PulseTarget::Carrier),
        arb_axis().prop_map(PulseTarget::RedSideband),
        arb_axis().prop_map(PulseTarget::BlueSideband),
    ];
    let length = prop_oneof![
        (1e-3..10.0f64).prop_map(PulseLength::Area),
        (1e-9..1e-2f64).prop_map(PulseLength::Duration),
    ];
    (
        target,
        -1e6..1e6f64,
        length,
        0.0..6.2f64,
        finite_positive(1e7),
    )
        .prop_map(|(target, det, length, phase, rabi)| Pulse {
            target,
            extra_detuning: det,
            length,
            phase,
            rabi_frequency: rabi,
        })
}

fn arb_step() -> impl Strategy<Value = Step> {
    prop_oneof![
        arb_pulse().prop_map(Step::Pulse),
        (0.0..1.0f64).prop_map(|f| Step::Repump { fidelity: f }),
        (0.0..1e-1f64).prop_map(Step::Wait),
        Just(Step::OpticalPump),
        (arb_axis(), 1.0..1e5f64, 0.0..0.5f64, 1e-6..1e-2f64).prop_map(
            |(axis, a_minus, ratio, duration)| Step::SidebandCool {
                axis,
                a_minus,
                a_plus: a_minus * ratio,
                duration,
            }
        ),
    ]
}

fn arb_sequence() -> impl Strategy<Value = Sequence> {
    let init = prop_oneof![
        Just(Step::InitGround),
        Just(Step::InitThermal(ThermalInit::Doppler)),
        (0.0..30.0f64).prop_map(|v| Step::InitThermal(ThermalInit::Nbar(v))),
    ];
    (
        init,
        proptest::collection::vec(arb_step(), 0..5),
        1u64..1000,
        proptest::option::of((0..3usize, 1e-6..1e-3f64, 2usize..40)),
    )
        .prop_map(|(init, middle, shots, scan)| {
            let mut steps = vec![init];
            steps.extend(middle);
            steps.push(Step::Measure { shots });
            // attach a wait-scan only when a wait exists at a valid index;
            // the parser leaves scan.start in the placeholder, so canonicalize
            let scan = scan.and_then(|(offset, stop, points)| {
                steps
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| matches!(s, Step::Wait(_)))
                    .map(|(i, _)| i)
                    .nth(offset)
                    .map(|site| ScanSpec {
                        site: ScanSite::Wait(site),
                        start: 0.0,
                        stop,
                        points,
                    })
            });
            if let Some(s) = &scan {
                if let ScanSite::Wait(i) = s.site {
                    steps[i] = Step::Wait(s.start);
                }
            }
            Sequence {
                header: SequenceHeader {
                    trap_hz: [Some(2.16e6), Some(2.07e6), Some(4.51e6)],
                    species: "Ca40".into(),
                },
                steps,
                scan,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parser_round_trip(seq in arb_sequence()) {
        let text = seq.pretty_print();
        let reparsed = parse_sequence(&text).unwrap();
        prop_assert_eq!(&seq, &reparsed);
        // a second round trip is the identity on the text too
        prop_assert_eq!(text, reparsed.pretty_print());
    }

    #[test]
    fn coupling_symmetry_and_range(n in 0usize..25, s in -4i32..=4, eta in 0.0..0.4f64) {
        prop_assume!(n as i32 + s >= 0);
        let a = coupling_strength(n, s, eta).unwrap();
        let b = coupling_strength((n as i32 + s) as usize, -s, eta).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn thermal_distribution_invariants(nbar in 0.0..20.0f64) {
        // right at n_max = 10·n̄ the truncated mean misses the 10⁻³ bound by
        // ~30% around n̄ ≈ 4, so test with headroom over that floor
        let n_max = (10.0 * nbar).ceil() as usize + 20;
        let d = thermal_distribution(nbar, n_max).unwrap();
        let sum: f64 = d.probabilities().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        if nbar > 0.0 {
            prop_assert!((d.mean() / nbar - 1.0).abs() < 1e-3);
        }
        for w in d.probabilities().windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
    }
}

#[test]
fn scan_is_deterministic_and_order_insensitive() {
    let seq = parse_sequence(
        "trap z=4.51MHz\nion Ca40\ninit ground\n\
         pulse bsb(z) t=scan(0us,60us,13) omega=21kHz\nmeasure shots=150\n",
    )
    .unwrap();
    let species = ionlab::quantum::IonSpecies::ca40();
    let trap = ionlab::quantum::TrapConfig::from_cycle_frequencies(
        [2.16e6, 2.07e6, 4.51e6],
        [
            0.0,
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
    )
    .unwrap();
    let config = RunConfig::new(species, trap);

    let reference = scan(&seq, &config, 31, None).unwrap();
    // different pool sizes exercise different work splits
    for threads in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let run = pool.install(|| scan(&seq, &config, 31, None).unwrap());
        assert_eq!(run, reference, "{threads}-thread run differs");
        assert_eq!(run.to_csv(), reference.to_csv());
    }
}

#[test]
fn shot_estimates_converge_to_oracle() {
    let seq = parse_sequence(
        "trap z=4.51MHz\nion Ca40\ninit thermal nbar=1\n\
         pulse bsb(z) t=scan(2us,50us,7) omega=21kHz\nmeasure shots=0\n",
    )
    .unwrap();
    let species = ionlab::quantum::IonSpecies::ca40();
    let trap = ionlab::quantum::TrapConfig::from_cycle_frequencies(
        [2.16e6, 2.07e6, 4.51e6],
        [
            0.0,
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
    )
    .unwrap();
    let config = RunConfig::new(species, trap);
    let oracle = scan(&seq, &config, 5, Some(0)).unwrap();
    let sampled = scan(&seq, &config, 5, Some(10_000)).unwrap();
    for (o, s) in oracle.points.iter().zip(&sampled.points) {
        let sigma = (o.p_true * (1.0 - o.p_true) / 10_000f64).sqrt().max(1e-4);
        assert!(
            (s.p_est - o.p_true).abs() < 3.0 * sigma,
            "estimate {} vs oracle {}",
            s.p_est,
            o.p_true
        );
    }
}
