//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured figure (run with `--nocapture` to see them).

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srx_core::{
    analytic_ppm_mi, chi_square_homogeneity, derive_pattern, peak_to_average, run_trials,
    ActiveChain, BpskAmplitude, ChannelParams, Codeword, DetectorMode, FieldState, FrameConfig,
    PassiveChain, Pol, PolTransform, SchemeConfig, SchemeSpec, SwitchSchedule,
};

#[test]
fn criterion_1_exhaustive_concentration() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for m in 1..=8u32 {
        let chain = ActiveChain::synthesize(m).expect("synthesis succeeds");
        let report = chain.verify_concentration(1e-10).unwrap_or_else(|e| {
            panic!("m={m}: concentration verification failed: {e}");
        });
        worst = worst.max(report.max_leakage);
        let offset = chain.position_offset();
        for (bits, &pos) in report.positions.iter().enumerate() {
            assert_eq!(
                pos,
                offset + bits as i64,
                "m={m}: position map is not offset + bits at bits={bits}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget is 10 s");
    println!(
        "ACCEPTANCE 1 exhaustive concentration (m=1..8): PASS \
         (max leakage {worst:.3e}, {elapsed:.2?})"
    );
}

#[test]
fn criterion_2_module_count_scaling() {
    for m in 1..=16u32 {
        let chain = ActiveChain::synthesize(m).expect("synthesis succeeds");
        assert_eq!(chain.modules().len(), m as usize, "chain for 2^{m}-bin codewords");
        for (i, module) in chain.modules().iter().enumerate() {
            assert_eq!(module.delay_t(), 1u64 << (m as usize - 1 - i));
        }
    }
    println!("ACCEPTANCE 2 module count scaling (m=1..16): PASS (m modules, halving delays)");
}

#[test]
fn criterion_3_passive_round_trip() {
    let mut worst: f64 = 0.0;
    for m in 1..=8u32 {
        let chain = PassiveChain::new(m).expect("chain builds");
        let n_bins = 1u64 << m;
        for pol in [Pol::H, Pol::V] {
            let sym = derive_pattern(m, pol, Complex64::ONE).expect("pattern derives");
            assert_eq!(sym.pattern.n_bins() as u64, n_bins, "m={m}: pattern span");
            let per_bin = 1.0 / n_bins as f64;
            for (t, _) in sym.pattern.bins() {
                assert!(
                    (sym.pattern.bin_power(t) - per_bin).abs() <= 1e-12,
                    "m={m} pol={pol}: bin {t} power {} != {per_bin}",
                    sym.pattern.bin_power(t)
                );
            }
            let out = chain.propagate(&sym.pattern);
            let concentrated =
                out.amp(sym.predicted_output_bin, pol).norm_sqr() / out.total_energy();
            assert!(
                concentrated >= 1.0 - 1e-10,
                "m={m} pol={pol}: only {concentrated} of the energy in the output mode"
            );
            worst = worst.max(1.0 - concentrated);
        }
    }
    println!("ACCEPTANCE 3 passive round trip (m=1..8, H and V): PASS (max leakage {worst:.3e})");
}

#[test]
fn criterion_4_eightfold_peak_reduction() {
    // Equal frame length and equal symbol energy for both schemes.
    let frame_len = 16u64;
    let energy = 1.0f64;
    let ppm_pulse = FieldState::single_pulse(0, Pol::V, Complex64::new(energy.sqrt(), 0.0));
    let ppm_par = peak_to_average(&ppm_pulse, frame_len).expect("nonzero energy");
    let pattern = derive_pattern(3, Pol::H, Complex64::new(energy.sqrt(), 0.0))
        .expect("pattern derives")
        .pattern;
    assert!((pattern.total_energy() - energy).abs() < 1e-12);
    let pattern_par = peak_to_average(&pattern, frame_len).expect("nonzero energy");
    assert_eq!(ppm_par, 16.0);
    // The 1/sqrt(2) pattern amplitudes are not exactly representable, so the
    // energy sum carries a couple of ulps; the eightfold relation must hold
    // at round-off level.
    assert!(
        (pattern_par * 8.0 - ppm_par).abs() <= 1e-12,
        "pattern PAR {pattern_par} is not one eighth of PPM PAR {ppm_par}"
    );
    println!("ACCEPTANCE 4 eightfold peak reduction (m=3 vs 16-ary PPM): PASS ({ppm_par} -> {pattern_par})");
}

#[test]
fn criterion_5_erasure_statistics() {
    let n_trials = 100_000u64;
    for (point, n_s) in [0.5f64, 1.0, 2.0].into_iter().enumerate() {
        let start = Instant::now();
        let cfg = SchemeConfig::ideal(SchemeSpec::ActiveHadamard { m: 4 }, n_s);
        let report = run_trials(&cfg, n_trials, 4242 + point as u64).expect("trials run");
        let p = (-n_s).exp();
        let se = (p * (1.0 - p) / n_trials as f64).sqrt();
        assert!(
            (report.erasure_rate - p).abs() <= 3.0 * se,
            "N_s={n_s}: erasure rate {} outside 3 se of {p}",
            report.erasure_rate
        );
        assert_eq!(
            report.symbol_error_rate, 0.0,
            "N_s={n_s}: symbol errors with dark=0 must be impossible"
        );
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 30.0, "point took {elapsed:?}, budget is 30 s");
        println!(
            "ACCEPTANCE 5 erasure statistics (N_s={n_s}): PASS \
             (empirical {:.5} vs e^-N_s {p:.5}, {elapsed:.2?})",
            report.erasure_rate
        );
    }
}

#[test]
fn criterion_6_mutual_information_consistency() {
    let n_trials = 100_000u64;
    for n_s in [1.0f64, 2.0] {
        let active = SchemeConfig::ideal(SchemeSpec::ActiveHadamard { m: 4 }, n_s);
        let report = run_trials(&active, n_trials, 911).expect("trials run");
        let analytic = analytic_ppm_mi(16, n_s);
        let gap = (report.mi_bits_per_symbol - analytic).abs();
        assert!(
            gap <= 0.02,
            "N_s={n_s}: plug-in MI {} vs analytic {analytic}, gap {gap}",
            report.mi_bits_per_symbol
        );

        let reference = SchemeConfig::ideal(SchemeSpec::ReferencePpm { order: 16 }, n_s);
        let ref_report = run_trials(&reference, n_trials, 912).expect("trials run");
        let test = chi_square_homogeneity(&report.joint_counts, &ref_report.joint_counts)
            .expect("same shape");
        assert!(
            test.z_score <= 3.0,
            "N_s={n_s}: active vs reference distributions differ at {:.2} sigma",
            test.z_score
        );
        println!(
            "ACCEPTANCE 6 MI consistency (N_s={n_s}): PASS \
             (MI gap {gap:.4} bits, chi-square z={:.2})",
            test.z_score
        );
    }
}

#[test]
fn criterion_7_numerical_hygiene() {
    let mut rng = ChaCha8Rng::seed_from_u64(7777);
    let cases = 100;

    let random_amp = |rng: &mut ChaCha8Rng| {
        Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    };
    let random_state = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..12usize);
        let start = rng.random_range(-8..8i64);
        let amps = (0..n).map(|_| [random_amp(rng), random_amp(rng)]).collect();
        FieldState::from_bins(start, amps)
    };
    let random_unitary = |rng: &mut ChaCha8Rng| {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let a = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        let b = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        [
            [a * theta.cos(), b * theta.sin()],
            [-b.conj() * theta.sin(), a.conj() * theta.cos()],
        ]
    };

    // Unitarity: random constructed transforms satisfy u†u = I within 1e-12.
    for _ in 0..cases {
        let u = random_unitary(&mut rng);
        PolTransform::new(u).expect("u†u deviates more than 1e-12 from identity");
    }

    // Energy conservation and linearity of all elements at 1e-12.
    for _ in 0..cases {
        let x = random_state(&mut rng);
        let y = random_state(&mut rng);
        let a = random_amp(&mut rng);
        let b = random_amp(&mut rng);
        let t = PolTransform::new(random_unitary(&mut rng)).unwrap();
        let swaps: Vec<i64> = (0..rng.random_range(0..6usize))
            .map(|_| rng.random_range(-10..20i64))
            .collect();
        let schedule = SwitchSchedule::from_swap_bins(swaps);
        let delay_t = rng.random_range(1..6u64);
        let phase = rng.random_range(-3.0..3.0);

        type Element = Box<dyn Fn(&FieldState) -> FieldState>;
        let elements: Vec<Element> = vec![
            Box::new(move |s: &FieldState| s.apply_uniform(&t)),
            Box::new(move |s: &FieldState| s.apply_schedule(&schedule)),
            Box::new(move |s: &FieldState| s.apply_pol_delay(delay_t, phase).unwrap()),
        ];
        for element in &elements {
            let before = x.total_energy();
            let after = element(&x).total_energy();
            assert!((after - before).abs() <= 1e-12 * before.max(1.0));

            let combined = element(&x.scaled(a).superpose(&y.scaled(b)));
            let separate = element(&x).scaled(a).superpose(&element(&y).scaled(b));
            let lo = combined.start_bin().min(separate.start_bin());
            let hi = combined.end_bin().max(separate.end_bin());
            for bin in lo..hi {
                for pol in [Pol::H, Pol::V] {
                    assert!(
                        (combined.amp(bin, pol) - separate.amp(bin, pol)).norm() <= 1e-12,
                        "element is not linear"
                    );
                }
            }
        }
    }

    // Shift covariance of the full active chain at 1e-12: delaying the
    // input by one frame delays the output bin-for-bin.
    for case in 0..cases {
        let m = 1 + (case % 4) as u32;
        let chain = ActiveChain::synthesize(m).unwrap();
        let bits = rng.random_range(0..(1u32 << m));
        let code = Codeword::new(m, bits).unwrap();
        let tx = srx_core::encode_bpsk(&code, BpskAmplitude::new(random_amp(&mut rng)));
        let delta = rng.random_range(-16..16i64);

        // Shift the whole chain's schedules along with the input.
        let shifted_chain = {
            let mut modules = Vec::new();
            for module in chain.modules() {
                modules.push((module.delay_t(), module.schedule().shifted(delta)));
            }
            modules
        };
        let mut out_shifted = tx.shift(delta);
        for (delay_t, schedule) in &shifted_chain {
            out_shifted = out_shifted
                .apply_schedule(schedule)
                .apply_pol_delay(*delay_t, 0.0)
                .unwrap()
                .apply_uniform(&PolTransform::diag_to_rect())
                .apply_pol_delay(*delay_t, 0.0)
                .unwrap();
        }
        let out_then_shift = chain.apply(&tx).shift(delta);
        let lo = out_shifted.start_bin().min(out_then_shift.start_bin());
        let hi = out_shifted.end_bin().max(out_then_shift.end_bin());
        for bin in lo..hi {
            for pol in [Pol::H, Pol::V] {
                assert!(
                    (out_shifted.amp(bin, pol) - out_then_shift.amp(bin, pol)).norm() <= 1e-12,
                    "chain is not shift covariant"
                );
            }
        }
    }

    println!("ACCEPTANCE 7 numerical hygiene: PASS (unitarity, linearity, shift covariance x{cases})");
}

#[test]
fn criterion_8_determinism_across_thread_counts() {
    let frame = FrameConfig::default_for(3, 16);
    let cfgs = [
        SchemeConfig::ideal(SchemeSpec::ActiveHadamard { m: 4 }, 1.0),
        SchemeConfig {
            detector: DetectorMode::PerBinPol,
            channel: ChannelParams { dark_mean: 0.01, ..ChannelParams::ideal() },
            ..SchemeConfig::ideal(SchemeSpec::PassivePattern { m: 3, frame }, 1.5)
        },
    ];
    for cfg in &cfgs {
        let mut serialized = Vec::new();
        for threads in [1usize, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("pool builds");
            let report = pool.install(|| run_trials(cfg, 20_000, 2024).expect("trials run"));
            serialized.push(serde_json::to_string(&report).expect("report serializes"));
        }
        assert_eq!(
            serialized[0], serialized[1],
            "{}: thread count changed the serialized report",
            cfg.spec.label()
        );
    }
    println!("ACCEPTANCE 8 determinism: PASS (1-thread and 4-thread runs byte-identical)");
}
