use bhdtwin::qpsk::{
    analytic_ber, awgn_channel, demodulate, front_end, generate_qpsk, gray_qpsk_ber, measure_ber, sensitivity_search,
};
use bhdtwin::units::{from_db, PowerDbm};
use bhdtwin::{ModemConfig, ReceiverParams};

fn awgn_ber(config: &ModemConfig, ebn0_db: f64, phase: f64, seed: u64) -> (f64, f64) {
    let frame = generate_qpsk(config, seed).unwrap();
    let trace = awgn_channel(&frame, config, ebn0_db, phase, seed + 1000);
    let rx = demodulate(&trace, config).unwrap();
    let errors = (0..4u8)
        .map(|rot| {
            frame
                .quadrants
                .iter()
                .zip(&rx.quadrants)
                // Gray neighbours differ in one bit, opposite quadrants in two.
                .map(|(&s, &r)| match (4 + s - (r + rot) % 4) % 4 {
                    0 => 0u64,
                    2 => 2,
                    _ => 1,
                })
                .sum::<u64>()
        })
        .min()
        .unwrap();
    (errors as f64, config.bits_per_frame() as f64)
}

#[test]
fn awgn_ber_follows_gray_qpsk_curve() {
    let config = ModemConfig::default();
    for ebn0_db in [4.0, 6.79, 9.0] {
        let expected = gray_qpsk_ber(from_db(ebn0_db));
        let (mut errors, mut bits) = (0.0, 0.0);
        let mut seed = 1;
        while errors < 200.0 && bits < 4e6 {
            let (e, b) = awgn_ber(&config, ebn0_db, 0.7, seed);
            errors += e;
            bits += b;
            seed += 1;
        }
        let sigma = (expected * (1.0 - expected) / bits).sqrt();
        let ber = errors / bits;
        assert!((ber - expected).abs() <= 3.0 * sigma, "Eb/N0 {ebn0_db} dB: {ber:e} vs {expected:e}");
    }
}

#[test]
fn static_phase_offset_is_absorbed() {
    let config = ModemConfig::default();
    let (e0, bits) = awgn_ber(&config, 5.0, 0.0, 9);
    let (e30, _) = awgn_ber(&config, 5.0, 30f64.to_radians(), 9);
    let expected = gray_qpsk_ber(from_db(5.0));
    let sigma = (expected * bits).sqrt();
    assert!((e0 - e30).abs() <= 3.0 * sigma * 2f64.sqrt(), "{e0} vs {e30}");
}

#[test]
fn noiseless_loopback_over_seeds() {
    let config = ModemConfig { noise_enabled: false, ..Default::default() };
    let params = ReceiverParams::default();
    for seed in 0..3 {
        let frame = generate_qpsk(&config, seed).unwrap();
        let out = front_end(&frame, PowerDbm(-60.0).to_watts(), &config, &params, seed).unwrap();
        let rx = demodulate(&out.trace, &config).unwrap();
        assert_eq!(rx.payload_bits, frame.payload_bits);
    }
}

#[test]
fn ber_falls_with_power_and_tracks_analytic() {
    let config = ModemConfig { bit_cap: 300_000, ..Default::default() };
    let params = ReceiverParams::default();
    let mut last = 1.0;
    for p in [-62.0, -59.0, -56.0] {
        let point = measure_ber(&config, &params, PowerDbm(p), 3).unwrap();
        assert!(point.ber <= last);
        last = point.ber;
        let model = analytic_ber(&config, &params, PowerDbm(p).to_watts());
        assert!(point.ber < 3.0 * model && point.ber > model / 3.0, "{p} dBm: {} vs {model}", point.ber);
    }
}

#[test]
fn sensitivity_near_calibrated_value() {
    let config = ModemConfig::default();
    let params = ReceiverParams::default();
    let r = sensitivity_search(&config, &params, 1e-3, 42).unwrap();
    eprintln!("{:?} {}", r.sensitivity, r.budget);
    assert!((r.sensitivity.0 + 55.8).abs() < 1.5);
    assert!((r.budget - (-6.0 - r.sensitivity.0)).abs() < 1e-12);
    let loose = sensitivity_search(&config, &params, 1e-2, 42).unwrap();
    assert!(loose.sensitivity.0 < r.sensitivity.0);
}

#[test]
fn removing_electronic_noise_gains_its_share() {
    use bhdtwin::qpsk::analytic_es_n0;
    let config = ModemConfig::default();
    let params = ReceiverParams::default();
    let quiet = ReceiverParams { input_noise_current_rms: 0.0, ..params.clone() };
    let no_receiver = ModemConfig { backend_noise_psd: 0.0, ..config.clone() };
    let p = PowerDbm(-56.0).to_watts();
    let gain_db = 10.0 * (analytic_es_n0(&config, &quiet, p) / analytic_es_n0(&config, &params, p)).log10();
    // Electronic share of the matched-filter noise.
    let inv = |c: &ModemConfig, r: &ReceiverParams| 1.0 / analytic_es_n0(c, r, p);
    let total = inv(&config, &params);
    let electronic = inv(&no_receiver, &params) - inv(&no_receiver, &quiet);
    let share_db = -10.0 * (1.0 - electronic / total).log10();
    assert!(share_db > 0.0);
    assert!(gain_db >= share_db - 1e-9, "{gain_db} < {share_db}");

    let noisy = ReceiverParams { input_noise_current_rms: 2.0 * params.input_noise_current_rms, ..params.clone() };
    assert!(analytic_es_n0(&config, &noisy, p) < analytic_es_n0(&config, &params, p));
}
