use statrs::function::erf::{erfc, erfc_inv};

use super::modem::{demodulate, front_end, front_end_noise_psd, generate_qpsk, gray_bits};
use super::rrc::raised_cosine_spectrum;
use super::ModemConfig;
use crate::error::{invalid, Error, Result};
use crate::noise::{apply_saturation, derive_seeds, splitmix64};
use crate::receiver::ReceiverParams;
use crate::units::{PowerDbm, PowerWatts};

/// Coarse scan range and step of the sensitivity search, dBm.
pub const SCAN_START_DBM: f64 = -75.0;
pub const SCAN_STOP_DBM: f64 = -30.0;
pub const SCAN_STEP_DB: f64 = 2.0;
/// Bracket width at which bisection stops, dB.
pub const BRACKET_DB: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub p_sig: PowerDbm,
    pub ber: f64,
    pub errors_counted: u64,
    pub bits_tested: u64,
    /// Errors after differential decoding, over `payload_bits_tested`.
    pub payload_errors: u64,
    pub payload_bits_tested: u64,
    pub saturation_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub sensitivity: PowerDbm,
    pub target_ber: f64,
    pub launch: PowerDbm,
    pub budget: f64,
    /// Every power point evaluated during the search, sorted by power.
    pub points: Vec<BerPoint>,
}

/// Gray-coded QPSK on AWGN: `½ erfc(√(Eb/N0))`.
pub fn gray_qpsk_ber(ebn0: f64) -> f64 {
    0.5 * erfc(ebn0.max(0.0).sqrt())
}

pub fn optical_budget(launch: PowerDbm, sensitivity: PowerDbm) -> f64 {
    launch.0 - sensitivity.0
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Matched-filter integrals `(∫R|H|, ∫R·N)` over the signal band, with `R`
/// the unit-area raised-cosine spectrum in symbol-rate units.
fn band_integrals(config: &ModemConfig, params: &ReceiverParams, backend: f64) -> (f64, f64) {
    let edge = (1.0 + config.rolloff) / 2.0;
    let cfg = ModemConfig { backend_noise_psd: backend, ..config.clone() };
    let density = front_end_noise_psd(&cfg, params);
    let freq = |nu: f64| config.if_freq + nu * config.baud;
    let gain = simpson(
        |nu| raised_cosine_spectrum(nu, config.rolloff) * params.tia_gain_sq(freq(nu)).sqrt(),
        -edge,
        edge,
        4000,
    );
    let noise = simpson(|nu| raised_cosine_spectrum(nu, config.rolloff) * density(freq(nu)), -edge, edge, 4000);
    (gain, noise)
}

fn carrier_power(config: &ModemConfig, params: &ReceiverParams, p_sig: PowerWatts) -> f64 {
    let g = apply_saturation(config.p_lo, params);
    4.0 * params.effective_responsivity().powi(2) * g * config.p_lo.watts() * p_sig.watts()
}

/// Symbol SNR at the matched-filter output predicted from the noise and
/// filter spectra.
pub fn analytic_es_n0(config: &ModemConfig, params: &ReceiverParams, p_sig: PowerWatts) -> f64 {
    let (gain, noise) = band_integrals(config, params, config.backend_noise_psd);
    carrier_power(config, params, p_sig) / 2.0 / config.baud * gain * gain / noise
}

pub fn analytic_ber(config: &ModemConfig, params: &ReceiverParams, p_sig: PowerWatts) -> f64 {
    gray_qpsk_ber(analytic_es_n0(config, params, p_sig) / 2.0)
}

/// White back-end noise density that places the analytic BER crossing at
/// `sensitivity`.
pub fn backend_noise_for_sensitivity(
    config: &ModemConfig,
    params: &ReceiverParams,
    sensitivity: PowerDbm,
    target_ber: f64,
) -> Result<f64> {
    check_target(target_ber)?;
    let es_n0 = 2.0 * erfc_inv(2.0 * target_ber).powi(2);
    let (gain, receiver_noise) = band_integrals(config, params, 0.0);
    let needed = carrier_power(config, params, sensitivity.to_watts()) / 2.0 / config.baud * gain * gain / es_n0;
    let backend = needed - receiver_noise;
    if backend < 0.0 {
        return Err(Error::Calibration {
            anchor: "qpsk.sensitivity".into(),
            residual: crate::units::db(receiver_noise / needed),
            limit: 0.0,
        });
    }
    Ok(backend)
}

fn check_target(target_ber: f64) -> Result<()> {
    if !(target_ber > 1e-6 && target_ber < 1e-1) {
        return Err(invalid(format!("target BER must be in (1e-6, 1e-1), got {target_ber}")));
    }
    Ok(())
}

/// Channel-bit errors, minimised over the four π/2 labellings as a BER
/// tester does when it synchronises to the pattern.
fn channel_bit_errors(sent: &[u8], received: &[u8]) -> u64 {
    (0..4u8)
        .map(|rot| {
            sent.iter()
                .zip(received)
                .map(|(&s, &r)| {
                    let a = gray_bits(s);
                    let b = gray_bits((r + rot) % 4);
                    (a[0] != b[0]) as u64 + (a[1] != b[1]) as u64
                })
                .sum::<u64>()
        })
        .min()
        .unwrap()
}

fn trial_seeds(seed: u64, trial: u64) -> [u64; 4] {
    derive_seeds(splitmix64(seed).wrapping_add(trial))
}

/// Bit error ratio at one received power, accumulated over independent
/// frames until `min_errors` errors or `bit_cap` bits.
///
/// Trial `t` uses the same random draws at every power, so BER curves from
/// one seed are free of point-to-point sampling jitter.
pub fn measure_ber(config: &ModemConfig, params: &ReceiverParams, p_sig: PowerDbm, seed: u64) -> Result<BerPoint> {
    config.validate()?;
    params.validate()?;
    let bits_per_frame = config.bits_per_frame();
    let mut point = BerPoint {
        p_sig,
        ber: 0.0,
        errors_counted: 0,
        bits_tested: 0,
        payload_errors: 0,
        payload_bits_tested: 0,
        saturation_warning: false,
    };
    let mut trial = 0;
    while point.errors_counted < config.min_errors && point.bits_tested < config.bit_cap {
        let seeds = trial_seeds(seed, trial);
        let frame = generate_qpsk(config, seeds[0])?;
        let out = front_end(&frame, p_sig.to_watts(), config, params, seeds[1])?;
        let rx = demodulate(&out.trace, config)?;
        point.errors_counted += channel_bit_errors(&frame.quadrants, &rx.quadrants);
        point.bits_tested += bits_per_frame;
        point.payload_errors += frame.payload_bits.iter().zip(&rx.payload_bits).filter(|(a, b)| a != b).count() as u64;
        point.payload_bits_tested += frame.payload_bits.len() as u64;
        point.saturation_warning |= out.saturation_warning;
        trial += 1;
    }
    point.ber = point.errors_counted as f64 / point.bits_tested as f64;
    Ok(point)
}

pub fn ber_sweep(config: &ModemConfig, params: &ReceiverParams, powers: &[PowerDbm], seed: u64) -> Result<Vec<BerPoint>> {
    powers.iter().map(|&p| measure_ber(config, params, p, seed)).collect()
}

/// Received power at which the BER crosses `target_ber`.
///
/// A 2 dB scan over [-75, -30] dBm brackets the crossing, bisection narrows
/// the bracket to 0.2 dB, and the result is interpolated in log(BER)
/// between the bracket ends. Points stop counting after `300 / target_ber`
/// bits, which is enough to resolve the target to about 10%.
pub fn sensitivity_search(
    config: &ModemConfig,
    params: &ReceiverParams,
    target_ber: f64,
    seed: u64,
) -> Result<SensitivityResult> {
    check_target(target_ber)?;
    let cap = config.bit_cap.min((300.0 / target_ber).ceil() as u64);
    let cfg = ModemConfig { bit_cap: cap, ..config.clone() };
    let mut points = Vec::new();
    let measure = |p: f64, points: &mut Vec<BerPoint>| -> Result<BerPoint> {
        let point = measure_ber(&cfg, params, PowerDbm(p), seed)?;
        points.push(point.clone());
        Ok(point)
    };

    let steps = ((SCAN_STOP_DBM - SCAN_START_DBM) / SCAN_STEP_DB).round() as usize;
    let mut bracket = None;
    let mut prev: Option<BerPoint> = None;
    for i in 0..=steps {
        let p = SCAN_START_DBM + i as f64 * SCAN_STEP_DB;
        let point = measure(p, &mut points)?;
        if point.ber <= target_ber {
            match prev {
                Some(lo) => bracket = Some((lo, point)),
                None => {
                    return Err(Error::SearchFailure(format!(
                        "BER already {:.3e} at {SCAN_START_DBM} dBm",
                        point.ber
                    )))
                }
            }
            break;
        }
        prev = Some(point);
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::SearchFailure(format!("BER stays above {target_ber:e} up to {SCAN_STOP_DBM} dBm"))
    })?;

    while hi.p_sig.0 - lo.p_sig.0 > BRACKET_DB + 1e-9 {
        let mid = measure(0.5 * (lo.p_sig.0 + hi.p_sig.0), &mut points)?;
        if mid.ber <= target_ber {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sensitivity = if hi.ber > 0.0 {
        let t = (lo.ber.ln() - target_ber.ln()) / (lo.ber.ln() - hi.ber.ln());
        lo.p_sig.0 + t.clamp(0.0, 1.0) * (hi.p_sig.0 - lo.p_sig.0)
    } else {
        hi.p_sig.0
    };
    points.sort_by(|a, b| a.p_sig.0.total_cmp(&b.p_sig.0));
    Ok(SensitivityResult {
        sensitivity: PowerDbm(sensitivity),
        target_ber,
        launch: config.launch_power,
        budget: optical_budget(config.launch_power, PowerDbm(sensitivity)),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpsk::awgn_channel;

    #[test]
    fn budget_arithmetic() {
        assert!((optical_budget(PowerDbm(-6.0), PowerDbm(-55.8)) - 49.8).abs() < 1e-12);
        assert_eq!(optical_budget(PowerDbm(0.0), PowerDbm(-50.0)), 50.0);
        assert_eq!(optical_budget(PowerDbm(-6.0), PowerDbm(-50.0)), 44.0);
    }

    #[test]
    fn alignment_ignores_quarter_turns() {
        let sent = [0u8, 1, 2, 3, 3, 2];
        let turned: Vec<u8> = sent.iter().map(|s| (s + 1) % 4).collect();
        assert_eq!(channel_bit_errors(&sent, &turned), 0);
        assert_eq!(channel_bit_errors(&[0, 0], &[0, 1]), 1);
        assert_eq!(channel_bit_errors(&[0, 0], &[0, 2]), 2);
    }

    #[test]
    fn awgn_ber_matches_analytic() {
        let config = ModemConfig::default();
        let ebn0_db = 4.0;
        let expected = gray_qpsk_ber(crate::units::from_db(ebn0_db));
        let frame = generate_qpsk(&config, 5).unwrap();
        let trace = awgn_channel(&frame, &config, ebn0_db, 0.3, 6);
        let rx = demodulate(&trace, &config).unwrap();
        let errors = channel_bit_errors(&frame.quadrants, &rx.quadrants) as f64;
        let bits = config.bits_per_frame() as f64;
        let sigma = (expected * (1.0 - expected) / bits).sqrt();
        assert!((errors / bits - expected).abs() < 3.0 * sigma, "{} vs {expected}", errors / bits);
    }

    #[test]
    fn calibrated_backend_reproduces_target() {
        let config = ModemConfig::default();
        let params = ReceiverParams::default();
        let backend = backend_noise_for_sensitivity(&config, &params, PowerDbm(-50.0), 1e-3).unwrap();
        let cfg = ModemConfig { backend_noise_psd: backend, ..config };
        let ber = analytic_ber(&cfg, &params, PowerDbm(-50.0).to_watts());
        assert!((ber / 1e-3 - 1.0).abs() < 1e-6, "{ber}");
    }

    #[test]
    fn unreachable_sensitivity_is_a_calibration_error() {
        let config = ModemConfig::default();
        let params = ReceiverParams::default();
        assert!(matches!(
            backend_noise_for_sensitivity(&config, &params, PowerDbm(-120.0), 1e-3),
            Err(Error::Calibration { .. })
        ));
    }

    #[test]
    fn analytic_ber_is_monotone_in_power_and_noise() {
        let config = ModemConfig::default();
        let params = ReceiverParams::default();
        let a = analytic_ber(&config, &params, PowerDbm(-58.0).to_watts());
        let b = analytic_ber(&config, &params, PowerDbm(-56.0).to_watts());
        assert!(b < a);
        let noisy = ReceiverParams { input_noise_current_rms: 2.0 * params.input_noise_current_rms, ..params.clone() };
        assert!(analytic_ber(&config, &noisy, PowerDbm(-56.0).to_watts()) > b);
    }

    #[test]
    fn high_power_is_error_free() {
        let config = ModemConfig { bit_cap: 200_000, ..Default::default() };
        let params = ReceiverParams::default();
        let p = measure_ber(&config, &params, PowerDbm(-30.0), 1).unwrap();
        assert_eq!(p.errors_counted, 0);
        assert!(p.bits_tested >= config.bit_cap);
    }

    #[test]
    fn rejects_target_outside_range() {
        let config = ModemConfig::default();
        let params = ReceiverParams::default();
        assert!(sensitivity_search(&config, &params, 0.5, 1).is_err());
    }
}
