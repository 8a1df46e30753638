use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use super::rrc::rrc_taps;
use super::ModemConfig;
use crate::error::{invalid, Error, Result};
use crate::linearity::{max_signal_power, LinearityModel};
use crate::noise::{apply_saturation, derive_seeds, synthesize_trace, NoiseSpectrum, NoiseTrace, SpectrumLabel};
use crate::receiver::{ReceiverParams, ELEMENTARY_CHARGE};
use crate::units::{from_db, PowerWatts};

/// Gray labels of the four quadrants, counter-clockwise from the first.
/// The first bit is the sign of Q, the second the sign of I.
const GRAY: [[u8; 2]; 4] = [[0, 0], [0, 1], [1, 1], [1, 0]];

pub(crate) fn gray_bits(quadrant: u8) -> [u8; 2] {
    GRAY[quadrant as usize]
}

fn quadrant_of_bits(bits: [u8; 2]) -> u8 {
    GRAY.iter().position(|g| *g == bits).unwrap() as u8
}

fn quadrant_symbol(q: u8) -> Complex64 {
    Complex64::from_polar(1.0, FRAC_PI_4 + q as f64 * FRAC_PI_2)
}

pub(crate) fn decide(z: Complex64) -> u8 {
    match (z.re >= 0.0, z.im >= 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// One cyclic transmission frame.
#[derive(Debug, Clone)]
pub struct QpskFrame {
    /// Payload bits, carried differentially by symbols 1..n.
    pub payload_bits: Vec<u8>,
    /// Absolute quadrant of each transmitted symbol; symbol 0 is the
    /// differential reference and always sits in quadrant 0.
    pub quadrants: Vec<u8>,
    pub symbols: Vec<Complex64>,
    /// Unit-power complex envelope at the sample rate.
    pub envelope: Vec<Complex64>,
    /// `Re{envelope · e^{j2π f_IF t}}`.
    pub passband: Vec<f64>,
}

impl QpskFrame {
    /// Passband waveform with an extra static carrier phase.
    pub fn passband_with_phase(&self, config: &ModemConfig, phase: f64) -> Vec<f64> {
        let step = config.if_freq / config.sample_rate;
        self.envelope
            .iter()
            .enumerate()
            .map(|(n, s)| (s * carrier(step, n, phase)).re)
            .collect()
    }
}

fn carrier(step: f64, n: usize, phase: f64) -> Complex64 {
    let cycles = (n as f64 * step).fract();
    Complex64::from_polar(1.0, 2.0 * PI * cycles + phase)
}

/// Gray-mapped, differentially encoded QPSK with RRC pulses at the IF.
pub fn generate_qpsk(config: &ModemConfig, seed: u64) -> Result<QpskFrame> {
    config.validate()?;
    let n = config.n_symbols;
    let sps = config.samples_per_symbol();
    let len = config.frame_len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let payload_bits: Vec<u8> = (0..2 * (n - 1)).map(|_| rng.random_range(0..2u8)).collect();
    let mut quadrants = Vec::with_capacity(n);
    quadrants.push(0u8);
    for pair in payload_bits.chunks_exact(2) {
        let step = quadrant_of_bits([pair[0], pair[1]]);
        quadrants.push((quadrants.last().unwrap() + step) % 4);
    }
    let symbols: Vec<Complex64> = quadrants.iter().map(|&q| quadrant_symbol(q)).collect();

    let taps = rrc_taps(sps, config.rolloff, config.rrc_span);
    let half = config.rrc_span * sps;
    let mut envelope = vec![Complex64::new(0.0, 0.0); len];
    for (k, a) in symbols.iter().enumerate() {
        let start = k * sps + len - half;
        for (m, h) in taps.iter().enumerate() {
            envelope[(start + m) % len] += a * h;
        }
    }
    let step = config.if_freq / config.sample_rate;
    let passband = envelope
        .iter()
        .enumerate()
        .map(|(i, s)| (s * carrier(step, i, 0.0)).re)
        .collect();
    Ok(QpskFrame { payload_bits, quadrants, symbols, envelope, passband })
}

#[derive(Debug, Clone)]
pub struct FrontEndOutput {
    /// Balanced photocurrent, A.
    pub trace: NoiseTrace,
    /// Set when the signal exceeds the linear ceiling of the receiver.
    pub saturation_warning: bool,
    pub carrier_phase: f64,
}

fn bin_freq(k: usize, len: usize, df: f64) -> f64 {
    if k <= len / 2 {
        k as f64 * df
    } else {
        (len - k) as f64 * df
    }
}

/// Noise density at the front-end output for the configured LO, A²/Hz.
pub(crate) fn front_end_noise_psd(config: &ModemConfig, params: &ReceiverParams) -> impl Fn(f64) -> f64 {
    let gain = apply_saturation(config.p_lo, params);
    let shot = 2.0 * ELEMENTARY_CHARGE * params.dc_photocurrent(config.p_lo) * gain;
    let floor = crate::noise::electronic_noise_floor(params);
    let fc = params.noise_corner_freq;
    let backend = config.backend_noise_psd;
    let params = params.clone();
    move |f: f64| (shot + floor * (1.0 + (f / fc).powi(2))) * params.tia_gain_sq(f) + backend
}

/// Balanced photocurrent for a received signal power.
///
/// The beat term `2 R_eff √(g P_LO P_sig) · waveform` passes the receiver
/// magnitude response (group delay removed), then shot, TIA and back-end
/// noise are added. `g` is the gain compression at the configured LO.
pub fn front_end(
    frame: &QpskFrame,
    p_sig: PowerWatts,
    config: &ModemConfig,
    params: &ReceiverParams,
    seed: u64,
) -> Result<FrontEndOutput> {
    config.validate()?;
    params.validate()?;
    let len = config.frame_len();
    if frame.envelope.len() != len {
        return Err(invalid("frame does not match the modem configuration"));
    }
    let seeds = derive_seeds(seed);
    let carrier_phase = 2.0 * PI * ChaCha8Rng::seed_from_u64(seeds[0]).random::<f64>();
    let gain = apply_saturation(config.p_lo, params);
    let amp = 2.0 * params.effective_responsivity() * (gain * config.p_lo.watts() * p_sig.watts()).sqrt();

    let df = config.sample_rate / len as f64;
    let mut spectrum: Vec<Complex64> = frame
        .passband_with_phase(config, carrier_phase)
        .iter()
        .map(|x| Complex64::new(amp * x, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut spectrum);
    for (k, x) in spectrum.iter_mut().enumerate() {
        *x *= params.tia_gain_sq(bin_freq(k, len, df)).sqrt() / len as f64;
    }
    planner.plan_fft_inverse(len).process(&mut spectrum);
    let mut samples: Vec<f64> = spectrum.iter().map(|c| c.re).collect();

    if config.noise_enabled {
        let freqs: Vec<f64> = (1..=len / 2).map(|k| k as f64 * df).collect();
        let density = front_end_noise_psd(config, params);
        let psd = freqs.iter().map(|&f| density(f)).collect();
        let noise_spec = NoiseSpectrum::new(freqs, psd, SpectrumLabel::Total)?;
        let noise = synthesize_trace(&noise_spec, config.sample_rate, len, seeds[1])?;
        samples.iter_mut().zip(&noise.samples).for_each(|(s, n)| *s += n);
    }

    let ceiling = max_signal_power(config.p_lo, params, &LinearityModel::default())?;
    Ok(FrontEndOutput {
        trace: NoiseTrace { sample_rate: config.sample_rate, samples, seed },
        saturation_warning: p_sig.to_dbm().0 > ceiling.0,
        carrier_phase,
    })
}

/// Passband waveform plus white Gaussian noise at a given Eb/N0.
pub fn awgn_channel(frame: &QpskFrame, config: &ModemConfig, ebn0_db: f64, phase: f64, seed: u64) -> NoiseTrace {
    let es_n0 = 2.0 * from_db(ebn0_db);
    let sigma = (config.samples_per_symbol() as f64 / (4.0 * es_n0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = frame
        .passband_with_phase(config, phase)
        .into_iter()
        .map(|x| {
            let n: f64 = StandardNormal.sample(&mut rng);
            x + sigma * n
        })
        .collect();
    NoiseTrace { sample_rate: config.sample_rate, samples, seed }
}

#[derive(Debug, Clone)]
pub struct Demodulated {
    /// Phase-corrected matched-filter outputs scaled to unit rms. The
    /// quadrant labelling still carries the π/2 ambiguity.
    pub symbols: Vec<Complex64>,
    pub quadrants: Vec<u8>,
    /// Differentially decoded payload, free of the π/2 ambiguity.
    pub payload_bits: Vec<u8>,
    /// Residual carrier phase removed by the fourth-power estimator.
    pub phase_estimate: f64,
}

/// Digital I/Q downconversion, matched filtering at the known symbol timing,
/// fourth-power carrier-phase removal and differential decoding.
pub fn demodulate(trace: &NoiseTrace, config: &ModemConfig) -> Result<Demodulated> {
    config.validate()?;
    let len = config.frame_len();
    if trace.samples.len() != len {
        return Err(invalid(format!("trace holds {} samples, expected {len}", trace.samples.len())));
    }
    let sps = config.samples_per_symbol();
    let step = config.if_freq / config.sample_rate;
    // cos and -sin branches of the digital 90° hybrid.
    let baseband: Vec<Complex64> = trace
        .samples
        .iter()
        .enumerate()
        .map(|(n, x)| 2.0 * x * carrier(step, n, 0.0).conj())
        .collect();

    let taps = rrc_taps(sps, config.rolloff, config.rrc_span);
    let half = config.rrc_span * sps;
    let filtered: Vec<Complex64> = (0..config.n_symbols)
        .map(|k| {
            let start = k * sps + len - half;
            taps.iter()
                .enumerate()
                .map(|(m, h)| baseband[(start + m) % len] * h)
                .sum()
        })
        .collect();

    let fourth: Complex64 = filtered.iter().map(|y| y.powi(4)).sum();
    if !(fourth.norm() > 0.0) || !fourth.norm().is_finite() {
        return Err(Error::Demodulation("no carrier found for phase estimation".into()));
    }
    let phase_estimate = (fourth.arg() - PI) / 4.0;
    let rotate = Complex64::from_polar(1.0, -phase_estimate);
    let rms = (filtered.iter().map(|y| y.norm_sqr()).sum::<f64>() / filtered.len() as f64).sqrt();
    let symbols: Vec<Complex64> = filtered.iter().map(|y| y * rotate / rms).collect();
    let quadrants: Vec<u8> = symbols.iter().map(|&z| decide(z)).collect();
    let payload_bits = quadrants
        .windows(2)
        .flat_map(|w| gray_bits((w[1] + 4 - w[0]) % 4))
        .collect();
    Ok(Demodulated { symbols, quadrants, payload_bits, phase_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::PowerDbm;

    fn small() -> ModemConfig {
        ModemConfig { n_symbols: 1 << 12, ..Default::default() }
    }

    #[test]
    fn symbols_are_unit_qpsk() {
        let f = generate_qpsk(&small(), 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for s in &f.symbols {
            assert!((s.re.abs() - r).abs() < 1e-15 && (s.im.abs() - r).abs() < 1e-15);
        }
        assert_eq!(f.quadrants[0], 0);
        assert_eq!(f.payload_bits.len(), 2 * (f.symbols.len() - 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_qpsk(&small(), 11).unwrap();
        let b = generate_qpsk(&small(), 11).unwrap();
        let c = generate_qpsk(&small(), 12).unwrap();
        assert_eq!(a.symbols, b.symbols);
        assert_eq!(a.passband, b.passband);
        assert_ne!(a.symbols, c.symbols);
    }

    #[test]
    fn envelope_has_unit_power() {
        let f = generate_qpsk(&ModemConfig::default(), 4).unwrap();
        let p = f.envelope.iter().map(|s| s.norm_sqr()).sum::<f64>() / f.envelope.len() as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn spectral_occupancy() {
        let config = ModemConfig::default();
        let f = generate_qpsk(&config, 2).unwrap();
        let len = f.passband.len();
        let mut x: Vec<Complex64> = f.passband.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut x);
        let df = config.sample_rate / len as f64;
        let half_bw = config.baud * (1.0 + config.rolloff) / 2.0;
        let (mut inside, mut total) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate().take(len / 2 + 1) {
            let p = v.norm_sqr();
            total += p;
            if (k as f64 * df - config.if_freq).abs() <= half_bw {
                inside += p;
            }
        }
        assert!(inside / total >= 0.99, "{}", inside / total);
    }

    #[test]
    fn noiseless_loopback() {
        let config = ModemConfig { noise_enabled: false, ..small() };
        let params = ReceiverParams::default();
        let f = generate_qpsk(&config, 8).unwrap();
        let out = front_end(&f, PowerDbm(-50.0).to_watts(), &config, &params, 3).unwrap();
        let d = demodulate(&out.trace, &config).unwrap();
        assert_eq!(d.payload_bits, f.payload_bits);
    }

    #[test]
    fn quarter_turn_changes_no_payload_bits() {
        let config = small();
        let f = generate_qpsk(&config, 21).unwrap();
        let base = awgn_channel(&f, &config, 25.0, 0.1, 77);
        let turned = awgn_channel(&f, &config, 25.0, 0.1 + FRAC_PI_2, 77);
        let a = demodulate(&base, &config).unwrap();
        let b = demodulate(&turned, &config).unwrap();
        assert_eq!(a.payload_bits, b.payload_bits);
        assert_eq!(a.payload_bits, f.payload_bits);
        assert_ne!(a.quadrants, b.quadrants);
    }

    #[test]
    fn dark_trace_fails_phase_estimation() {
        let config = small();
        let zero = NoiseTrace { sample_rate: config.sample_rate, samples: vec![0.0; config.frame_len()], seed: 0 };
        assert!(matches!(demodulate(&zero, &config), Err(Error::Demodulation(_))));
    }

    #[test]
    fn dark_front_end_matches_noise_prediction() {
        let config = ModemConfig { n_symbols: 1 << 16, ..Default::default() };
        let params = ReceiverParams::default();
        let f = generate_qpsk(&config, 1).unwrap();
        let out = front_end(&f, PowerWatts::ZERO, &config, &params, 9).unwrap();
        let len = config.frame_len();
        let df = config.sample_rate / len as f64;
        let density = front_end_noise_psd(&config, &params);
        let expected: f64 = (1..=len / 2).map(|k| density(k as f64 * df) * df).sum();
        let v = out.trace.variance();
        assert!((v / expected - 1.0).abs() < 0.03, "{}", v / expected);
    }

    #[test]
    fn saturation_warning_above_linear_ceiling() {
        let config = ModemConfig { noise_enabled: false, ..small() };
        let params = ReceiverParams::default();
        let f = generate_qpsk(&config, 1).unwrap();
        let hot = front_end(&f, PowerDbm(-30.0).to_watts(), &config, &params, 1).unwrap();
        let cold = front_end(&f, PowerDbm(-80.0).to_watts(), &config, &params, 1).unwrap();
        assert!(hot.saturation_warning);
        assert!(!cold.saturation_warning);
    }
}
