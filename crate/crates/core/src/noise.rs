//! Shot and electronic noise of the balanced receiver, synthetic time traces,
//! and the two QCNR estimators (variance subtraction on traces, band
//! integration on spectra).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::receiver::{check_grid, log_grid, ReceiverParams, NoiseReference, ELEMENTARY_CHARGE};
use crate::units::{db, PowerWatts};

/// Reported in place of -inf dB when the quantum variance vanishes.
pub const QCNR_FLOOR_DB: f64 = -99.0;

/// Minimum trace length accepted by the time-domain estimator.
pub const MIN_TRACE_LEN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumLabel {
    Electronic,
    Shot,
    Total,
}

impl SpectrumLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumLabel::Electronic => "electronic",
            SpectrumLabel::Shot => "shot",
            SpectrumLabel::Total => "total",
        }
    }
}

/// One-sided input-referred current PSD in A²/Hz on an ascending grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub label: SpectrumLabel,
}

impl NoiseSpectrum {
    pub fn new(freqs: Vec<f64>, psd: Vec<f64>, label: SpectrumLabel) -> Result<Self> {
        check_grid(&freqs)?;
        if freqs.len() != psd.len() {
            return Err(invalid("psd and frequency grid lengths differ"));
        }
        if psd.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("psd must be non-negative"));
        }
        Ok(NoiseSpectrum { freqs, psd, label })
    }

    /// Linear interpolation; held constant below the grid and zero above it.
    pub fn value_at(&self, f: f64) -> f64 {
        let n = self.freqs.len();
        if f <= self.freqs[0] {
            return self.psd[0];
        }
        if f > self.freqs[n - 1] {
            return 0.0;
        }
        let i = self.freqs.partition_point(|&x| x < f);
        if self.freqs[i] == f {
            return self.psd[i];
        }
        let (f0, f1) = (self.freqs[i - 1], self.freqs[i]);
        let t = (f - f0) / (f1 - f0);
        self.psd[i - 1] + t * (self.psd[i] - self.psd[i - 1])
    }

    /// Trapezoidal integral over `[f_lo, f_hi]`, A².
    pub fn integrate(&self, f_lo: f64, f_hi: f64) -> Result<f64> {
        let first = self.freqs[0];
        let last = *self.freqs.last().unwrap();
        let slack = 1e-9;
        if !(f_hi > f_lo) || f_lo < first * (1.0 - slack) || f_hi > last * (1.0 + slack) {
            return Err(invalid(format!(
                "band [{f_lo:e}, {f_hi:e}] Hz is not covered by the grid [{first:e}, {last:e}] Hz"
            )));
        }
        let (f_lo, f_hi) = (f_lo.max(first), f_hi.min(last));
        let mut prev = (f_lo, self.value_at(f_lo));
        let mut acc = 0.0;
        let start = self.freqs.partition_point(|&x| x <= f_lo);
        for (&f, &s) in self.freqs[start..].iter().zip(&self.psd[start..]) {
            if f >= f_hi {
                break;
            }
            acc += 0.5 * (s + prev.1) * (f - prev.0);
            prev = (f, s);
        }
        let end = self.value_at(f_hi);
        acc += 0.5 * (end + prev.1) * (f_hi - prev.0);
        Ok(acc)
    }

    /// Pointwise sum of two spectra on the same grid.
    pub fn plus(&self, other: &NoiseSpectrum) -> Result<NoiseSpectrum> {
        if self.freqs != other.freqs {
            return Err(invalid("spectra are on different grids"));
        }
        let psd = self.psd.iter().zip(&other.psd).map(|(a, b)| a + b).collect();
        Ok(NoiseSpectrum { freqs: self.freqs.clone(), psd, label: SpectrumLabel::Total })
    }

    pub fn scaled(&self, k: f64) -> NoiseSpectrum {
        NoiseSpectrum {
            freqs: self.freqs.clone(),
            psd: self.psd.iter().map(|v| v * k).collect(),
            label: self.label,
        }
    }
}

/// Default analysis grid: 2048 log-spaced points from 1 MHz to 2 GHz.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e6, 2e9, 2048)
}

/// Input noise density at DC, i₀², such that the configured rms current is met.
pub fn electronic_noise_floor(params: &ReceiverParams) -> f64 {
    let band = params.reference_bandwidth;
    let fc = params.noise_corner_freq;
    let i2 = params.input_noise_current_rms.powi(2);
    match params.noise_reference {
        NoiseReference::InputBand => i2 / (band * (1.0 + band * band / (3.0 * fc * fc))),
        NoiseReference::ReceivedBand => {
            let shape = |f: f64| (1.0 + (f / fc).powi(2)) * params.tia_gain_sq(f);
            i2 / simpson(shape, 0.0, band, 8192)
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// S_e(f) = i₀² (1 + (f/f_c)²) |H(f)|².
pub fn electronic_noise_psd(params: &ReceiverParams, freqs: &[f64]) -> Result<NoiseSpectrum> {
    let floor = electronic_noise_floor(params);
    let fc = params.noise_corner_freq;
    let psd = freqs
        .iter()
        .map(|&f| floor * (1.0 + (f / fc).powi(2)) * params.tia_gain_sq(f))
        .collect();
    NoiseSpectrum::new(freqs.to_vec(), psd, SpectrumLabel::Electronic)
}

/// S_q(f) = 2 q I_dc |H(f)|², without gain compression.
pub fn shot_noise_psd(p_lo: PowerWatts, params: &ReceiverParams, freqs: &[f64]) -> Result<NoiseSpectrum> {
    let level = 2.0 * ELEMENTARY_CHARGE * params.dc_photocurrent(p_lo);
    let psd = freqs.iter().map(|&f| level * params.tia_gain_sq(f)).collect();
    NoiseSpectrum::new(freqs.to_vec(), psd, SpectrumLabel::Shot)
}

/// Gain factor on the quantum-noise variance: 1 up to the saturation onset,
/// `(p/p_sat)^(κ-1)` beyond it so the variance grows as `p^κ`.
pub fn apply_saturation(p_lo: PowerWatts, params: &ReceiverParams) -> f64 {
    let onset = params.saturation_lo_power.watts();
    let p = p_lo.watts();
    if p <= onset {
        1.0
    } else {
        (p / onset).powf(params.compression_exponent - 1.0)
    }
}

/// Shot noise as delivered by the (possibly compressed) receiver.
pub fn quantum_noise_psd(p_lo: PowerWatts, params: &ReceiverParams, freqs: &[f64]) -> Result<NoiseSpectrum> {
    Ok(shot_noise_psd(p_lo, params, freqs)?.scaled(apply_saturation(p_lo, params)))
}

/// Lit-to-dark PSD ratio in dB at each frequency.
pub fn clearance_spectrum(p_lo: PowerWatts, params: &ReceiverParams, freqs: &[f64]) -> Result<Vec<f64>> {
    let shot = quantum_noise_psd(p_lo, params, freqs)?;
    let elec = electronic_noise_psd(params, freqs)?;
    Ok(shot
        .psd
        .iter()
        .zip(&elec.psd)
        .map(|(q, e)| if *q == 0.0 { 0.0 } else { db((q + e) / e) })
        .collect())
}

/// Sampled input-referred current, A.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl NoiseTrace {
    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
    }

    /// Sample-wise sum of two traces captured at the same rate.
    pub fn plus(&self, other: &NoiseTrace) -> Result<NoiseTrace> {
        if self.sample_rate != other.sample_rate || self.samples.len() != other.samples.len() {
            return Err(invalid("traces differ in sample rate or length"));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(NoiseTrace { sample_rate: self.sample_rate, samples, seed: self.seed })
    }
}

/// Zero-mean Gaussian trace whose expected periodogram follows `spectrum`.
///
/// Each positive-frequency FFT bin gets an independent complex Gaussian
/// amplitude scaled to the PSD at that bin; the trace is the real inverse
/// transform, so its variance equals the PSD integral up to `sample_rate / 2`.
pub fn synthesize_trace(
    spectrum: &NoiseSpectrum,
    sample_rate: f64,
    n_samples: usize,
    seed: u64,
) -> Result<NoiseTrace> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(invalid("sample_rate must be positive"));
    }
    if n_samples < 4 || !n_samples.is_power_of_two() {
        return Err(invalid(format!("n_samples must be a power of two >= 4, got {n_samples}")));
    }
    let df = sample_rate / n_samples as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins = vec![Complex64::new(0.0, 0.0); n_samples];
    let half = n_samples / 2;
    for k in 1..half {
        let s = spectrum.value_at(k as f64 * df);
        let sigma = (s * df / 4.0).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        bins[k] = Complex64::new(re * sigma, im * sigma);
        bins[n_samples - k] = bins[k].conj();
    }
    let nyq: f64 = StandardNormal.sample(&mut rng);
    bins[half] = Complex64::new(nyq * (spectrum.value_at(half as f64 * df) * df / 2.0).sqrt(), 0.0);

    FftPlanner::new().plan_fft_inverse(n_samples).process(&mut bins);
    Ok(NoiseTrace { sample_rate, samples: bins.iter().map(|c| c.re).collect(), seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcnrMethod {
    TimeDomain,
    FrequencyDomain,
}

impl QcnrMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            QcnrMethod::TimeDomain => "time_domain",
            QcnrMethod::FrequencyDomain => "frequency_domain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcnrReport {
    pub electronic_variance: f64,
    pub total_variance: f64,
    pub quantum_variance: f64,
    pub qcnr_db: f64,
    pub method: QcnrMethod,
    /// Integration band, frequency-domain reports only.
    pub band: Option<(f64, f64)>,
}

fn report(total: f64, electronic: f64, method: QcnrMethod, band: Option<(f64, f64)>) -> Result<QcnrReport> {
    let quantum = total - electronic;
    if quantum < 0.0 {
        return Err(Error::NegativeClearance { total, electronic });
    }
    let qcnr_db = if quantum == 0.0 {
        QCNR_FLOOR_DB
    } else {
        db(quantum / electronic).max(QCNR_FLOOR_DB)
    };
    Ok(QcnrReport {
        electronic_variance: electronic,
        total_variance: total,
        quantum_variance: quantum,
        qcnr_db,
        method,
        band,
    })
}

/// QCNR from the variance of a lit trace and a dark (electronic-only) trace.
pub fn qcnr_time_domain(total: &NoiseTrace, electronic: &NoiseTrace) -> Result<QcnrReport> {
    if total.sample_rate != electronic.sample_rate {
        return Err(invalid("traces must share a sample rate"));
    }
    if total.samples.len() < MIN_TRACE_LEN || electronic.samples.len() < MIN_TRACE_LEN {
        return Err(invalid(format!("traces must hold at least {MIN_TRACE_LEN} samples")));
    }
    report(total.variance(), electronic.variance(), QcnrMethod::TimeDomain, None)
}

/// QCNR from PSD integrals over `[f_lo, f_hi]`.
pub fn qcnr_frequency_domain(
    total: &NoiseSpectrum,
    electronic: &NoiseSpectrum,
    f_lo: f64,
    f_hi: f64,
) -> Result<QcnrReport> {
    let t = total.integrate(f_lo, f_hi)?;
    let e = electronic.integrate(f_lo, f_hi)?;
    report(t, e, QcnrMethod::FrequencyDomain, Some((f_lo, f_hi)))
}

/// Lit and dark spectra for an LO power on a grid.
pub fn lit_and_dark(
    p_lo: PowerWatts,
    params: &ReceiverParams,
    freqs: &[f64],
) -> Result<(NoiseSpectrum, NoiseSpectrum)> {
    let elec = electronic_noise_psd(params, freqs)?;
    let total = quantum_noise_psd(p_lo, params, freqs)?.plus(&elec)?;
    Ok((total, elec))
}

/// Settings of the simulated time-domain capture.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureConfig {
    /// Analysis band of the digitised trace; the sample rate is twice this.
    pub analysis_band: f64,
    pub n_samples: usize,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            analysis_band: crate::calibration::SHIPPED_CAPTURE_BAND_HZ,
            n_samples: 1 << 20,
        }
    }
}

impl CaptureConfig {
    pub fn sample_rate(&self) -> f64 {
        2.0 * self.analysis_band
    }

    fn grid(&self) -> Vec<f64> {
        log_grid(1e6, self.analysis_band, 2048)
    }
}

/// Dark and lit captures of the modelled receiver and their QCNR.
///
/// The lit trace is shot noise plus an electronic-noise realisation; the
/// dark trace is an independent electronic-noise realisation.
pub fn simulate_time_domain_qcnr(
    p_lo: PowerWatts,
    params: &ReceiverParams,
    capture: &CaptureConfig,
    seed: u64,
) -> Result<QcnrReport> {
    let grid = capture.grid();
    let fs = capture.sample_rate();
    let n = capture.n_samples;
    let shot = quantum_noise_psd(p_lo, params, &grid)?;
    let elec = electronic_noise_psd(params, &grid)?;
    let seeds = derive_seeds(seed);
    let lit = synthesize_trace(&shot, fs, n, seeds[0])?.plus(&synthesize_trace(&elec, fs, n, seeds[1])?)?;
    let dark = synthesize_trace(&elec, fs, n, seeds[2])?;
    qcnr_time_domain(&lit, &dark)
}

/// Expected value of [`simulate_time_domain_qcnr`]: band integration over the
/// capture band.
pub fn expected_time_domain_qcnr(
    p_lo: PowerWatts,
    params: &ReceiverParams,
    capture: &CaptureConfig,
) -> Result<QcnrReport> {
    let grid = capture.grid();
    let (total, elec) = lit_and_dark(p_lo, params, &grid)?;
    qcnr_frequency_domain(&total, &elec, grid[0], capture.analysis_band)
}

/// Frequency-domain QCNR of the modelled receiver over `[f_lo, f_hi]`.
pub fn model_qcnr(p_lo: PowerWatts, params: &ReceiverParams, f_lo: f64, f_hi: f64) -> Result<QcnrReport> {
    let grid = log_grid(f_lo.min(1e6), f_hi.max(2e9), 2048);
    let (total, elec) = lit_and_dark(p_lo, params, &grid)?;
    qcnr_frequency_domain(&total, &elec, f_lo, f_hi)
}

pub(crate) fn derive_seeds(seed: u64) -> [u64; 4] {
    let mut x = seed;
    std::array::from_fn(|_| {
        x = splitmix64(x);
        x
    })
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
