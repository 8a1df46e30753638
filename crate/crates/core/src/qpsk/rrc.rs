use std::f64::consts::PI;

/// Root-raised-cosine taps spanning `±span` symbols at `sps` samples per
/// symbol, scaled so that the sum of squared taps equals `sps`.
///
/// With that scaling a unit-power symbol stream gives a unit-power waveform.
pub fn rrc_taps(sps: usize, rolloff: f64, span: usize) -> Vec<f64> {
    let len = 2 * span * sps + 1;
    let centre = (span * sps) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| rrc_impulse((i as f64 - centre) / sps as f64, rolloff))
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = (sps as f64 / energy).sqrt();
    taps.iter_mut().for_each(|h| *h *= scale);
    taps
}

/// Unnormalised impulse response at `t` symbol periods.
fn rrc_impulse(t: f64, a: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 + a * (4.0 / PI - 1.0);
    }
    if (t.abs() - 1.0 / (4.0 * a)).abs() < 1e-9 {
        let s = (PI / (4.0 * a)).sin();
        let c = (PI / (4.0 * a)).cos();
        return a / 2f64.sqrt() * ((1.0 + 2.0 / PI) * s + (1.0 - 2.0 / PI) * c);
    }
    let num = (PI * t * (1.0 - a)).sin() + 4.0 * a * t * (PI * t * (1.0 + a)).cos();
    let den = PI * t * (1.0 - (4.0 * a * t).powi(2));
    num / den
}

/// Raised-cosine power spectrum normalised to unit area; `nu` and the result
/// are in units of the symbol rate.
pub fn raised_cosine_spectrum(nu: f64, rolloff: f64) -> f64 {
    let f = nu.abs();
    let f1 = (1.0 - rolloff) / 2.0;
    let f2 = (1.0 + rolloff) / 2.0;
    if f <= f1 {
        1.0
    } else if f <= f2 {
        0.5 * (1.0 + (PI / rolloff * (f - f1)).cos())
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_pair_is_nyquist() {
        let sps = 16;
        let span = 10;
        let h = rrc_taps(sps, 0.2, span);
        let c = span * sps * 2;
        // Full convolution of h with itself, sampled at symbol spacing.
        let conv = |lag: usize| -> f64 {
            (0..h.len())
                .filter_map(|i| h.get(i + lag).map(|x| x * h[i]))
                .sum()
        };
        let peak = conv(0);
        assert!((peak - sps as f64).abs() < 1e-9);
        for k in 1..6 {
            assert!((conv(k * sps) / peak).abs() < 2e-3, "isi at {k}: {}", conv(k * sps) / peak);
        }
        assert_eq!(h.len(), c + 1);
    }

    #[test]
    fn spectrum_has_unit_area() {
        let n = 20_000;
        let area: f64 = (0..n)
            .map(|i| raised_cosine_spectrum(-1.0 + 2.0 * (i as f64 + 0.5) / n as f64, 0.2))
            .sum::<f64>()
            * 2.0
            / n as f64;
        assert!((area - 1.0).abs() < 1e-6);
    }
}
