//! Asymptotic secret-key rate of Gaussian-modulated coherent-state CV-QKD
//! with homodyne detection, reverse reconciliation and an untrusted receiver.
//!
//! All variances are in shot-noise units. Detection loss and receiver noise
//! are attributed to the channel.

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

use crate::error::{invalid, Error, Result};

/// Numerical slack on the physicality checks.
pub const NU_TOLERANCE: f64 = 1e-9;
pub const VA_MIN: f64 = 0.01;
pub const VA_MAX: f64 = 1e3;
const COARSE_POINTS: usize = 200;
const GOLDEN_REL_WIDTH: f64 = 1e-4;
/// Distance bracket at which the reach search stops, km.
pub const REACH_TOLERANCE_KM: f64 = 0.05;

/// Where input-referred noise is carried back to the channel input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoisePlane {
    /// Divide by the fibre transmittance only.
    #[default]
    Fiber,
    /// Divide by fibre and detection transmittance.
    FiberAndDetection,
}

impl NoisePlane {
    pub fn as_str(self) -> &'static str {
        match self {
            NoisePlane::Fiber => "fiber",
            NoisePlane::FiberAndDetection => "fiber+detection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fiber" => Some(NoisePlane::Fiber),
            "fiber+detection" => Some(NoisePlane::FiberAndDetection),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// km
    pub distance: f64,
    /// dB/km
    pub fiber_loss: f64,
    /// dB
    pub detection_loss: f64,
    /// ζ, referred to the receiver input.
    pub channel_excess_noise: f64,
    /// Referred to the receiver input.
    pub receiver_excess_noise: f64,
    pub beta: f64,
    /// Symbols/s
    pub symbol_rate: f64,
    pub noise_plane: NoisePlane,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            distance: 0.0,
            fiber_loss: 0.23,
            detection_loss: 1.2,
            channel_excess_noise: 0.0,
            receiver_excess_noise: 0.00336,
            beta: 0.97,
            symbol_rate: 250e6,
            noise_plane: NoisePlane::Fiber,
        }
    }
}

impl LinkParams {
    pub fn at_distance(&self, distance: f64) -> LinkParams {
        LinkParams { distance, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.distance, "qkd.distance"),
            (self.fiber_loss, "qkd.fiber_loss"),
            (self.detection_loss, "qkd.detection_loss"),
            (self.channel_excess_noise, "qkd.channel_excess_noise"),
            (self.receiver_excess_noise, "qkd.receiver_excess_noise"),
        ];
        for (v, name) in checks {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid(format!("qkd.beta must be in (0, 1], got {}", self.beta)));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(invalid("qkd.symbol_rate must be > 0"));
        }
        Ok(())
    }

    fn fiber_transmittance(&self) -> f64 {
        10f64.powf(-self.fiber_loss * self.distance / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// Modulation variance, SNU.
    pub v_a: f64,
    /// bits/symbol
    pub i_ab: f64,
    /// bits/symbol
    pub chi_be: f64,
    /// β·I_AB − χ_BE, bits/symbol.
    pub rate: f64,
    /// bits/s
    pub skr: f64,
    pub nu: [f64; 4],
    /// False when no modulation variance gives a positive rate.
    pub feasible: bool,
}

/// Total channel transmittance including detection loss.
pub fn effective_transmittance(link: &LinkParams) -> f64 {
    10f64.powf(-(link.fiber_loss * link.distance + link.detection_loss) / 10.0)
}

/// Excess noise referred to the channel input, SNU.
pub fn total_excess_noise_at_channel_input(link: &LinkParams) -> f64 {
    let t = match link.noise_plane {
        NoisePlane::Fiber => link.fiber_transmittance(),
        NoisePlane::FiberAndDetection => effective_transmittance(link),
    };
    (link.channel_excess_noise + link.receiver_excess_noise) / t
}

/// Entropy of a thermal state with mean photon number `x`, bits.
pub fn g(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Symplectic eigenvalues for modulation variance `v_a`, transmittance `t`
/// and channel-input excess noise `xi`: `[ν₁, ν₂]` of the Alice–Bob state,
/// `[ν₃, ν₄]` of Alice's state conditioned on Bob's homodyne outcome.
pub fn symplectic_eigenvalues(v_a: f64, t: f64, xi: f64) -> Result<[f64; 4]> {
    let v = v_a + 1.0;
    let chi = 1.0 / t - 1.0 + xi;
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi).powi(2);
    let b = t * t * (v * chi + 1.0).powi(2);
    let disc = a * a - 4.0 * b;
    if disc < -NU_TOLERANCE * a * a {
        return Err(Error::CovarianceValidity(format!("negative discriminant {disc:e} for ν₁,₂")));
    }
    let nu1_sq = 0.5 * (a + disc.max(0.0).sqrt());
    let nu2_sq = b / nu1_sq;
    let d = b.sqrt() * v / (t * (v + chi));
    let c = d + 1.0;
    let disc34 = c * c - 4.0 * d;
    let root = disc34.max(0.0).sqrt();
    let nu3_sq = 0.5 * (c + root);
    let nu4_sq = d / nu3_sq;
    let nu = [nu1_sq.sqrt(), nu2_sq.sqrt(), nu3_sq.sqrt(), nu4_sq.sqrt()];
    if let Some((i, v)) = nu.iter().enumerate().find(|(_, v)| !(**v >= 1.0 - NU_TOLERANCE)) {
        return Err(Error::CovarianceValidity(format!("ν{} = {v} is below 1", i + 1)));
    }
    Ok(nu)
}

pub fn key_rate(v_a: f64, link: &LinkParams) -> Result<KeyRateResult> {
    link.validate()?;
    if !(v_a > 0.0 && v_a.is_finite()) {
        return Err(invalid(format!("modulation variance must be > 0, got {v_a}")));
    }
    let t = effective_transmittance(link);
    let xi = total_excess_noise_at_channel_input(link);
    let chi = 1.0 / t - 1.0 + xi;
    let v = v_a + 1.0;
    let i_ab = 0.5 * ((v + chi) / (1.0 + chi)).log2();
    let nu = symplectic_eigenvalues(v_a, t, xi)?;
    let h = |n: f64| g((n - 1.0) / 2.0);
    let chi_be = h(nu[0]) + h(nu[1]) - h(nu[2]) - h(nu[3]);
    let rate = link.beta * i_ab - chi_be;
    Ok(KeyRateResult { v_a, i_ab, chi_be, rate, skr: rate * link.symbol_rate, nu, feasible: rate > 0.0 })
}

/// Maximises the rate over `v_a ∈ [0.01, 1000]`: a 200-point log grid, then
/// golden-section search in log `v_a` around the best grid point.
pub fn optimize_modulation_variance(link: &LinkParams) -> Result<KeyRateResult> {
    link.validate()?;
    let (lo, hi) = (VA_MIN.ln(), VA_MAX.ln());
    let step = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let rate_at = |x: f64| key_rate(x.exp(), link).map(|r| r.rate);

    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..COARSE_POINTS {
        let r = rate_at(lo + step * i as f64)?;
        if r > best.1 {
            best = (i, r);
        }
    }
    let mut a = lo + step * best.0.saturating_sub(1) as f64;
    let mut b = (lo + step * (best.0 + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (rate_at(x1)?, rate_at(x2)?);
    // Width in log v_a equals relative width in v_a.
    while b - a > GOLDEN_REL_WIDTH {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = rate_at(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = rate_at(x2)?;
        }
    }
    let x = if f1 >= f2 { x1 } else { x2 };
    let mut result = key_rate(x.exp(), link)?;
    if best.1 > result.rate {
        result = key_rate((lo + step * best.0 as f64).exp(), link)?;
    }
    if result.rate <= 0.0 {
        result.rate = 0.0;
        result.skr = 0.0;
        result.feasible = false;
    }
    Ok(result)
}

pub fn skr_vs_distance(link: &LinkParams, distances: &[f64]) -> Result<Vec<(f64, KeyRateResult)>> {
    if distances.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("distances must be ascending"));
    }
    distances
        .iter()
        .map(|&d| optimize_modulation_variance(&link.at_distance(d)).map(|r| (d, r)))
        .collect()
}

/// Longest distance at which the optimised key rate stays at or above
/// `skr_floor` bits/s.
pub fn max_reach(link: &LinkParams, skr_floor: f64) -> Result<f64> {
    if !(skr_floor > 0.0) {
        return Err(invalid("skr floor must be > 0"));
    }
    let skr = |d: f64| optimize_modulation_variance(&link.at_distance(d)).map(|r| r.skr);
    let at_zero = skr(0.0)?;
    if at_zero < skr_floor {
        return Err(Error::Infeasible(format!(
            "key rate at 0 km is {at_zero:.4e} b/s, below the floor {skr_floor:.4e} b/s"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while skr(hi)? >= skr_floor {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Infeasible("key rate never drops below the floor".into()));
        }
    }
    while hi - lo > REACH_TOLERANCE_KM {
        let mid = 0.5 * (lo + hi);
        if skr(mid)? >= skr_floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn link(distance: f64, zeta: f64) -> LinkParams {
        LinkParams { distance, channel_excess_noise: zeta, ..Default::default() }
    }

    #[test]
    fn transmittance_examples() {
        let ideal = LinkParams { detection_loss: 0.0, ..Default::default() };
        assert_eq!(effective_transmittance(&ideal), 1.0);
        assert!((effective_transmittance(&link(10.0, 0.0)) - 0.4469).abs() < 5e-4);
        assert!((effective_transmittance(&link(29.8, 0.0)) - 0.1565).abs() < 5e-4);
    }

    #[test]
    fn excess_noise_examples() {
        let quiet = LinkParams { receiver_excess_noise: 0.0, ..Default::default() };
        assert_eq!(total_excess_noise_at_channel_input(&quiet), 0.0);
        assert!((total_excess_noise_at_channel_input(&link(10.0, 0.04)) - 0.0736).abs() < 1e-4);
        let near = total_excess_noise_at_channel_input(&link(0.0, 0.04));
        let far = total_excess_noise_at_channel_input(&link(10.0 * 2f64.log10() / 0.23, 0.04));
        assert!((far / near - 2.0).abs() < 1e-12);
    }

    #[test]
    fn g_is_entropy() {
        assert_eq!(g(0.0), 0.0);
        assert!((g(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identity_channel_leaks_nothing() {
        let ideal = LinkParams { detection_loss: 0.0, receiver_excess_noise: 0.0, ..Default::default() };
        for v_a in [0.1, 3.0, 40.0] {
            let r = key_rate(v_a, &ideal).unwrap();
            assert!(r.chi_be.abs() < 1e-9, "{}", r.chi_be);
            assert!((r.rate - 0.97 * r.i_ab).abs() < 1e-9);
        }
    }

    #[test]
    fn nu4_is_vacuum() {
        let r = key_rate(5.0, &link(10.0, 0.04)).unwrap();
        assert!((r.nu[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimum_dominates_grid() {
        let l = link(10.0, 0.04);
        let best = optimize_modulation_variance(&l).unwrap();
        for i in 0..COARSE_POINTS {
            let v = (VA_MIN.ln() + (VA_MAX / VA_MIN).ln() * i as f64 / (COARSE_POINTS - 1) as f64).exp();
            assert!(best.rate >= key_rate(v, &l).unwrap().rate);
        }
    }

    #[test]
    fn ten_km_rate() {
        let r = optimize_modulation_variance(&link(10.0, 0.04)).unwrap();
        assert!((r.skr / 43e6 - 1.0).abs() < 0.25, "{}", r.skr);
        let short = optimize_modulation_variance(&link(0.1, 0.04)).unwrap();
        assert!(short.skr > 100e6);
    }

    #[test]
    fn reach_at_one_megabit() {
        let reach = max_reach(&link(0.0, 0.02), 1e6).unwrap();
        assert!((reach - 29.8).abs() < 2.0, "{reach}");
        assert!(max_reach(&link(0.0, 0.04), 1e6).unwrap() < reach);
    }

    #[test]
    fn unreachable_floor_is_infeasible() {
        assert!(matches!(max_reach(&link(0.0, 0.02), 1e12), Err(Error::Infeasible(_))));
    }

    #[test]
    fn hopeless_link_is_flagged() {
        let r = optimize_modulation_variance(&link(200.0, 0.04)).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.skr, 0.0);
    }

    #[test]
    fn rejects_descending_distances() {
        assert!(skr_vs_distance(&link(0.0, 0.0), &[5.0, 1.0]).is_err());
    }

    #[test]
    fn noiseless_curve_bounds_noisy_curve() {
        let d = [0.0, 5.0, 10.0, 20.0];
        let clean = skr_vs_distance(&link(0.0, 0.0), &d).unwrap();
        let noisy = skr_vs_distance(&link(0.0, 0.03), &d).unwrap();
        for (a, b) in clean.iter().zip(&noisy) {
            assert!(a.1.skr >= b.1.skr);
        }
        assert!(clean.windows(2).all(|w| w[1].1.skr <= w[0].1.skr));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rate_falls_with_noise_and_rises_with_beta(
            d in 0.0f64..40.0, zeta in 0.0f64..0.05, dz in 1e-4f64..0.02, v_a in 0.1f64..50.0,
        ) {
            let base = key_rate(v_a, &link(d, zeta)).unwrap();
            let noisier = key_rate(v_a, &link(d, zeta + dz)).unwrap();
            prop_assert!(noisier.rate < base.rate);
            let lower_beta = key_rate(v_a, &LinkParams { beta: 0.9, ..link(d, zeta) }).unwrap();
            prop_assert!(lower_beta.rate < base.rate);
            prop_assert!(base.chi_be >= -1e-12);
        }

        #[test]
        fn g_is_increasing(x in 0.0f64..1e3, dx in 1e-6f64..10.0) {
            prop_assert!(g(x + dx) > g(x));
            prop_assert!(g(x) >= 0.0);
        }
    }
}
