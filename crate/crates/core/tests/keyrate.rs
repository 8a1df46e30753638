use bhdtwin::cvqkd::{key_rate, max_reach, optimize_modulation_variance, skr_vs_distance};
use bhdtwin::{LinkParams, NoisePlane};
use proptest::prelude::*;

fn link(zeta: f64) -> LinkParams {
    LinkParams { channel_excess_noise: zeta, ..Default::default() }
}

#[test]
fn reference_operating_points() {
    let at_10 = optimize_modulation_variance(&link(0.04).at_distance(10.0)).unwrap();
    assert!((at_10.skr / 43e6 - 1.0).abs() < 0.25, "{}", at_10.skr);
    assert!(at_10.feasible);
    let short = optimize_modulation_variance(&link(0.04).at_distance(0.1)).unwrap();
    assert!(short.skr > 100e6);
    let reach = max_reach(&link(0.02), 1e6).unwrap();
    assert!((reach - 29.8).abs() < 2.0, "{reach}");
}

#[test]
fn dividing_by_full_transmittance_is_more_pessimistic() {
    let fiber = max_reach(&link(0.02), 1e6).unwrap();
    let full = max_reach(&LinkParams { noise_plane: NoisePlane::FiberAndDetection, ..link(0.02) }, 1e6).unwrap();
    assert!(full < fiber);
}

#[test]
fn curves_fall_with_distance_and_noise() {
    let distances: Vec<f64> = (0..=40).map(|d| d as f64).collect();
    let mut previous: Option<Vec<f64>> = None;
    for zeta in [0.0, 0.01, 0.02, 0.03, 0.04] {
        let curve: Vec<f64> = skr_vs_distance(&link(zeta), &distances).unwrap().iter().map(|(_, r)| r.skr).collect();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        if let Some(prev) = &previous {
            assert!(curve.iter().zip(prev).all(|(now, before)| now <= before));
        }
        previous = Some(curve);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_are_physical(d in 0.0f64..60.0, zeta in 0.0f64..0.1, v_a in 0.01f64..1000.0) {
        let r = key_rate(v_a, &link(zeta).at_distance(d)).unwrap();
        for nu in r.nu {
            prop_assert!(nu >= 1.0 - 1e-9);
        }
        prop_assert!(r.i_ab >= 0.0);
        prop_assert!(r.chi_be >= -1e-12);
    }

    #[test]
    fn optimised_rate_monotone(d in 0.0f64..40.0, dd in 0.1f64..5.0, zeta in 0.0f64..0.05) {
        let near = optimize_modulation_variance(&link(zeta).at_distance(d)).unwrap();
        let far = optimize_modulation_variance(&link(zeta).at_distance(d + dd)).unwrap();
        prop_assert!(far.skr <= near.skr);
        let noisier = optimize_modulation_variance(&link(zeta + 0.005).at_distance(d)).unwrap();
        prop_assert!(noisier.skr <= near.skr);
    }
}
