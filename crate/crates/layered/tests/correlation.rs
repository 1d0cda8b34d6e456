mod common;

use std::f64::consts::PI;

use common::oracles;
use layered::correlation::{
    autocorrelation, fractional_coefficients, hermite_constant, limit_coefficients, scaled_coefficients,
    scattering_coefficients, sigma_l0, slope_at_origin, tail_constants, Regime,
};
use layered::medium::{MediumParams, Nonlinearity, SpectralDensity};
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn time_and_spectral_routes_agree() {
    let params = MediumParams::gamma_half();
    let tail = tail_constants(&params);
    let r = |z: f64| autocorrelation(&params, z).unwrap();
    for &w in &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let spectral = scattering_coefficients(&params, w).unwrap().complex();
        let time = oracles::filon_coefficients(r, tail.r0, tail.gamma, 2.0 * w, 4.0, 800);
        let rel = (spectral - time).norm() / spectral.norm();
        assert!(rel < 1e-4, "omega = {w}: {spectral} vs {time} ({rel:e})");
    }
}

#[test]
fn flat_spectrum_matches_mellin_closed_form() {
    // With a = 1 on a very wide window the spectral integral is a Mellin
    // transform: 4 ∫_0^∞ p^(-2α) / (μ p^(2β) - ik) dp
    // = (2 / β) μ^(-γ) (π / sin πγ) (-ik)^(γ - 1).
    let window = 1e6;
    let params = MediumParams {
        alpha: 0.25,
        beta: 1.0,
        mu: 1.0,
        r_s: window,
        a: SpectralDensity::Constant { level: 1.0 },
        ..MediumParams::gamma_half()
    };
    let gamma = params.gamma();
    for &w in &[0.1, 1.0, 7.0] {
        let k = 2.0 * w;
        let minus_ik = Complex64::new(0.0, -k);
        let exact = (2.0 / params.beta) * params.mu.powf(-gamma) * PI / (PI * gamma).sin() * minus_ik.powf(gamma - 1.0);
        // Window truncation removes about 4 ∫_P^∞ p^(-2α - 2β) dp / μ from Γ_c.
        let e = 2.0 * params.alpha + 2.0 * params.beta - 1.0;
        let cut = 4.0 * window.powf(-e) / (e * params.mu);
        let got = scattering_coefficients(&params, w).unwrap();
        assert!((got.gamma_c - (exact.re - cut)).abs() < 1e-9 * exact.norm(), "{w}: {got:?} vs {exact}");
        assert!((got.gamma_s - exact.im).abs() < 1e-9 * exact.norm(), "{w}: {got:?} vs {exact}");
    }
}

#[test]
fn variance_and_tail_of_the_indicator_spectrum() {
    let params = MediumParams::figure_pulse(0.5);
    assert!((autocorrelation(&params, 0.0).unwrap() - 4.0 * 10f64.sqrt()).abs() < 1e-9);
    let tail = tail_constants(&params);
    assert!((tail.r0 - PI.sqrt() / 2f64.sqrt() * 2.0).abs() < 1e-12);
    // Beyond a few correlation lengths the band limit is invisible.
    for &z in &[5.0, 50.0, 500.0] {
        let r = autocorrelation(&params, z).unwrap();
        assert!((r * z.powf(tail.gamma) / tail.r0 - 1.0).abs() < 1e-9, "z = {z}");
    }
    // R'(0+) = -∫ g r = -2 μ ∫_0^10 p^(1/2) dp.
    let slope = slope_at_origin(&params).unwrap();
    assert!((slope + 2.0 * 2.0 * 10f64.powf(1.5) / 1.5).abs() < 1e-8);
}

#[test]
fn long_range_limit_is_approached_monotonically() {
    let params = MediumParams::gamma_half();
    let limit = limit_coefficients(&params, 1.0).unwrap();
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for &l0 in &[1e-1, 1e-2, 1e-3] {
        let s = scaled_coefficients(&params, 1.0, l0).unwrap();
        let err = ((s.gamma_c / limit.gamma_c - 1.0).abs(), (s.gamma_s / limit.gamma_s - 1.0).abs());
        assert!(err.0 < prev.0 && err.1 < prev.1, "l0 = {l0}: {err:?} after {prev:?}");
        prev = err;
    }
    assert!(prev.0 <= 0.02 && prev.1 <= 0.02, "{prev:?}");
}

#[test]
fn critical_and_short_range_limits() {
    let critical = MediumParams::gamma_critical();
    let lim = limit_coefficients(&critical, 1.0).unwrap();
    assert!((lim.gamma_c - 2.0 / (critical.mu * critical.beta)).abs() < 1e-12);
    assert_eq!(lim.gamma_s, 0.0);

    let short = MediumParams::gamma_three_halves();
    let lim = limit_coefficients(&short, 3.0).unwrap();
    let zero = scattering_coefficients(&short, 0.0).unwrap();
    assert_eq!(lim.gamma_c, zero.gamma_c);
    // The gap closes like (omega l0)^(gamma - 1) = sqrt(omega l0).
    let gap = |l0: f64| 1.0 - scaled_coefficients(&short, 3.0, l0).unwrap().gamma_c / lim.gamma_c;
    let (a, b, c) = (gap(1e-3), gap(1e-4), gap(1e-5));
    assert!(a > b && b > c && c > 0.0);
    for ratio in [a / b, b / c] {
        assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.1, "{a} {b} {c}");
    }
}

#[test]
fn critical_scaling_rejects_unit_length() {
    assert!(sigma_l0(1.0, 1.0).is_err());
    assert!(scaled_coefficients(&MediumParams::gamma_critical(), 1.0, 1.0).is_err());
    assert!(scaled_coefficients(&MediumParams::gamma_critical(), 1.0, 0.5).is_ok());
}

#[test]
fn fractional_coefficients_at_half() {
    // γ = 1/2, c0 = 1, ω = 1: 2 Γ(1/2) (cos, sin)(π/4) 2^(-1/2) = √π (1, 1).
    let (c, s) = fractional_coefficients(0.5, 1.0, 1.0);
    assert!((c - PI.sqrt()).abs() < 1e-12 && (s - PI.sqrt()).abs() < 1e-12);
    let (_, s_neg) = fractional_coefficients(0.5, 1.0, -1.0);
    assert_eq!(s_neg, -s);
}

#[test]
fn hermite_constant_over_eps_tends_to_slope_squared() {
    let mut params = MediumParams::gamma_half();
    params.theta = Nonlinearity::tanh(0.9, 0.7);
    let small = hermite_constant(&params, 1e-8) / 1e-8;
    assert!((small - 0.49).abs() < 1e-6, "{small}");
    // Saturation only lowers the constant.
    assert!(hermite_constant(&params, 0.5) / 0.5 < small);
}

#[test]
fn regime_display() {
    assert_eq!(Regime::of(0.5).to_string(), "long-range");
    assert_eq!(Regime::of(1.0).to_string(), "critical");
    assert_eq!(Regime::of(1.5).to_string(), "short-range");
}

fn medium() -> impl Strategy<Value = MediumParams> {
    (0.0..0.4f64, 0.2..1.2f64, 0.5..3.0f64, 2.0..20.0f64).prop_map(|(alpha, beta, mu, half_width)| MediumParams {
        alpha,
        beta,
        mu,
        r_s: half_width,
        a: SpectralDensity::Indicator { half_width },
        ..MediumParams::gamma_half()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn attenuation_is_positive_and_dispersion_is_odd(params in medium(), w in 0.05..10.0f64) {
        let plus = scattering_coefficients(&params, w).unwrap();
        let minus = scattering_coefficients(&params, -w).unwrap();
        prop_assert!(plus.gamma_c > 0.0);
        prop_assert!(plus.gamma_s > 0.0);
        prop_assert!((plus.gamma_c - minus.gamma_c).abs() <= 1e-12 * plus.gamma_c);
        prop_assert!((plus.gamma_s + minus.gamma_s).abs() <= 1e-12 * plus.gamma_s);
    }

    #[test]
    fn correlation_is_positive_even_and_decreasing(params in medium(), z in 0.0..50.0f64, dz in 0.01..5.0f64) {
        let r0 = autocorrelation(&params, 0.0).unwrap();
        let r = autocorrelation(&params, z).unwrap();
        let r_far = autocorrelation(&params, z + dz).unwrap();
        prop_assert!(r > 0.0 && r <= r0 * (1.0 + 1e-12));
        prop_assert!(r_far < r);
        prop_assert_eq!(autocorrelation(&params, -z).unwrap(), r);
    }

    #[test]
    fn tail_amplitude_is_recovered_far_out(params in medium()) {
        let tail = tail_constants(&params);
        let g_max = params.rate(params.p_max());
        // Past 40 correlation lengths of the fastest mode the window is invisible.
        let z = 40.0 / g_max;
        let ratio = autocorrelation(&params, z).unwrap() * z.powf(tail.gamma) / tail.r0;
        let leak = (-g_max * z).exp();
        prop_assert!(ratio <= 1.0 + 1e-10);
        prop_assert!(ratio > 1.0 - 1e-6 - 1e3 * leak, "{}", ratio);
    }
}
