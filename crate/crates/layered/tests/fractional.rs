use layered::correlation::{limit_coefficients, scattering_coefficients};
use layered::fractional::{
    apply_limit_operator, apply_memory_operator, apply_scaled_memory_operator, derivative, hilbert_residuals,
    hilbert_transform, kk_residual, limit_operator_constant, relative_l2, weyl_derivative, KkOptions, SampledSignal,
};
use layered::medium::MediumParams;
use num_complex::Complex64;
use proptest::prelude::*;

/// `Im e^(z s)`, a decaying oscillation for `Re z > 0`.
fn damped(z: Complex64, s0: f64, ds: f64, n: usize) -> SampledSignal {
    SampledSignal::from_fn(s0, ds, n, true, |s| (z * s).exp().im).unwrap()
}

/// `Im (k e^(z s))` on the grid of `f`.
fn scaled_damped(f: &SampledSignal, z: Complex64, k: Complex64) -> Vec<f64> {
    f.grid().iter().map(|&s| (k * (z * s).exp()).im).collect()
}

fn window(f: &SampledSignal, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let idx: Vec<usize> = (0..f.len()).filter(|&i| f.s(i) >= lo && f.s(i) <= hi).collect();
    idx[0]..idx[idx.len() - 1] + 1
}

/// `∫_0^∞ R(c0 u / 2) e^(-z u) du = ∫_S r(p) / (c0 g(p) / 2 + z) dp` for the
/// gamma = 1/2 medium. With `p = t²` the weight `p^(-1/2)` and the rate
/// `g = p` turn this into `4 ∫_0^√10 dt / (c0 t² / 2 + z)`, an arctangent.
fn laplace_of_correlation(c0: f64, z: Complex64) -> Complex64 {
    let a = Complex64::new(c0 / 2.0, 0.0);
    let t = 10f64.sqrt();
    4.0 / (a * z).sqrt() * (t * (a / z).sqrt()).atan()
}

#[test]
fn exponential_is_an_eigenfunction() {
    let f = SampledSignal::from_fn(-40.0, 0.01, 4500, true, f64::exp).unwrap();
    for (gamma, j) in [(0.5, 0), (0.25, 2), (0.75, 1)] {
        let d = weyl_derivative(&f, gamma, j).unwrap();
        let range = window(&f, -5.0, 4.0);
        let err = relative_l2(&d.values, &f.values, range);
        assert!(err <= 1e-3, "gamma = {gamma}, j = {j}: {err:e}");
    }
}

#[test]
fn damped_oscillations_pick_up_the_fractional_symbol() {
    // D^(j + γ) e^(z s) = z^(j + γ) e^(z s); as Re z -> 0 this is the
    // amplitude |ω|^γ and the phase lead γ π / 2 of a pure oscillation.
    let z = Complex64::new(0.5, 3.0);
    let f = damped(z, -45.0, 0.005, 9600);
    for (gamma, j) in [(0.5, 0), (0.3, 1)] {
        let d = weyl_derivative(&f, gamma, j).unwrap();
        let want = scaled_damped(&f, z, z.powf(j as f64 + gamma));
        let err = relative_l2(&d.values, &want, window(&f, -20.0, 2.0));
        assert!(err < 1e-3, "gamma = {gamma}, j = {j}: {err:e}");
    }
}

#[test]
fn the_future_does_not_reach_the_past() {
    let z = Complex64::new(0.5, 1.0);
    let f = damped(z, -45.0, 0.02, 2450);
    let mut g = f.clone();
    let cut = 2000;
    for v in &mut g.values[cut..] {
        *v += 1.0;
    }
    let params = MediumParams::gamma_half();
    let pairs = [
        (weyl_derivative(&f, 0.5, 1).unwrap(), weyl_derivative(&g, 0.5, 1).unwrap()),
        (apply_memory_operator(&f, &params).unwrap(), apply_memory_operator(&g, &params).unwrap()),
    ];
    // Finite differences look at most a few samples ahead.
    for (a, b) in &pairs {
        assert_eq!(a.values[..cut - 8], b.values[..cut - 8]);
        assert_ne!(a.values[cut..], b.values[cut..]);
    }
}

#[test]
fn delaying_the_input_delays_the_output() {
    let base = SampledSignal::from_fn(-15.0, 0.01, 2500, true, |s| (-s * s).exp()).unwrap();
    let shift = 137;
    let mut later = base.clone();
    later.values = vec![0.0; shift];
    later.values.extend_from_slice(&base.values[..base.len() - shift]);
    let a = weyl_derivative(&base, 0.4, 0).unwrap();
    let b = weyl_derivative(&later, 0.4, 0).unwrap();
    for i in 0..base.len() - shift - 8 {
        assert!((a.values[i] - b.values[i + shift]).abs() < 1e-12);
    }
}

#[test]
fn slowly_starting_signals_are_required() {
    let f = SampledSignal::from_fn(0.0, 0.01, 200, true, |s| 1.0 + s).unwrap();
    assert!(weyl_derivative(&f, 0.5, 0).is_err());
    assert!(apply_memory_operator(&f, &MediumParams::gamma_half()).is_err());
    assert!(SampledSignal::new(0.0, 0.0, vec![0.0; 20], true).is_err());
    assert!(SampledSignal::new(0.0, 0.1, vec![0.0; 4], true).is_err());
}

#[test]
fn correlation_transform_reproduces_the_scattering_coefficients() {
    // On the imaginary axis z = -i omega the Laplace transform of R(c0 u / 2)
    // is (Γ_c + i Γ_s) / c0, which fixes the sign of the memory symbol.
    let params = MediumParams { c0: 1.5, ..MediumParams::gamma_half() };
    for w in [0.5, 2.0] {
        let got = laplace_of_correlation(params.c0, Complex64::new(1e-14, -w));
        let coeffs = scattering_coefficients(&params, w).unwrap().complex() / params.c0;
        assert!((got - coeffs).norm() < 1e-9 * coeffs.norm(), "{got} vs {coeffs}");
    }
}

#[test]
fn memory_operator_acts_by_its_symbol() {
    // I(e^(z s)) = (θ'0² / (8 c0²)) z³ L(z) e^(z s) with L the Laplace
    // transform of R(c0 u / 2). On z = -i omega this is
    // +i omega³ θ'0² (Γ_c + i Γ_s) / (8 c0³).
    let params = MediumParams::gamma_half();
    let z = Complex64::new(0.5, 1.0);
    let f = damped(z, -45.0, 0.02, 2400);
    let out = apply_memory_operator(&f, &params).unwrap();
    let th2 = params.theta_prime0().powi(2);
    let symbol = th2 / (8.0 * params.c0 * params.c0) * z.powi(3) * laplace_of_correlation(params.c0, z);
    let want = scaled_damped(&f, z, symbol);
    let err = relative_l2(&out.values, &want, window(&f, -20.0, 2.0));
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn rescaled_memory_converges_to_the_fractional_limit() {
    let params = MediumParams::gamma_half();
    let z = Complex64::new(0.5, 1.0);
    let f = damped(z, -45.0, 0.02, 2400);
    let limit = apply_limit_operator(&f, &params).unwrap();
    // The limit acts as c z^(2 + γ).
    let c = limit_operator_constant(&params).unwrap();
    let want = scaled_damped(&f, z, c * z.powf(2.5));
    let range = window(&f, -20.0, 2.0);
    assert!(relative_l2(&limit.values, &want, range.clone()) < 1e-3);

    let mut prev = f64::INFINITY;
    for l0 in [1e-1, 1e-2, 1e-3] {
        let scaled = apply_scaled_memory_operator(&f, &params, l0).unwrap();
        let d = relative_l2(&scaled.values, &limit.values, range.clone());
        assert!(d < prev, "l0 = {l0}: {d} after {prev}");
        prev = d;
    }
    assert!(prev < 0.05, "{prev}");
}

#[test]
fn short_range_limit_is_a_third_derivative() {
    let params = MediumParams::gamma_three_halves();
    let f = SampledSignal::from_fn(-10.0, 0.01, 2000, true, |s| (-s * s / 2.0).exp()).unwrap();
    let out = apply_limit_operator(&f, &params).unwrap();
    let c = limit_operator_constant(&params).unwrap();
    let g0 = limit_coefficients(&params, 1.0).unwrap().gamma_c;
    assert!((c - g0 / 8.0).abs() < 1e-14);
    let third = derivative(&f, 3);
    assert!(out.values.iter().zip(&third.values).all(|(o, t)| (o - c * t).abs() < 1e-14));
}

#[test]
fn hilbert_transform_of_a_lorentzian() {
    // i / (omega + i) = (1 + i omega) / (1 + omega²) is the transform of a
    // causal exponential, so H maps 1 / (1 + omega²) to omega / (1 + omega²).
    let opts = KkOptions::default();
    let n = 2 * 4096 * 16 + 1;
    let w: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) / 16.0).collect();
    let re: Vec<f64> = w.iter().map(|w| 1.0 / (1.0 + w * w)).collect();
    let im: Vec<f64> = w.iter().map(|w| w / (1.0 + w * w)).collect();
    let (r1, r2, _, _) = hilbert_residuals(&w, &re, &im, (0.25, 8.0), &opts);
    assert!(r1 <= 1e-3 && r2 <= 1e-3, "{r1:e} {r2:e}");
}

#[test]
fn hilbert_transform_is_an_involution_up_to_sign() {
    let n = 4096;
    // H kills the mean, so the check needs a zero-mean signal.
    let u: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 - 2048.0) / 80.0;
            x * (-x * x).exp()
        })
        .collect();
    let hh = hilbert_transform(&hilbert_transform(&u, 4), 4);
    let err = relative_l2(&hh.iter().map(|v| -v).collect::<Vec<_>>(), &u, 1024..3072);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn scattering_coefficients_are_a_causal_pair() {
    for params in [MediumParams::gamma_half(), MediumParams::figure_pulse(0.5)] {
        let report = kk_residual(&params, (0.25, 8.0), KkOptions::default()).unwrap();
        assert!(report.residual_s <= 0.05 && report.residual_c <= 0.05, "{report:?}");
        assert!(report.truncation_bound < 1e-2);
        assert!(report.rows.iter().all(|r| (0.25..=8.0).contains(&r.omega.abs())));
    }
    let tight = KkOptions { truncation_tol: 1e-9, ..KkOptions::default() };
    assert!(kk_residual(&MediumParams::gamma_half(), (0.25, 8.0), tight).is_err());
    assert!(kk_residual(&MediumParams::gamma_half(), (0.25, 300.0), KkOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn weyl_derivative_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, gamma in 0.1..0.9f64) {
        let f = SampledSignal::from_fn(-12.0, 0.02, 800, true, |s| (-s * s).exp()).unwrap();
        let g = SampledSignal::from_fn(-12.0, 0.02, 800, true, |s| (-(s - 1.0).powi(2) * 3.0).exp()).unwrap();
        let mut mix = f.clone();
        mix.values = f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect();
        let df = weyl_derivative(&f, gamma, 0).unwrap();
        let dg = weyl_derivative(&g, gamma, 0).unwrap();
        let dm = weyl_derivative(&mix, gamma, 0).unwrap();
        for i in 0..f.len() {
            prop_assert!((dm.values[i] - a * df.values[i] - b * dg.values[i]).abs() < 1e-10);
        }
    }
}
