use layered::correlation::{autocorrelation, slope_at_origin, tail_constants};
use layered::medium::{realization, GridOptions, MediumParams, Nonlinearity, SpectralDensity, SpectralGrid, ThetaKind};
use proptest::prelude::*;

fn grid(params: &MediumParams, n: usize) -> SpectralGrid {
    SpectralGrid::build(params, GridOptions::with_modes(n)).unwrap()
}

#[test]
fn grid_preserves_variance_and_initial_slope() {
    for params in [MediumParams::gamma_half(), MediumParams::gamma_three_halves(), MediumParams::figure_pulse(0.5)] {
        let g = grid(&params, 128);
        let r0 = autocorrelation(&params, 0.0).unwrap();
        assert!((g.variance() / r0 - 1.0).abs() < 1e-9, "{} vs {r0}", g.variance());
        let slope: f64 = -g.weights.iter().zip(&g.rates).map(|(w, r)| w * r).sum::<f64>();
        let exact = slope_at_origin(&params).unwrap();
        assert!((slope / exact - 1.0).abs() < 1e-9);
    }
}

#[test]
fn grid_correlation_tracks_the_power_law() {
    let params = MediumParams::gamma_half();
    let g = grid(&params, 512);
    for &z in &[0.5, 5.0, 50.0, 500.0, 5000.0] {
        let exact = autocorrelation(&params, z).unwrap();
        let rel = (g.autocorrelation(z) / exact - 1.0).abs();
        assert!(rel < 5e-3, "z = {z}: {rel:e}");
    }
    let gamma = tail_constants(&params).gamma;
    let slope = (g.autocorrelation(1000.0) / g.autocorrelation(10.0)).ln() / 100f64.ln();
    assert!((slope + gamma).abs() < 0.01, "{slope}");
}

#[test]
fn stationary_draws_have_the_grid_variance() {
    let params = MediumParams::gamma_half();
    let g = grid(&params, 64);
    let n = 4000;
    let xs: Vec<f64> = (0..n).map(|i| g.sample_stationary_stream(17, i).value()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = g.variance() * (2.0 / n as f64).sqrt();
    assert!((var - g.variance()).abs() < 4.0 * se, "{var} vs {}", g.variance());
    assert!(mean.abs() < 4.0 * (g.variance() / n as f64).sqrt());
}

#[test]
fn lagged_covariance_matches_the_grid_correlation() {
    let params = MediumParams::gamma_half();
    let g = grid(&params, 64);
    let n = 4000;
    for &h in &[0.1, 1.0, 10.0] {
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let mut st = g.sample_stationary_stream(23, i);
                let a = st.value();
                st.advance(&g, h);
                (a, st.value())
            })
            .collect();
        let prod: Vec<f64> = pairs.iter().map(|(a, b)| a * b).collect();
        let mean = prod.iter().sum::<f64>() / n as f64;
        let sd = (prod.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let target = g.autocorrelation(h);
        assert!((mean - target).abs() < 4.0 * sd / (n as f64).sqrt(), "h = {h}: {mean} vs {target}");
    }
}

#[test]
fn conditional_mean_decays_mode_by_mode() {
    let params = MediumParams::gamma_three_halves();
    let g = grid(&params, 16);
    let start: Vec<f64> = g.weights.iter().map(|w| 2.0 * w.sqrt()).collect();
    let h = 0.3;
    let n = 20000;
    let mut sum = vec![0.0; g.len()];
    for i in 0..n {
        let mut st = g.sample_stationary_stream(5, i);
        st.v = start.clone();
        st.advance(&g, h);
        for (s, v) in sum.iter_mut().zip(&st.v) {
            *s += v;
        }
    }
    for k in 0..g.len() {
        let decay = (-g.rates[k] * h).exp();
        let sd = (g.weights[k] * -(-2.0 * g.rates[k] * h).exp_m1()).sqrt();
        let mean = sum[k] / n as f64;
        assert!((mean - decay * start[k]).abs() < 4.0 * sd / (n as f64).sqrt(), "mode {k}");
    }
}

#[test]
fn realizations_are_reproducible() {
    let params = MediumParams::gamma_half();
    let opts = GridOptions::with_modes(32);
    let a = realization(&params, opts, 1e-2, 2.0, 0.01, 9).unwrap();
    let b = realization(&params, opts, 1e-2, 2.0, 0.01, 9).unwrap();
    let c = realization(&params, opts, 1e-2, 2.0, 0.01, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 201);
    assert!(a.iter().all(|s| s.nu.abs() < 0.95));
}

#[test]
fn validation_rejects_bad_media() {
    assert!(MediumParams::figure_pulse(0.5).validate().is_ok());
    assert!(MediumParams::figure_pulse(1.0 / 6.0).validate().is_ok());
    let p = MediumParams { alpha: 0.6, ..MediumParams::gamma_half() };
    assert!(p.validate().is_err());
    let p = MediumParams { theta: Nonlinearity::linear(1.0), ..MediumParams::gamma_half() };
    assert!(p.validate().is_err());
    let p = MediumParams { theta: Nonlinearity::tanh(1.0, 1.0), ..MediumParams::gamma_half() };
    assert!(p.validate().is_err());
    let p = MediumParams { a: SpectralDensity::Gaussian { width: 0.0 }, ..MediumParams::gamma_half() };
    assert!(p.validate().is_err());
    assert!(SpectralGrid::build(&MediumParams::gamma_half(), GridOptions::with_modes(1)).is_err());
}

fn bounded_theta() -> impl Strategy<Value = Nonlinearity> {
    (prop_oneof![Just(ThetaKind::Softclip), Just(ThetaKind::Tanh)], 0.1..0.99f64, 0.1..5.0f64)
        .prop_map(|(kind, cap, slope)| Nonlinearity { kind, cap, slope })
}

proptest! {
    #[test]
    fn theta_is_odd_bounded_and_monotone(theta in bounded_theta(), u in -1e6..1e6f64, du in 0.0..10.0f64) {
        let t = theta.eval(u);
        prop_assert!(t.abs() <= theta.cap);
        prop_assert_eq!(theta.eval(-u), -t);
        prop_assert!(theta.eval(u + du) >= t);
    }

    #[test]
    fn theta_has_the_prescribed_slope(theta in bounded_theta()) {
        let u = 1e-7 * theta.cap / theta.slope;
        prop_assert!((theta.eval(u) / u / theta.slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_weights_are_positive_and_symmetric(n in 2usize..200, beta in 0.2..1.5f64) {
        let params = MediumParams { beta, ..MediumParams::gamma_half() };
        let g = grid(&params, 2 * (n / 2).max(1));
        let len = g.len();
        for i in 0..len {
            prop_assert!(g.weights[i] > 0.0 && g.rates[i] > 0.0);
            prop_assert_eq!(g.weights[i], g.weights[len - 1 - i]);
            prop_assert_eq!(g.p_rep[i], -g.p_rep[len - 1 - i]);
        }
    }
}
