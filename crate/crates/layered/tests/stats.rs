use layered::correlation::{autocorrelation, tail_constants};
use layered::medium::{MediumParams, Nonlinearity};
use layered::stats::{
    delay_limit, delay_theory, fit_line, hurst_from_paths, hurst_index, integrated_paths, scaling_study, sigma_eps_sq,
    travel_time_ensemble, variance_constant, Moments, ScalingStudy, StatsOptions, TravelTimeSample,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn brownian_paths(n_paths: usize, n_steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_paths)
        .map(|_| {
            let mut x = 0.0;
            std::iter::once(0.0)
                .chain((0..n_steps).map(|_| {
                    let dw: f64 = StandardNormal.sample(&mut rng);
                    x += dw;
                    x
                }))
                .collect()
        })
        .collect()
}

#[test]
fn brownian_paths_have_hurst_one_half() {
    let est = hurst_from_paths(&brownian_paths(400, 256, 3)).unwrap();
    assert!((est.h - 0.5).abs() < 3.0 * est.stderr.max(0.005), "{est:?}");
    assert!(est.stderr < 0.02);
    assert_eq!(est.blocks, vec![1, 2, 4, 8, 16, 32]);
    // Mean square increments grow linearly with the block.
    for (m, v) in est.blocks.iter().zip(&est.block_variances) {
        assert!((v / *m as f64 - 1.0).abs() < 0.1, "block {m}: {v}");
    }
}

#[test]
fn straight_lines_have_hurst_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let paths: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let slope: f64 = StandardNormal.sample(&mut rng);
            (0..=64).map(|j| slope * j as f64).collect()
        })
        .collect();
    let est = hurst_from_paths(&paths).unwrap();
    assert!((est.h - 1.0).abs() < 1e-12 && est.stderr < 1e-12, "{est:?}");
}

#[test]
fn hurst_input_is_checked() {
    assert!(hurst_from_paths(&brownian_paths(19, 64, 1)).is_err());
    assert!(hurst_from_paths(&brownian_paths(20, 8, 1)).is_err());
    let mut ragged = brownian_paths(20, 64, 1);
    ragged[3].pop();
    assert!(hurst_from_paths(&ragged).is_err());
}

#[test]
fn weighted_fit_ignores_zero_weight_outliers() {
    let x = [0.0, 1.0, 2.0, 3.0, 4.0];
    let y = [1.0, 3.0, 5.0, 100.0, 9.0];
    let f = fit_line(&x, &y, &[1.0, 1.0, 1.0, 0.0, 1.0]);
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
}

#[test]
fn travel_times_decompose_into_characteristic_time_and_delay() {
    let params = MediumParams::gamma_half();
    let samples = travel_time_ensemble(&params, 1e-2, 1.0, 50, 4, StatsOptions::default()).unwrap();
    for s in &samples {
        assert!(s.delay > 0.0);
        assert!((s.t0 - s.t_char - s.delay).abs() < 1e-12, "{s:?}");
    }
    let again = travel_time_ensemble(&params, 1e-2, 1.0, 50, 4, StatsOptions::default()).unwrap();
    assert_eq!(samples, again);
}

#[test]
fn a_faint_medium_is_almost_homogeneous() {
    let params = MediumParams { theta: Nonlinearity::tanh(0.9, 1e-6), c0: 2.0, ..MediumParams::gamma_half() };
    let samples = travel_time_ensemble(&params, 1e-2, 3.0, 20, 8, StatsOptions::default()).unwrap();
    for s in &samples {
        assert!((s.t0 - 1.5).abs() < 1e-5, "{s:?}");
        assert!(s.delay >= 0.0 && s.delay < 1e-10);
    }
}

#[test]
fn travel_time_shift_is_centred() {
    let params = MediumParams::gamma_half();
    let samples = travel_time_ensemble(&params, 1e-2, 1.0, 400, 10, StatsOptions::default()).unwrap();
    let shifts: Vec<f64> = samples.iter().map(|s| s.t0 - 1.0).collect();
    let m = Moments::of(&shifts);
    assert!(m.mean.abs() < 4.0 * m.mean_stderr, "{m:?}");
}

#[test]
fn integrated_paths_end_at_the_travel_time_shift() {
    // With L / n_grid a multiple of the quadrature step both routes use the
    // same nodes, so the path endpoint is twice c0 (T0 - L / c0).
    let params = MediumParams::gamma_three_halves();
    let opts = StatsOptions::default();
    let paths = integrated_paths(&params, 1e-2, 1.0, 4, 6, 21, opts).unwrap();
    let samples = travel_time_ensemble(&params, 1e-2, 1.0, 6, 21, opts).unwrap();
    for (p, s) in paths.iter().zip(&samples) {
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], 0.0);
        assert!((p[4] - 2.0 * (s.t0 - 1.0)).abs() < 1e-12, "{} vs {}", p[4], 2.0 * (s.t0 - 1.0));
    }
    assert!(integrated_paths(&params, 1e-2, 1.0, 0, 6, 21, opts).is_err());
}

#[test]
fn limit_constants_per_regime() {
    assert_eq!(hurst_index(0.5), 0.75);
    assert_eq!(hurst_index(1.0), 0.5);
    assert!((sigma_eps_sq(0.5, 1e-2) - 1e-3).abs() < 1e-15);
    assert!((sigma_eps_sq(1.0, 1e-2) - 1e-4 * 100f64.ln()).abs() < 1e-15);
    assert_eq!(sigma_eps_sq(1.5, 1e-2), 1e-4);

    let half = MediumParams::gamma_half();
    let r0 = tail_constants(&half).r0;
    // H = 3/4: r0 L^(3/2) / (3/4 · 1/2).
    assert!((variance_constant(&half, 2.0).unwrap() - r0 * 2f64.powf(1.5) / 0.375).abs() < 1e-12);
    let critical = MediumParams::gamma_critical();
    let r0 = tail_constants(&critical).r0;
    assert!((variance_constant(&critical, 3.0).unwrap() - 6.0 * r0).abs() < 1e-12);

    let delay = delay_theory(&half, 5.0).unwrap();
    assert!((delay - autocorrelation(&half, 0.0).unwrap() * 5.0 / 8.0).abs() < 1e-12);
}

#[test]
fn normalized_variance_is_near_its_limit() {
    // At eps = 1e-2 the normalized variance already sits within a few
    // percent of the limit; the grid tail keeps it slightly low.
    let params = MediumParams::gamma_half();
    let study = scaling_study(&params, 1.0, &[4e-2, 2e-2, 1e-2], 300, 2, StatsOptions::default()).unwrap();
    let last = study.points.last().unwrap();
    let rel_se = last.var_t0_stderr / last.var_t0;
    let ratio = last.normalized / study.variance_constant;
    assert!((ratio - 1.0).abs() < 0.05 + 4.0 * rel_se, "{ratio} (± {rel_se})");
    assert!((study.fit.slope - 1.5).abs() < 4.0 * study.fit.slope_stderr + 0.05, "{:?}", study.fit);
    assert!(scaling_study(&params, 1.0, &[1e-2, 5e-3], 10, 2, StatsOptions::default()).is_err());
}

#[test]
fn delays_are_positive_and_approach_the_limit() {
    // The rescaled delay overshoots at finite eps by an amount roughly
    // proportional to eps.
    let params = MediumParams::gamma_half();
    let study = delay_limit(&params, &[1e-2, 2e-3], 1.0, 40, 6, StatsOptions::default()).unwrap();
    let gaps: Vec<f64> = study.points.iter().map(|p| (p.mean / study.theory - 1.0).abs()).collect();
    assert!(study.points.iter().all(|p| p.positive_fraction == 1.0));
    assert!(gaps[1] < gaps[0] && gaps[1] < 0.05, "{:?} vs {}", study.points, study.theory);
}

#[test]
fn a_ladder_on_the_predicted_scale_fits_without_slope_error() {
    let ladder = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    for params in [MediumParams::gamma_half(), MediumParams::gamma_critical(), MediumParams::gamma_three_halves()] {
        let gamma = params.gamma();
        // Three points -b, 0, b have unbiased variance b² and the same
        // relative error on every rung.
        let rungs: Vec<Vec<TravelTimeSample>> = ladder
            .iter()
            .map(|&eps| {
                let b = sigma_eps_sq(gamma, eps).sqrt();
                [-b, 0.0, b].iter().map(|d| TravelTimeSample { eps, t0: 1.0 + d, t_char: 1.0, delay: 0.0 }).collect()
            })
            .collect();
        let study = ScalingStudy::from_samples(&params, 1.0, &rungs).unwrap();
        assert!((study.fit.slope - study.expected_slope).abs() < 1e-12, "gamma = {gamma}: {study:?}");
    }
    // At gamma = 1 the logarithm lowers the slope by about 1 / ln(1 / eps).
    let rungs: Vec<Vec<TravelTimeSample>> = ladder
        .iter()
        .map(|&eps| {
            [-1.0, 0.0, 1.0].iter().map(|d| TravelTimeSample { eps, t0: 1.0 + d, t_char: 1.0, delay: 0.0 }).collect()
        })
        .collect();
    let critical = ScalingStudy::from_samples(&MediumParams::gamma_critical(), 1.0, &rungs).unwrap();
    let mid = (ladder[0] * ladder[3]).sqrt();
    assert!((critical.expected_slope - (2.0 - 1.0 / (1.0 / mid).ln())).abs() < 0.01, "{}", critical.expected_slope);
}
