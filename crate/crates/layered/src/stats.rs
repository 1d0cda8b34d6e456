//! Travel times through a realization, their fractional-Brownian scaling and
//! the deterministic arrival delay.
//!
//! Along one realization the random travel time is
//! `T0 = L / c0 + (1 / (2 c0)) ∫ nu dz` and the characteristic time is
//! `∫ sqrt(1 + nu) / c0 dz`. Their difference is the delay, whose integrand
//! `1 + nu / 2 - sqrt(1 + nu) = nu² / (2 (1 + sqrt(1 + nu))²)` is evaluated
//! in the second form so that no cancellation occurs.
//!
//! The centred integral `∫_0^z nu dz'` is what converges, after scaling by
//! `sigma_eps`, to a fractional Brownian motion with Hurst index
//! `H = 1 - gamma / 2` for long-range media and to a Brownian motion for
//! short-range ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{self, Regime};
use crate::error::{Error, Result};
use crate::medium::{self, GridOptions, MediumParams, SpectralGrid};

/// Medium resolution for travel-time runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsOptions {
    pub grid: GridOptions,
    /// Quadrature steps per correlation length `eps`.
    pub steps_per_eps: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self { grid: GridOptions::with_modes(64), steps_per_eps: 10.0 }
    }
}

/// Travel-time quantities of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeSample {
    pub eps: f64,
    pub t0: f64,
    pub t_char: f64,
    pub delay: f64,
}

/// Running Simpson sums of `nu`, `sqrt(1 + nu)` and the delay integrand.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    nu: f64,
    root: f64,
    delay: f64,
}

impl Sums {
    fn add(&mut self, w: f64, nu: f64) {
        let root = (1.0 + nu).sqrt();
        let gap = nu / (1.0 + root);
        self.nu += w * nu;
        self.root += w * root;
        self.delay += w * 0.5 * gap * gap;
    }

    fn scaled(self, f: f64) -> Self {
        Self { nu: self.nu * f, root: self.root * f, delay: self.delay * f }
    }
}

/// Integrate one realization over `n_seg` equal segments of `[0, L]`,
/// returning the cumulative sums at every segment end.
#[allow(clippy::too_many_arguments)]
fn integrate_path(
    params: &MediumParams,
    grid: &SpectralGrid,
    eps: f64,
    l: f64,
    n_seg: usize,
    seed: u64,
    index: u64,
    opts: &StatsOptions,
) -> Vec<Sums> {
    let seg = l / n_seg as f64;
    // Even number of Simpson intervals per segment, each at most eps / steps_per_eps.
    let per = 2 * ((seg * opts.steps_per_eps / eps / 2.0).ceil() as usize).max(1);
    let h = seg / per as f64;
    let transition = grid.transition(h / eps);
    let mut state = grid.sample_stationary_stream(seed, index);
    let mut left = medium::nu(params, state.value(), eps);
    let mut total = Sums::default();
    let mut out = Vec::with_capacity(n_seg);
    for _ in 0..n_seg {
        let mut s = Sums::default();
        s.add(1.0, left);
        for k in 1..=per {
            let nu = medium::nu(params, state.step(&transition), eps);
            let w = if k == per {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s.add(w, nu);
            if k == per {
                left = nu;
            }
        }
        let s = s.scaled(h / 3.0);
        total = Sums { nu: total.nu + s.nu, root: total.root + s.root, delay: total.delay + s.delay };
        out.push(total);
    }
    out
}

fn check_ensemble(eps: f64, l: f64, n: usize) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidInput(format!("L = {l} must be positive")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("n = {n} must be at least 2")));
    }
    Ok(())
}

fn sample_from(eps: f64, l: f64, c0: f64, s: Sums) -> TravelTimeSample {
    TravelTimeSample { eps, t0: (l + 0.5 * s.nu) / c0, t_char: s.root / c0, delay: s.delay / c0 }
}

/// Travel times of `n` independent realizations.
pub fn travel_time_ensemble(
    params: &MediumParams,
    eps: f64,
    l: f64,
    n: usize,
    master_seed: u64,
    opts: StatsOptions,
) -> Result<Vec<TravelTimeSample>> {
    check_ensemble(eps, l, n)?;
    let grid = SpectralGrid::build(params, opts.grid)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = integrate_path(params, &grid, eps, l, 1, master_seed, i, &opts)[0];
            sample_from(eps, l, params.c0, s)
        })
        .collect())
}

/// Paths `z -> ∫_0^z nu dz'` sampled at `z_j = j L / n_grid`, starting at 0.
pub fn integrated_paths(
    params: &MediumParams,
    eps: f64,
    l: f64,
    n_grid: usize,
    n_paths: usize,
    master_seed: u64,
    opts: StatsOptions,
) -> Result<Vec<Vec<f64>>> {
    check_ensemble(eps, l, n_paths)?;
    if n_grid == 0 {
        return Err(Error::InvalidInput("n_grid must be positive".into()));
    }
    let grid = SpectralGrid::build(params, opts.grid)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let sums = integrate_path(params, &grid, eps, l, n_grid, master_seed, i, &opts);
            std::iter::once(0.0).chain(sums.iter().map(|s| s.nu)).collect()
        })
        .collect())
}

/// Mean and unbiased variance, with standard errors of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub mean_stderr: f64,
    pub var: f64,
    /// Standard error of `var` from the fourth central moment.
    pub var_stderr: f64,
    pub n: usize,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let var = m2 * nf / (nf - 1.0).max(1.0);
        let var_stderr = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
        Self { mean, mean_stderr: (var / nf).sqrt(), var, var_stderr, n }
    }
}

/// Fluctuation scale `sigma_eps²` of `∫_0^L nu dz`.
pub fn sigma_eps_sq(gamma: f64, eps: f64) -> f64 {
    match Regime::of(gamma) {
        Regime::LongRange => eps.powf(1.0 + gamma),
        Regime::Critical => eps * eps * (1.0 / eps).ln(),
        Regime::ShortRange => eps * eps,
    }
}

/// Hurst index of the limit process: `1 - gamma / 2` below the critical
/// value and `1/2` from it on.
pub fn hurst_index(gamma: f64) -> f64 {
    if gamma < 1.0 {
        1.0 - gamma / 2.0
    } else {
        0.5
    }
}

/// Limit of `Var[∫_0^L nu dz] / sigma_eps²`.
///
/// * long-range: `θ'0² r0 L^(2H) / (H (2H - 1))`;
/// * critical: `2 θ'0² r0 L`;
/// * short-range: `θ'0² Γ_c(0) L`, twice the integral of `R` over a half-line.
pub fn variance_constant(params: &MediumParams, l: f64) -> Result<f64> {
    let th2 = params.theta_prime0().powi(2);
    let tail = correlation::tail_constants(params);
    Ok(match tail.regime {
        Regime::LongRange => {
            let h = hurst_index(tail.gamma);
            th2 * tail.r0 * l.powf(2.0 * h) / (h * (2.0 * h - 1.0))
        }
        Regime::Critical => 2.0 * th2 * tail.r0 * l,
        Regime::ShortRange => th2 * correlation::scattering_coefficients(params, 0.0)?.gamma_c * l,
    })
}

/// Least-squares line `y = intercept + slope x` with the slope's standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Weighted least squares; weights are inverse variances of `y`.
pub fn fit_line(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    LineFit { slope, intercept: my - slope * mx, slope_stderr: (1.0 / sxx).sqrt() }
}

/// One rung of the variance ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub eps: f64,
    /// `Var[T0 - L / c0]`.
    pub var_t0: f64,
    pub var_t0_stderr: f64,
    /// `Var[∫ nu] / sigma_eps²`, to be compared with [`variance_constant`].
    pub normalized: f64,
    /// Standard deviation of `T0 / eps`.
    pub sd_over_eps: f64,
    /// Mean of `T0 - L / c0` and its standard error.
    pub mean_shift: f64,
    pub mean_shift_stderr: f64,
}

/// Fitted scaling of the travel-time variance with `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub points: Vec<ScalingPoint>,
    /// Fit of `log Var` against `log eps`.
    pub fit: LineFit,
    /// Slope of `log sigma_eps²` over the ladder: `1 + gamma`, 2, or just
    /// below 2 at `gamma = 1` where the logarithm bends the line.
    pub expected_slope: f64,
    pub variance_constant: f64,
    /// Fit of `log sd[T0 / eps]` against `log eps`.
    pub sd_fit: LineFit,
}

/// Travel-time ensembles over an `eps` ladder, one independent stream
/// family per rung.
pub fn travel_time_ladder(
    params: &MediumParams,
    l: f64,
    eps_ladder: &[f64],
    n: usize,
    master_seed: u64,
    opts: StatsOptions,
) -> Result<Vec<Vec<TravelTimeSample>>> {
    eps_ladder
        .iter()
        .enumerate()
        .map(|(rung, &eps)| {
            let seed = master_seed.wrapping_add((rung as u64) << 32);
            travel_time_ensemble(params, eps, l, n, seed, opts)
        })
        .collect()
}

impl ScalingStudy {
    /// Summarize ensembles produced by [`travel_time_ladder`].
    pub fn from_samples(params: &MediumParams, l: f64, rungs: &[Vec<TravelTimeSample>]) -> Result<Self> {
        if rungs.len() < 3 {
            return Err(Error::InvalidInput("the eps ladder needs at least 3 points".into()));
        }
        let gamma = params.gamma();
        let c0 = params.c0;
        let points: Vec<ScalingPoint> = rungs
            .iter()
            .map(|samples| {
                let eps = samples[0].eps;
                let shifts: Vec<f64> = samples.iter().map(|s| s.t0 - l / c0).collect();
                let m = Moments::of(&shifts);
                ScalingPoint {
                    eps,
                    var_t0: m.var,
                    var_t0_stderr: m.var_stderr,
                    normalized: m.var * 4.0 * c0 * c0 / sigma_eps_sq(gamma, eps),
                    sd_over_eps: m.var.sqrt() / eps,
                    mean_shift: m.mean,
                    mean_shift_stderr: m.mean_stderr,
                }
            })
            .collect();
        let x: Vec<f64> = points.iter().map(|p| p.eps.ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.var_t0.ln()).collect();
        // Var of log Var is (se / Var)².
        let w: Vec<f64> = points.iter().map(|p| (p.var_t0 / p.var_t0_stderr).powi(2)).collect();
        let fit = fit_line(&x, &y, &w);
        let ysd: Vec<f64> = points.iter().map(|p| p.sd_over_eps.ln()).collect();
        let sd_fit = fit_line(&x, &ysd, &w);
        // Fitting ln sigma_eps² with the same weights gives 1 + gamma or 2
        // exactly, and the local slope of eps² ln(1/eps) at gamma = 1.
        let ys: Vec<f64> = points.iter().map(|p| sigma_eps_sq(gamma, p.eps).ln()).collect();
        let expected_slope = fit_line(&x, &ys, &w).slope;
        Ok(Self { points, fit, expected_slope, variance_constant: variance_constant(params, l)?, sd_fit })
    }
}

/// Variance of `T0 - L / c0` over an `eps` ladder with its log-log slope.
pub fn scaling_study(
    params: &MediumParams,
    l: f64,
    eps_ladder: &[f64],
    n: usize,
    master_seed: u64,
    opts: StatsOptions,
) -> Result<ScalingStudy> {
    if eps_ladder.len() < 3 {
        return Err(Error::InvalidInput("the eps ladder needs at least 3 points".into()));
    }
    let rungs = travel_time_ladder(params, l, eps_ladder, n, master_seed, opts)?;
    ScalingStudy::from_samples(params, l, &rungs)
}

/// Aggregated-variance estimate of the Hurst index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub h: f64,
    /// Jackknife standard error over path groups.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Block sizes in grid steps and the mean squared block increments.
    pub blocks: Vec<usize>,
    pub block_variances: Vec<f64>,
}

/// Number of jackknife groups.
const JACKKNIFE_GROUPS: usize = 20;

fn block_variances(paths: &[Vec<f64>], blocks: &[usize]) -> Vec<f64> {
    blocks
        .iter()
        .map(|&m| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for p in paths {
                let n = (p.len() - 1) / m;
                for k in 0..n {
                    sum += (p[(k + 1) * m] - p[k * m]).powi(2);
                }
                count += n;
            }
            sum / count as f64
        })
        .collect()
}

fn hurst_of(paths: &[Vec<f64>], blocks: &[usize]) -> (f64, Vec<f64>) {
    let v = block_variances(paths, blocks);
    let x: Vec<f64> = blocks.iter().map(|&m| (m as f64).ln()).collect();
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&x, &y, &vec![1.0; x.len()]);
    (0.5 * fit.slope, v)
}

/// Hurst index of an ensemble of paths on a common uniform grid.
///
/// Increments over non-overlapping blocks of `m = 1, 2, 4, ...` grid steps
/// have mean square proportional to `m^(2H)`; `H` is half the fitted
/// log-log slope. Blocks stop at an eighth of the path so every block size
/// keeps at least eight increments per path.
pub fn hurst_from_paths(paths: &[Vec<f64>]) -> Result<HurstEstimate> {
    if paths.len() < JACKKNIFE_GROUPS {
        return Err(Error::InvalidInput(format!("need at least {JACKKNIFE_GROUPS} paths")));
    }
    let len = paths[0].len();
    if len < 17 || paths.iter().any(|p| p.len() != len) {
        return Err(Error::InvalidInput("paths need a common length of at least 17 points".into()));
    }
    let blocks: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&m| m * 8 < len).collect();
    let (h, block_variances) = hurst_of(paths, &blocks);

    let g = JACKKNIFE_GROUPS;
    let leave_out: Vec<f64> = (0..g)
        .map(|j| {
            let kept: Vec<Vec<f64>> =
                paths.iter().enumerate().filter(|(i, _)| i % g != j).map(|(_, p)| p.clone()).collect();
            hurst_of(&kept, &blocks).0
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / g as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (g - 1) as f64 / g as f64;
    let stderr = var.sqrt();
    Ok(HurstEstimate { h, stderr, ci_low: h - 1.96 * stderr, ci_high: h + 1.96 * stderr, blocks, block_variances })
}

/// Hurst index of `z -> ∫_0^z nu` sampled on `n_grid` steps of `[0, L]`.
pub fn hurst_estimate(
    params: &MediumParams,
    eps: f64,
    l: f64,
    n_grid: usize,
    n_paths: usize,
    master_seed: u64,
    opts: StatsOptions,
) -> Result<HurstEstimate> {
    let paths = integrated_paths(params, eps, l, n_grid, n_paths, master_seed, opts)?;
    hurst_from_paths(&paths)
}

/// Delay statistics at one `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub eps: f64,
    /// Mean and standard error of `delay / eps`.
    pub mean: f64,
    pub stderr: f64,
    pub positive_fraction: f64,
}

/// Delay ladder together with its limit `θ'0² R(0) L / (8 c0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStudy {
    pub points: Vec<DelayPoint>,
    pub theory: f64,
}

/// Limit of `delay / eps` as `eps -> 0`.
pub fn delay_theory(params: &MediumParams, l: f64) -> Result<f64> {
    let r_zero = correlation::autocorrelation(params, 0.0)?;
    Ok(params.theta_prime0().powi(2) * r_zero * l / (8.0 * params.c0))
}

impl DelayStudy {
    /// Summarize ensembles produced by [`travel_time_ladder`].
    pub fn from_samples(params: &MediumParams, l: f64, rungs: &[Vec<TravelTimeSample>]) -> Result<Self> {
        let points = rungs
            .iter()
            .map(|samples| {
                let eps = samples[0].eps;
                let scaled: Vec<f64> = samples.iter().map(|s| s.delay / eps).collect();
                let m = Moments::of(&scaled);
                let positive = samples.iter().filter(|s| s.delay > 0.0).count() as f64 / samples.len() as f64;
                DelayPoint { eps, mean: m.mean, stderr: m.mean_stderr, positive_fraction: positive }
            })
            .collect();
        Ok(Self { points, theory: delay_theory(params, l)? })
    }
}

/// Mean rescaled delay over an `eps` ladder.
pub fn delay_limit(
    params: &MediumParams,
    eps_ladder: &[f64],
    l: f64,
    n: usize,
    master_seed: u64,
    opts: StatsOptions,
) -> Result<DelayStudy> {
    let rungs = travel_time_ladder(params, l, eps_ladder, n, master_seed, opts)?;
    DelayStudy::from_samples(params, l, &rungs)
}
