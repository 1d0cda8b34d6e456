//! Coupled right/left-going mode amplitudes through a sampled medium.
//!
//! For a channel `(omega, kappa)` the propagator entries `(alpha, beta)`
//! solve
//!
//! ```text
//! d/dz (alpha, beta) = (1/eps) nu(z/eps) (i omega / (2 lambda c0²))
//!                      [[1, e^{-2i omega lambda z/eps}], [-e^{2i omega lambda z/eps}, -1]] (alpha, beta)
//! ```
//!
//! from `(1, 0)`, with `lambda = sqrt(1 - eps c0² kappa²) / c0`. The random
//! phase `phi = (1 / (2 lambda c0²)) ∫ nu(s/eps) ds` is then removed to form
//! the compensated amplitudes `A = alpha e^{-i omega phi/eps}` and
//! `B = beta e^{i omega phi/eps}`.
//!
//! The medium is sampled at the integration nodes with exact OU updates and
//! interpolated linearly inside each step, so the integrator sees one fixed,
//! continuous coefficient function. Refining the step keeps that function
//! and only changes the discretization error.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{self, GridOptions, MediumParams, SpectralGrid};

/// One `(omega, kappa)` channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub omega: f64,
    pub kappa: f64,
    pub lambda: f64,
}

impl Channel {
    /// Build a propagating channel; `eps c0² kappa² >= 1` is evanescent.
    pub fn new(omega: f64, kappa: f64, eps: f64, c0: f64) -> Result<Self> {
        let x = eps * c0 * c0 * kappa * kappa;
        if x >= 1.0 {
            return Err(Error::Evanescent(x));
        }
        Ok(Self { omega, kappa, lambda: (1.0 - x).sqrt() / c0 })
    }

    /// Normal incidence, `kappa = 0`.
    pub fn normal(omega: f64, c0: f64) -> Self {
        Self { omega, kappa: 0.0, lambda: 1.0 / c0 }
    }
}

/// Step-size policy for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Medium nodes per period of the fastest phase `2 omega lambda z / eps`.
    pub steps_per_period: f64,
    /// RK4 steps per medium interval; raising it refines the integrator
    /// without changing the medium.
    pub substeps: usize,
    /// Largest tolerated `| |alpha|² - |beta|² - 1 |` before aborting.
    pub threshold: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { steps_per_period: 20.0, substeps: 5, threshold: 1e-6 }
    }
}

/// Medium discretization and step control for coupled-mode runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModesOptions {
    pub grid: GridOptions,
    pub control: StepControl,
}

/// Recorded path of one channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelPath {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub a_comp: Vec<Complex64>,
    pub b_comp: Vec<Complex64>,
    pub phi: Vec<f64>,
    pub tau: Vec<f64>,
}

/// Mode amplitudes along `z` for every channel of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub z: Vec<f64>,
    pub channels: Vec<ChannelPath>,
    /// Largest conservation defect seen over all channels and nodes.
    pub max_defect: f64,
}

/// Final compensated amplitudes of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub max_defect: f64,
}

/// Medium step `eps / (steps_per_period max(1, omega lambda c0))`, shared by
/// all channels.
fn medium_step(eps: f64, c0: f64, channels: &[Channel], control: &StepControl) -> f64 {
    let fastest = channels.iter().fold(1.0f64, |m, c| m.max(c.omega.abs() * c.lambda * c0));
    eps / (control.steps_per_period * fastest)
}

struct State {
    alpha: Complex64,
    beta: Complex64,
}

/// Right-hand side for one channel at depth `z` with medium value `nu`.
#[inline]
fn rhs(ch: &Channel, c0: f64, eps: f64, z: f64, nu: f64, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let coupling = Complex64::new(0.0, nu * ch.omega / (2.0 * ch.lambda * c0 * c0 * eps));
    let e = Complex64::from_polar(1.0, 2.0 * ch.omega * ch.lambda * z / eps);
    (coupling * (a + e.conj() * b), coupling * (-(e * a) - b))
}

/// Integrate one medium path, calling `record` at every medium node.
///
/// `medium(h)` is called once per node, first with `h = 0`, and returns `nu`
/// at the next node a distance `h` further along.
#[allow(clippy::too_many_arguments)]
fn integrate<M, F>(
    c0: f64,
    eps: f64,
    channels: &[Channel],
    l: f64,
    control: &StepControl,
    mut medium: M,
    mut record: F,
) -> Result<f64>
where
    M: FnMut(f64) -> f64,
    F: FnMut(f64, &[State], &[f64]),
{
    let h = medium_step(eps, c0, channels, control);
    let n_nodes = if l > 0.0 { (l / h).ceil() as usize } else { 0 };
    let h = if n_nodes > 0 { l / n_nodes as f64 } else { h };
    let sub = control.substeps.max(1);
    let dz = h / sub as f64;
    let mut nu_left = medium(0.0);

    let mut states: Vec<State> =
        channels.iter().map(|_| State { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0) }).collect();
    // ∫ nu(s/eps) ds, exact for the piecewise-linear medium.
    let mut nu_integral = 0.0;
    let mut max_defect = 0.0f64;
    record(0.0, &states, &[0.0]);

    for n in 0..n_nodes {
        let z0 = n as f64 * h;
        let nu_right = medium(h);
        let nu_at = |z: f64| nu_left + (nu_right - nu_left) * ((z - z0) / h);
        for (ch, st) in channels.iter().zip(states.iter_mut()) {
            for j in 0..sub {
                let z = z0 + j as f64 * dz;
                let (n0, n1, n2) = (nu_at(z), nu_at(z + 0.5 * dz), nu_at(z + dz));
                let (a, b) = (st.alpha, st.beta);
                let (ka1, kb1) = rhs(ch, c0, eps, z, n0, a, b);
                let (ka2, kb2) = rhs(ch, c0, eps, z + 0.5 * dz, n1, a + ka1 * (0.5 * dz), b + kb1 * (0.5 * dz));
                let (ka3, kb3) = rhs(ch, c0, eps, z + 0.5 * dz, n1, a + ka2 * (0.5 * dz), b + kb2 * (0.5 * dz));
                let (ka4, kb4) = rhs(ch, c0, eps, z + dz, n2, a + ka3 * dz, b + kb3 * dz);
                st.alpha = a + (ka1 + ka2 * 2.0 + ka3 * 2.0 + ka4) * (dz / 6.0);
                st.beta = b + (kb1 + kb2 * 2.0 + kb3 * 2.0 + kb4) * (dz / 6.0);
            }
            let defect = (st.alpha.norm_sqr() - st.beta.norm_sqr() - 1.0).abs();
            max_defect = max_defect.max(defect);
        }
        nu_integral += 0.5 * h * (nu_left + nu_right);
        nu_left = nu_right;
        let z1 = (n + 1) as f64 * h;
        if max_defect > control.threshold {
            return Err(Error::Conservation { defect: max_defect, z: z1, threshold: control.threshold });
        }
        record(z1, &states, &[nu_integral]);
    }
    Ok(max_defect)
}

/// Compensated amplitudes from `(alpha, beta)` and `∫ nu`.
fn compensate(ch: &Channel, c0: f64, eps: f64, st: &State, nu_integral: f64) -> (Complex64, Complex64, f64) {
    let phi = nu_integral / (2.0 * ch.lambda * c0 * c0);
    let rot = Complex64::from_polar(1.0, -ch.omega * phi / eps);
    (st.alpha * rot, st.beta * rot.conj(), phi)
}

fn check_inputs(eps: f64, channels: &[Channel], l: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    if !(l >= 0.0) {
        return Err(Error::InvalidInput(format!("L = {l} must be nonnegative")));
    }
    if channels.is_empty() {
        return Err(Error::InvalidInput("at least one channel is required".into()));
    }
    Ok(())
}

/// Integrate all channels through one medium realization, recording every
/// medium node.
pub fn propagate(
    params: &MediumParams,
    eps: f64,
    channels: &[Channel],
    l: f64,
    seed: u64,
    opts: ModesOptions,
) -> Result<ModeTrajectory> {
    check_inputs(eps, channels, l)?;
    let grid = SpectralGrid::build(params, opts.grid)?;
    let sampler = random_medium(params, &grid, eps, seed, 0, medium_step(eps, params.c0, channels, &opts.control));
    trace(params.c0, eps, channels, l, &opts.control, sampler)
}

/// Integrate through a prescribed profile `z -> nu(z / eps)` instead of a
/// random medium, recording every node.
pub fn propagate_profile<P: Fn(f64) -> f64>(
    c0: f64,
    eps: f64,
    channels: &[Channel],
    l: f64,
    control: StepControl,
    profile: P,
) -> Result<ModeTrajectory> {
    check_inputs(eps, channels, l)?;
    let mut z = 0.0;
    let sampler = move |h: f64| {
        z += h;
        profile(z)
    };
    trace(c0, eps, channels, l, &control, sampler)
}

/// Sampler of `nu` along one stationary realization, stepped in depth units.
fn random_medium<'a>(
    params: &'a MediumParams,
    grid: &'a SpectralGrid,
    eps: f64,
    master_seed: u64,
    index: u64,
    nominal_step: f64,
) -> impl FnMut(f64) -> f64 + 'a {
    let mut state = grid.sample_stationary_stream(master_seed, index);
    let mut transition = grid.transition(nominal_step / eps);
    move |h: f64| {
        if h == 0.0 {
            return medium::nu(params, state.value(), eps);
        }
        if (transition.h - h / eps).abs() > 1e-12 * transition.h {
            transition = grid.transition(h / eps);
        }
        medium::nu(params, state.step(&transition), eps)
    }
}

fn trace<M: FnMut(f64) -> f64>(
    c0: f64,
    eps: f64,
    channels: &[Channel],
    l: f64,
    control: &StepControl,
    sampler: M,
) -> Result<ModeTrajectory> {
    let mut z_out = Vec::new();
    let mut paths = vec![ChannelPath::default(); channels.len()];
    let max_defect = integrate(c0, eps, channels, l, control, sampler, |z, states, nu_int| {
        z_out.push(z);
        for ((ch, st), path) in channels.iter().zip(states).zip(paths.iter_mut()) {
            let (a, b, phi) = compensate(ch, c0, eps, st, nu_int[0]);
            path.alpha.push(st.alpha);
            path.beta.push(st.beta);
            path.a_comp.push(a);
            path.b_comp.push(b);
            path.phi.push(phi);
            path.tau.push(2.0 * ch.lambda * z + phi);
        }
    })?;
    Ok(ModeTrajectory { z: z_out, channels: paths, max_defect })
}

/// Final compensated amplitudes of realization `index` under `master_seed`.
#[allow(clippy::too_many_arguments)]
pub fn propagate_endpoint(
    params: &MediumParams,
    grid: &SpectralGrid,
    eps: f64,
    channels: &[Channel],
    l: f64,
    master_seed: u64,
    index: u64,
    control: &StepControl,
) -> Result<Endpoint> {
    check_inputs(eps, channels, l)?;
    let mut last: Vec<(Complex64, Complex64)> = vec![];
    let mut last_integral = 0.0;
    let c0 = params.c0;
    let sampler = random_medium(params, grid, eps, master_seed, index, medium_step(eps, c0, channels, control));
    let max_defect = integrate(c0, eps, channels, l, control, sampler, |_, states, nu_int| {
        last = states.iter().map(|s| (s.alpha, s.beta)).collect();
        last_integral = nu_int[0];
    })?;
    let mut a = Vec::with_capacity(channels.len());
    let mut b = Vec::with_capacity(channels.len());
    for (ch, &(alpha, beta)) in channels.iter().zip(&last) {
        let (ca, cb, _) = compensate(ch, c0, eps, &State { alpha, beta }, last_integral);
        a.push(ca);
        b.push(cb);
    }
    Ok(Endpoint { a, b, max_defect })
}

/// Run `n_real` independent realizations in parallel.
///
/// Realization `i` always uses stream `i` of `master_seed`, so the output
/// does not depend on the number of worker threads.
pub fn ensemble(
    params: &MediumParams,
    eps: f64,
    channels: &[Channel],
    l: f64,
    n_real: usize,
    master_seed: u64,
    opts: ModesOptions,
) -> Result<Vec<Endpoint>> {
    let grid = SpectralGrid::build(params, opts.grid)?;
    (0..n_real as u64)
        .into_par_iter()
        .map(|i| propagate_endpoint(params, &grid, eps, channels, l, master_seed, i, &opts.control))
        .collect()
}

/// Sample mean of a complex quantity with its standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n: usize,
}

impl ComplexEstimate {
    pub fn from_samples(xs: &[Complex64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev_re: Vec<Complex64> =
            xs.iter().map(|x| Complex64::new((x.re - mean.re).powi(2), (x.im - mean.im).powi(2))).collect();
        let var = pairwise_sum(&dev_re) / (n.max(2) - 1) as f64;
        let nf = n as f64;
        Self { mean, stderr_re: (var.re / nf).sqrt(), stderr_im: (var.im / nf).sqrt(), n }
    }

    /// Combined standard error `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }

    /// Componentwise z-scores against `target`.
    pub fn z_scores(&self, target: Complex64) -> (f64, f64) {
        ((self.mean.re - target.re) / self.stderr_re, (self.mean.im - target.im) / self.stderr_im)
    }
}

/// Pairwise summation in a fixed order.
fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn require_ensemble(n_real: usize) -> Result<()> {
    if n_real < 2 {
        return Err(Error::InvalidInput(format!("n_real = {n_real} must be at least 2")));
    }
    Ok(())
}

/// Mean of `1 / conj(A(L))` over realizations.
pub fn transmission_moment(
    params: &MediumParams,
    eps: f64,
    channel: Channel,
    l: f64,
    n_real: usize,
    master_seed: u64,
    opts: ModesOptions,
) -> Result<ComplexEstimate> {
    require_ensemble(n_real)?;
    let runs = ensemble(params, eps, &[channel], l, n_real, master_seed, opts)?;
    let xs: Vec<Complex64> = runs.iter().map(|r| 1.0 / r.a[0].conj()).collect();
    Ok(ComplexEstimate::from_samples(&xs))
}

/// Mean of the reflection ratio `B(L) / conj(A(L))` over realizations.
pub fn backscatter_moment(
    params: &MediumParams,
    eps: f64,
    channel: Channel,
    l: f64,
    n_real: usize,
    master_seed: u64,
    opts: ModesOptions,
) -> Result<ComplexEstimate> {
    require_ensemble(n_real)?;
    let runs = ensemble(params, eps, &[channel], l, n_real, master_seed, opts)?;
    let xs: Vec<Complex64> = runs.iter().map(|r| r.b[0] / r.a[0].conj()).collect();
    Ok(ComplexEstimate::from_samples(&xs))
}

/// Covariance of `X = 1/conj(A_1)` and `Y = 1/A_2` for two channels sharing
/// each medium realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub covariance: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub first: ComplexEstimate,
    pub second: ComplexEstimate,
}

/// `E[(X - EX)(Y - EY)]` with `X = 1/conj(A_1)`, `Y = 1/A_2`.
pub fn cross_channel_covariance(
    params: &MediumParams,
    eps: f64,
    pair: (Channel, Channel),
    l: f64,
    n_real: usize,
    master_seed: u64,
    opts: ModesOptions,
) -> Result<CovarianceEstimate> {
    require_ensemble(n_real)?;
    let runs = ensemble(params, eps, &[pair.0, pair.1], l, n_real, master_seed, opts)?;
    Ok(covariance_of(&runs))
}

/// Covariance estimate from endpoints of a two-channel ensemble.
pub fn covariance_of(runs: &[Endpoint]) -> CovarianceEstimate {
    let xs: Vec<Complex64> = runs.iter().map(|r| 1.0 / r.a[0].conj()).collect();
    let ys: Vec<Complex64> = runs.iter().map(|r| 1.0 / r.a[1]).collect();
    let first = ComplexEstimate::from_samples(&xs);
    let second = ComplexEstimate::from_samples(&ys);
    let products: Vec<Complex64> = xs.iter().zip(&ys).map(|(x, y)| (x - first.mean) * (y - second.mean)).collect();
    let est = ComplexEstimate::from_samples(&products);
    CovarianceEstimate { covariance: est.mean, stderr_re: est.stderr_re, stderr_im: est.stderr_im, first, second }
}
