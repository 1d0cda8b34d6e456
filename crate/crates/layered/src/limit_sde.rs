//! The limiting stochastic equation for the compensated mode amplitudes and
//! its closed-form first moment.
//!
//! In the weak-coupling limit the pair `(A0, B0)` solves the Stratonovich
//! system
//!
//! ```text
//! dA0 = -i d A0 dz + c B0 ∘ dζ
//! dB0 =  i d B0 dz + c A0 ∘ dζ*
//! ```
//!
//! with `c = sqrt(θ'0² ω² Γ_c / (4 c0²))`, `d = θ'0² ω² Γ_s / (8 c0²)` and
//! `ζ = (W1 + i W2) / sqrt(2)` a complex Brownian motion with
//! `E|dζ|² = dz`. The generator lies in `su(1, 1)`, so `|A0|² - |B0|²` is
//! conserved pathwise. Applying Itô's formula to `1/conj(A0)` gives a linear
//! equation for its mean whose solution is
//! `E(ω) = exp(-θ'0² ω² (Γ_c + i Γ_s) L / (8 c0²))`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{self, ScatteringCoefficients};
use crate::error::{Error, Result};
use crate::medium::{stream_rng, MediumParams};
use crate::modes::ComplexEstimate;

/// Time-stepping rule for the limiting system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeScheme {
    /// Implicit midpoint. For this linear system the step is the Cayley
    /// transform of the increment generator, which maps `SU(1, 1)` into
    /// itself, so conservation holds to rounding.
    #[default]
    Midpoint,
    /// Explicit Heun predictor-corrector.
    Heun,
}

/// Step size, scheme and per-step conservation tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeOptions {
    pub dz: f64,
    pub scheme: SdeScheme,
    /// A single step whose conservation defect grows by more than this is
    /// rejected.
    pub step_threshold: f64,
}

impl Default for SdeOptions {
    fn default() -> Self {
        Self { dz: 1e-4, scheme: SdeScheme::Midpoint, step_threshold: 1e-6 }
    }
}

/// Noise amplitude `c` and phase drift `d` of the limiting system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeCoefficients {
    pub noise: f64,
    pub drift: f64,
}

impl SdeCoefficients {
    pub fn new(params: &MediumParams, coeffs: &ScatteringCoefficients) -> Self {
        let th = params.theta_prime0();
        let scale = th * th * coeffs.omega * coeffs.omega / (params.c0 * params.c0);
        Self { noise: (scale * coeffs.gamma_c / 4.0).sqrt(), drift: scale * coeffs.gamma_s / 8.0 }
    }

    pub fn for_frequency(params: &MediumParams, omega: f64) -> Result<Self> {
        let coeffs = correlation::scattering_coefficients(params, omega)?;
        Ok(Self::new(params, &coeffs))
    }
}

/// One point of a path of the limiting system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitState {
    pub z: f64,
    pub a: Complex64,
    pub b: Complex64,
}

impl LimitState {
    pub fn initial() -> Self {
        Self { z: 0.0, a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }

    /// `| |A|² - |B|² - 1 |`.
    pub fn defect(&self) -> f64 {
        (self.a.norm_sqr() - self.b.norm_sqr() - 1.0).abs()
    }
}

/// A sampled path together with its worst conservation defect.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath {
    pub states: Vec<LimitState>,
    pub max_defect: f64,
}

fn check(l: f64, opts: &SdeOptions) -> Result<()> {
    if !(opts.dz > 0.0) || !opts.dz.is_finite() {
        return Err(Error::InvalidInput(format!("dz = {} must be positive", opts.dz)));
    }
    if !(l >= 0.0) {
        return Err(Error::InvalidInput(format!("L = {l} must be nonnegative")));
    }
    Ok(())
}

/// Generator increment `X = [[-i d h, c ζ], [c ζ*, i d h]]`.
fn increment(coef: &SdeCoefficients, h: f64, rng: &mut impl Rng) -> ([Complex64; 2], Complex64) {
    let w1: f64 = rng.sample(StandardNormal);
    let w2: f64 = rng.sample(StandardNormal);
    let zeta = Complex64::new(w1, w2) * (0.5 * h).sqrt();
    let diag = Complex64::new(0.0, -coef.drift * h);
    ([diag, coef.noise * zeta], zeta)
}

/// Apply `X` to `(a, b)` where `X = [[p, q], [q*, p*]]`.
fn apply(p: Complex64, q: Complex64, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (p * a + q * b, q.conj() * a + p.conj() * b)
}

fn step(scheme: SdeScheme, x: [Complex64; 2], a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let [p, q] = x;
    match scheme {
        SdeScheme::Heun => {
            let (fa, fb) = apply(p, q, a, b);
            let (pa, pb) = (a + fa, b + fb);
            let (ga, gb) = apply(p, q, pa, pb);
            (a + 0.5 * (fa + ga), b + 0.5 * (fb + gb))
        }
        SdeScheme::Midpoint => {
            // (I - X/2) y' = (I + X/2) y, solved in closed form for 2x2.
            let (ha, hb) = apply(p * 0.5, q * 0.5, a, b);
            let (ra, rb) = (a + ha, b + hb);
            let one = Complex64::new(1.0, 0.0);
            let m11 = one - p * 0.5;
            let m12 = -q * 0.5;
            let m21 = -q.conj() * 0.5;
            let m22 = one - p.conj() * 0.5;
            let det = m11 * m22 - m12 * m21;
            ((m22 * ra - m12 * rb) / det, (m11 * rb - m21 * ra) / det)
        }
    }
}

/// March one path to depth `l`, calling `record` after every step.
fn march(
    coef: &SdeCoefficients,
    l: f64,
    opts: &SdeOptions,
    rng: &mut impl Rng,
    mut record: impl FnMut(&LimitState),
) -> Result<(LimitState, f64)> {
    check(l, opts)?;
    let n = (l / opts.dz).ceil() as usize;
    let h = if n > 0 { l / n as f64 } else { 0.0 };
    let mut st = LimitState::initial();
    let mut max_defect = 0.0f64;
    for k in 0..n {
        let before = st.defect();
        let (x, _) = increment(coef, h, rng);
        let (a, b) = step(opts.scheme, x, st.a, st.b);
        st = LimitState { z: (k + 1) as f64 * h, a, b };
        let after = st.defect();
        if !after.is_finite() || (after - before).abs() > opts.step_threshold {
            return Err(Error::Conservation { defect: after, z: st.z, threshold: opts.step_threshold });
        }
        max_defect = max_defect.max(after);
        record(&st);
    }
    Ok((st, max_defect))
}

/// Simulate one path of the limiting system at frequency `omega`.
pub fn simulate_sde(params: &MediumParams, omega: f64, l: f64, seed: u64, opts: SdeOptions) -> Result<SdePath> {
    let coef = SdeCoefficients::for_frequency(params, omega)?;
    simulate_with(&coef, l, seed, 0, opts)
}

/// Simulate path number `index` of the stream family `seed` with explicit
/// coefficients.
pub fn simulate_with(coef: &SdeCoefficients, l: f64, seed: u64, index: u64, opts: SdeOptions) -> Result<SdePath> {
    let mut rng = stream_rng(seed, index);
    let mut states = vec![LimitState::initial()];
    let (_, max_defect) = march(coef, l, &opts, &mut rng, |s| states.push(*s))?;
    Ok(SdePath { states, max_defect })
}

/// Endpoints of `n_paths` independent paths, in index order.
pub fn sde_ensemble(
    coef: &SdeCoefficients,
    l: f64,
    n_paths: usize,
    seed: u64,
    opts: SdeOptions,
) -> Result<Vec<(LimitState, f64)>> {
    (0..n_paths as u64).into_par_iter().map(|i| march(coef, l, &opts, &mut stream_rng(seed, i), |_| {})).collect()
}

/// `E(ω) = exp(-θ'0² ω² (Γ_c + i Γ_s) L / (8 c0²))`.
pub fn closed_form_moment(params: &MediumParams, omega: f64, l: f64) -> Result<Complex64> {
    if l == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let coeffs = correlation::scattering_coefficients(params, omega)?;
    Ok(moment_from(params, &coeffs, l))
}

pub(crate) fn moment_from(params: &MediumParams, coeffs: &ScatteringCoefficients, l: f64) -> Complex64 {
    let th = params.theta_prime0();
    let w = coeffs.omega;
    (-(th * th * w * w * coeffs.complex() * l / (8.0 * params.c0 * params.c0))).exp()
}

/// Mean, standard errors and z-scores of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n: usize,
    pub z_re: f64,
    pub z_im: f64,
}

impl MomentSummary {
    fn against(est: &ComplexEstimate, target: Complex64) -> Self {
        let (z_re, z_im) = est.z_scores(target);
        Self {
            mean_re: est.mean.re,
            mean_im: est.mean.im,
            stderr_re: est.stderr_re,
            stderr_im: est.stderr_im,
            n: est.n,
            z_re,
            z_im,
        }
    }
}

/// Outcome of comparing the limiting system with its closed form and,
/// optionally, with a coupled-mode ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub omega: f64,
    pub l: f64,
    pub closed_re: f64,
    pub closed_im: f64,
    pub sde: MomentSummary,
    pub sde_max_defect: f64,
    pub modes: Option<MomentSummary>,
    /// Two-sample z-scores between the SDE and coupled-mode means.
    pub sde_vs_modes: Option<(f64, f64)>,
}

impl MomentReport {
    /// Largest absolute z-score in the report.
    pub fn worst_z(&self) -> f64 {
        let mut zs = vec![self.sde.z_re, self.sde.z_im];
        if let Some(m) = &self.modes {
            zs.extend([m.z_re, m.z_im]);
        }
        if let Some((a, b)) = self.sde_vs_modes {
            zs.extend([a, b]);
        }
        zs.into_iter().map(f64::abs).fold(0.0, f64::max)
    }
}

/// Two-sample z-scores of the difference of two independent means.
pub fn two_sample_z(x: &ComplexEstimate, y: &ComplexEstimate) -> (f64, f64) {
    let d = x.mean - y.mean;
    (d.re / x.stderr_re.hypot(y.stderr_re), d.im / x.stderr_im.hypot(y.stderr_im))
}

/// Estimate `E[1/conj(A0(L))]` from `n_paths` paths and compare it with the
/// closed form, and with `modes` when a coupled-mode estimate is supplied.
pub fn moment_comparison(
    params: &MediumParams,
    omega: f64,
    l: f64,
    n_paths: usize,
    seed: u64,
    modes: Option<&ComplexEstimate>,
    opts: SdeOptions,
) -> Result<MomentReport> {
    if n_paths < 100 {
        return Err(Error::InvalidInput(format!("n_paths = {n_paths} must be at least 100")));
    }
    let coeffs = correlation::scattering_coefficients(params, omega)?;
    let coef = SdeCoefficients::new(params, &coeffs);
    let closed = moment_from(params, &coeffs, l);
    let runs = sde_ensemble(&coef, l, n_paths, seed, opts)?;
    let xs: Vec<Complex64> = runs.iter().map(|(s, _)| 1.0 / s.a.conj()).collect();
    let est = ComplexEstimate::from_samples(&xs);
    let max_defect = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(MomentReport {
        omega,
        l,
        closed_re: closed.re,
        closed_im: closed.im,
        sde: MomentSummary::against(&est, closed),
        sde_max_defect: max_defect,
        modes: modes.map(|m| MomentSummary::against(m, closed)),
        sde_vs_modes: modes.map(|m| two_sample_z(&est, m)),
    })
}
