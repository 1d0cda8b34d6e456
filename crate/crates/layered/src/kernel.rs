//! Transmitted-front kernels and pulse synthesis.
//!
//! In the Fourier domain the front kernel at depth `z` is
//!
//! ```text
//! K̂(omega, kappa, z) = exp(-θ'0² omega² (Γ_c + i Γ_s) z / (8 c0²)) · exp(-i omega c0 |kappa|² z / 2),
//! ```
//!
//! and the transmitted pulse is recovered from a source spectrum `Ψ̂` by
//!
//! ```text
//! p(s, y) = 1 / (2 (2π)³) ∬ Ψ̂(omega, kappa) K̂(omega, kappa, L) exp(-i omega (s - kappa·y)) omega² d omega d kappa.
//! ```
//!
//! Sources are isotropic in `kappa`, so the transverse integral collapses to
//! a Hankel transform `2π ∫ k J0(|omega| k |y|) (...) dk`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::correlation::{self, ScatteringCoefficients};
use crate::error::{Error, Result};
use crate::medium::MediumParams;
use crate::quad;

/// Radially symmetric source spectrum `Ψ̂(omega, |kappa|)`.
pub trait Source: Sync {
    fn value(&self, omega: f64, k: f64) -> f64;
    /// Transverse wavenumber past which `Ψ̂(omega, ·)` is negligible.
    fn kappa_extent(&self, omega: f64) -> f64;
    /// Frequencies with `|omega|` below this carry no energy.
    fn omega_cut(&self) -> f64;
    /// Frequencies above this carry no energy.
    fn omega_max(&self) -> f64;
}

/// The Gaussian source `Ψ̂(omega, kappa) = 2 omega² exp(-omega² (1 + kappa²))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianSource;

impl Source for GaussianSource {
    fn value(&self, omega: f64, k: f64) -> f64 {
        2.0 * omega * omega * (-omega * omega * (1.0 + k * k)).exp()
    }

    fn kappa_extent(&self, omega: f64) -> f64 {
        // exp(-omega² k²) < 1e-19 past this point.
        (44.0f64).sqrt() / omega.abs()
    }

    fn omega_cut(&self) -> f64 {
        // The omega² factors already silence low frequencies; the cut only
        // excludes the origin itself.
        1e-3
    }

    fn omega_max(&self) -> f64 {
        8.0
    }
}

/// Which attenuation law multiplies the homogeneous propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseMode {
    /// No medium: pure paraxial diffraction.
    Homogeneous,
    /// Coefficients of the correlation `R` itself.
    Finite,
    /// Coefficients of the rescaled correlation `sigma(l0) R(z / l0)`.
    Scaled { l0: f64 },
    /// The `l0 -> 0` limit (fractional for long-range media).
    Limit,
}

impl PulseMode {
    /// Scattering coefficients used by this mode at `omega`.
    pub fn coefficients(&self, params: &MediumParams, omega: f64) -> Result<ScatteringCoefficients> {
        match *self {
            Self::Homogeneous => Ok(ScatteringCoefficients { omega, gamma_c: 0.0, gamma_s: 0.0 }),
            Self::Finite => correlation::scattering_coefficients(params, omega),
            Self::Scaled { l0 } => correlation::scaled_coefficients(params, omega, l0),
            Self::Limit => correlation::limit_coefficients(params, omega),
        }
    }
}

/// `K̂(omega, kappa, z)` for given coefficients at `omega = coeffs.omega`.
pub fn khat(params: &MediumParams, coeffs: &ScatteringCoefficients, kappa: f64, z: f64) -> Complex64 {
    attenuation(params, coeffs, z) * diffraction(params.c0, coeffs.omega, kappa, z)
}

/// The fractional-limit kernel `K̂0`.
pub fn khat_limit(params: &MediumParams, omega: f64, kappa: f64, z: f64) -> Result<Complex64> {
    let coeffs = correlation::limit_coefficients(params, omega)?;
    Ok(khat(params, &coeffs, kappa, z))
}

/// Frequency factor `exp(-θ'0² omega² (Γ_c + i Γ_s) z / (8 c0²))`.
pub fn attenuation(params: &MediumParams, coeffs: &ScatteringCoefficients, z: f64) -> Complex64 {
    let th = params.theta_prime0();
    let w = coeffs.omega;
    let scale = th * th * w * w * z / (8.0 * params.c0 * params.c0);
    (-scale * coeffs.complex()).exp()
}

/// Paraxial phase `exp(-i omega c0 |kappa|² z / 2)`.
pub fn diffraction(c0: f64, omega: f64, kappa: f64, z: f64) -> Complex64 {
    Complex64::from_polar(1.0, -omega * c0 * kappa * kappa * z / 2.0)
}

/// Early arrival of the front relative to the compensated travel time,
/// `θ'0² R(0) z / (8 c0)`: the finite-correlation kernel has no mass before
/// `s = -front_advance`.
pub fn front_advance(params: &MediumParams, z: f64) -> Result<f64> {
    let r0 = correlation::autocorrelation(params, 0.0)?;
    let th = params.theta_prime0();
    Ok(th * th * r0 * z / (8.0 * params.c0))
}

/// Discretization of the Fourier inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOptions {
    /// Frequency samples per half-line.
    pub n_omega: usize,
    /// Gauss–Legendre points per transverse panel.
    pub panel_points: usize,
    /// Target phase advance across one transverse panel, in radians.
    pub panel_phase: f64,
}

impl Default for PulseOptions {
    fn default() -> Self {
        Self { n_omega: 2048, panel_points: 16, panel_phase: 3.0 }
    }
}

/// Transmitted front sampled on `s_grid × y_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseField {
    pub s_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// `values[iy][is]`.
    pub values: Vec<Vec<f64>>,
    /// Largest imaginary part of the synthesized field relative to its peak.
    pub imag_residue: f64,
}

impl PulseField {
    /// Largest `|p|` along the cut `y = y_grid[iy]`.
    pub fn peak(&self, iy: usize) -> f64 {
        self.values[iy].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Time offset of the largest `|p|` along the cut `iy`.
    pub fn peak_time(&self, iy: usize) -> f64 {
        let (i, _) =
            self.values[iy]
                .iter()
                .enumerate()
                .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        self.s_grid[i]
    }
}

/// Hankel-type transverse integral `2π ∫ k J0(|omega| k r) Ψ̂(omega, k) T(k) dk`
/// for several radii at once, where `T` is the transverse transfer factor.
fn transverse_integral<S, T>(
    source: &S,
    omega: f64,
    radii: &[f64],
    opts: &PulseOptions,
    rule: &(Vec<f64>, Vec<f64>),
    chirp: f64,
    transfer: T,
) -> Vec<Complex64>
where
    S: Source + ?Sized,
    T: Fn(f64) -> Complex64,
{
    let k_max = source.kappa_extent(omega);
    let r_max = radii.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    // Local phase frequency in k: chirp k from diffraction plus |omega| r from J0.
    let freq = chirp * k_max + omega.abs() * r_max + 1.0;
    let n_panels = ((k_max * freq / opts.panel_phase).ceil() as usize).max(4);
    let width = k_max / n_panels as f64;
    let (nodes, weights) = rule;
    let mut acc = vec![Complex64::new(0.0, 0.0); radii.len()];
    for panel in 0..n_panels {
        let lo = panel as f64 * width;
        for (x, w) in nodes.iter().zip(weights) {
            let k = lo + 0.5 * width * (x + 1.0);
            let base = transfer(k) * (k * source.value(omega, k) * 0.5 * width * w);
            for (a, &r) in acc.iter_mut().zip(radii) {
                let j0 = if r == 0.0 { 1.0 } else { libm::j0(omega.abs() * k * r) };
                *a += base * j0;
            }
        }
    }
    acc.into_iter().map(|a| a * (2.0 * std::f64::consts::PI)).collect()
}

/// Synthesize the pulse from per-frequency transverse integrals.
///
/// `slice(omega)` returns the transverse integral for every radius, already
/// multiplied by the frequency factor of the propagator.
fn synthesize<F>(
    omega_max: f64,
    omega_cut: f64,
    n_omega: usize,
    s_grid: &[f64],
    y_grid: &[f64],
    slice: F,
) -> Result<PulseField>
where
    F: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    if s_grid.is_empty() || y_grid.is_empty() {
        return Err(Error::InvalidInput("pulse grids must be nonempty".into()));
    }
    let d_omega = omega_max / n_omega as f64;
    let mut omegas = Vec::with_capacity(2 * n_omega);
    for j in 1..=n_omega {
        let w = j as f64 * d_omega;
        if w >= omega_cut {
            omegas.push(w);
            omegas.push(-w);
        }
    }
    let slices: Vec<(f64, Vec<Complex64>)> =
        omegas.par_iter().map(|&w| slice(w).map(|v| (w, v))).collect::<Result<_>>()?;

    let norm = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).powi(3));
    let mut values = vec![vec![0.0; s_grid.len()]; y_grid.len()];
    let mut imag_max = 0.0f64;
    let mut peak = 0.0f64;
    for (iy, row) in values.iter_mut().enumerate() {
        for (is, &s) in s_grid.iter().enumerate() {
            let mut sum = Complex64::new(0.0, 0.0);
            for (w, v) in &slices {
                // Trapezoid weight: the last node on each side is an endpoint.
                let tw = if (w.abs() - omega_max).abs() < 0.5 * d_omega { 0.5 } else { 1.0 };
                sum += v[iy] * Complex64::from_polar(tw * w * w, -w * s);
            }
            let p = sum * (norm * d_omega);
            row[is] = p.re;
            imag_max = imag_max.max(p.im.abs());
            peak = peak.max(p.re.abs());
        }
    }
    let imag_residue = if peak > 0.0 { imag_max / peak } else { imag_max };
    Ok(PulseField { s_grid: s_grid.to_vec(), y_grid: y_grid.to_vec(), values, imag_residue })
}

/// Transmitted front at depth `l` for the chosen attenuation law.
pub fn pulse_front<S: Source + ?Sized>(
    source: &S,
    params: &MediumParams,
    l: f64,
    mode: PulseMode,
    s_grid: &[f64],
    y_grid: &[f64],
    opts: PulseOptions,
) -> Result<PulseField> {
    if !(l >= 0.0) {
        return Err(Error::InvalidInput(format!("slab length {l} must be nonnegative")));
    }
    let rule = quad::gauss_legendre(opts.panel_points);
    let c0 = params.c0;
    synthesize(source.omega_max(), source.omega_cut(), opts.n_omega, s_grid, y_grid, |w| {
        let coeffs = mode.coefficients(params, w)?;
        let a = attenuation(params, &coeffs, l);
        let chirp = w.abs() * c0 * l;
        let t = transverse_integral(source, w, y_grid, &opts, &rule, chirp, |k| diffraction(c0, w, k, l));
        Ok(t.into_iter().map(|v| v * a).collect())
    })
}

/// Same front obtained by marching the Fourier-domain Schrödinger equation
/// `i (omega / c0) ∂z ǩ + Δ ǩ / 2 + i θ'0² omega³ (Γ_c + i Γ_s) ǩ / (8 c0³) = 0`
/// in steps of `dz`, starting from half the source.
///
/// Each transverse Fourier mode evolves by an exact exponential step, so the
/// march reproduces [`pulse_front`] up to rounding.
#[allow(clippy::too_many_arguments)]
pub fn evolve_schrodinger<S: Source + ?Sized>(
    source: &S,
    params: &MediumParams,
    l: f64,
    dz: f64,
    mode: PulseMode,
    s_grid: &[f64],
    y_grid: &[f64],
    opts: PulseOptions,
) -> Result<PulseField> {
    if !(dz > 0.0) {
        return Err(Error::InvalidInput(format!("dz = {dz} must be positive")));
    }
    let n_full = (l / dz).floor() as i32;
    let rest = l - n_full as f64 * dz;
    let rule = quad::gauss_legendre(opts.panel_points);
    let c0 = params.c0;
    let th2 = params.theta_prime0().powi(2);
    synthesize(source.omega_max(), source.omega_cut(), opts.n_omega, s_grid, y_grid, |w| {
        let coeffs = mode.coefficients(params, w)?;
        // Generator of the z-evolution of mode (omega, k).
        let medium = th2 * w * w * coeffs.complex() / (8.0 * c0 * c0);
        let generator = move |k: f64| -(medium + Complex64::new(0.0, w * c0 * k * k / 2.0));
        let march = |k: f64| {
            let g = generator(k);
            (g * dz).exp().powi(n_full) * (g * rest).exp()
        };
        let chirp = w.abs() * c0 * l;
        Ok(transverse_integral(source, w, y_grid, &opts, &rule, chirp, march))
    })
}

/// Spectral centroid `∫ omega S / ∫ S` over `omega > 0`, with
/// `S(omega) = omega² ∫ Ψ̂(omega, kappa) d kappa`.
pub fn spectral_centroid<S: Source + ?Sized>(source: &S) -> Result<f64> {
    let opts = quad::QuadOptions::with_rel(1e-10);
    let power = |w: f64| -> f64 {
        let inner =
            quad::integrate(|k| 2.0 * std::f64::consts::PI * k * source.value(w, k), 0.0, source.kappa_extent(w), opts);
        w * w * inner.map(|e| e.value).unwrap_or(f64::NAN)
    };
    let (lo, hi) = (source.omega_cut(), source.omega_max());
    let m0 = quad::integrate(power, lo, hi, opts)?.value;
    let m1 = quad::integrate(|w| w * power(w), lo, hi, opts)?.value;
    if !m0.is_finite() || !m1.is_finite() {
        return Err(Error::Quadrature { achieved: f64::NAN, requested: opts.rel_tol });
    }
    Ok(m1 / m0)
}
