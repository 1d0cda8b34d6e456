//! Time-domain memory operators, the Weyl fractional derivative and a
//! numerical Kramers-Kronig check of the scattering coefficients.
//!
//! All convolutions are causal product integrations: the differentiated
//! signal is interpolated linearly between samples and the kernel is
//! integrated exactly against each linear piece. For a kernel `k(u)` and a
//! cell `u ∈ [(m - 1) h, m h]` the two weights are
//!
//! ```text
//! a_m = ∫ k(u) (u - (m - 1) h) / h du,   b_m = ∫ k(u) (m h - u) / h du,
//! ```
//!
//! so that `∫_0^(n h) k(u) g(s_n - u) du ≈ Σ_m a_m g_(n-m) + b_m g_(n-m+1)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::correlation::{self, Regime};
use crate::error::{Error, Result};
use crate::medium::MediumParams;

/// Samples on the uniform grid `s_i = s0 + i ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub s0: f64,
    pub ds: f64,
    pub values: Vec<f64>,
    /// Whether the signal and its derivatives are negligible to the left of
    /// the grid, which is what lets the causal integrals start at `s0`.
    pub decaying: bool,
}

/// Largest tolerated left-boundary magnitude, relative to the maximum.
const LEFT_EDGE_TOL: f64 = 1e-8;

impl SampledSignal {
    pub fn new(s0: f64, ds: f64, values: Vec<f64>, decaying: bool) -> Result<Self> {
        if !(ds > 0.0) || !ds.is_finite() || !s0.is_finite() {
            return Err(Error::InvalidInput(format!("grid s0 = {s0}, ds = {ds} is not a valid uniform grid")));
        }
        if values.len() < 8 {
            return Err(Error::InvalidInput("a signal needs at least 8 samples".into()));
        }
        Ok(Self { s0, ds, values, decaying })
    }

    /// Sample `f` at `n` points starting from `s0`.
    pub fn from_fn(s0: f64, ds: f64, n: usize, decaying: bool, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(s0, ds, (0..n).map(|i| f(s0 + i as f64 * ds)).collect(), decaying)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.ds
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.s(i)).collect()
    }

    /// `max |f|` over the first four samples relative to `max |f|` overall.
    pub fn left_edge_ratio(&self) -> f64 {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return 0.0;
        }
        self.values[..4].iter().fold(0.0f64, |m, v| m.max(v.abs())) / max
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, ..self.clone() }
    }

    fn require_decay(&self) -> Result<()> {
        if !self.decaying {
            return Err(Error::InvalidInput("the signal is not flagged as decaying on the left".into()));
        }
        let r = self.left_edge_ratio();
        if r > LEFT_EDGE_TOL {
            return Err(Error::InvalidInput(format!(
                "left boundary holds {r:.2e} of the peak; extend the grid to the left"
            )));
        }
        Ok(())
    }
}

/// First derivative with fourth-order differences, one-sided at the edges.
fn first_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h);
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h);
    d[n - 1] = (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4] + 3.0 * v[n - 5]) / (12.0 * h);
    d[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5]) / (12.0 * h);
    d
}

/// Derivative of order `k` by repeated fourth-order differencing.
pub fn derivative(f: &SampledSignal, k: usize) -> SampledSignal {
    let mut v = f.values.clone();
    for _ in 0..k {
        v = first_derivative(&v, f.ds);
    }
    f.with_values(v)
}

/// Apply the causal product-integration weights to `g`.
fn convolve(g: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = g.len();
    (0..n).map(|i| (1..=i).map(|m| a[m] * g[i - m] + b[m] * g[i - m + 1]).sum()).collect()
}

/// Product-integration weights of the Weyl kernel `u^(-gamma) / Γ(1 - gamma)`.
fn weyl_weights(gamma: f64, h: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let e1 = 1.0 - gamma;
    let e2 = 2.0 - gamma;
    let scale = 1.0 / libm::tgamma(e1);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for m in 1..n {
        let (lo, hi) = ((m - 1) as f64, m as f64);
        // ∫ u^-γ du and ∫ u^(1-γ) du over the cell, in units of h.
        let i0 = (hi.powf(e1) - lo.powf(e1)) / e1;
        let i1 = (hi.powf(e2) - lo.powf(e2)) / e2;
        a[m] = scale * h.powf(e1) * (i1 - lo * i0);
        b[m] = scale * h.powf(e1) * (hi * i0 - i1);
    }
    (a, b)
}

/// Weyl derivative
/// `D^(j + gamma) f(s) = (1 / Γ(1 - gamma)) ∫_{-∞}^s f^(j+1)(τ) (s - τ)^(-gamma) dτ`.
pub fn weyl_derivative(f: &SampledSignal, gamma: f64, j: usize) -> Result<SampledSignal> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    f.require_decay()?;
    let g = derivative(f, j + 1);
    let (a, b) = weyl_weights(gamma, f.ds, f.len());
    Ok(f.with_values(convolve(&g.values, &a, &b)))
}

/// `(1 - e^-y) / y - (1 - e^-y (1 + y)) / y² = (y - 1 + e^-y) / y²`.
fn recent_weight(y: f64) -> f64 {
    if y < 1e-3 {
        0.5 - y / 6.0 + y * y / 24.0
    } else {
        (y + (-y).exp_m1()) / (y * y)
    }
}

/// `(1 - e^-y (1 + y)) / y²`.
fn past_weight(y: f64) -> f64 {
    if y < 1e-3 {
        0.5 - y / 3.0 + y * y / 8.0
    } else {
        (-(-y).exp_m1() - y * (-y).exp()) / (y * y)
    }
}

/// Product-integration weights of `weight * R(rate_scale * u)`, computed
/// cell by cell through the spectral representation of `R`.
fn memory_weights(
    params: &MediumParams,
    rate_scale: f64,
    weight: f64,
    h: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for m in 1..n {
        let u0 = (m - 1) as f64 * h;
        let breaks = [1.0 / (rate_scale * h), 1.0 / (rate_scale * (u0 + h))];
        let cell = |shape: fn(f64) -> f64| {
            correlation::spectral_integral(
                params,
                |g| {
                    let x = g * rate_scale;
                    h * (-x * u0).exp() * shape(x * h)
                },
                &breaks,
            )
        };
        a[m] = weight * cell(past_weight)?;
        b[m] = weight * cell(recent_weight)?;
    }
    Ok((a, b))
}

fn memory_prefactor(params: &MediumParams) -> f64 {
    params.theta_prime0().powi(2) / (8.0 * params.c0 * params.c0)
}

/// `I(psi)(s) = (θ'0² / (8 c0²)) ∫_{-∞}^s R(c0 (s - τ) / 2) psi'''(τ) dτ`.
pub fn apply_memory_operator(psi: &SampledSignal, params: &MediumParams) -> Result<SampledSignal> {
    memory_with(psi, params, params.c0 / 2.0, 1.0)
}

/// The memory operator with the rescaled correlation `sigma(l0) R(z / l0)`.
pub fn apply_scaled_memory_operator(psi: &SampledSignal, params: &MediumParams, l0: f64) -> Result<SampledSignal> {
    let sigma = correlation::sigma_l0(params.gamma(), l0)?;
    memory_with(psi, params, params.c0 / (2.0 * l0), sigma)
}

fn memory_with(psi: &SampledSignal, params: &MediumParams, rate_scale: f64, weight: f64) -> Result<SampledSignal> {
    psi.require_decay()?;
    let g = derivative(psi, 3);
    let (a, b) = memory_weights(params, rate_scale, weight * memory_prefactor(params), psi.ds, psi.len())?;
    Ok(psi.with_values(convolve(&g.values, &a, &b)))
}

/// Coefficient of the limiting operator.
///
/// * `gamma < 1`: `θ'0² r0 Γ(1 - gamma) / (2^(3 - gamma) c0^(2 + gamma))` in
///   front of `D^(2 + gamma)`;
/// * `gamma >= 1`: `θ'0² Γ0 / (8 c0³)` in front of the third derivative,
///   with `Γ0` the limit attenuation coefficient.
pub fn limit_operator_constant(params: &MediumParams) -> Result<f64> {
    let tail = correlation::tail_constants(params);
    let th2 = params.theta_prime0().powi(2);
    let c0 = params.c0;
    Ok(match tail.regime {
        Regime::LongRange => {
            th2 * tail.r0 * libm::tgamma(1.0 - tail.gamma) / (2f64.powf(3.0 - tail.gamma) * c0.powf(2.0 + tail.gamma))
        }
        _ => th2 * correlation::limit_coefficients(params, 1.0)?.gamma_c / (8.0 * c0.powi(3)),
    })
}

/// The `l0 -> 0` limit of the rescaled memory operator.
pub fn apply_limit_operator(psi: &SampledSignal, params: &MediumParams) -> Result<SampledSignal> {
    let c = limit_operator_constant(params)?;
    let gamma = params.gamma();
    let out = match Regime::of(gamma) {
        Regime::LongRange => weyl_derivative(psi, gamma, 2)?,
        _ => {
            psi.require_decay()?;
            derivative(psi, 3)
        }
    };
    Ok(out.with_values(out.values.iter().map(|v| c * v).collect()))
}

/// Relative L² distance `‖x - y‖ / ‖y‖` over the samples in `range`.
pub fn relative_l2(x: &[f64], y: &[f64], range: std::ops::Range<usize>) -> f64 {
    let num: f64 = range.clone().map(|i| (x[i] - y[i]).powi(2)).sum();
    let den: f64 = range.map(|i| y[i].powi(2)).sum();
    (num / den).sqrt()
}

/// Hilbert transform `(1 / pi) p.v. ∫ u(y) / (x - y) dy` of samples on a
/// uniform grid, by FFT with zero padding to `padding` times the length.
pub fn hilbert_transform(u: &[f64], padding: usize) -> Vec<f64> {
    let n = u.len();
    let len = (n * padding.max(1)).next_power_of_two();
    let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        // Multiplier -i sign(xi); DC and Nyquist carry no sign.
        *c *= if k == 0 || k == half {
            Complex64::new(0.0, 0.0)
        } else if k < half {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf[..n].iter().map(|c| c.re / len as f64).collect()
}

/// Numerical setup of the Kramers-Kronig check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KkOptions {
    /// Half-width `W` of the frequency window `[-W, W]`.
    pub half_width: f64,
    /// Samples per unit frequency.
    pub density: f64,
    pub padding: usize,
    /// Fraction of the window, at each end, under a cosine taper.
    pub taper: f64,
    /// Tolerated bound on the truncation error, relative to the band norm.
    pub truncation_tol: f64,
}

impl Default for KkOptions {
    fn default() -> Self {
        Self { half_width: 256.0, density: 16.0, padding: 8, taper: 0.05, truncation_tol: 1e-2 }
    }
}

/// One row of the Kramers-Kronig comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KkRow {
    pub omega: f64,
    /// Transform of the attenuation side and `omega² Γ_s`.
    pub lhs_s: f64,
    pub rhs_s: f64,
    /// Transform of the dispersion side and `omega² Γ_c`.
    pub lhs_c: f64,
    pub rhs_c: f64,
}

/// Band-relative residuals of both relations with the per-frequency rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KkReport {
    /// `‖H(ω² Γ_c) - ω² Γ_s‖ / ‖ω² Γ_s‖` on the band.
    pub residual_s: f64,
    /// `‖H(ω² Γ_s) + ω² Γ_c‖ / ‖ω² Γ_c‖` on the band.
    pub residual_c: f64,
    /// Estimated truncation error relative to the band norms.
    pub truncation_bound: f64,
    pub rows: Vec<KkRow>,
}

fn tapered(v: &[f64], frac: f64) -> Vec<f64> {
    let n = v.len();
    let w = ((n as f64) * frac).round() as usize;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let d = i.min(n - 1 - i);
            if d < w {
                x * 0.5 * (1.0 - (std::f64::consts::PI * d as f64 / w as f64).cos())
            } else {
                x
            }
        })
        .collect()
}

/// Residuals of the relations `H(re) = im` and `H(im) = -re` over the band,
/// for samples of a causal transform `re + i im` on `omega`.
pub fn hilbert_residuals(
    omega: &[f64],
    re: &[f64],
    im: &[f64],
    band: (f64, f64),
    opts: &KkOptions,
) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let h_re = hilbert_transform(&tapered(re, opts.taper), opts.padding);
    let h_im = hilbert_transform(&tapered(im, opts.taper), opts.padding);
    let in_band: Vec<usize> = (0..omega.len()).filter(|&i| (band.0..=band.1).contains(&omega[i].abs())).collect();
    let norm = |f: &dyn Fn(usize) -> f64| in_band.iter().map(|&i| f(i).powi(2)).sum::<f64>().sqrt();
    let r1 = norm(&|i| h_re[i] - im[i]) / norm(&|i| im[i]);
    let r2 = norm(&|i| h_im[i] + re[i]) / norm(&|i| re[i]);
    (r1, r2, h_re, h_im)
}

/// Check the Kramers-Kronig pairing of `omega² Γ_c` and `omega² Γ_s` on
/// `band.0 <= |omega| <= band.1`.
///
/// `omega² (Γ_c + i Γ_s)` grows at large frequency, so its asymptote
/// `i c0 R(0) omega + c0² M1 / 2` is removed first (`M_k = ∫ r g^k dp`), as
/// is the exact causal pair `i a / (omega + i b)` with `a = -c0³ M2 / 4`
/// that carries the `1 / omega` tail of what remains. Neither subtraction
/// changes the residuals; they only let the finite window see a rapidly
/// decaying signal.
pub fn kk_residual(params: &MediumParams, band: (f64, f64), opts: KkOptions) -> Result<KkReport> {
    if !(band.0 > 0.0 && band.1 > band.0 && band.1 < opts.half_width) {
        return Err(Error::InvalidInput(format!("band {band:?} must satisfy 0 < lo < hi < {}", opts.half_width)));
    }
    let c0 = params.c0;
    let r_zero = correlation::autocorrelation(params, 0.0)?;
    let m1 = -correlation::slope_at_origin(params)?;
    let m2 = correlation::spectral_integral(params, |g| g * g, &[])?;
    let a = -c0.powi(3) * m2 / 4.0;
    let b = (0.5 * c0 * params.rate(params.p_max())).max(1.0);
    let q = |w: f64| Complex64::new(a * b, a * w) / (w * w + b * b);
    let poly = |w: f64| Complex64::new(0.5 * c0 * c0 * m1, c0 * r_zero * w);

    let m = (opts.half_width * opts.density).round() as usize;
    let dw = opts.half_width / m as f64;
    let positive: Vec<(f64, Complex64)> = (0..=m)
        .map(|j| {
            let w = j as f64 * dw;
            let raw = if j == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                let c = correlation::scattering_coefficients(params, w)?;
                c.complex() * (w * w)
            };
            Ok((w, raw))
        })
        .collect::<Result<_>>()?;
    // Γ_c is even and Γ_s odd in omega.
    let mut omega = Vec::with_capacity(2 * m + 1);
    let mut raw = Vec::with_capacity(2 * m + 1);
    for &(w, g) in positive.iter().skip(1).rev() {
        omega.push(-w);
        raw.push(g.conj());
    }
    for &(w, g) in &positive {
        omega.push(w);
        raw.push(g);
    }
    let reduced: Vec<Complex64> = omega.iter().zip(&raw).map(|(&w, &g)| g - poly(w) - q(w)).collect();
    let re: Vec<f64> = reduced.iter().map(|c| c.re).collect();
    let im: Vec<f64> = reduced.iter().map(|c| c.im).collect();
    let (_, _, h_re, h_im) = hilbert_residuals(&omega, &re, &im, band, &opts);

    let mut rows = Vec::new();
    let (mut num_s, mut den_s, mut num_c, mut den_c) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..omega.len() {
        let w = omega[i];
        if !(band.0..=band.1).contains(&w.abs()) {
            continue;
        }
        let extra = poly(w) + q(w);
        let row = KkRow {
            omega: w,
            lhs_s: h_re[i] + extra.im,
            rhs_s: raw[i].im,
            lhs_c: -h_im[i] + extra.re,
            rhs_c: raw[i].re,
        };
        num_s += (row.lhs_s - row.rhs_s).powi(2);
        den_s += row.rhs_s.powi(2);
        num_c += (row.lhs_c - row.rhs_c).powi(2);
        den_c += row.rhs_c.powi(2);
        rows.push(row);
    }
    // A tail c / omega beyond W shifts the transform by about 2 c / (pi W).
    let edge = reduced.first().unwrap().norm().max(reduced.last().unwrap().norm());
    let band_rms = (den_s.min(den_c) / rows.len() as f64).sqrt();
    let truncation_bound = 2.0 * edge / std::f64::consts::PI / band_rms;
    if truncation_bound > opts.truncation_tol {
        return Err(Error::Quadrature { achieved: truncation_bound, requested: opts.truncation_tol });
    }
    Ok(KkReport { residual_s: (num_s / den_s).sqrt(), residual_c: (num_c / den_c).sqrt(), truncation_bound, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal_has_zero_derivative() {
        let f = SampledSignal::new(-5.0, 0.01, vec![0.0; 200], true).unwrap();
        let d = weyl_derivative(&f, 0.5, 0).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let f = SampledSignal::new(0.0, 0.1, vec![0.0; 20], true).unwrap();
        assert!(weyl_derivative(&f, 1.0, 0).is_err());
        assert!(weyl_derivative(&f, 0.0, 0).is_err());
    }

    #[test]
    fn small_argument_weights_are_continuous() {
        for y in [0.999e-3f64, 1.001e-3] {
            let direct = (y + (-y).exp_m1()) / (y * y);
            assert!((recent_weight(y) - direct).abs() < 1e-9);
            let direct = (-(-y).exp_m1() - y * (-y).exp()) / (y * y);
            assert!((past_weight(y) - direct).abs() < 1e-7);
        }
    }
}
