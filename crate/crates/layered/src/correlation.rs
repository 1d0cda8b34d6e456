//! Correlation function of the medium and the scattering coefficients built
//! from it.
//!
//! Everything here reduces to integrals over the spectral variable `p` of the
//! form `∫_S r(p) F(g(p)) dp` with `r(p) = a(p) |p|^(-2 alpha)` and
//! `g(p) = mu |p|^(2 beta)`. The substitution `p = P u^(1/(1 - 2 alpha))`
//! turns `r(p) dp` into `a(p) P^(1 - 2 alpha) / (1 - 2 alpha) du`, which
//! removes the singularity at the origin before the adaptive rule sees it.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::MediumParams;
use crate::quad::{self, QuadOptions};

/// Tolerance for deciding that `gamma` sits exactly at the critical value 1.
const CRITICAL_TOL: f64 = 1e-12;

/// Decay class of the correlation tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `gamma < 1`: non-integrable correlations.
    LongRange,
    /// `gamma = 1`: logarithmic borderline.
    Critical,
    /// `gamma > 1`: integrable correlations.
    ShortRange,
}

impl Regime {
    pub fn of(gamma: f64) -> Self {
        if (gamma - 1.0).abs() <= CRITICAL_TOL {
            Self::Critical
        } else if gamma < 1.0 {
            Self::LongRange
        } else {
            Self::ShortRange
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LongRange => "long-range",
            Self::Critical => "critical",
            Self::ShortRange => "short-range",
        })
    }
}

/// Amplitude and exponent of the power-law tail `R(z) ~ r0 |z|^(-gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConstants {
    pub r0: f64,
    pub gamma: f64,
    pub regime: Regime,
}

/// Attenuation and dispersion coefficients at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    pub omega: f64,
    pub gamma_c: f64,
    pub gamma_s: f64,
}

impl ScatteringCoefficients {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.gamma_c, self.gamma_s)
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 6000 }
}

/// `∫_S r(p) f(g(p)) dp` for even `a`, with extra break points given as
/// rates where `f` changes scale.
pub(crate) fn spectral_integral<F>(params: &MediumParams, f: F, rate_breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let p_max = params.p_max();
    let e = 1.0 - 2.0 * params.alpha;
    let to_u = |p: f64| (p / p_max).powf(e);
    let mut breaks = vec![0.0, 1.0];
    // Decades in p resolve the algebraic behaviour of g near the origin.
    for k in 1..=14 {
        breaks.push(to_u(p_max * 10f64.powi(-k)));
    }
    for &g in rate_breaks {
        if g > 0.0 && g.is_finite() {
            let p = (g / params.mu).powf(0.5 / params.beta);
            if p < p_max {
                breaks.push(to_u(p));
            }
        }
    }
    breaks.retain(|u| u.is_finite() && (0.0..=1.0).contains(u));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));

    let jac = 2.0 * p_max.powf(e) / e;
    let integrand = |u: f64| {
        let p = p_max * u.powf(1.0 / e);
        params.a.value(p) * f(params.rate(p))
    };
    let est = quad::integrate_breaks(integrand, &breaks, quad_opts())?;
    Ok(jac * est.value)
}

/// Rates around `g0` spanning a few decades, used as break points.
fn decades_around(g0: f64) -> Vec<f64> {
    (-4..=4).map(|k| g0 * 10f64.powi(k)).collect()
}

/// `R(z) = ∫_S exp(-g(p) |z|) r(p) dp`.
pub fn autocorrelation(params: &MediumParams, z: f64) -> Result<f64> {
    let z = z.abs();
    let breaks = if z > 0.0 { decades_around(1.0 / z) } else { vec![] };
    spectral_integral(params, |g| (-g * z).exp(), &breaks)
}

/// `R'(0+) = -∫_S g(p) r(p) dp`.
pub fn slope_at_origin(params: &MediumParams) -> Result<f64> {
    spectral_integral(params, |g| -g, &[])
}

/// Exponent `gamma` and tail amplitude
/// `r0 = a(0) ∫_R exp(-mu |p|^(2 beta)) |p|^(-2 alpha) dp = a(0) Γ(gamma) mu^(-gamma) / beta`.
pub fn tail_constants(params: &MediumParams) -> TailConstants {
    let gamma = params.gamma();
    let r0 = params.a.value(0.0) * libm::tgamma(gamma) * params.mu.powf(-gamma) / params.beta;
    TailConstants { r0, gamma, regime: Regime::of(gamma) }
}

/// `Γ_c + i Γ_s = 2 ∫_S r(p) / (g(p) - 2 i omega / c0) dp`.
///
/// At `omega = 0` the result is finite only for integrable correlations.
pub fn scattering_coefficients(params: &MediumParams, omega: f64) -> Result<ScatteringCoefficients> {
    let k = 2.0 * omega / params.c0;
    if omega == 0.0 {
        if Regime::of(params.gamma()) != Regime::ShortRange {
            return Err(Error::Divergent(format!("Gamma_c(0) is infinite for gamma = {} <= 1", params.gamma())));
        }
        let gamma_c = 2.0 * spectral_integral(params, |g| 1.0 / g, &[])?;
        return Ok(ScatteringCoefficients { omega, gamma_c, gamma_s: 0.0 });
    }
    let breaks = decades_around(k.abs());
    let gamma_c = 2.0 * spectral_integral(params, |g| g / (g * g + k * k), &breaks)?;
    let gamma_s = 2.0 * spectral_integral(params, |g| k / (g * g + k * k), &breaks)?;
    Ok(ScatteringCoefficients { omega, gamma_c, gamma_s })
}

/// Normalization `sigma(l0)` of the rescaled correlation `sigma(l0) R(z / l0)`.
pub fn sigma_l0(gamma: f64, l0: f64) -> Result<f64> {
    if !(l0 > 0.0) {
        return Err(Error::InvalidInput(format!("l0 = {l0} must be positive")));
    }
    Ok(match Regime::of(gamma) {
        Regime::LongRange => l0.powf(-gamma),
        Regime::Critical => {
            let log = l0.ln().abs();
            if log == 0.0 {
                return Err(Error::InvalidInput("l0 = 1 is degenerate at gamma = 1".into()));
            }
            1.0 / (l0 * log)
        }
        Regime::ShortRange => 1.0 / l0,
    })
}

/// Coefficients of the rescaled correlation `sigma(l0) R(z / l0)`.
///
/// Substituting `s = l0 t` in the time integrals gives
/// `Γ(omega, l0) = sigma(l0) l0 Γ(omega l0)`.
pub fn scaled_coefficients(params: &MediumParams, omega: f64, l0: f64) -> Result<ScatteringCoefficients> {
    let sigma = sigma_l0(params.gamma(), l0)?;
    let base = scattering_coefficients(params, omega * l0)?;
    Ok(ScatteringCoefficients { omega, gamma_c: sigma * l0 * base.gamma_c, gamma_s: sigma * l0 * base.gamma_s })
}

/// Normalized limits `(Γ_c0, Γ_s0)` of the long-range scaled coefficients:
/// `2 Γ(1 - gamma) (cos, sin)((1 - gamma) pi / 2) (2 |omega| / c0)^(gamma - 1)`,
/// the sine term carrying `sign(omega)`.
pub fn fractional_coefficients(gamma: f64, c0: f64, omega: f64) -> (f64, f64) {
    let scale = 2.0 * libm::tgamma(1.0 - gamma) * (2.0 * omega.abs() / c0).powf(gamma - 1.0);
    let angle = (1.0 - gamma) * std::f64::consts::FRAC_PI_2;
    (scale * angle.cos(), scale * angle.sin() * omega.signum())
}

/// Limit of [`scaled_coefficients`] as `l0 -> 0`.
///
/// * `gamma < 1`: `(r0 Γ_c0(omega), r0 Γ_s0(omega))`;
/// * `gamma = 1`: `(2 a(0) / (mu beta), 0)`;
/// * `gamma > 1`: `(Γ_c(0), 0)`.
pub fn limit_coefficients(params: &MediumParams, omega: f64) -> Result<ScatteringCoefficients> {
    let tail = tail_constants(params);
    let (gamma_c, gamma_s) = match tail.regime {
        Regime::LongRange => {
            if omega == 0.0 {
                return Err(Error::Divergent("fractional limit is singular at omega = 0".into()));
            }
            let (c, s) = fractional_coefficients(tail.gamma, params.c0, omega);
            (tail.r0 * c, tail.r0 * s)
        }
        Regime::Critical => (2.0 * params.a.value(0.0) / (params.mu * params.beta), 0.0),
        Regime::ShortRange => (scattering_coefficients(params, 0.0)?.gamma_c, 0.0),
    };
    Ok(ScatteringCoefficients { omega, gamma_c, gamma_s })
}

/// Hermite constant
/// `Θ1 = ( (2 pi)^(-1/2) ∫ Theta(sigma u) u exp(-u^2 / 2) du )^2` with
/// `sigma = sqrt(eps)`.
pub fn hermite_constant(params: &MediumParams, eps: f64) -> f64 {
    let sigma = eps.sqrt();
    let (x, w) = quad::gauss_hermite(96);
    let sqrt2 = std::f64::consts::SQRT_2;
    let m: f64 = x.iter().zip(&w).map(|(&x, &w)| w * params.theta.eval(sigma * sqrt2 * x) * sqrt2 * x).sum::<f64>()
        / std::f64::consts::PI.sqrt();
    m * m
}
