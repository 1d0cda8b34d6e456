use std::f64::consts::PI;

use layered::quad::{integrate, integrate_breaks, QuadOptions};
use num_complex::Complex64;

/// `1 / (2 (2π)³)`, the inversion constant of the pulse synthesis.
pub fn inversion_norm() -> f64 {
    1.0 / (2.0 * (2.0 * PI).powi(3))
}

/// Homogeneous transmitted front for `Ψ̂ = 2ω² exp(-ω²(1+k²))` on the axis
/// `y = 0`, in closed form.
///
/// With `b = c0 L / 2`, the transverse integral is `2π ω³ e^{-ω²} / (ω + ib)`;
/// dividing `ω³` by `ω + ib` leaves Gaussian moments plus
/// `J(s) = ∫ e^{-ω² - iωs} / (ω + ib) dω = -iπ e^{b² - bs} erfc((2b - s)/2)`.
pub fn homogeneous_axis(s: f64, c0: f64, l: f64) -> f64 {
    let b = c0 * l / 2.0;
    let i = Complex64::i();
    let g0 = PI.sqrt() * (-s * s / 4.0).exp();
    let g1 = -i * (s / 2.0) * g0;
    let g2 = (0.5 - s * s / 4.0) * g0;
    let j = if b > 0.0 {
        -i * PI * (b * b - b * s).exp() * libm::erfc((2.0 * b - s) / 2.0)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let total = g2 - i * b * g1 - b * b * g0 + i * b.powi(3) * j;
    let p = total * (2.0 * PI * inversion_norm());
    p.re
}

/// Homogeneous front at transverse offset `r`: the transverse integral is
/// Gaussian, `2π ω² e^{-ω²} e^{-ω² r² / (4a)} / a` with `a = ω² + iωc0L/2`,
/// and the remaining frequency integral is done adaptively.
pub fn homogeneous_front(s: f64, r: f64, c0: f64, l: f64) -> f64 {
    let f = |w: f64| -> Complex64 {
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = Complex64::new(w * w, w * c0 * l / 2.0);
        let transverse = 2.0 * PI * w * w * (-w * w).exp() * (-(w * w * r * r) / (4.0 * a)).exp() / a;
        transverse * w * w * Complex64::from_polar(1.0, -w * s)
    };
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 20000 };
    let mut pts = vec![-9.0];
    for k in 0..=36 {
        pts.push(-9.0 + 0.5 * k as f64);
    }
    pts.dedup();
    let re = integrate_breaks(|w| f(w).re, &pts, opts).unwrap().value;
    re * inversion_norm()
}

/// `Γ_c + iΓ_s = 2 ∫_0^∞ R(s) e^{iks} ds` computed in the time domain.
///
/// The finite part `[0, s_t]` uses Filon's rule: `R` is interpolated by
/// quadratics on panels and each panel's moments against `e^{iks}` are exact.
/// Beyond `s_t` the correlation is `r0 s^{-γ}` up to `exp(-g_max s)` for a
/// compactly supported spectrum, and the tail integral is taken along the
/// rotated contour `s = s_t + i t`, where it decays exponentially.
pub fn filon_coefficients<R: Fn(f64) -> f64>(r: R, r0: f64, gamma: f64, k: f64, s_t: f64, panels: usize) -> Complex64 {
    let h = s_t / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * h;
        let (f0, f1, f2) = (r(a), r(a + 0.5 * h), r(a + h));
        acc += filon_panel(f0, f1, f2, a, h, k);
    }
    let i = Complex64::i();
    // ∫_{s_t}^∞ s^{-γ} e^{iks} ds = i ∫_0^∞ (s_t + it)^{-γ} e^{ik s_t} e^{-kt} dt for k > 0.
    let tail_integrand = |t: f64| {
        let z = Complex64::new(s_t, t);
        i * z.powf(-gamma) * (i * k * s_t).exp() * (-k * t).exp()
    };
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-13, max_intervals: 20000 };
    let upper = 60.0 / k;
    let tre = integrate(|t| tail_integrand(t).re, 0.0, upper, opts).unwrap().value;
    let tim = integrate(|t| tail_integrand(t).im, 0.0, upper, opts).unwrap().value;
    2.0 * (acc + r0 * Complex64::new(tre, tim))
}

/// Exact `∫_a^{a+h} q(s) e^{iks} ds` for the quadratic `q` through three
/// equally spaced samples.
fn filon_panel(f0: f64, f1: f64, f2: f64, a: f64, h: f64, k: f64) -> Complex64 {
    // Quadratic in x = s - a: q = c0 + c1 x + c2 x².
    let c0 = f0;
    let c2 = 2.0 * (f0 - 2.0 * f1 + f2) / (h * h);
    let c1 = (f2 - f0) / h - c2 * h;
    let theta = k * h;
    let i = Complex64::i();
    let m = if theta.abs() < 1e-3 {
        // Series for the moments ∫_0^h x^n e^{ikx} dx when kh is small.
        let mut m = [Complex64::new(0.0, 0.0); 3];
        for (n, mn) in m.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..12 {
                sum += term * h.powi((n + j + 1) as i32) / (n + j + 1) as f64;
                term *= i * k / (j + 1) as f64;
            }
            *mn = sum;
        }
        m
    } else {
        let e = (i * theta).exp();
        let ik = i * k;
        let m0 = (e - 1.0) / ik;
        let m1 = (h * e - m0) / ik;
        let m2 = (h * h * e - 2.0 * m1) / ik;
        [m0, m1, m2]
    };
    (i * k * a).exp() * (c0 * m[0] + c1 * m[1] + c2 * m[2])
}
