//! Numerical quadrature used throughout the crate.
//!
//! The workhorse is a globally adaptive Gauss–Kronrod 10/21 rule: intervals
//! are kept in a max-heap keyed by their error estimate and the worst one is
//! bisected until the summed estimate meets the tolerance. Fixed Gauss–Legendre
//! and Gauss–Hermite rules are provided for panel integration and Gaussian
//! expectations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae on `[0, 1]`, outermost first; the last entry is the centre.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_532_474,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7, 9).
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 }
    }
}

impl QuadOptions {
    pub fn with_rel(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Value and error estimate of a converged integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut gauss = 0.0;
    let mut kron = fc * WGK[10];
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Integrate `f` over `[a, b]` adaptively.
///
/// Endpoint singularities that are integrable are fine: the rule never
/// evaluates `f` at the interval ends.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], opts)
}

/// Integrate over consecutive pieces `[p0, p1], [p1, p2], ...`.
///
/// Break points let the caller place interval ends at known kinks, jumps or
/// scale changes of the integrand. Duplicate points are skipped.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], opts: QuadOptions) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let seg = kronrod(&mut f, w[0], w[1]);
            total += seg.value;
            total_err += seg.error;
            heap.push(seg);
        }
    }
    let mut count = heap.len();
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            return Ok(Estimate { value: total, error: total_err });
        }
        let Some(worst) = heap.pop() else {
            return Ok(Estimate { value: total, error: total_err });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if count >= opts.max_intervals || mid <= worst.a || mid >= worst.b {
            // The worst segment can no longer be split. Accept the result if
            // the rest of the budget is tiny, otherwise report the failure.
            if total_err <= 10.0 * target {
                return Ok(Estimate { value: total, error: total_err });
            }
            return Err(Error::Quadrature { achieved: total_err, requested: target });
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        // Guard against drift in the running error sum.
        if total_err < 0.0 {
            total_err = heap.iter().map(|s| s.error).sum::<f64>() + left.error + right.error;
        }
        heap.push(left);
        heap.push(right);
        count += 1;
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite nodes and weights for the weight `exp(-x^2)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 3e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Composite Simpson rule on uniformly spaced samples.
///
/// An even number of intervals uses plain Simpson; an odd number closes the
/// last three intervals with the 3/8 rule. One interval falls back to the
/// trapezoid.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (samples[0] + samples[1]),
        3 => h / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals % 2 == 0 {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                let t = 3.0 * h / 8.0 * (samples[k] + 3.0 * samples[k + 1] + 3.0 * samples[k + 2] + samples[k + 3]);
                (k, t)
            };
            let mut acc = samples[0] + samples[even_end];
            for (i, v) in samples[1..even_end].iter().enumerate() {
                acc += if i % 2 == 0 { 4.0 * v } else { 2.0 * v };
            }
            acc * h / 3.0 + tail
        }
    }
}
