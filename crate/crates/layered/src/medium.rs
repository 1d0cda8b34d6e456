//! Random medium synthesis.
//!
//! The fluctuation field `V(z)` is a superposition of independent
//! Ornstein–Uhlenbeck modes, one per cell of a spectral grid over `p`. A mode
//! at wavenumber `p` relaxes at rate `g(p) = mu |p|^(2 beta)` and carries the
//! variance `w = ∫ a(p) |p|^(-2 alpha) dp` of its cell, so that
//!
//! ```text
//! E[V(0) V(z)] = Σ w_i exp(-g_i |z|)  ≈  ∫ exp(-g(p) |z|) a(p) |p|^(-2 alpha) dp.
//! ```
//!
//! Slow modes near `p = 0` hold the long memory, which is why the grid is
//! refined geometrically towards the origin. The speed fluctuation seen by a
//! wave is the bounded image `nu = Theta(sqrt(eps) V)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectral density `a(p)` of the fluctuations, assumed even in `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectralDensity {
    /// `1` on `(-half_width, half_width)`, zero outside.
    Indicator { half_width: f64 },
    /// A constant level on the whole spectral window.
    Constant { level: f64 },
    /// `exp(-p^2 / (2 width^2))`.
    Gaussian { width: f64 },
}

impl SpectralDensity {
    pub fn value(&self, p: f64) -> f64 {
        let p = p.abs();
        match *self {
            Self::Indicator { half_width } => {
                if p < half_width {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Constant { level } => level,
            Self::Gaussian { width } => (-0.5 * (p / width).powi(2)).exp(),
        }
    }

    /// Edge of the support, if compact.
    pub fn support(&self) -> Option<f64> {
        match *self {
            Self::Indicator { half_width } => Some(half_width),
            _ => None,
        }
    }

    /// Whether `a` is constant on its support, which makes cell weights exact.
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, Self::Gaussian { .. })
    }
}

/// Shape of the bounded nonlinearity `Theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaKind {
    /// `c x / (1 + (x/c)^8)^(1/8)`: linear to eighth order, then saturates.
    Softclip,
    /// `c tanh(x / c)`.
    Tanh,
    /// Unbounded `x`; only meaningful for analysis, never a valid medium.
    Linear,
}

/// Odd bounded map `Theta(u)` with slope `slope` at the origin and
/// saturation level `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub kind: ThetaKind,
    pub cap: f64,
    pub slope: f64,
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self { kind: ThetaKind::Softclip, cap: 0.95, slope: 1.0 }
    }
}

impl Nonlinearity {
    pub fn linear(slope: f64) -> Self {
        Self { kind: ThetaKind::Linear, cap: f64::INFINITY, slope }
    }

    pub fn tanh(cap: f64, slope: f64) -> Self {
        Self { kind: ThetaKind::Tanh, cap, slope }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let x = self.slope * u;
        let c = self.cap;
        match self.kind {
            ThetaKind::Linear => x,
            ThetaKind::Tanh => c * (x / c).tanh(),
            ThetaKind::Softclip => {
                let t = x.abs() / c;
                // Written two ways so that neither branch overflows.
                if t <= 1.0 {
                    x / (1.0 + t.powi(8)).powf(0.125)
                } else {
                    c * x.signum() / (1.0 + t.powi(-8)).powf(0.125)
                }
            }
        }
    }

    /// Upper bound of `|Theta|`.
    pub fn sup(&self) -> f64 {
        match self.kind {
            ThetaKind::Linear => f64::INFINITY,
            _ => self.cap,
        }
    }
}

/// Parameters of the layered random medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Half-width of the spectral window `S = (-r_s, r_s)`.
    pub r_s: f64,
    pub a: SpectralDensity,
    pub theta: Nonlinearity,
    pub c0: f64,
}

impl MediumParams {
    /// The long-range configuration used in the pulse figures:
    /// `alpha = 1/4`, `mu = 2`, `a = 1` on `(-10, 10)`.
    pub fn figure_pulse(beta: f64) -> Self {
        Self { mu: 2.0, beta, ..Self::gamma_half() }
    }

    /// `alpha = 1/4`, `beta = 1/2`, `mu = 1`, so `gamma = 1/2`.
    pub fn gamma_half() -> Self {
        Self {
            mu: 1.0,
            beta: 0.5,
            alpha: 0.25,
            r_s: 10.0,
            a: SpectralDensity::Indicator { half_width: 10.0 },
            theta: Nonlinearity::default(),
            c0: 1.0,
        }
    }

    /// Same as [`gamma_half`](Self::gamma_half) with `beta = 1/6`, `gamma = 3/2`.
    pub fn gamma_three_halves() -> Self {
        Self { beta: 1.0 / 6.0, ..Self::gamma_half() }
    }

    /// `beta = 1/4` with `alpha = 1/4` puts the decay exactly at `gamma = 1`.
    pub fn gamma_critical() -> Self {
        Self { beta: 0.25, ..Self::gamma_half() }
    }

    /// Decay exponent of the correlation tail, `(1 - 2 alpha) / (2 beta)`.
    pub fn gamma(&self) -> f64 {
        (1.0 - 2.0 * self.alpha) / (2.0 * self.beta)
    }

    pub fn theta_prime0(&self) -> f64 {
        self.theta.slope
    }

    /// Upper edge of the effective support of `a` inside `S`.
    pub fn p_max(&self) -> f64 {
        match self.a.support() {
            Some(h) => h.min(self.r_s),
            None => self.r_s,
        }
    }

    /// `r(p) = a(p) |p|^(-2 alpha)` on the spectral window.
    pub fn spectral_weight(&self, p: f64) -> f64 {
        if p.abs() >= self.r_s {
            return 0.0;
        }
        self.a.value(p) * p.abs().powf(-2.0 * self.alpha)
    }

    /// Relaxation rate `g(p) = mu |p|^(2 beta)`.
    pub fn rate(&self, p: f64) -> f64 {
        self.mu * p.abs().powf(2.0 * self.beta)
    }

    /// Check every hypothesis the model relies on.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParams(m));
        if !(self.alpha < 0.5) {
            return fail(format!("alpha = {} must be < 1/2", self.alpha));
        }
        if !(self.mu > 0.0) {
            return fail(format!("mu = {} must be positive", self.mu));
        }
        if !(self.beta > 0.0) {
            return fail(format!("beta = {} must be positive", self.beta));
        }
        if !(self.r_s > 0.0) {
            return fail(format!("r_s = {} must be positive", self.r_s));
        }
        if !(self.c0 > 0.0) {
            return fail(format!("c0 = {} must be positive", self.c0));
        }
        if !(self.a.value(0.0) > 0.0) || !(self.p_max() > 0.0) {
            return fail("a(0) must be positive".into());
        }
        match self.a {
            SpectralDensity::Constant { level } if !(level.is_finite()) => return fail("a must be bounded".into()),
            SpectralDensity::Gaussian { width } if !(width > 0.0) => {
                return fail("gaussian width must be positive".into())
            }
            _ => {}
        }
        if self.theta.slope == 0.0 || !self.theta.slope.is_finite() {
            return fail("theta slope must be a nonzero finite number".into());
        }
        if !(self.theta.sup() < 1.0) || !(self.theta.cap > 0.0) {
            return fail(format!("sup |Theta| = {} must be < 1", self.theta.sup()));
        }
        Ok(())
    }
}

/// Construction options for [`SpectralGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Total number of cells over both half-lines.
    pub n_modes: usize,
    /// Ratio between the innermost geometric edge and the outer edge.
    pub min_ratio: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { n_modes: 512, min_ratio: 1e-10 }
    }
}

impl GridOptions {
    pub fn with_modes(n_modes: usize) -> Self {
        Self { n_modes, ..Self::default() }
    }
}

/// One cell `[lo, hi]` of the spectral discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
}

/// Discretized spectral measure: one OU mode per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub cells: Vec<Cell>,
    /// Representative wavenumber of each cell (`g = mu |p|^(2 beta)`).
    pub p_rep: Vec<f64>,
    pub rates: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectralGrid {
    /// Discretize the spectral measure of `params` into `opts.n_modes` cells.
    ///
    /// Each half-line gets an innermost cell `[0, p_min]` followed by
    /// geometrically growing cells up to the support edge. The power law is
    /// integrated in closed form over every cell with `a` frozen at the cell
    /// midpoint. The rate of a cell is the `g`-weighted mean over the cell,
    /// which keeps `Σ w g` equal to `∫ r g dp`, the slope of the correlation
    /// at the origin.
    pub fn build(params: &MediumParams, opts: GridOptions) -> Result<Self> {
        params.validate()?;
        if opts.n_modes < 2 {
            return Err(Error::InvalidInput(format!("n_modes = {} must be at least 2", opts.n_modes)));
        }
        if !(opts.min_ratio > 0.0 && opts.min_ratio < 1.0) {
            return Err(Error::InvalidInput("min_ratio must lie in (0, 1)".into()));
        }
        let half = opts.n_modes / 2;
        let p_max = params.p_max();
        let mut edges = vec![0.0];
        if half == 1 {
            edges.push(p_max);
        } else {
            let p_min = p_max * opts.min_ratio;
            let steps = (half - 1) as f64;
            for k in 0..half {
                edges.push(p_min * (p_max / p_min).powf(k as f64 / steps));
            }
            *edges.last_mut().unwrap() = p_max;
        }

        let e_w = 1.0 - 2.0 * params.alpha;
        let e_g = e_w + 2.0 * params.beta;
        let mut positive = Vec::with_capacity(half);
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let level = params.a.value(0.5 * (lo + hi));
            let mass = (hi.powf(e_w) - lo.powf(e_w)) / e_w;
            let g_mass = params.mu * (hi.powf(e_g) - lo.powf(e_g)) / e_g;
            let g = g_mass / mass;
            let p = (g / params.mu).powf(0.5 / params.beta);
            positive.push((Cell { lo, hi }, p, g, level * mass));
        }

        let mut grid = SpectralGrid { cells: vec![], p_rep: vec![], rates: vec![], weights: vec![] };
        for &(c, p, g, w) in positive.iter().rev() {
            grid.push(Cell { lo: -c.hi, hi: -c.lo }, -p, g, w);
        }
        for &(c, p, g, w) in &positive {
            grid.push(c, p, g, w);
        }
        Ok(grid)
    }

    fn push(&mut self, cell: Cell, p: f64, g: f64, w: f64) {
        self.cells.push(cell);
        self.p_rep.push(p);
        self.rates.push(g);
        self.weights.push(w);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Correlation of the discretized field, `Σ w_i exp(-g_i |z|)`.
    pub fn autocorrelation(&self, z: f64) -> f64 {
        self.weights.iter().zip(&self.rates).map(|(w, g)| w * (-g * z.abs()).exp()).sum()
    }

    /// Total variance `Σ w_i`.
    pub fn variance(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Precompute the exact OU transition over a fixed step `h`.
    pub fn transition(&self, h: f64) -> Transition {
        let mut decay = Vec::with_capacity(self.len());
        let mut spread = Vec::with_capacity(self.len());
        for (&g, &w) in self.rates.iter().zip(&self.weights) {
            let (d, s) = ou_coefficients(g, w, h);
            decay.push(d);
            spread.push(s);
        }
        Transition { h, decay, spread }
    }

    /// Draw a stationary state: independent `N(0, w_i)` per mode.
    pub fn sample_stationary(&self, seed: u64) -> ModeState {
        self.sample_stationary_stream(seed, 0)
    }

    /// Like [`sample_stationary`](Self::sample_stationary) on stream `index`
    /// of `master_seed`, the per-realization entry point of the ensembles.
    pub fn sample_stationary_stream(&self, master_seed: u64, index: u64) -> ModeState {
        let mut rng = stream_rng(master_seed, index);
        let v = self
            .weights
            .iter()
            .map(|w| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                w.sqrt() * xi
            })
            .collect();
        ModeState { z: 0.0, v, rng }
    }
}

/// Decay factor and innovation standard deviation of an exact OU step.
fn ou_coefficients(g: f64, w: f64, h: f64) -> (f64, f64) {
    let decay = (-g * h).exp();
    // 1 - exp(-2gh) without cancellation for slow modes.
    let var = -(-2.0 * g * h).exp_m1();
    (decay, (w * var).sqrt())
}

/// The random generator for realization `index` under `master_seed`.
///
/// Each realization owns a ChaCha stream, so ensembles give identical results
/// whatever the number of worker threads.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Exact OU transition over a fixed step, shared by many advances.
#[derive(Debug, Clone)]
pub struct Transition {
    pub h: f64,
    decay: Vec<f64>,
    spread: Vec<f64>,
}

/// Current values of all modes along one realization.
#[derive(Debug, Clone)]
pub struct ModeState {
    pub z: f64,
    pub v: Vec<f64>,
    rng: ChaCha8Rng,
}

impl ModeState {
    /// `V(z)`, the sum over modes.
    pub fn value(&self) -> f64 {
        self.v.iter().sum()
    }

    /// Advance by an arbitrary step with the distribution-exact OU update.
    pub fn advance(&mut self, grid: &SpectralGrid, h: f64) {
        if h == 0.0 {
            return;
        }
        for ((v, &g), &w) in self.v.iter_mut().zip(&grid.rates).zip(&grid.weights) {
            let (d, s) = ou_coefficients(g, w, h);
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            *v = d * *v + s * xi;
        }
        self.z += h;
    }

    /// Advance by the precomputed step of `t` and return the new `V`.
    pub fn step(&mut self, t: &Transition) -> f64 {
        let mut sum = 0.0;
        for ((v, &d), &s) in self.v.iter_mut().zip(&t.decay).zip(&t.spread) {
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            *v = d * *v + s * xi;
            sum += *v;
        }
        self.z += t.h;
        sum
    }
}

/// Medium fluctuation `nu = Theta(sqrt(eps) V)`.
pub fn nu(params: &MediumParams, v: f64, eps: f64) -> f64 {
    params.theta.eval(eps.sqrt() * v)
}

/// One row of a sampled medium trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub z: f64,
    pub v: f64,
    pub nu: f64,
}

/// Sample `V` and `nu` on `0, dz, 2 dz, ...` up to `z_max` along one
/// stationary realization.
pub fn realization(
    params: &MediumParams,
    opts: GridOptions,
    eps: f64,
    z_max: f64,
    dz: f64,
    seed: u64,
) -> Result<Vec<TraceSample>> {
    if !(dz > 0.0) || !(z_max > 0.0) {
        return Err(Error::InvalidInput("z_max and dz must be positive".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let grid = SpectralGrid::build(params, opts)?;
    let step = grid.transition(dz);
    let mut state = grid.sample_stationary(seed);
    let n = (z_max / dz).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut v = state.value();
    for i in 0..=n {
        if i > 0 {
            v = state.step(&step);
        }
        out.push(TraceSample { z: i as f64 * dz, v, nu: nu(params, v, eps) });
    }
    Ok(out)
}
