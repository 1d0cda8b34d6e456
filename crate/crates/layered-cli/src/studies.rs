//! One function per subcommand. Each returns its artifacts as text together
//! with the tolerance checks that decide the exit status.

use anyhow::Context as _;
use layered::correlation::{
    self, autocorrelation, limit_coefficients, scaled_coefficients, scattering_coefficients, Regime,
};
use layered::fractional::{
    apply_limit_operator, apply_scaled_memory_operator, hilbert_residuals, kk_residual, relative_l2, weyl_derivative,
    KkOptions, SampledSignal,
};
use layered::kernel::{pulse_front, spectral_centroid, GaussianSource, PulseMode, PulseOptions};
use layered::limit_sde::{closed_form_moment, moment_comparison, MomentReport, SdeOptions};
use layered::medium::{realization, GridOptions, MediumParams, SpectralGrid};
use layered::modes::{covariance_of, ensemble, Channel, ComplexEstimate, ModesOptions};
use layered::stats::{hurst_estimate, hurst_index, travel_time_ladder, DelayStudy, ScalingStudy, StatsOptions};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{RunConfig, Tolerances};

/// A file produced by a study.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// One gated quantity: `pass` is `value <= tolerance` unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub study: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Artifacts and checks of one study.
#[derive(Debug, Default)]
pub struct StudyOutput {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
}

impl StudyOutput {
    fn builder(study: &str) -> Builder {
        Builder { study: study.to_owned(), out: Self::default() }
    }
}

struct Builder {
    study: String,
    out: StudyOutput,
}

impl Builder {
    fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        let pass = value <= tolerance;
        self.push(name, value, tolerance, pass);
    }

    /// Record a property that holds or not; the value is 1 or 0.
    fn holds(&mut self, name: &str, ok: bool) {
        self.push(name, if ok { 1.0 } else { 0.0 }, 1.0, ok);
    }

    fn push(&mut self, name: &str, value: f64, tolerance: f64, pass: bool) {
        self.out.checks.push(Check { study: self.study.clone(), name: name.to_owned(), value, tolerance, pass });
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> anyhow::Result<()> {
        let text_rows = rows.into_iter().map(|row| row.iter().map(f64::to_string).collect());
        self.csv_text(name, header, text_rows)
    }

    fn csv_text(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let contents = String::from_utf8(w.into_inner()?)?;
        self.out.artifacts.push(Artifact { name: name.to_owned(), contents });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let contents = serde_json::to_string_pretty(value)? + "\n";
        self.out.artifacts.push(Artifact { name: name.to_owned(), contents });
        Ok(())
    }

    fn finish(self) -> StudyOutput {
        self.out
    }
}

/// Configuration and scaled tolerances shared by the studies.
pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub tol: Tolerances,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig, tol_scale: f64) -> Self {
        Self { config, tol: config.numerics.tolerances.scaled(tol_scale) }
    }

    fn params(&self) -> &MediumParams {
        &self.config.medium
    }

    fn seed(&self, family: u64) -> u64 {
        self.config.master_seed.wrapping_add(family << 40)
    }

    fn stats_options(&self) -> StatsOptions {
        StatsOptions { grid: GridOptions::with_modes(self.config.numerics.stats_modes), ..StatsOptions::default() }
    }

    fn modes_options(&self) -> ModesOptions {
        ModesOptions { grid: GridOptions::with_modes(self.config.numerics.mc_modes), ..ModesOptions::default() }
    }
}

/// Realizations of the fluctuation field and its correlation function.
pub fn medium(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let n = &ctx.config.numerics;
    let params = ctx.params();
    let opts = GridOptions::with_modes(n.stats_modes);
    let mut out = StudyOutput::builder("medium");
    let mut rows = Vec::new();
    let mut sup = 0.0f64;
    for k in 0..n.traces {
        let trace = realization(params, opts, n.eps, n.trace_length, n.trace_step, ctx.seed(0).wrapping_add(k as u64))?;
        for s in trace {
            sup = sup.max(s.nu.abs());
            rows.push(vec![k as f64, s.z, s.v, s.nu]);
        }
    }
    let first = rows.iter().take_while(|r| r[0] == 0.0).map(|r| r[1..].to_vec()).collect::<Vec<_>>();
    out.csv("medium.csv", &["z", "V", "nu"], first)?;
    out.csv("medium_traces.csv", &["trace", "z", "V", "nu"], rows)?;

    let grid = SpectralGrid::build(params, opts)?;
    let tail = correlation::tail_constants(params);
    let lags: Vec<f64> = (0..=60).map(|i| 10f64.powf(-2.0 + 0.1 * i as f64)).collect();
    let mut rows = Vec::new();
    for &z in &lags {
        rows.push(vec![z, autocorrelation(params, z)?, grid.autocorrelation(z), tail.r0 * z.powf(-tail.gamma)]);
    }
    out.csv("correlation.csv", &["z", "R", "R_grid", "tail"], rows)?;

    out.at_most("sup |nu|", sup, params.theta.sup());
    let r_zero = autocorrelation(params, 0.0)?;
    out.at_most("grid variance relative error", (grid.variance() / r_zero - 1.0).abs(), 1e-9);
    Ok(out.finish())
}

/// Table of `Γ_c`, `Γ_s` and their fractional limits.
pub fn coefficients(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let params = ctx.params();
    let mut out = StudyOutput::builder("coefficients");
    let regime = Regime::of(params.gamma()).to_string();
    let mut rows = Vec::new();
    let mut positive = true;
    for &w in &ctx.config.numerics.table_omegas {
        let c = scattering_coefficients(params, w)?;
        let lim = limit_coefficients(params, w)?;
        positive &= c.gamma_c > 0.0;
        let mut row: Vec<String> =
            [w, c.gamma_c, c.gamma_s, lim.gamma_c, lim.gamma_s].iter().map(f64::to_string).collect();
        row.push(regime.clone());
        rows.push(row);
    }
    let header = ["omega", "gamma_c", "gamma_s", "gamma_c_limit", "gamma_s_limit", "regime"];
    out.csv_text("coefficients.csv", &header, rows)?;
    out.holds("attenuation is positive", positive);
    Ok(out.finish())
}

/// Convergence of the rescaled coefficients to their fractional limit.
pub fn limit_check(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let params = ctx.params();
    let n = &ctx.config.numerics;
    let w = n.omegas[0];
    let lim = limit_coefficients(params, w)?;
    let mut out = StudyOutput::builder("limit-check");
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for &l0 in &n.l0_ladder {
        let s = scaled_coefficients(params, w, l0)?;
        let err_c = (s.gamma_c / lim.gamma_c - 1.0).abs();
        // Γ_s has no limit to divide by at the critical exponent.
        let err_s = if lim.gamma_s != 0.0 {
            (s.gamma_s / lim.gamma_s - 1.0).abs()
        } else {
            (s.gamma_s - lim.gamma_s).abs() / lim.complex().norm()
        };
        rows.push(vec![l0, s.gamma_c, s.gamma_s, err_c, err_s]);
        errs.push((err_c, err_s));
    }
    out.csv("limit_check.csv", &["l0", "gamma_c", "gamma_s", "rel_err_c", "rel_err_s"], rows)?;
    out.holds("errors decrease along the l0 ladder", errs.windows(2).all(|p| p[1].0 < p[0].0 && p[1].1 < p[0].1));
    let last = errs.last().copied().unwrap_or((f64::NAN, f64::NAN));
    out.at_most("gamma_c relative error at smallest l0", last.0, ctx.tol.limit_rel);
    out.at_most("gamma_s relative error at smallest l0", last.1, ctx.tol.limit_rel);
    Ok(out.finish())
}

/// Transmitted fronts: homogeneous, finite correlation and fractional limit.
pub fn pulse(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let n = &ctx.config.numerics;
    let s = n.s_grid();
    let opts = PulseOptions::default();
    let base = ctx.params();
    let front = |p: &MediumParams, mode| pulse_front(&GaussianSource, p, n.pulse_l, mode, &s, &n.y_grid, opts);
    let homogeneous = front(base, PulseMode::Homogeneous)?;
    let mut out = StudyOutput::builder("pulse");
    let mut residue = homogeneous.imag_residue;
    let mut axis_peaks = Vec::new();
    for (k, &beta) in n.pulse_betas.iter().enumerate() {
        let p = MediumParams { beta, ..*base };
        let finite = front(&p, PulseMode::Finite)?;
        let limit = front(&p, PulseMode::Limit)?;
        residue = residue.max(finite.imag_residue).max(limit.imag_residue);
        axis_peaks.push((beta, finite.peak(0)));
        out.holds(
            &format!("beta = {beta:.4}: attenuated peak below homogeneous"),
            finite.peak(0) < homogeneous.peak(0),
        );
        let mut rows = Vec::new();
        for (iy, &y) in n.y_grid.iter().enumerate() {
            for (is, &t) in s.iter().enumerate() {
                rows.push(vec![t, y, homogeneous.values[iy][is], finite.values[iy][is], limit.values[iy][is]]);
            }
        }
        // The first beta keeps the plain name; the others carry their index.
        let name = if k == 0 { "pulse.csv".to_owned() } else { format!("pulse_{k}.csv") };
        out.csv(&name, &["s", "y1", "p_hom", "p_medium", "p_limit"], rows)?;
    }
    out.at_most("imaginary residue of the synthesis", residue, 1e-10);
    if let [(b1, p1), (b2, p2), ..] = axis_peaks[..] {
        // The larger Γ_c at the spectral centroid should give the lower peak.
        let centroid = spectral_centroid(&GaussianSource)?;
        let g1 = scattering_coefficients(&MediumParams { beta: b1, ..*base }, centroid)?.gamma_c;
        let g2 = scattering_coefficients(&MediumParams { beta: b2, ..*base }, centroid)?.gamma_c;
        out.holds("peak ordering follows gamma_c at the spectral centroid", (p2 - p1).signum() == (g1 - g2).signum());
    }
    Ok(out.finish())
}

#[derive(Serialize)]
struct Estimate {
    mean_re: f64,
    mean_im: f64,
    stderr_re: f64,
    stderr_im: f64,
    z_re: f64,
    z_im: f64,
}

impl Estimate {
    fn new(e: &ComplexEstimate, target: Complex64) -> Self {
        let (z_re, z_im) = e.z_scores(target);
        Self { mean_re: e.mean.re, mean_im: e.mean.im, stderr_re: e.stderr_re, stderr_im: e.stderr_im, z_re, z_im }
    }

    fn worst_z(&self) -> f64 {
        self.z_re.abs().max(self.z_im.abs())
    }
}

#[derive(Serialize)]
struct McReport {
    mean_re: f64,
    mean_im: f64,
    stderr: f64,
    closed_form_re: Option<f64>,
    closed_form_im: Option<f64>,
    /// Largest componentwise |z| of the transmission mean against the closed form.
    z_score: Option<f64>,
    eps: f64,
    l: f64,
    n_real: usize,
    omegas: Vec<f64>,
    kappas: Vec<f64>,
    transmission: Estimate,
    backscatter: Estimate,
    covariance: Option<Estimate>,
    max_defect: f64,
}

/// Coupled-mode Monte Carlo at one `eps`. Returns the transmission estimate
/// of the first channel as well, for comparison with the limiting system.
pub fn mc(ctx: &Context) -> anyhow::Result<(StudyOutput, ComplexEstimate)> {
    let n = &ctx.config.numerics;
    let params = ctx.params();
    let channels: Vec<Channel> = n
        .omegas
        .iter()
        .zip(&n.kappas)
        .map(|(&w, &k)| Channel::new(w, k, n.eps, params.c0))
        .collect::<Result<_, _>>()?;
    let runs = ensemble(params, n.eps, &channels, n.l, n.n_real, ctx.seed(1), ctx.modes_options())?;
    let xs: Vec<Complex64> = runs.iter().map(|r| 1.0 / r.a[0].conj()).collect();
    let transmission = ComplexEstimate::from_samples(&xs);
    let back: Vec<Complex64> = runs.iter().map(|r| r.b[0] / r.a[0].conj()).collect();
    let backscatter = ComplexEstimate::from_samples(&back);
    // The closed form describes normal incidence.
    let closed = if n.kappas[0] == 0.0 { Some(closed_form_moment(params, n.omegas[0], n.l)?) } else { None };
    let covariance = (channels.len() >= 2).then(|| {
        let c = covariance_of(&runs);
        let est = ComplexEstimate { mean: c.covariance, stderr_re: c.stderr_re, stderr_im: c.stderr_im, n: runs.len() };
        Estimate::new(&est, Complex64::new(0.0, 0.0))
    });
    let transmission_est = Estimate::new(&transmission, closed.unwrap_or(Complex64::new(f64::NAN, f64::NAN)));
    let report = McReport {
        mean_re: transmission.mean.re,
        mean_im: transmission.mean.im,
        stderr: transmission.stderr(),
        closed_form_re: closed.map(|c| c.re),
        closed_form_im: closed.map(|c| c.im),
        z_score: closed.map(|_| transmission_est.worst_z()),
        eps: n.eps,
        l: n.l,
        n_real: n.n_real,
        omegas: n.omegas.clone(),
        kappas: n.kappas.clone(),
        transmission: transmission_est,
        backscatter: Estimate::new(&backscatter, Complex64::new(0.0, 0.0)),
        covariance,
        max_defect: runs.iter().map(|r| r.max_defect).fold(0.0, f64::max),
    };
    let mut out = StudyOutput::builder("mc");
    if let Some(z) = report.z_score {
        out.at_most("transmission |z|", z, ctx.tol.z_score);
    }
    out.at_most("backscatter |z|", report.backscatter.worst_z(), ctx.tol.z_score);
    if let Some(c) = &report.covariance {
        out.at_most("cross-frequency covariance |z|", c.worst_z(), ctx.tol.z_score);
    }
    out.at_most("conservation defect", report.max_defect, ctx.tol.ode_defect);
    out.json("mc.json", &report)?;
    if let Some(closed) = closed {
        transmission_trend(ctx, &mut out, closed)?;
    }
    Ok((out.finish(), transmission))
}

/// Distance of the transmission moment to its closed form along the `eps`
/// ladder, on the first channel alone.
fn transmission_trend(ctx: &Context, out: &mut Builder, closed: Complex64) -> anyhow::Result<()> {
    let n = &ctx.config.numerics;
    let params = ctx.params();
    let mut rows = Vec::new();
    for (k, &eps) in n.eps_ladder.iter().enumerate() {
        let channel = [Channel::new(n.omegas[0], n.kappas[0], eps, params.c0)?];
        let seed = ctx.seed(5).wrapping_add((k as u64) << 32);
        let runs = ensemble(params, eps, &channel, n.l, n.n_real, seed, ctx.modes_options())?;
        let xs: Vec<Complex64> = runs.iter().map(|r| 1.0 / r.a[0].conj()).collect();
        let e = ComplexEstimate::from_samples(&xs);
        rows.push(vec![eps, e.mean.re, e.mean.im, (e.mean - closed).norm(), e.stderr()]);
    }
    // Sampling noise may hide a small decrease, so a rise is tolerated up to
    // twice the combined standard error.
    let trend = rows.windows(2).all(|p| p[1][3] <= p[0][3] + 2.0 * p[0][4].hypot(p[1][4]));
    out.holds("transmission error shrinks with eps", trend);
    out.csv("mc_ladder.csv", &["eps", "mean_re", "mean_im", "error", "stderr"], rows)
}

/// Limiting SDE against the closed form, and against coupled modes when given.
pub fn sde(ctx: &Context, modes: Option<&ComplexEstimate>) -> anyhow::Result<StudyOutput> {
    let n = &ctx.config.numerics;
    let opts = SdeOptions { dz: n.sde_dz, ..SdeOptions::default() };
    let report: MomentReport =
        moment_comparison(ctx.params(), n.omegas[0], n.l, n.sde_paths, ctx.seed(2), modes, opts)?;
    let mut out = StudyOutput::builder("sde");
    out.at_most(
        "SDE mean |z| against the closed form",
        report.sde.z_re.abs().max(report.sde.z_im.abs()),
        ctx.tol.z_score,
    );
    if let Some((a, b)) = report.sde_vs_modes {
        out.at_most("SDE against coupled modes |z|", a.abs().max(b.abs()), ctx.tol.z_score);
    }
    out.at_most("SDE conservation defect", report.sde_max_defect, ctx.tol.sde_defect);
    out.json("sde.json", &report)?;
    Ok(out.finish())
}

#[derive(Serialize)]
struct TravelTimeReport {
    scaling: ScalingStudy,
    delay: DelayStudy,
    hurst: layered::stats::HurstEstimate,
    hurst_expected: f64,
}

/// Travel-time variance ladder, Hurst index and arrival delay.
pub fn travel_time(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let n = &ctx.config.numerics;
    let params = ctx.params();
    let opts = ctx.stats_options();
    let rungs = travel_time_ladder(params, n.travel_l, &n.travel_ladder, n.travel_n, ctx.seed(3), opts)?;
    let scaling = ScalingStudy::from_samples(params, n.travel_l, &rungs)?;
    let delay = DelayStudy::from_samples(params, n.travel_l, &rungs)?;
    let hurst = hurst_estimate(params, n.hurst_eps, n.l, n.hurst_grid, n.hurst_paths, ctx.seed(4), opts)?;
    let expected_h = expected_hurst(params.gamma(), n.hurst_eps, n.l / n.hurst_grid as f64, &hurst.blocks);
    let ci = 1.96 * hurst.stderr;
    let rows = scaling
        .points
        .iter()
        .zip(&delay.points)
        .map(|(s, d)| vec![s.eps, s.var_t0, scaling.fit.slope, hurst.h, ci, d.mean, delay.theory]);
    let mut out = StudyOutput::builder("travel-time");
    out.csv("travel_time.csv", &["eps", "var", "slope_fit", "H", "H_ci", "delay_mean", "delay_theory"], rows)?;
    out.at_most("variance log-slope error", (scaling.fit.slope - scaling.expected_slope).abs(), ctx.tol.slope);
    out.at_most("Hurst index error", (hurst.h - expected_h).abs(), ctx.tol.hurst);
    let finest = scaling.points.last().context("empty travel-time ladder")?;
    // Logarithmic corrections make the critical constant useless at desk scale.
    if Regime::of(params.gamma()) != Regime::Critical {
        let rel = (finest.normalized / scaling.variance_constant - 1.0).abs();
        out.at_most("normalized variance relative error", rel, ctx.tol.variance_constant);
    }
    let last = delay.points.last().context("empty travel-time ladder")?;
    out.at_most("rescaled delay relative error", (last.mean / delay.theory - 1.0).abs(), ctx.tol.delay);
    out.holds("every delay is positive", delay.points.iter().all(|p| p.positive_fraction == 1.0));
    out.json("travel_time.json", &TravelTimeReport { scaling, delay, hurst, hurst_expected: expected_h })?;
    Ok(out.finish())
}

/// Hurst index the block fit should return. At `gamma = 1` the increment
/// variance grows like `z ln(z / eps)`, so the fit over the blocks sees the
/// local exponent of that curve rather than its limit 1/2.
fn expected_hurst(gamma: f64, eps: f64, step: f64, blocks: &[usize]) -> f64 {
    if Regime::of(gamma) != Regime::Critical {
        return hurst_index(gamma);
    }
    let x: Vec<f64> = blocks.iter().map(|&m| (m as f64 * step).ln()).collect();
    let y: Vec<f64> = x.iter().map(|&lz| lz + (lz - eps.ln()).ln()).collect();
    layered::stats::fit_line(&x, &y, &vec![1.0; x.len()]).slope / 2.0
}

/// Kramers-Kronig pairing of attenuation and dispersion.
pub fn kk(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let band = ctx.config.numerics.kk_band;
    let report = kk_residual(ctx.params(), (band[0], band[1]), KkOptions::default())?;
    let mut out = StudyOutput::builder("kk");
    let header = ["omega", "lhs", "rhs", "residual"];
    out.csv("kk.csv", &header, report.rows.iter().map(|r| vec![r.omega, r.lhs_s, r.rhs_s, r.lhs_s - r.rhs_s]))?;
    out.csv("kk_inverse.csv", &header, report.rows.iter().map(|r| vec![r.omega, r.lhs_c, r.rhs_c, r.lhs_c - r.rhs_c]))?;
    out.at_most("dispersion from attenuation", report.residual_s, ctx.tol.kk);
    out.at_most("attenuation from dispersion", report.residual_c, ctx.tol.kk);

    // The same transform applied to a Lorentzian with a known causal pair.
    let opts = KkOptions { half_width: 4096.0, ..KkOptions::default() };
    let m = 2 * (opts.half_width * opts.density) as usize + 1;
    let w: Vec<f64> = (0..m).map(|i| (i as f64 - (m / 2) as f64) / opts.density).collect();
    let re: Vec<f64> = w.iter().map(|w| 1.0 / (1.0 + w * w)).collect();
    let im: Vec<f64> = w.iter().map(|w| w / (1.0 + w * w)).collect();
    let (r1, r2, _, _) = hilbert_residuals(&w, &re, &im, (band[0], band[1]), &opts);
    out.at_most("Lorentzian calibration", r1.max(r2), ctx.tol.kk_calibration);
    Ok(out.finish())
}

/// Weyl derivative checks and the memory operator's fractional limit.
pub fn weyl(ctx: &Context) -> anyhow::Result<StudyOutput> {
    let params = ctx.params();
    let gamma = params.gamma();
    let order = if gamma < 1.0 { gamma } else { ctx.config.numerics.weyl_gamma };
    let mut out = StudyOutput::builder("weyl");

    let f = SampledSignal::from_fn(-40.0, 0.01, 4500, true, f64::exp)?;
    let d = weyl_derivative(&f, order, 0)?;
    let inside: Vec<usize> = (0..f.len()).filter(|&i| (-5.0..=4.0).contains(&f.s(i))).collect();
    let eigen = relative_l2(&d.values, &f.values, inside[0]..inside[inside.len() - 1] + 1);
    out.at_most("exponential eigenfunction relative error", eigen, ctx.tol.weyl);

    let psi = SampledSignal::from_fn(-10.0, 0.01, 3000, true, |s| (-s * s / 2.0).exp())?;
    let limit = apply_limit_operator(&psi, params)?;
    out.csv(
        "weyl.csv",
        &["s", "input", "output"],
        psi.grid().into_iter().zip(&psi.values).zip(&limit.values).map(|((s, i), o)| vec![s, *i, *o]),
    )?;
    let mut distances = Vec::new();
    for &l0 in &ctx.config.numerics.l0_ladder {
        let m = apply_scaled_memory_operator(&psi, params, l0)?;
        distances.push(vec![l0, relative_l2(&m.values, &limit.values, 0..psi.len())]);
    }
    out.holds(
        "memory operator approaches its limit along the l0 ladder",
        distances.windows(2).all(|w| w[1][1] < w[0][1]),
    );
    out.csv("weyl_ladder.csv", &["l0", "distance"], distances)?;
    Ok(out.finish())
}
