//! Run configuration: built-in scenarios, file round-trips and validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use layered::medium::MediumParams;
use layered::modes::Channel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Named presets taken from the figures and the three correlation regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Long-range traces, `gamma = 1/2`.
    Fig2Left,
    /// Short-range traces, `gamma = 3/2`.
    Fig2Right,
    /// Transmitted fronts for `beta = 1/2` and `beta = 1/6` with `mu = 2`, `L = 5`.
    Fig3,
    GammaHalf,
    GammaCritical,
    GammaShort,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Self::Fig2Left, Self::Fig2Right, Self::Fig3, Self::GammaHalf, Self::GammaCritical, Self::GammaShort];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2Left => "fig2-left",
            Self::Fig2Right => "fig2-right",
            Self::Fig3 => "fig3",
            Self::GammaHalf => "gamma-half",
            Self::GammaCritical => "gamma-critical",
            Self::GammaShort => "gamma-short",
        }
    }

    pub fn medium(self) -> MediumParams {
        match self {
            Self::Fig2Left | Self::GammaHalf => MediumParams::gamma_half(),
            Self::Fig2Right | Self::GammaShort => MediumParams::gamma_three_halves(),
            Self::Fig3 => MediumParams::figure_pulse(0.5),
            Self::GammaCritical => MediumParams::gamma_critical(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Self::ALL.into_iter().find(|sc| sc.name() == s).with_context(|| format!("unknown scenario `{s}`"))
    }
}

/// Tolerances gating the exit status. Every entry is multiplied by the
/// `--tol-scale` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest admissible |z-score| of a Monte Carlo mean.
    pub z_score: f64,
    /// Relative gap to the fractional coefficients at the smallest `l0`.
    pub limit_rel: f64,
    pub ode_defect: f64,
    pub sde_defect: f64,
    /// Absolute tolerance on the variance log-slope.
    pub slope: f64,
    pub hurst: f64,
    /// Relative tolerance on the normalized variance constant.
    pub variance_constant: f64,
    /// Relative tolerance on the rescaled delay.
    pub delay: f64,
    /// Band-relative Kramers-Kronig residual.
    pub kk: f64,
    /// Hilbert transform of a Lorentzian against its exact pair.
    pub kk_calibration: f64,
    /// Relative error of the Weyl eigenfunction test.
    pub weyl: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z_score: 3.0,
            limit_rel: 0.02,
            ode_defect: 1e-8,
            sde_defect: 1e-6,
            slope: 0.1,
            hurst: 0.05,
            variance_constant: 0.1,
            delay: 0.05,
            kk: 0.05,
            kk_calibration: 1e-3,
            weyl: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, f: f64) -> Self {
        Self {
            z_score: self.z_score * f,
            limit_rel: self.limit_rel * f,
            ode_defect: self.ode_defect * f,
            sde_defect: self.sde_defect * f,
            slope: self.slope * f,
            hurst: self.hurst * f,
            variance_constant: self.variance_constant * f,
            delay: self.delay * f,
            kk: self.kk * f,
            kk_calibration: self.kk_calibration * f,
            weyl: self.weyl * f,
        }
    }
}

/// Numerical settings of every study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Relative strength `eps` of the Monte Carlo studies.
    pub eps: f64,
    /// Ladder of `eps` for the transmission trend.
    pub eps_ladder: Vec<f64>,
    /// Ladder of `l0` for the fractional limits.
    pub l0_ladder: Vec<f64>,
    /// Slab length of the Monte Carlo studies.
    pub l: f64,
    /// Frequencies of the coupled-mode channels; the first carries the
    /// transmission moment, the second the cross-frequency covariance.
    pub omegas: Vec<f64>,
    /// Transverse wavenumbers paired with `omegas`.
    pub kappas: Vec<f64>,
    pub n_real: usize,
    /// Spectral cells of the media in coupled-mode runs, and in traces and
    /// travel-time runs.
    pub mc_modes: usize,
    pub stats_modes: usize,
    pub sde_paths: usize,
    pub sde_dz: f64,
    /// Frequencies of the coefficient table.
    pub table_omegas: Vec<f64>,
    /// Trace length and step of `medium`, and the number of traces.
    pub trace_length: f64,
    pub trace_step: f64,
    pub traces: usize,
    /// Slab length and `beta` values of the transmitted fronts.
    pub pulse_l: f64,
    pub pulse_betas: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
    pub ds: f64,
    pub y_grid: Vec<f64>,
    /// Travel-time ladder, slab length and ensemble size.
    pub travel_ladder: Vec<f64>,
    pub travel_l: f64,
    pub travel_n: usize,
    pub hurst_eps: f64,
    pub hurst_grid: usize,
    pub hurst_paths: usize,
    /// Frequency band of the Kramers-Kronig check.
    pub kk_band: [f64; 2],
    /// Fractional order tested by `weyl` when the medium has none.
    pub weyl_gamma: f64,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            eps: 5e-3,
            eps_ladder: vec![2e-2, 1e-2, 5e-3],
            l0_ladder: vec![1e-1, 1e-2, 1e-3],
            l: 1.0,
            omegas: vec![1.0, 2.0],
            kappas: vec![0.0, 0.0],
            n_real: 400,
            mc_modes: 512,
            stats_modes: 64,
            sde_paths: 10_000,
            sde_dz: 1e-4,
            table_omegas: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            trace_length: 50.0,
            trace_step: 0.05,
            traces: 3,
            pulse_l: 5.0,
            pulse_betas: vec![0.5],
            s_min: -10.0,
            s_max: 10.0,
            ds: 0.05,
            y_grid: vec![0.0, 0.5, 1.0, 2.0],
            travel_ladder: vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            travel_l: 1.0,
            travel_n: 2000,
            hurst_eps: 1e-4,
            hurst_grid: 64,
            hurst_paths: 400,
            kk_band: [0.25, 8.0],
            weyl_gamma: 0.5,
            tolerances: Tolerances::default(),
        }
    }
}

impl Numerics {
    /// The pulse time grid `s_min, s_min + ds, ..., s_max`.
    pub fn s_grid(&self) -> Vec<f64> {
        let n = ((self.s_max - self.s_min) / self.ds).round() as usize;
        (0..=n).map(|i| self.s_min + i as f64 * self.ds).collect()
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub medium: MediumParams,
    pub numerics: Numerics,
}

impl RunConfig {
    pub fn scenario(scenario: Scenario) -> Self {
        let mut numerics = Numerics::default();
        match scenario {
            Scenario::Fig3 => {
                numerics.pulse_betas = vec![0.5, 1.0 / 6.0];
                // The delay is studied on the figure's slab.
                numerics.travel_l = 5.0;
                numerics.travel_ladder = vec![4e-3, 2e-3, 1e-3];
                numerics.travel_n = 1000;
            }
            Scenario::Fig2Right | Scenario::GammaShort => {
                numerics.pulse_betas = vec![1.0 / 6.0];
                // The rescaled coefficients approach their limit like l0^(gamma - 1).
                numerics.l0_ladder = vec![1e-2, 1e-3, 1e-4];
            }
            Scenario::GammaCritical => {
                numerics.pulse_betas = vec![0.25];
                // Convergence is logarithmic here; even 1e-8 leaves a few percent.
                numerics.l0_ladder = vec![1e-2, 1e-4, 1e-8];
            }
            _ => {}
        }
        Self { scenario, master_seed: 20_261_015, output_dir: None, medium: scenario.medium(), numerics }
    }

    /// Parse TOML, or JSON when the path ends in `.json`.
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configs always serialize");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every violated hypothesis, one line each; empty when the config is usable.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.medium.validate() {
            out.push(format!("medium: {e}"));
        }
        let n = &self.numerics;
        let positive = [
            ("eps", n.eps),
            ("l", n.l),
            ("sde_dz", n.sde_dz),
            ("trace_length", n.trace_length),
            ("trace_step", n.trace_step),
            ("pulse_l", n.pulse_l),
            ("ds", n.ds),
            ("travel_l", n.travel_l),
            ("hurst_eps", n.hurst_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("numerics.{name} = {v} must be positive"));
            }
        }
        let lists: [(&str, &[f64]); 7] = [
            ("eps_ladder", &n.eps_ladder),
            ("l0_ladder", &n.l0_ladder),
            ("omegas", &n.omegas),
            ("table_omegas", &n.table_omegas),
            ("pulse_betas", &n.pulse_betas),
            ("y_grid", &n.y_grid),
            ("travel_ladder", &n.travel_ladder),
        ];
        for (name, v) in lists {
            if v.is_empty() {
                out.push(format!("numerics.{name} is empty"));
            }
        }
        for (name, v) in
            [("eps_ladder", &n.eps_ladder), ("l0_ladder", &n.l0_ladder), ("travel_ladder", &n.travel_ladder)]
        {
            if v.iter().any(|x| !(*x > 0.0)) {
                out.push(format!("numerics.{name} must hold positive values"));
            }
        }
        if n.l0_ladder.iter().any(|&l0| l0 >= 1.0) {
            out.push("numerics.l0_ladder values must lie below 1".into());
        }
        if n.travel_ladder.len() < 3 {
            out.push("numerics.travel_ladder needs at least 3 values".into());
        }
        if !(n.s_max > n.s_min) {
            out.push(format!("numerics.s_min = {} must be below s_max = {}", n.s_min, n.s_max));
        }
        if n.omegas.iter().any(|w| !(*w > 0.0)) {
            out.push("numerics.omegas must be positive".into());
        }
        if n.kappas.len() != n.omegas.len() {
            out.push(format!("numerics.kappas has {} entries for {} omegas", n.kappas.len(), n.omegas.len()));
        }
        let counts = [
            ("n_real", n.n_real, 2),
            ("mc_modes", n.mc_modes, 2),
            ("stats_modes", n.stats_modes, 2),
            ("sde_paths", n.sde_paths, 100),
            ("traces", n.traces, 1),
            ("travel_n", n.travel_n, 2),
            ("hurst_grid", n.hurst_grid, 16),
            ("hurst_paths", n.hurst_paths, 20),
        ];
        for (name, v, min) in counts {
            if v < min {
                out.push(format!("numerics.{name} = {v} must be at least {min}"));
            }
        }
        if !(n.kk_band[0] > 0.0 && n.kk_band[1] > n.kk_band[0]) {
            out.push(format!("numerics.kk_band {:?} must satisfy 0 < lo < hi", n.kk_band));
        }
        if !(n.weyl_gamma > 0.0 && n.weyl_gamma < 1.0) {
            out.push(format!("numerics.weyl_gamma = {} must lie in (0, 1)", n.weyl_gamma));
        }
        // Every sampled eps must leave each channel propagating.
        let all_eps = std::iter::once(n.eps).chain(n.eps_ladder.iter().copied()).filter(|e| *e > 0.0);
        for eps in all_eps {
            for (&w, &k) in n.omegas.iter().zip(&n.kappas) {
                if let Err(e) = Channel::new(w, k, eps, self.medium.c0) {
                    out.push(format!("channel omega = {w}, kappa = {k} at eps = {eps}: {e}"));
                }
            }
        }
        out
    }

    /// Fail with all diagnostics joined when the config is unusable.
    pub fn validate(&self) -> anyhow::Result<()> {
        let d = self.diagnostics();
        if !d.is_empty() {
            bail!("invalid configuration:\n  {}", d.join("\n  "));
        }
        Ok(())
    }
}
