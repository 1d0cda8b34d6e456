use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layered_cli::config::{RunConfig, Scenario};
use layered_cli::output::{resolve_out_dir, write_run, OUT_DIR_ENV};
use layered_cli::studies::{self, Context, StudyOutput};

/// Wave propagation through randomly layered media with long-range
/// correlations: numerical studies and their tolerance checks.
///
/// Exit status is 0 when every check passes, 1 when a check fails or a
/// computation errors, and 2 for unusable arguments or configuration.
#[derive(Debug, Parser)]
#[command(name = "layered", version)]
struct Cli {
    /// Run configuration in TOML, or JSON for a `.json` path.
    #[arg(long, global = true, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in preset used when no configuration file is given.
    #[arg(long, global = true, default_value_t = Scenario::GammaHalf)]
    scenario: Scenario,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiply every tolerance by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample traces of the fluctuation field and tabulate its correlation.
    Medium,
    /// Tabulate the scattering coefficients and their fractional limits.
    Coefficients,
    /// Follow the rescaled coefficients down the `l0` ladder.
    LimitCheck,
    /// Synthesize transmitted fronts.
    Pulse,
    /// Coupled-mode Monte Carlo of transmission and backscatter.
    Mc {
        #[arg(long)]
        eps: Option<f64>,
        /// Number of realizations.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Limiting SDE against the closed-form moment.
    Sde {
        /// Number of paths.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Travel-time variance scaling, Hurst index and arrival delay.
    TravelTime {
        /// Ensemble size per rung.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Kramers-Kronig pairing of attenuation and dispersion.
    Kk,
    /// Weyl derivative and the fractional memory operator.
    Weyl,
    /// Every study in turn.
    All,
    /// Check a configuration file and list every problem found.
    Validate { path: PathBuf },
    /// Print the effective configuration.
    ShowConfig {
        #[arg(long)]
        json: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Medium => "medium",
            Self::Coefficients => "coefficients",
            Self::LimitCheck => "limit-check",
            Self::Pulse => "pulse",
            Self::Mc { .. } => "mc",
            Self::Sde { .. } => "sde",
            Self::TravelTime { .. } => "travel-time",
            Self::Kk => "kk",
            Self::Weyl => "weyl",
            Self::All => "all",
            Self::Validate { .. } => "validate",
            Self::ShowConfig { .. } => "show-config",
        }
    }
}

/// Failures split by exit status.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::scenario(cli.scenario),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let n = &mut config.numerics;
    match cli.command {
        Command::Mc { eps, n: count } => {
            n.eps = eps.unwrap_or(n.eps);
            n.n_real = count.unwrap_or(n.n_real);
        }
        Command::Sde { n: Some(count) } => n.sde_paths = count,
        Command::TravelTime { n: Some(count) } => n.travel_n = count,
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn run_studies(command: &Command, ctx: &Context) -> anyhow::Result<Vec<StudyOutput>> {
    Ok(match command {
        Command::Medium => vec![studies::medium(ctx)?],
        Command::Coefficients => vec![studies::coefficients(ctx)?],
        Command::LimitCheck => vec![studies::limit_check(ctx)?],
        Command::Pulse => vec![studies::pulse(ctx)?],
        Command::Mc { .. } => vec![studies::mc(ctx)?.0],
        Command::Sde { .. } => vec![studies::sde(ctx, None)?],
        Command::TravelTime { .. } => vec![studies::travel_time(ctx)?],
        Command::Kk => vec![studies::kk(ctx)?],
        Command::Weyl => vec![studies::weyl(ctx)?],
        Command::All => {
            let mut outs = vec![
                studies::medium(ctx)?,
                studies::coefficients(ctx)?,
                studies::limit_check(ctx)?,
                studies::pulse(ctx)?,
            ];
            let (mc, transmission) = studies::mc(ctx)?;
            outs.push(mc);
            // Normal incidence lets the SDE be compared with the modes too.
            let modes = (ctx.config.numerics.kappas[0] == 0.0).then_some(&transmission);
            outs.push(studies::sde(ctx, modes)?);
            outs.push(studies::travel_time(ctx)?);
            outs.push(studies::kk(ctx)?);
            outs.push(studies::weyl(ctx)?);
            outs
        }
        Command::Validate { .. } | Command::ShowConfig { .. } => unreachable!("handled before any study runs"),
    })
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Command::Validate { path } = &cli.command {
        let config = RunConfig::from_path(path).map_err(Failure::Config)?;
        let problems = config.diagnostics();
        if problems.is_empty() {
            println!("{}: valid ({} scenario, hash {})", path.display(), config.scenario, config.hash());
            return Ok(true);
        }
        for p in &problems {
            eprintln!("{}: {p}", path.display());
        }
        return Err(Failure::Config(anyhow::anyhow!("{} problem(s) found", problems.len())));
    }
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(Failure::Config(anyhow::anyhow!("--tol-scale must be positive")));
    }
    let config = effective_config(&cli).map_err(Failure::Config)?;
    if let Command::ShowConfig { json } = cli.command {
        let text = if json { config.to_json() } else { config.to_toml() };
        println!("{}", text.map_err(Failure::Runtime)?.trim_end());
        return Ok(true);
    }
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Failure::Runtime(e.into()))?;
    }
    let ctx = Context::new(&config, cli.tol_scale);
    let outputs = run_studies(&cli.command, &ctx).map_err(Failure::Runtime)?;
    for check in outputs.iter().flat_map(|o| &o.checks) {
        let verdict = if check.pass { "ok  " } else { "FAIL" };
        println!(
            "{verdict} {:<12} {}: {:.4e} (tolerance {:.4e})",
            check.study, check.name, check.value, check.tolerance
        );
    }
    let dir = resolve_out_dir(cli.out.clone(), &config);
    let passed = write_run(&dir, cli.command.name(), &config, cli.tol_scale, &outputs).map_err(Failure::Runtime)?;
    println!("wrote {}", dir.display());
    Ok(passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
