use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mlgame::config::ExperimentConfig;
use mlgame::experiment::{self, ONSET_TOLERANCE};
use mlgame::output::{self, fmt, PhasePair};
use mlgame::stability::StabilityResult;
use mlgame::{Error, Result};

/// Learning automata in two-level games under delayed information.
#[derive(Parser)]
#[command(name = "mlgame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (defaults to the config's `output`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pair {
    Actions,
    Groups,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the delayed mean dynamics; writes a trajectory CSV.
    Simulate(Common),
    /// Run the stochastic process over an ensemble; writes mean and variance.
    MonteCarlo(Common),
    /// Find the undelayed equilibrium reached from `initial`.
    Equilibrium(Common),
    /// Predict the delay at which the equilibrium loses stability.
    Predict(Common),
    /// Measure the onset delay by bisection on the mean dynamics.
    Onset {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "tau_hi")]
        tau_lo: Option<f64>,
        #[arg(long, requires = "tau_lo")]
        tau_hi: Option<f64>,
        #[arg(long, default_value_t = ONSET_TOLERANCE)]
        tolerance: f64,
    },
    /// Predicted delays for the reference parameter sets.
    Table1 {
        #[command(flatten)]
        common: Common,
        /// Comma-separated 1-based row numbers; an empty list selects none.
        #[arg(long)]
        rows: Option<String>,
        /// Also bisect the mean dynamics for each row.
        #[arg(long)]
        observed: bool,
    },
    /// Phase-portrait data for a pair of components.
    Phase {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "actions")]
        pair: Pair,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(&common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_output(common: &Common, cfg: Option<&ExperimentConfig>) -> Result<Box<dyn Write>> {
    let path = common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()));
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_rows(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("invalid row number {s:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load_config(&common)?;
            let traj = experiment::simulate(&cfg)?;
            let mut out = open_output(&common, Some(&cfg))?;
            output::write_trajectory(&mut out, &cfg, &traj)?;
            out.flush()?;
        }
        Command::MonteCarlo(common) => {
            let cfg = load_config(&common)?;
            let summary = experiment::monte_carlo(&cfg)?;
            let mut out = open_output(&common, Some(&cfg))?;
            output::write_ensemble(&mut out, &cfg, &summary)?;
            out.flush()?;
        }
        Command::Equilibrium(common) => {
            let cfg = load_config(&common)?;
            let eq = experiment::equilibrium(&cfg)?;
            let mut out = open_output(&common, Some(&cfg))?;
            let p = eq.state.as_array().map(fmt);
            writeln!(out, "p_star = {}", p.join(","))?;
            writeln!(out, "c_star = {}", fmt(eq.clustering))?;
            writeln!(out, "residual = {:e}", eq.residual)?;
            out.flush()?;
        }
        Command::Predict(common) => {
            let cfg = load_config(&common)?;
            let pred = experiment::predict_delay(&cfg)?;
            let mut out = open_output(&common, Some(&cfg))?;
            writeln!(out, "c_star = {}", fmt(pred.equilibrium.clustering))?;
            match pred.result {
                StabilityResult::Unstable { w, chi, tau2 } => {
                    writeln!(out, "frequency = {}", fmt(w))?;
                    writeln!(out, "chi = {}", fmt(chi))?;
                    writeln!(out, "tau_p = {}", fmt(tau2))?;
                }
                StabilityResult::StableForAllDelays => writeln!(out, "tau_p = inf")?,
            }
            out.flush()?;
        }
        Command::Onset {
            common,
            tau_lo,
            tau_hi,
            tolerance,
        } => {
            let cfg = load_config(&common)?;
            let range = tau_lo.zip(tau_hi);
            let est = experiment::onset(&cfg, range, tolerance)?;
            let mut out = open_output(&common, Some(&cfg))?;
            writeln!(out, "tau_o = {}", fmt(est.tau))?;
            writeln!(out, "stable_below = {}", fmt(est.stable_below))?;
            writeln!(out, "unstable_above = {}", fmt(est.unstable_above))?;
            for (tau, kind) in &est.probes {
                writeln!(out, "# probe {} {}", fmt(*tau), kind.name())?;
            }
            out.flush()?;
        }
        Command::Table1 {
            common,
            rows,
            observed,
        } => {
            let selected = rows.as_deref().map(parse_rows).transpose()?;
            let table = experiment::reference_table(selected.as_deref(), observed)?;
            let mut out = open_output(&common, None)?;
            output::write_table(&mut out, &table, observed)?;
            out.flush()?;
        }
        Command::Phase { common, pair } => {
            let cfg = load_config(&common)?;
            let traj = experiment::phase(&cfg)?;
            let pair = match pair {
                Pair::Actions => PhasePair::Actions,
                Pair::Groups => PhasePair::Groups,
            };
            let mut out = open_output(&common, Some(&cfg))?;
            output::write_phase(&mut out, &cfg, &traj, pair)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlgame: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
