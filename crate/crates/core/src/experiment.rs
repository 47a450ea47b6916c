//! The runner's subcommands as library calls.

use rayon::prelude::*;

use crate::automata::{run_ensemble, EnsembleSummary};
use crate::config::{ExperimentConfig, OnsetStart};
use crate::dynamics::{
    find_equilibrium, integrate, near_equilibrium, observed_instability_delay, Equilibrium,
    LearningModel, OnsetEstimate, OscillationThresholds, Trajectory, ONSET_OFFSET,
};
use crate::error::{Error, Result};
use crate::game::StateVector;
use crate::output::TableRow;
use crate::stability::{predict, Prediction, StabilityResult, REFERENCE_ROWS};

/// Default bisection tolerance for onset searches, in time units.
pub const ONSET_TOLERANCE: f64 = 1.0;

/// Integrates the delayed mean dynamics.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    integrate(&cfg.model()?, cfg.initial, &cfg.integration())
}

pub fn monte_carlo(cfg: &ExperimentConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    run_ensemble(&cfg.simulation()?)
}

pub fn equilibrium(cfg: &ExperimentConfig) -> Result<Equilibrium> {
    cfg.validate()?;
    find_equilibrium(&cfg.model()?, cfg.initial)
}

pub fn predict_delay(cfg: &ExperimentConfig) -> Result<Prediction> {
    cfg.validate()?;
    predict(&cfg.model()?, cfg.initial)
}

fn probe_start(model: &LearningModel, cfg: &ExperimentConfig) -> Result<StateVector> {
    match cfg.onset_start {
        OnsetStart::Initial => Ok(cfg.initial),
        OnsetStart::Equilibrium => near_equilibrium(model, cfg.initial, cfg.onset_offset),
    }
}

/// Bisects for the delay at which the mean dynamics start oscillating. Without
/// an explicit range the search brackets the analytic prediction by a factor
/// of 1.5 either way.
pub fn onset(cfg: &ExperimentConfig, range: Option<(f64, f64)>, tolerance: f64) -> Result<OnsetEstimate> {
    cfg.validate()?;
    let model = cfg.model()?;
    let range = match range {
        Some(r) => r,
        None => match predict(&model, cfg.initial)?.result {
            StabilityResult::Unstable { tau2, .. } => (tau2 / 1.5, tau2 * 1.5),
            StabilityResult::StableForAllDelays => {
                return Err(Error::Bracket(
                    "equilibrium is stable for all delays; give an explicit range".into(),
                ))
            }
        },
    };
    let start = probe_start(&model, cfg)?;
    observed_instability_delay(&model, start, range, tolerance, &cfg.thresholds)
}

/// Phase-portrait data: the same integration as [`simulate`].
pub fn phase(cfg: &ExperimentConfig) -> Result<Trajectory> {
    simulate(cfg)
}

/// Predictions for the reference rows selected by 1-based index (all rows
/// when `rows` is `None`). With `observed`, each row is also bisected on the
/// mean dynamics; rows run concurrently.
pub fn reference_table(rows: Option<&[usize]>, observed: bool) -> Result<Vec<TableRow>> {
    let selected: Vec<usize> = match rows {
        None => (0..REFERENCE_ROWS.len()).collect(),
        Some(ids) => ids
            .iter()
            .map(|&i| {
                if (1..=REFERENCE_ROWS.len()).contains(&i) {
                    Ok(i - 1)
                } else {
                    Err(Error::Config(format!(
                        "row {i} out of range 1..={}",
                        REFERENCE_ROWS.len()
                    )))
                }
            })
            .collect::<Result<_>>()?,
    };
    selected
        .into_par_iter()
        .map(|i| {
            let row = REFERENCE_ROWS[i];
            let model = row.model()?;
            let prediction = predict(&model, StateVector::uniform())?;
            let tau_p = prediction.result.tau2();
            let observed = if observed {
                let tau2 = tau_p.ok_or_else(|| {
                    Error::Bracket(format!("row {} is stable for all delays", i + 1))
                })?;
                let start = near_equilibrium(&model, StateVector::uniform(), ONSET_OFFSET)?;
                let est = observed_instability_delay(
                    &model,
                    start,
                    (tau2 / 1.5, tau2 * 1.5),
                    ONSET_TOLERANCE,
                    &OscillationThresholds::default(),
                )?;
                Some((est.tau, row.tau_observed))
            } else {
                None
            };
            Ok(TableRow {
                game: row.game,
                alpha: row.alpha,
                beta: row.beta,
                theta: row.theta,
                c_star: prediction.equilibrium.clustering,
                tau_p,
                reference_tau_p: row.tau_predicted,
                observed,
            })
        })
        .collect()
}
