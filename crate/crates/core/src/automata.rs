//! The stochastic learning process: linear reward-penalty automata playing
//! the two-level game through a score keeper that only sees aged opponent
//! probabilities.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::game::{Agent, Automaton, MultiLevelGame, StateVector, Strategy};

/// Penalty `alpha`, reward `beta` and step size `theta` of the update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
}

impl LearningParams {
    /// Enforces `0 < alpha < beta < 1` and `0 < theta <= 1`.
    pub fn new(alpha: f64, beta: f64, theta: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha < beta && beta < 1.0) {
            return Err(Error::domain(format!(
                "learning parameters need 0 < alpha < beta < 1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Self::exploratory(alpha, beta, theta)
    }

    /// Only requires `alpha, beta` in `[0, 1]` and `0 < theta <= 1`, which is
    /// enough to keep every update inside the unit interval.
    pub fn exploratory(alpha: f64, beta: f64, theta: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&alpha) && (0.0..=1.0).contains(&beta)) {
            return Err(Error::domain(format!(
                "alpha = {alpha} and beta = {beta} must lie in [0, 1]"
            )));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::domain(format!("theta = {theta} must lie in (0, 1]")));
        }
        Ok(Self { alpha, beta, theta })
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self::exploratory(self.alpha, self.beta, theta)
    }
}

/// Feedback for the strategy an automaton just played.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Reward(Strategy),
    Penalty(Strategy),
}

/// One linear reward-penalty update of the probability of strategy 1.
pub fn automaton_step(p: f64, event: Event, params: &LearningParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} is outside [0, 1]")));
    }
    Ok(step_unchecked(p, event, params))
}

fn step_unchecked(p: f64, event: Event, params: &LearningParams) -> f64 {
    let LearningParams { alpha, beta, theta } = *params;
    let delta = match event {
        Event::Reward(Strategy::First) => beta * (1.0 - p),
        Event::Reward(Strategy::Second) => -beta * p,
        Event::Penalty(Strategy::First) => -alpha * p,
        Event::Penalty(Strategy::Second) => alpha * (1.0 - p),
    };
    (p + theta * delta).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payoff {
    Gain,
    Loss,
}

/// Pure decisions of both agents in one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decisions {
    pub actions: [Strategy; 2],
    /// `Strategy::First` means the agent prefers the coalition game.
    pub groups: [Strategy; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOutcome {
    pub actions: (Strategy, Strategy),
    pub group_choices: (bool, bool),
    pub coalition_formed: bool,
    pub payoffs: (Payoff, Payoff),
}

/// Chance that the score keeper rewards `agent` given its own pure decisions.
///
/// The agent's effective clustering is its own group decision (0 or 1) times
/// the opponent's aged coalition preference; the opponent's action enters
/// through its aged action distribution.
fn reward_chance(
    agent: Agent,
    decisions: &Decisions,
    aged: &StateVector,
    game: &MultiLevelGame,
) -> f64 {
    let own_group = decisions.groups[agent.index()].as_probability();
    let own_action = decisions.actions[agent.index()].as_probability();
    match agent {
        Agent::One => {
            let c = own_group * aged.get(Automaton::Group2);
            game.average_value(Agent::One, c, own_action, aged.get(Automaton::Action2))
        }
        Agent::Two => {
            let c = own_group * aged.get(Automaton::Group1);
            game.average_value(Agent::Two, c, aged.get(Automaton::Action1), own_action)
        }
    }
}

fn event(choice: Strategy, payoff: Payoff) -> Event {
    match payoff {
        Payoff::Gain => Event::Reward(choice),
        Payoff::Loss => Event::Penalty(choice),
    }
}

/// Both automata of an agent learn from the same payoff.
fn apply(
    current: &StateVector,
    decisions: &Decisions,
    payoffs: [Payoff; 2],
    params: &LearningParams,
) -> StateVector {
    let mut next = current.as_array();
    for agent in Agent::ALL {
        let a = agent.index();
        next[a] = step_unchecked(next[a], event(decisions.actions[a], payoffs[a]), params);
        next[a + 2] = step_unchecked(next[a + 2], event(decisions.groups[a], payoffs[a]), params);
    }
    StateVector(next)
}

fn sample_strategy<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Strategy {
    if rng.gen::<f64>() < p {
        Strategy::First
    } else {
        Strategy::Second
    }
}

fn sample_payoff<R: Rng + ?Sized>(chance: f64, rng: &mut R) -> Payoff {
    if rng.gen::<f64>() < chance {
        Payoff::Gain
    } else {
        Payoff::Loss
    }
}

/// Plays one stage. Own decisions are sampled from `current`; the score
/// keeper sees the opponent through `aged`.
pub fn play_stage<R: Rng + ?Sized>(
    current: &StateVector,
    aged: &StateVector,
    game: &MultiLevelGame,
    params: &LearningParams,
    rng: &mut R,
) -> (StageOutcome, StateVector) {
    let a1 = sample_strategy(current.get(Automaton::Action1), rng);
    let g1 = sample_strategy(current.get(Automaton::Group1), rng);
    let a2 = sample_strategy(current.get(Automaton::Action2), rng);
    let g2 = sample_strategy(current.get(Automaton::Group2), rng);
    let decisions = Decisions {
        actions: [a1, a2],
        groups: [g1, g2],
    };
    let payoffs = Agent::ALL
        .map(|agent| sample_payoff(reward_chance(agent, &decisions, aged, game), rng));
    let next = apply(current, &decisions, payoffs, params);
    let outcome = StageOutcome {
        actions: (a1, a2),
        group_choices: (g1 == Strategy::First, g2 == Strategy::First),
        coalition_formed: g1 == Strategy::First && g2 == Strategy::First,
        payoffs: (payoffs[0], payoffs[1]),
    };
    (outcome, next)
}

/// Exact expected one-stage change of the state, by enumerating all sixteen
/// decision profiles and the four payoff combinations. No sampling.
pub fn expected_increment(
    current: &StateVector,
    aged: &StateVector,
    game: &MultiLevelGame,
    params: &LearningParams,
) -> [f64; 4] {
    let prob = |k: Automaton, s: Strategy| match s {
        Strategy::First => current.get(k),
        Strategy::Second => 1.0 - current.get(k),
    };
    let mut acc = [0.0; 4];
    for a1 in Strategy::BOTH {
        for a2 in Strategy::BOTH {
            for g1 in Strategy::BOTH {
                for g2 in Strategy::BOTH {
                    let weight = prob(Automaton::Action1, a1)
                        * prob(Automaton::Action2, a2)
                        * prob(Automaton::Group1, g1)
                        * prob(Automaton::Group2, g2);
                    if weight == 0.0 {
                        continue;
                    }
                    let decisions = Decisions {
                        actions: [a1, a2],
                        groups: [g1, g2],
                    };
                    let r = Agent::ALL
                        .map(|agent| reward_chance(agent, &decisions, aged, game));
                    for y1 in [Payoff::Gain, Payoff::Loss] {
                        for y2 in [Payoff::Gain, Payoff::Loss] {
                            let py = |r: f64, y: Payoff| match y {
                                Payoff::Gain => r,
                                Payoff::Loss => 1.0 - r,
                            };
                            let w = weight * py(r[0], y1) * py(r[1], y2);
                            let next = apply(current, &decisions, [y1, y2], params);
                            for (k, x) in acc.iter_mut().enumerate() {
                                *x += w * (next.0[k] - current.0[k]);
                            }
                        }
                    }
                }
            }
        }
    }
    acc
}

/// Configuration of a stochastic run or ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub game: MultiLevelGame,
    pub params: LearningParams,
    pub initial: StateVector,
    /// Information delay in stages.
    pub tau: usize,
    pub horizon: usize,
    pub seed: u64,
    pub ensemble_size: usize,
    /// Keep every `decimation`-th stage in the output.
    pub decimation: usize,
}

impl SimConfig {
    pub fn new(game: MultiLevelGame, params: LearningParams) -> Self {
        Self {
            game,
            params,
            initial: StateVector::uniform(),
            tau: 0,
            horizon: 1000,
            seed: 1,
            ensemble_size: 1,
            decimation: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        if self.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        Ok(())
    }
}

/// RNG of ensemble member `run`: ChaCha8 keyed by the base seed, with the run
/// index as stream number. A single simulation is member 0.
pub fn member_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

fn simulate_member(cfg: &SimConfig, run: u64) -> Trajectory {
    let mut rng = member_rng(cfg.seed, run);
    // Holds p(max(0, t - tau)) ..= p(t); the front is the aged view, which is
    // the initial state while t < tau.
    let mut window: VecDeque<StateVector> = VecDeque::with_capacity(cfg.tau + 2);
    window.push_back(cfg.initial);
    let mut times = vec![0.0];
    let mut states = vec![cfg.initial];
    let mut state = cfg.initial;
    for t in 1..=cfg.horizon {
        let aged = *window.front().expect("window is never empty");
        let (_, next) = play_stage(&state, &aged, &cfg.game, &cfg.params, &mut rng);
        state = next;
        window.push_back(state);
        if window.len() > cfg.tau + 1 {
            window.pop_front();
        }
        if t % cfg.decimation == 0 {
            times.push(t as f64);
            states.push(state);
        }
    }
    Trajectory::new(times, states)
}

/// Runs a single seeded simulation for `horizon` stages.
pub fn run_simulation(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    Ok(simulate_member(cfg, 0))
}

/// Per-stage mean and population variance over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<[f64; 4]>,
    pub variance: Vec<[f64; 4]>,
    /// Mean of the per-run clustering parameter `p3·p4`.
    pub mean_clustering: Vec<f64>,
    pub runs: usize,
}

/// Runs `ensemble_size` independent members in parallel. Member `i` uses
/// [`member_rng`]`(seed, i)`, so results do not depend on thread scheduling.
pub fn run_ensemble(cfg: &SimConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    let runs: Vec<Trajectory> = (0..cfg.ensemble_size as u64)
        .into_par_iter()
        .map(|run| simulate_member(cfg, run))
        .collect();
    let times = runs[0].times.clone();
    let n = runs.len() as f64;
    let mut mean = vec![[0.0; 4]; times.len()];
    let mut variance = vec![[0.0; 4]; times.len()];
    let mut mean_clustering = vec![0.0; times.len()];
    for (s, ((m, v), c)) in mean
        .iter_mut()
        .zip(variance.iter_mut())
        .zip(mean_clustering.iter_mut())
        .enumerate()
    {
        for k in 0..4 {
            let mu = runs.iter().map(|r| r.states[s].0[k]).sum::<f64>() / n;
            m[k] = mu;
            v[k] = runs
                .iter()
                .map(|r| (r.states[s].0[k] - mu).powi(2))
                .sum::<f64>()
                / n;
        }
        *c = runs.iter().map(|r| r.states[s].clustering()).sum::<f64>() / n;
    }
    Ok(EnsembleSummary {
        times,
        mean,
        variance,
        mean_clustering,
        runs: runs.len(),
    })
}
