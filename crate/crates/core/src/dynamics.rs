//! Deterministic mean dynamics: the drift field, a fixed-step RK4 integrator
//! for the delayed system, equilibrium search, oscillation classification and
//! the empirical onset delay.

use std::collections::VecDeque;

use crate::automata::LearningParams;
use crate::error::{Error, Result};
use crate::game::{Automaton, MultiLevelGame, StateVector, Strategy};
use crate::linalg;

/// A game together with the learning parameters of all four automata.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningModel {
    pub game: MultiLevelGame,
    pub params: LearningParams,
}

/// Per-automaton views of the state, indexed like the state vector.
pub type Views = [StateVector; 4];

/// Views under delayed information: agent 1 (automata 1 and 3) sees
/// `(p1, p2ᵗ, p3, p4ᵗ)`, agent 2 (automata 2 and 4) sees `(p1ᵗ, p2, p3ᵗ, p4)`.
pub fn delayed_views(current: &StateVector, aged: &StateVector) -> Views {
    let (c, a) = (current.0, aged.0);
    let first = StateVector([c[0], a[1], c[2], a[3]]);
    let second = StateVector([a[0], c[1], a[2], c[3]]);
    [first, second, first, second]
}

/// Drift of automaton `k` evaluated on its view:
/// `β p p̄ (C₁ - C₂) + α (p̄² C̄₂ - p² C̄₁)`.
pub fn drift_component(
    view: &StateVector,
    game: &MultiLevelGame,
    params: &LearningParams,
    k: Automaton,
) -> f64 {
    let c1 = crate::game::reward_probability(view, game, k, Strategy::First);
    let c2 = crate::game::reward_probability(view, game, k, Strategy::Second);
    let p = view.get(k);
    let pb = 1.0 - p;
    params.beta * p * pb * (c1 - c2) + params.alpha * (pb * pb * (1.0 - c2) - p * p * (1.0 - c1))
}

/// The drift vector `W`, one component per automaton on its own view. Not
/// scaled by `θ`.
pub fn drift(views: &Views, game: &MultiLevelGame, params: &LearningParams) -> [f64; 4] {
    Automaton::ALL.map(|k| drift_component(&views[k.index()], game, params, k))
}

fn norm_inf(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl LearningModel {
    pub fn new(game: MultiLevelGame, params: LearningParams) -> Self {
        Self { game, params }
    }

    /// Undelayed drift: every automaton sees `p`.
    pub fn drift(&self, p: &StateVector) -> [f64; 4] {
        drift(&[*p; 4], &self.game, &self.params)
    }

    pub fn drift_delayed(&self, current: &StateVector, aged: &StateVector) -> [f64; 4] {
        drift(&delayed_views(current, aged), &self.game, &self.params)
    }
}

/// Uniformly spaced past states with a constant pre-history.
///
/// Only the most recent `capacity` samples are retained.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    step: f64,
    t0: f64,
    initial_state: StateVector,
    samples: VecDeque<StateVector>,
    /// Index (counted from `t0`) of `samples[0]`.
    first: usize,
    capacity: usize,
}

impl HistoryBuffer {
    pub fn new(t0: f64, step: f64, initial_state: StateVector, capacity: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::StepSize(step));
        }
        Ok(Self {
            step,
            t0,
            initial_state,
            samples: VecDeque::with_capacity(capacity.max(1) + 1),
            first: 0,
            capacity: capacity.max(1),
        })
    }

    pub fn push(&mut self, state: StateVector) {
        self.samples.push_back(state);
        if self.samples.len() > self.capacity {
            self.samples.pop_front();
            self.first += 1;
        }
    }

    /// Number of samples pushed so far.
    pub fn len(&self) -> usize {
        self.first + self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// State `frac` of the way from sample `index` to sample `index + 1`.
    /// Negative indices lie before `t0` and return the initial state.
    pub fn at(&self, index: i64, frac: f64) -> Option<StateVector> {
        if index < 0 {
            return Some(self.initial_state);
        }
        let i = (index as usize).checked_sub(self.first)?;
        let a = *self.samples.get(i)?;
        if frac == 0.0 {
            return Some(a);
        }
        let b = *self.samples.get(i + 1)?;
        let mut out = a.0;
        for (x, y) in out.iter_mut().zip(b.0.iter()) {
            *x += frac * (y - *x);
        }
        Some(StateVector(out))
    }

    /// Linearly interpolated state at time `t`, `None` outside the retained
    /// range. Before `t0` the initial state is returned exactly.
    pub fn lookup(&self, t: f64) -> Option<StateVector> {
        if t < self.t0 {
            return Some(self.initial_state);
        }
        let pos = (t - self.t0) / self.step;
        let mut index = pos.floor();
        let mut frac = pos - index;
        if frac > 1.0 - 1e-9 {
            index += 1.0;
            frac = 0.0;
        } else if frac < 1e-9 {
            frac = 0.0;
        }
        self.at(index as i64, frac)
    }
}

/// Sampled states with their times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Free-form `key = value` description of how the trajectory was made.
    pub metadata: Vec<(String, String)>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Self {
        assert_eq!(times.len(), states.len(), "times and states must match");
        Self {
            times,
            states,
            metadata: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&StateVector> {
        self.states.last()
    }

    pub fn component(&self, k: Automaton) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(move |s| s.get(k))
    }
}

/// Settings of a delayed integration. `step = None` picks the default
/// `min(0.5, tau / 64)` for `tau > 0` and `0.1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSpec {
    pub tau: f64,
    pub t_max: f64,
    pub step: Option<f64>,
    pub record_every: usize,
}

impl IntegrationSpec {
    pub fn new(tau: f64, t_max: f64) -> Self {
        Self {
            tau,
            t_max,
            step: None,
            record_every: 1,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }

    pub fn recording_every(mut self, n: usize) -> Self {
        self.record_every = n.max(1);
        self
    }

    /// Step actually used and the delay measured in steps. For `tau > 0` the
    /// step is shrunk so that `tau` is an integer number of steps.
    pub fn resolve_step(&self) -> Result<(f64, usize)> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::domain(format!("delay {} must be finite and >= 0", self.tau)));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::domain(format!("t_max {} must be finite and >= 0", self.t_max)));
        }
        let h = match self.step {
            Some(h) => h,
            None if self.tau > 0.0 => (self.tau / 64.0).min(0.5),
            None => 0.1,
        };
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::StepSize(h));
        }
        if self.tau == 0.0 {
            return Ok((h, 0));
        }
        let lag = (self.tau / h - 1e-9).ceil().max(1.0);
        Ok((self.tau / lag, lag as usize))
    }
}

/// Integrates `dp/dt = θ W(p¹(t), …, p⁴(t))` with classical RK4 and delayed
/// arguments read from a history buffer (the initial state for `t < 0`).
/// The state is projected onto the unit hypercube after every step.
pub fn integrate(model: &LearningModel, initial: StateVector, spec: &IntegrationSpec) -> Result<Trajectory> {
    let (h, lag) = spec.resolve_step()?;
    let steps = (spec.t_max / h + 1e-9).floor() as usize;
    let theta = model.params.theta;
    let mut history = HistoryBuffer::new(0.0, h, initial, lag + 2)?;
    history.push(initial);

    let field = |p: &[f64; 4], aged: Option<StateVector>| -> [f64; 4] {
        let s = StateVector(*p);
        let w = match aged {
            Some(a) => model.drift_delayed(&s, &a),
            None => model.drift(&s),
        };
        w.map(|x| theta * x)
    };
    let axpy = |p: &[f64; 4], a: f64, k: &[f64; 4]| -> [f64; 4] {
        let mut out = *p;
        for (o, d) in out.iter_mut().zip(k.iter()) {
            *o += a * d;
        }
        out
    };
    let aged = |history: &HistoryBuffer, n: usize, frac: f64| -> Option<StateVector> {
        let s = history.at(n as i64 - lag as i64, frac);
        Some(s.expect("delayed sample is retained"))
    };

    let mut times = vec![0.0];
    let mut states = vec![initial];
    let mut p = initial.0;
    for n in 0..steps {
        let (d0, dm, d1) = if lag == 0 {
            (None, None, None)
        } else {
            (
                aged(&history, n, 0.0),
                aged(&history, n, 0.5),
                aged(&history, n + 1, 0.0),
            )
        };
        let k1 = field(&p, d0);
        let k2 = field(&axpy(&p, 0.5 * h, &k1), dm);
        let k3 = field(&axpy(&p, 0.5 * h, &k2), dm);
        let k4 = field(&axpy(&p, h, &k3), d1);
        for i in 0..4 {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let next = StateVector::clamped(p);
        p = next.0;
        history.push(next);
        if (n + 1) % spec.record_every == 0 {
            times.push((n + 1) as f64 * h);
            states.push(next);
        }
    }
    let mut traj = Trajectory::new(times, states);
    traj.metadata = vec![
        ("tau".into(), spec.tau.to_string()),
        ("step".into(), h.to_string()),
    ];
    Ok(traj)
}

/// Equilibrium `p*` with `W(p*) = 0` and the clustering value `c* = p3*·p4*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub state: StateVector,
    pub clustering: f64,
    pub residual: f64,
}

/// Residual targets and limits of [`find_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSettings {
    /// Stop the flow phase once `‖W‖∞` drops below this.
    pub flow_tolerance: f64,
    /// Required final `‖W‖∞`.
    pub tolerance: f64,
    /// Cap on the flow phase, in units of `θ t`.
    pub max_flow_time: f64,
    pub newton_iterations: usize,
    pub fd_step: f64,
}

impl Default for EquilibriumSettings {
    fn default() -> Self {
        Self {
            flow_tolerance: 1e-10,
            tolerance: 1e-12,
            max_flow_time: 2.0e6,
            newton_iterations: 50,
            fd_step: 1e-7,
        }
    }
}

pub fn find_equilibrium(model: &LearningModel, initial: StateVector) -> Result<Equilibrium> {
    find_equilibrium_with(model, initial, &EquilibriumSettings::default())
}

/// Follows the undelayed flow from `initial`, then polishes with damped
/// Newton steps on a central-difference Jacobian. Which equilibrium is found
/// depends on the basin of `initial`.
pub fn find_equilibrium_with(
    model: &LearningModel,
    initial: StateVector,
    settings: &EquilibriumSettings,
) -> Result<Equilibrium> {
    // θ only rescales time when there is no delay, so flow in s = θ t.
    const H: f64 = 0.5;
    let w = |p: &[f64; 4]| model.drift(&StateVector(*p));
    let mut p = initial.0;
    let mut res = norm_inf(&w(&p));
    let mut s = 0.0;
    while res >= settings.flow_tolerance && s < settings.max_flow_time {
        let k1 = w(&p);
        let mut q = p;
        let stage = |q: &mut [f64; 4], a: f64, k: &[f64; 4]| {
            for i in 0..4 {
                q[i] = p[i] + a * k[i];
            }
        };
        stage(&mut q, 0.5 * H, &k1);
        let k2 = w(&q);
        stage(&mut q, 0.5 * H, &k2);
        let k3 = w(&q);
        stage(&mut q, H, &k3);
        let k4 = w(&q);
        for i in 0..4 {
            p[i] += H / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        p = StateVector::clamped(p).0;
        res = norm_inf(&w(&p));
        s += H;
    }

    for _ in 0..settings.newton_iterations {
        if res < settings.tolerance {
            break;
        }
        let f = w(&p);
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let mut up = p;
            let mut dn = p;
            up[j] += settings.fd_step;
            dn[j] -= settings.fd_step;
            let (fu, fd) = (w(&up), w(&dn));
            for i in 0..4 {
                jac[i][j] = (fu[i] - fd[i]) / (2.0 * settings.fd_step);
            }
        }
        let Some(delta) = linalg::solve4(jac, f.map(|x| -x)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            let mut trial = p;
            for i in 0..4 {
                trial[i] += lambda * delta[i];
            }
            let trial = StateVector::clamped(trial).0;
            let r = norm_inf(&w(&trial));
            if r < res {
                p = trial;
                res = r;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }

    if res >= settings.tolerance {
        return Err(Error::NonConvergence(format!(
            "equilibrium residual {res:e} after flow time {s} and Newton polish"
        )));
    }
    let state = StateVector(p);
    Ok(Equilibrium {
        state,
        clustering: state.clustering(),
        residual: res,
    })
}

/// Default size of the action offset used by [`near_equilibrium`].
pub const ONSET_OFFSET: f64 = 0.01;

/// Starting point for onset probes: the equilibrium reached from `seed`, with
/// the two action probabilities pushed `offset` apart. Probing from here
/// measures where the equilibrium itself loses stability; large initial
/// excursions can land on a coexisting cycle at smaller delays.
pub fn near_equilibrium(model: &LearningModel, seed: StateVector, offset: f64) -> Result<StateVector> {
    if !(offset.is_finite() && offset.abs() < 0.5) {
        return Err(Error::domain(format!("offset {offset} must be finite and below 0.5")));
    }
    let mut p = find_equilibrium(model, seed)?.state.0;
    // Move inward from whichever face is closer.
    let push = |x: f64, d: f64| if x + d > 1.0 || (x + d < 0.0) { x - d } else { x + d };
    p[0] = push(p[0], offset);
    p[1] = push(p[1], -offset);
    Ok(StateVector(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationKind {
    Converged,
    DampedOscillatory,
    PersistentOscillatory,
    BoundedNonperiodic,
}

impl OscillationKind {
    /// Persistent or irregular motion, i.e. past the stability boundary.
    pub fn is_unstable(self) -> bool {
        matches!(
            self,
            OscillationKind::PersistentOscillatory | OscillationKind::BoundedNonperiodic
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            OscillationKind::Converged => "converged",
            OscillationKind::DampedOscillatory => "damped_oscillatory",
            OscillationKind::PersistentOscillatory => "persistent_oscillatory",
            OscillationKind::BoundedNonperiodic => "bounded_nonperiodic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationVerdict {
    pub kind: OscillationKind,
    /// Peak-to-peak amplitude of `p1` over the last quarter of the run.
    pub amplitude: f64,
    /// Same for the preceding quarter.
    pub earlier_amplitude: f64,
    /// Peak-to-peak amplitude of `p3` over the last quarter, for inspection.
    pub group_amplitude: f64,
    /// Analysed time span `(start, end)`.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationThresholds {
    /// Below this final amplitude a run can count as converged.
    pub converged_amplitude: f64,
    /// Maximum state speed (per unit time) of a converged run.
    pub converged_speed: f64,
    /// Minimum final amplitude of a persistent oscillation.
    pub persistent_amplitude: f64,
    /// Final-to-earlier amplitude ratio separating decay from persistence.
    pub decay_ratio: f64,
    /// Relative spread of successive maxima tolerated in a regular cycle.
    pub peak_spread: f64,
}

impl Default for OscillationThresholds {
    fn default() -> Self {
        Self {
            converged_amplitude: 1e-4,
            converged_speed: 1e-6,
            persistent_amplitude: 1e-3,
            decay_ratio: 0.98,
            peak_spread: 0.1,
        }
    }
}

fn peak_to_peak(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Strict local maxima of `xs`.
fn local_maxima(xs: &[f64]) -> Vec<f64> {
    xs.windows(3)
        .filter(|w| w[1] > w[0] && w[1] >= w[2])
        .map(|w| w[1])
        .collect()
}

/// Classifies the long-run behaviour of `p1` over the final half of the
/// trajectory, split into two quarters.
pub fn classify_oscillation(
    traj: &Trajectory,
    thresholds: &OscillationThresholds,
) -> Result<OscillationVerdict> {
    let n = traj.len();
    if n < 16 {
        return Err(Error::InsufficientData(format!(
            "need at least 16 samples, trajectory has {n}"
        )));
    }
    let half = n / 2;
    let mid = half + (n - half) / 2;
    let p1: Vec<f64> = traj.component(Automaton::Action1).collect();
    let earlier = peak_to_peak(p1[half..mid].iter().copied());
    let amplitude = peak_to_peak(p1[mid..].iter().copied());
    let group_amplitude = peak_to_peak(traj.component(Automaton::Group1).skip(mid));
    let speed = traj.states[mid..]
        .windows(2)
        .zip(traj.times[mid..].windows(2))
        .map(|(s, t)| s[1].max_abs_diff(&s[0]) / (t[1] - t[0]))
        .fold(0.0, f64::max);

    let kind = if amplitude < thresholds.converged_amplitude && speed < thresholds.converged_speed {
        OscillationKind::Converged
    } else if amplitude < thresholds.decay_ratio * earlier {
        let peaks = local_maxima(&p1[half..]);
        let decaying = peaks.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        if decaying {
            OscillationKind::DampedOscillatory
        } else {
            OscillationKind::BoundedNonperiodic
        }
    } else if amplitude >= thresholds.persistent_amplitude {
        // A growing envelope is an instability regardless of how regular the
        // peaks are; a steady one must also look like a cycle.
        let growing = thresholds.decay_ratio * amplitude > earlier;
        let peaks = local_maxima(&p1[mid..]);
        let spread = peak_to_peak(peaks.iter().copied());
        if growing || (peaks.len() >= 2 && spread <= thresholds.peak_spread * amplitude) {
            OscillationKind::PersistentOscillatory
        } else {
            OscillationKind::BoundedNonperiodic
        }
    } else if amplitude < thresholds.converged_amplitude {
        // Tiny residual motion that is not shrinking any further.
        OscillationKind::Converged
    } else {
        OscillationKind::BoundedNonperiodic
    };

    Ok(OscillationVerdict {
        kind,
        amplitude,
        earlier_amplitude: earlier,
        group_amplitude,
        window: (traj.times[half], *traj.times.last().expect("non-empty")),
    })
}

/// Horizon of one onset probe: `max(5000, 50 τ)` time units.
pub fn probe_horizon(tau: f64) -> f64 {
    (50.0 * tau).max(5000.0)
}

/// Integrates at delay `tau` for [`probe_horizon`] and classifies.
pub fn probe_delay(
    model: &LearningModel,
    initial: StateVector,
    tau: f64,
    thresholds: &OscillationThresholds,
) -> Result<OscillationVerdict> {
    let traj = integrate(model, initial, &IntegrationSpec::new(tau, probe_horizon(tau)))?;
    classify_oscillation(&traj, thresholds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetEstimate {
    /// Midpoint of the final bracket.
    pub tau: f64,
    pub stable_below: f64,
    pub unstable_above: f64,
    pub probes: Vec<(f64, OscillationKind)>,
}

/// Bisects on the delay between a stable (converged or damped) probe and an
/// unstable (persistent or irregular) probe until the bracket is no wider
/// than `tolerance`.
pub fn observed_instability_delay(
    model: &LearningModel,
    initial: StateVector,
    tau_range: (f64, f64),
    tolerance: f64,
    thresholds: &OscillationThresholds,
) -> Result<OnsetEstimate> {
    let (mut lo, mut hi) = tau_range;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Bracket(format!("invalid delay range [{lo}, {hi}]")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Bracket(format!("tolerance {tolerance} must be positive")));
    }
    let mut probes = Vec::new();
    let lo_kind = probe_delay(model, initial, lo, thresholds)?.kind;
    let hi_kind = probe_delay(model, initial, hi, thresholds)?.kind;
    probes.push((lo, lo_kind));
    probes.push((hi, hi_kind));
    if lo_kind.is_unstable() || !hi_kind.is_unstable() {
        return Err(Error::Bracket(format!(
            "delay {lo} classifies {} and delay {hi} classifies {}; need stable below and unstable above",
            lo_kind.name(),
            hi_kind.name()
        )));
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        let kind = probe_delay(model, initial, mid, thresholds)?.kind;
        probes.push((mid, kind));
        if kind.is_unstable() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(OnsetEstimate {
        tau: 0.5 * (lo + hi),
        stable_below: lo,
        unstable_above: hi,
        probes,
    })
}
