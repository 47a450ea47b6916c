//! Linear stability of the delayed action dynamics around an equilibrium.
//!
//! The group strategies are frozen at their equilibrium values, which leaves
//! the two-variable delayed system
//!
//! ```text
//! d δp1/dt = X1 δp1 + Y1 δp2(t - τ)
//! d δp2/dt = X2 δp2 + Y2 δp1(t - τ)
//! ```
//!
//! with characteristic equation `(λ - X1)(λ - X2) = Y1 Y2 e^{-2λτ}`. Setting
//! `λ = iw` and separating real and imaginary parts gives
//! `cos 2wτ = (X - w²)/Y` and `sin 2wτ = (X1 + X2) w / Y` with `X = X1 X2`,
//! `Y = Y1 Y2`. Squaring and adding yields `u² + (X1² + X2²) u + X² - Y² = 0`
//! for `u = w²`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::automata::LearningParams;
use crate::dynamics::{find_equilibrium, Equilibrium, LearningModel};
use crate::error::{Error, Result};
use crate::game::{builtin_game, Agent, StateVector};

/// Largest marginal-stability residual accepted from [`instability_delay`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// `θ`-scaled partial derivatives of the action drifts at an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCoefficients {
    /// `θ ∂W1/∂p1`
    pub x1: f64,
    /// `θ ∂W2/∂p2`
    pub x2: f64,
    /// `θ ∂W1/∂p2ᵗ`
    pub y1: f64,
    /// `θ ∂W2/∂p1ᵗ`
    pub y2: f64,
    pub c_star: f64,
}

impl StabilityCoefficients {
    pub fn x(&self) -> f64 {
        self.x1 * self.x2
    }

    pub fn y(&self) -> f64 {
        self.y1 * self.y2
    }

    pub fn is_finite(&self) -> bool {
        [self.x1, self.x2, self.y1, self.y2].iter().all(|v| v.is_finite())
    }
}

/// Self and cross partials of one action automaton's drift, given its own
/// probability `p` and the reward rows of the frozen average game.
///
/// `rows[i] = (D_i1, D_i2)` are the payoffs of own strategy `i` against the
/// opponent's strategies 1 and 2, and `q` is the opponent's probability of
/// strategy 1.
fn action_partials(p: f64, q: f64, rows: [(f64, f64); 2], params: &LearningParams) -> (f64, f64) {
    let LearningParams { alpha, beta, .. } = *params;
    let reward = |(a, b): (f64, f64)| q * a + (1.0 - q) * b;
    let slope = |(a, b): (f64, f64)| a - b;
    let (c1, c2) = (reward(rows[0]), reward(rows[1]));
    let (s1, s2) = (slope(rows[0]), slope(rows[1]));
    let pb = 1.0 - p;
    let own = beta * (1.0 - 2.0 * p) * (c1 - c2) - 2.0 * alpha * (pb * (1.0 - c2) + p * (1.0 - c1));
    let cross = beta * p * pb * (s1 - s2) + alpha * (p * p * s1 - pb * pb * s2);
    (own, cross)
}

/// Closed-form coefficients at any state, with `c` frozen at `p3·p4`.
pub fn coefficients_at(model: &LearningModel, p: &StateVector) -> StabilityCoefficients {
    let [p1, p2, _, _] = p.as_array();
    let c = p.clustering();
    let d = model.game.average_unchecked(c);
    let m1 = d.matrix(Agent::One);
    let m2 = d.matrix(Agent::Two);
    // Player 2 chooses columns: its own strategy j pays (D_1j, D_2j).
    let rows1 = [(m1[0][0], m1[0][1]), (m1[1][0], m1[1][1])];
    let rows2 = [(m2[0][0], m2[1][0]), (m2[0][1], m2[1][1])];
    let (x1, y1) = action_partials(p1, p2, rows1, &model.params);
    let (x2, y2) = action_partials(p2, p1, rows2, &model.params);
    let theta = model.params.theta;
    StabilityCoefficients {
        x1: theta * x1,
        x2: theta * x2,
        y1: theta * y1,
        y2: theta * y2,
        c_star: c,
    }
}

/// Coefficients at an equilibrium; rejects states with `‖W‖∞ >= 1e-10`.
pub fn linearize(model: &LearningModel, p_star: &StateVector) -> Result<StabilityCoefficients> {
    let residual = model.drift(p_star).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if residual >= 1e-10 {
        return Err(Error::domain(format!(
            "state is not an equilibrium, drift residual {residual:e}"
        )));
    }
    Ok(coefficients_at(model, p_star))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalFrequency {
    Finite(f64),
    /// No real marginal frequency, so no delay destabilises the system.
    StableForAllDelays,
}

/// Positive root `w` of the squared marginal condition.
pub fn critical_frequency(coeffs: &StabilityCoefficients) -> Result<CriticalFrequency> {
    if !coeffs.is_finite() {
        return Err(Error::Degenerate("non-finite coefficients".into()));
    }
    let y = coeffs.y();
    if y == 0.0 {
        return Err(Error::Degenerate("delayed coupling Y1·Y2 vanishes".into()));
    }
    let b = coeffs.x1 * coeffs.x1 + coeffs.x2 * coeffs.x2;
    let x = coeffs.x();
    let c = x * x - y * y;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return Ok(CriticalFrequency::StableForAllDelays);
    }
    let root = disc.sqrt();
    // (-b + root) / 2 without cancellation.
    let u = if b + root > 0.0 { -2.0 * c / (b + root) } else { 0.5 * (root - b) };
    if u <= 0.0 {
        return Ok(CriticalFrequency::StableForAllDelays);
    }
    Ok(CriticalFrequency::Finite(u.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityResult {
    Unstable {
        /// Angular frequency at the boundary.
        w: f64,
        /// `tan 2wτ`.
        chi: f64,
        /// Smallest destabilising delay.
        tau2: f64,
    },
    StableForAllDelays,
}

impl StabilityResult {
    pub fn tau2(&self) -> Option<f64> {
        match self {
            StabilityResult::Unstable { tau2, .. } => Some(*tau2),
            StabilityResult::StableForAllDelays => None,
        }
    }
}

/// `|(iw - X1)(iw - X2) - Y e^{-2iwτ}|`.
pub fn marginal_residual(coeffs: &StabilityCoefficients, w: f64, tau: f64) -> f64 {
    let iw = Complex64::new(0.0, w);
    let lhs = (iw - coeffs.x1) * (iw - coeffs.x2);
    let rhs = coeffs.y() * Complex64::new(0.0, -2.0 * w * tau).exp();
    (lhs - rhs).norm()
}

/// Smallest delay at which a root crosses the imaginary axis.
///
/// The angle `2wτ` is taken from the signs of both the cosine and the sine
/// condition and reduced to `(0, 2π]`; with `χ >= 0` in the first quadrant
/// this is `atan(χ) / 2w`.
pub fn instability_delay(coeffs: &StabilityCoefficients) -> Result<StabilityResult> {
    let w = match critical_frequency(coeffs)? {
        CriticalFrequency::Finite(w) => w,
        CriticalFrequency::StableForAllDelays => return Ok(StabilityResult::StableForAllDelays),
    };
    let x = coeffs.x();
    let y = coeffs.y();
    let cos = (x - w * w) / y;
    let sin = (coeffs.x1 + coeffs.x2) * w / y;
    let mut phi = sin.atan2(cos);
    if phi <= 0.0 {
        phi += 2.0 * PI;
    }
    let tau2 = phi / (2.0 * w);
    let residual = marginal_residual(coeffs, w, tau2);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::Residual(residual));
    }
    Ok(StabilityResult::Unstable {
        w,
        chi: (coeffs.x1 + coeffs.x2) * w / (x - w * w),
        tau2,
    })
}

/// Equilibrium, coefficients and predicted onset for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub equilibrium: Equilibrium,
    pub coefficients: StabilityCoefficients,
    pub result: StabilityResult,
}

pub fn predict(model: &LearningModel, initial: StateVector) -> Result<Prediction> {
    let equilibrium = find_equilibrium(model, initial)?;
    let coefficients = linearize(model, &equilibrium.state)?;
    let result = instability_delay(&coefficients)?;
    Ok(Prediction {
        equilibrium,
        coefficients,
        result,
    })
}

/// A published parameter row with its reported equilibrium clustering and
/// observed and predicted onset delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub game: u32,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub c_star: f64,
    pub tau_observed: f64,
    pub tau_predicted: f64,
}

impl ReferenceRow {
    pub fn model(&self) -> Result<LearningModel> {
        Ok(LearningModel::new(
            builtin_game(self.game)?,
            LearningParams::new(self.alpha, self.beta, self.theta)?,
        ))
    }
}

const fn row(game: u32, alpha: f64, beta: f64, theta: f64, c_star: f64, tau_o: f64, tau_p: f64) -> ReferenceRow {
    ReferenceRow {
        game,
        alpha,
        beta,
        theta,
        c_star,
        tau_observed: tau_o,
        tau_predicted: tau_p,
    }
}

pub const REFERENCE_ROWS: [ReferenceRow; 6] = [
    row(2, 0.02, 0.80, 0.1, 0.2374, 33.0, 34.0),
    row(2, 0.02, 0.40, 0.1, 0.2417, 145.0, 148.0),
    row(3, 0.01, 0.10, 1.0, 0.6564, 18.0, 22.0),
    row(3, 0.02, 0.10, 1.0, 0.4812, 52.0, 51.0),
    row(3, 0.01, 0.05, 1.0, 0.4806, 106.0, 102.0),
    row(3, 0.01, 0.05, 0.5, 0.4793, 218.0, 203.0),
];

/// Runs [`predict`] from the uniform state for every reference row.
pub fn predict_reference_rows() -> Result<Vec<(ReferenceRow, Prediction)>> {
    REFERENCE_ROWS
        .iter()
        .map(|r| Ok((*r, predict(&r.model()?, StateVector::uniform())?)))
        .collect()
}
