//! Learning automata playing two-level stochastic games with delayed
//! information.
//!
//! * [`game`]: bimatrices, the average game and reward probabilities.
//! * [`automata`]: the stochastic learning process and Monte Carlo ensembles.
//! * [`dynamics`]: the mean drift, the delayed RK4 integrator, equilibria and
//!   oscillation onset by bisection.
//! * [`stability`]: the analytic instability delay of the linearised system.
//! * [`config`], [`experiment`], [`output`]: the experiment runner behind the
//!   `mlgame` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod automata;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod game;
mod linalg;
pub mod output;
pub mod stability;

pub use error::{Error, Result};
