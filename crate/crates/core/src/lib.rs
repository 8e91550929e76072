//! Solver for finite-horizon zero-sum linear-quadratic-Gaussian games with
//! controlled observation and jamming.
//!
//! A defender controls a linear plant and decides at every stage whether to
//! request an observation. An attacker injects its own control into the plant
//! and decides whether to jam the observation channel. Both players share the
//! same information, so the equilibrium splits into two layers:
//!
//! * [`control`]: a backward Riccati recursion gives linear feedback gains on
//!   the common state estimate, independent of the observation schedule.
//! * [`decision`]: the observation/jamming game is a deterministic dynamic
//!   program on the estimation-error covariance, solved either by enumerating
//!   every reachable covariance or by policy iteration over decision sequences.
//!
//! [`estimation`] holds the covariance operators and the Kalman-type filter,
//! [`simulation`] runs seeded Monte Carlo rollouts to check the analytic value,
//! and [`model`] defines and parses the problem statement.
//!
//! ```
//! use lqgame::{control, decision, model::ScalarBenchmark};
//!
//! let spec = ScalarBenchmark::default().to_spec();
//! let riccati = control::backward_riccati(&spec).unwrap();
//! let init = vec![decision::Decision::IDLE; spec.horizon];
//! let plan = decision::policy_iteration(&spec, &riccati, &init, 50).unwrap();
//! assert!(plan.converged);
//! assert_eq!(plan.observation_count(), 30);
//! ```

pub mod control;
pub mod decision;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod model;
pub mod simulation;

pub use error::{ConfigError, ControlError, Error, EstimationError, SolveError};
pub use model::GameSpec;

/// Dense dynamically sized matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense dynamically sized column vector.
pub type Vector = nalgebra::DVector<f64>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/decisions.md")]
    mod decisions {}
    #[doc = include_str!("../../../book/src/computation.md")]
    mod computation {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
