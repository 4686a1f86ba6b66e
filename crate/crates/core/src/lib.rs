//! Integral concurrent-learning adaptive control.
//!
//! For plants `xdot = Y(x, t) theta + u` with unknown constant `theta`, the
//! estimator augments the usual gradient update with recorded data. Recorded
//! window integrals of the regressor and the input, together with the state
//! change across the window, satisfy `x(t) - x(t - dt) = script_Y theta + script_U`,
//! so no state derivative is ever needed. Parameter convergence follows once
//! the recorded gram matrix is positive definite.
//!
//! Modules:
//! - [`model`]: plants, reference trajectories, the model catalog
//! - [`estimator`]: controller, gradient and concurrent-learning terms, derivative estimator
//! - [`memory`]: integration buffer, window integrals, history stack
//! - [`sim`]: single closed-loop trials with Lyapunov instrumentation
//! - [`harness`]: Monte Carlo comparison, CSV outputs, invariant checks

pub mod error;
pub mod estimator;
mod format;
pub mod harness;
pub mod memory;
pub mod model;
pub mod ode;
pub mod sim;

pub use error::{IclError, Result};
pub use estimator::Gains;
pub use format::fmt_float;
pub use harness::{run_monte_carlo, McConfig, McSummary};
pub use memory::{HistoryStack, IntegrationBuffer, StackEntry};
pub use model::{DesiredTrajectory, PlantModel};
pub use sim::{run_trial, Method, Trial, TrialConfig, TrialResult};
