//! Linearly parameterized plants `xdot = Y(x, t) theta + u` and the
//! reference trajectories they are asked to track.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{IclError, Result};

pub type RegressorFn = dyn Fn(&DVector<f64>, f64) -> DMatrix<f64> + Send + Sync;
pub type TrajectoryFn = dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync;

/// A plant whose drift is linear in an unknown parameter vector.
///
/// The true parameters are kept here so the simulator can propagate the
/// physics and the metrics can form `theta - theta_hat`; the estimator only
/// ever calls [`PlantModel::regressor`].
#[derive(Clone)]
pub struct PlantModel {
    name: String,
    n: usize,
    m: usize,
    regressor: Arc<RegressorFn>,
    true_theta: DVector<f64>,
}

impl PlantModel {
    pub fn new<F>(name: impl Into<String>, n: usize, m: usize, regressor: F, true_theta: DVector<f64>) -> Result<Self>
    where
        F: Fn(&DVector<f64>, f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        if n == 0 || m == 0 {
            return Err(IclError::InvalidConfig(format!(
                "plant dimensions must be positive (n = {n}, m = {m})"
            )));
        }
        if true_theta.len() != m {
            return Err(IclError::Dimension {
                what: "true parameter vector",
                expected: m.to_string(),
                got: true_theta.len().to_string(),
            });
        }
        Ok(PlantModel {
            name: name.into(),
            n,
            m,
            regressor: Arc::new(regressor),
            true_theta,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Parameter dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Ground-truth parameters. Reserved for the simulator and the error metrics.
    pub fn true_theta(&self) -> &DVector<f64> {
        &self.true_theta
    }

    /// Returns a copy of the model with different true parameters.
    pub fn with_theta(&self, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != self.m {
            return Err(IclError::Dimension {
                what: "true parameter vector",
                expected: self.m.to_string(),
                got: theta.len().to_string(),
            });
        }
        Ok(PlantModel {
            true_theta: theta,
            ..self.clone()
        })
    }

    /// Evaluates `Y(x, t)`.
    pub fn regressor(&self, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>> {
        check_state(x, self.n)?;
        check_time(t)?;
        let y = (self.regressor)(x, t);
        if y.nrows() != self.n || y.ncols() != self.m {
            return Err(IclError::Dimension {
                what: "regressor output",
                expected: format!("{}x{}", self.n, self.m),
                got: format!("{}x{}", y.nrows(), y.ncols()),
            });
        }
        Ok(y)
    }

    /// Evaluates the drift `f(x, t) = Y(x, t) theta`.
    pub fn drift(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        Ok(self.regressor(x, t)? * &self.true_theta)
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

/// A reference trajectory with its analytic time derivative.
#[derive(Clone)]
pub struct DesiredTrajectory {
    n: usize,
    eval: Arc<TrajectoryFn>,
}

impl DesiredTrajectory {
    pub fn new<F>(n: usize, eval: F) -> Self
    where
        F: Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    {
        DesiredTrajectory {
            n,
            eval: Arc::new(eval),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Returns `(x_d(t), xdot_d(t))`.
    pub fn eval(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        check_time(t)?;
        Ok((self.eval)(t))
    }
}

impl fmt::Debug for DesiredTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesiredTrajectory")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

pub fn eval_regressor(model: &PlantModel, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>> {
    model.regressor(x, t)
}

pub fn eval_drift(model: &PlantModel, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    model.drift(x, t)
}

pub fn eval_desired(traj: &DesiredTrajectory, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    traj.eval(t)
}

fn check_state(x: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(IclError::Dimension {
            what: "state vector",
            expected: n.to_string(),
            got: x.len().to_string(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(IclError::Domain(format!("non-finite state {:?}", x.as_slice())));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(IclError::Domain(format!(
            "time must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

/// Name of the two-state benchmark plant.
pub const TWO_STATE: &str = "two-state";
/// Name of the scalar `xdot = theta x + u` toy plant.
pub const SCALAR_LINEAR: &str = "scalar-linear";

/// The two-state benchmark plant with four unknown parameters.
///
/// ```text
/// Y(x, t) = [ x1^2  sin(x2)       0    0     ]
///           [ 0     x2 sin(t)     x1   x1 x2 ]
/// ```
pub fn two_state_plant() -> PlantModel {
    PlantModel::new(
        TWO_STATE,
        2,
        4,
        |x: &DVector<f64>, t: f64| {
            let (x1, x2) = (x[0], x[1]);
            DMatrix::from_row_slice(2, 4, &[x1 * x1, x2.sin(), 0.0, 0.0, 0.0, x2 * t.sin(), x1, x1 * x2])
        },
        DVector::from_vec(vec![5.0, 10.0, 15.0, 20.0]),
    )
    .expect("two-state plant is well formed")
}

/// `x_d(t) = 10 (1 - e^{-0.1 t}) [sin 2t, 0.4 cos 3t]`.
pub fn two_state_trajectory() -> DesiredTrajectory {
    DesiredTrajectory::new(2, |t| {
        let decay = (-0.1 * t).exp();
        let amp = 10.0 * (1.0 - decay);
        // d/dt [10 (1 - e^{-0.1 t})] = e^{-0.1 t}
        let damp = decay;
        let (s2, c2) = (2.0 * t).sin_cos();
        let (s3, c3) = (3.0 * t).sin_cos();
        let xd = DVector::from_vec(vec![amp * s2, 0.4 * amp * c3]);
        let xd_dot = DVector::from_vec(vec![damp * s2 + 2.0 * amp * c2, 0.4 * (damp * c3 - 3.0 * amp * s3)]);
        (xd, xd_dot)
    })
}

/// Scalar plant `xdot = theta x + u` with `theta = 1.5` (open-loop unstable).
pub fn scalar_linear_plant() -> PlantModel {
    PlantModel::new(
        SCALAR_LINEAR,
        1,
        1,
        |x: &DVector<f64>, _t: f64| DMatrix::from_element(1, 1, x[0]),
        DVector::from_element(1, 1.5),
    )
    .expect("scalar plant is well formed")
}

pub fn scalar_linear_trajectory() -> DesiredTrajectory {
    DesiredTrajectory::new(1, |t| {
        let (s, c) = t.sin_cos();
        (DVector::from_element(1, s), DVector::from_element(1, c))
    })
}

/// Plants and reference trajectories selectable by name.
pub mod catalog {
    use super::*;

    pub fn names() -> &'static [&'static str] {
        &[TWO_STATE, SCALAR_LINEAR]
    }

    pub fn lookup(name: &str) -> Result<(PlantModel, DesiredTrajectory)> {
        match name {
            TWO_STATE => Ok((two_state_plant(), two_state_trajectory())),
            SCALAR_LINEAR => Ok((scalar_linear_plant(), scalar_linear_trajectory())),
            other => Err(IclError::UnknownModel(other.to_string())),
        }
    }
}
