//! Tracking controller and adaptive update laws.
//!
//! The controller is `u = xdot_d - Y(x, t) theta_hat - K e`. The update law is
//! `theta_hat_dot = Gamma Y^T e + k_cl Gamma sum_i R_i^T (z_i - R_i theta_hat)`,
//! where the recorded pairs `(R_i, z_i)` come either from window integrals
//! (integral concurrent learning) or from pointwise regressors and
//! filtered state-derivative estimates (the derivative-based baseline).

use nalgebra::{DMatrix, DVector};

use crate::error::{IclError, Result};
use crate::memory::{HistoryStack, IntegrationBuffer};
use crate::model::{DesiredTrajectory, PlantModel};

/// Feedback gain `K`, adaptation gain `Gamma`, and concurrent-learning gain `k_cl`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    k: DMatrix<f64>,
    gamma: DMatrix<f64>,
    gamma_inv: DMatrix<f64>,
    k_cl: f64,
}

impl Gains {
    pub fn new(k: DMatrix<f64>, gamma: DMatrix<f64>, k_cl: f64) -> Result<Self> {
        check_spd("K", &k)?;
        check_spd("Gamma", &gamma)?;
        if !(k_cl > 0.0 && k_cl.is_finite()) {
            return Err(IclError::InvalidGains(format!("k_cl must be positive, got {k_cl}")));
        }
        let gamma_inv = gamma
            .clone()
            .try_inverse()
            .ok_or_else(|| IclError::InvalidGains("Gamma is singular".into()))?;
        Ok(Gains {
            k,
            gamma,
            gamma_inv,
            k_cl,
        })
    }

    /// `K = k_s I_n`, `Gamma = gamma_s I_m`.
    pub fn scalar(n: usize, m: usize, k_s: f64, gamma_s: f64, k_cl: f64) -> Result<Self> {
        Gains::new(DMatrix::identity(n, n) * k_s, DMatrix::identity(m, m) * gamma_s, k_cl)
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn gamma_inv(&self) -> &DMatrix<f64> {
        &self.gamma_inv
    }

    pub fn k_cl(&self) -> f64 {
        self.k_cl
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn m(&self) -> usize {
        self.gamma.nrows()
    }
}

fn check_spd(name: &str, a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() || a.is_empty() {
        return Err(IclError::InvalidGains(format!(
            "{name} must be square and non-empty, got {:?}",
            a.shape()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(IclError::InvalidGains(format!("{name} has non-finite entries")));
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * a.amax().max(1.0) {
        return Err(IclError::InvalidGains(format!(
            "{name} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let lam = a.clone().symmetric_eigenvalues().min();
    if !(lam > 0.0) {
        return Err(IclError::InvalidGains(format!(
            "{name} must be positive definite (minimum eigenvalue {lam:e})"
        )));
    }
    Ok(())
}

/// Everything the controller computes at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTerms {
    pub u: DVector<f64>,
    /// Tracking error `x_meas - x_d`.
    pub e: DVector<f64>,
    /// Regressor at the measured state.
    pub y: DMatrix<f64>,
}

pub fn control_terms(
    x_meas: &DVector<f64>,
    t: f64,
    theta_hat: &DVector<f64>,
    traj: &DesiredTrajectory,
    gains: &Gains,
    model: &PlantModel,
) -> Result<ControlTerms> {
    if x_meas.iter().chain(theta_hat.iter()).any(|v| !v.is_finite()) {
        return Err(IclError::Diverged { t });
    }
    if theta_hat.len() != model.m() {
        return Err(IclError::Dimension {
            what: "parameter estimate",
            expected: model.m().to_string(),
            got: theta_hat.len().to_string(),
        });
    }
    let (xd, xd_dot) = traj.eval(t)?;
    let y = model.regressor(x_meas, t)?;
    let e = x_meas - xd;
    let u = xd_dot - &y * theta_hat - gains.k() * &e;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(IclError::Diverged { t });
    }
    Ok(ControlTerms { u, e, y })
}

/// `u = xdot_d - Y(x_meas, t) theta_hat - K (x_meas - x_d)`.
pub fn control_input(
    x_meas: &DVector<f64>,
    t: f64,
    theta_hat: &DVector<f64>,
    traj: &DesiredTrajectory,
    gains: &Gains,
    model: &PlantModel,
) -> Result<DVector<f64>> {
    control_terms(x_meas, t, theta_hat, traj, gains, model).map(|c| c.u)
}

/// `Gamma Y^T e`.
pub fn gradient_term(y: &DMatrix<f64>, e: &DVector<f64>, gains: &Gains) -> Result<DVector<f64>> {
    if y.nrows() != e.len() || y.ncols() != gains.m() {
        return Err(IclError::Dimension {
            what: "gradient term operands",
            expected: format!("Y {}x{}", e.len(), gains.m()),
            got: format!("Y {}x{}", y.nrows(), y.ncols()),
        });
    }
    Ok(gains.gamma() * y.tr_mul(e))
}

fn cl_sum(stack: &HistoryStack, theta_hat: &DVector<f64>, gains: &Gains) -> DVector<f64> {
    let mut acc = DVector::zeros(gains.m());
    for e in stack.entries() {
        let r = e.regressor();
        let residual = e.response() - e.input() - r * theta_hat;
        acc += r.tr_mul(&residual);
    }
    gains.gamma() * acc * gains.k_cl()
}

/// `k_cl Gamma sum_i script_Y_i^T (x(t_i) - x(t_i - dt) - script_U_i - script_Y_i theta_hat)`,
/// summed entry by entry. Zero for an empty stack.
pub fn icl_term(stack: &HistoryStack, theta_hat: &DVector<f64>, gains: &Gains) -> DVector<f64> {
    cl_sum(stack, theta_hat, gains)
}

/// `k_cl Gamma sum_i Y_i^T (xdot_i - u_i - Y_i theta_hat)` over a stack of
/// pointwise entries carrying state-derivative estimates.
pub fn dcl_term(stack: &HistoryStack, theta_hat: &DVector<f64>, gains: &Gains) -> DVector<f64> {
    cl_sum(stack, theta_hat, gains)
}

/// Number of samples on each side of the centre of a boxcar of width `window`.
pub fn filter_half_width(window: f64, step: f64) -> usize {
    (window / (2.0 * step)).round().max(0.0) as usize
}

/// Central difference of the boxcar-filtered measured state at `t_query`.
///
/// The filter is a centred moving average over `2K + 1` samples with
/// `K = round(window / 2h)`; the derivative is taken between the filtered
/// values one sample before and after `t_query`. The difference of two
/// shifted boxcar sums telescopes to four samples, which is what is
/// evaluated here. Needs `K + 1` samples on each side of the query.
pub fn estimate_state_derivative(buffer: &IntegrationBuffer, filter_window: f64, t_query: f64) -> Result<DVector<f64>> {
    if !(filter_window >= 0.0 && filter_window.is_finite()) {
        return Err(IclError::Domain(format!(
            "filter window must be >= 0, got {filter_window}"
        )));
    }
    let samples = buffer.samples();
    let h = buffer.step();
    let j = samples.partition_point(|s| s.t < t_query - 0.5 * h);
    if j >= samples.len() || (samples[j].t - t_query).abs() > 0.5 * h {
        return Err(IclError::NotReady(format!("no sample at t = {t_query}")));
    }
    let k = filter_half_width(filter_window, h);
    if j < k + 1 || j + k + 1 >= samples.len() {
        return Err(IclError::NotReady(format!(
            "derivative at t = {t_query} needs {} samples on each side",
            k + 1
        )));
    }
    let (a, b) = (&samples[j + k + 1], &samples[j + k]);
    let (c, d) = (&samples[j - k], &samples[j - k - 1]);
    let span = (a.t + b.t) - (c.t + d.t);
    Ok(((&a.x + &b.x) - (&c.x + &d.x)) / span)
}
