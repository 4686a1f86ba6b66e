//! Closed-loop trial simulation.
//!
//! One trial integrates the augmented state `[x; theta_hat]` with a fixed
//! step. Per step: the true state is observed for logging, a noisy
//! measurement is drawn, the controller runs on the measurement, the sample
//! enters the integration buffer, a history-stack candidate is formed at the
//! recording cadence, and the augmented state is advanced one step.
//!
//! Inside a step the measurement noise is held, while the controller and the
//! gradient term are evaluated at every Runge-Kutta stage. The
//! concurrent-learning term `k_cl Gamma (b - G theta_hat)` is affine in the
//! estimate with `(G, b)` frozen between recordings, so it is propagated
//! exactly by matrix exponentials.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{IclError, Result};
use crate::estimator::{control_terms, estimate_state_derivative, filter_half_width, Gains};
use crate::format::fmt_float;
use crate::harness::rms_window;
use crate::memory::{HistoryStack, IntegrationBuffer, StackEntry, WindowSample, DEFAULT_RECORD_MARGIN};
use crate::model::{catalog, DesiredTrajectory, PlantModel};
use crate::ode::{lawson_rk4_step, AffinePropagator};

/// Adaptive update law driving `theta_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// `Gamma Y^T e` only.
    Gradient,
    /// Gradient term plus concurrent learning on window integrals.
    IntegralCl,
    /// Gradient term plus concurrent learning on filtered state derivatives.
    DerivativeCl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gradient, Method::IntegralCl, Method::DerivativeCl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::IntegralCl => "integral_cl",
            Method::DerivativeCl => "derivative_cl",
        }
    }

    fn uses_stack(self) -> bool {
        !matches!(self, Method::Gradient)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = IclError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Method::Gradient),
            "integral_cl" | "integral" | "icl" => Ok(Method::IntegralCl),
            "derivative_cl" | "derivative" | "dcl" => Ok(Method::DerivativeCl),
            other => Err(IclError::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

pub const DEFAULT_STEP: f64 = 0.0004;
pub const DEFAULT_DURATION: f64 = 100.0;
pub const DEFAULT_STACK_SIZE: usize = 20;
pub const DEFAULT_LAMBDA_BAR: f64 = 1e-4;
pub const DEFAULT_DECIMATION: usize = 25;
pub const DEFAULT_FILTER_WINDOW: f64 = 0.5;
/// States beyond this norm count as divergence.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Everything needed to run one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub model: String,
    pub method: Method,
    pub gains: Gains,
    /// Integration window.
    pub delta_t: f64,
    /// Boxcar width for the derivative baseline.
    pub filter_window: f64,
    pub stack_size: usize,
    pub noise_sigma: f64,
    pub step_h: f64,
    pub duration: f64,
    pub x0: DVector<f64>,
    pub theta_hat0: DVector<f64>,
    /// Seed of the measurement-noise stream.
    pub seed: u64,
    /// Excitation threshold on the stack's minimum eigenvalue.
    pub lambda_bar: f64,
    /// Log every this many steps.
    pub decimation: usize,
}

impl TrialConfig {
    /// Defaults: noiseless, `h = 0.0004`, 100 s, zero initial state and
    /// estimate, `N = 20`, filter window `min(0.5, delta_t)`.
    pub fn new(model: &str, method: Method, gains: Gains, delta_t: f64) -> Result<Self> {
        let (plant, _) = catalog::lookup(model)?;
        Ok(TrialConfig {
            model: model.to_string(),
            method,
            gains,
            delta_t,
            filter_window: DEFAULT_FILTER_WINDOW.min(delta_t),
            stack_size: DEFAULT_STACK_SIZE,
            noise_sigma: 0.0,
            step_h: DEFAULT_STEP,
            duration: DEFAULT_DURATION,
            x0: DVector::zeros(plant.n()),
            theta_hat0: DVector::zeros(plant.m()),
            seed: 0,
            lambda_bar: DEFAULT_LAMBDA_BAR,
            decimation: DEFAULT_DECIMATION,
        })
    }

    pub fn validate(&self, model: &PlantModel) -> Result<()> {
        let bad = |msg: String| Err(IclError::InvalidConfig(msg));
        if !(self.step_h > 0.0 && self.step_h.is_finite()) {
            return bad(format!("step_h must be positive, got {}", self.step_h));
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return bad(format!("delta_t must be positive, got {}", self.delta_t));
        }
        if !(self.duration > self.delta_t && self.duration.is_finite()) {
            return bad(format!(
                "duration ({}) must exceed delta_t ({})",
                self.duration, self.delta_t
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.filter_window >= 0.0 && self.filter_window <= self.delta_t + 1e-12) {
            return bad(format!(
                "filter_window ({}) must lie in [0, delta_t]",
                self.filter_window
            ));
        }
        if self.stack_size == 0 || self.decimation == 0 {
            return bad("stack_size and decimation must be positive".into());
        }
        if !(self.lambda_bar > 0.0 && self.lambda_bar.is_finite()) {
            return bad(format!("lambda_bar must be positive, got {}", self.lambda_bar));
        }
        if self.gains.n() != model.n() || self.gains.m() != model.m() {
            return Err(IclError::Dimension {
                what: "gains",
                expected: format!("K {0}x{0}, Gamma {1}x{1}", model.n(), model.m()),
                got: format!("K {0}x{0}, Gamma {1}x{1}", self.gains.n(), self.gains.m()),
            });
        }
        if self.x0.len() != model.n() || self.theta_hat0.len() != model.m() {
            return Err(IclError::Dimension {
                what: "initial conditions",
                expected: format!("x0 {}, theta_hat0 {}", model.n(), model.m()),
                got: format!("x0 {}, theta_hat0 {}", self.x0.len(), self.theta_hat0.len()),
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.step_h).round() as usize
    }
}

/// Constants of the Lyapunov bounds for a given gain set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBounds {
    /// `1/2 min{1, lambda_min(Gamma^-1)}`
    pub beta1: f64,
    /// `1/2 max{1, lambda_max(Gamma^-1)}`
    pub beta2: f64,
    /// `(1/beta2) min{lambda_min(K), k_cl lambda_bar}`
    pub lambda1: f64,
    pub t_excite: Option<f64>,
}

impl StabilityBounds {
    pub fn new(gains: &Gains, lambda_bar: f64, t_excite: Option<f64>) -> Self {
        let gi = gains.gamma_inv().clone().symmetric_eigenvalues();
        let beta1 = 0.5 * gi.min().min(1.0);
        let beta2 = 0.5 * gi.max().max(1.0);
        let k_min = gains.k().clone().symmetric_eigenvalues().min();
        let lambda1 = k_min.min(gains.k_cl() * lambda_bar) / beta2;
        StabilityBounds {
            beta1,
            beta2,
            lambda1,
            t_excite,
        }
    }
}

/// `V = 1/2 e^T e + 1/2 theta_tilde^T Gamma^-1 theta_tilde`.
pub fn lyapunov(e: &DVector<f64>, theta_tilde: &DVector<f64>, gains: &Gains) -> f64 {
    0.5 * e.dot(e) + 0.5 * theta_tilde.dot(&(gains.gamma_inv() * theta_tilde))
}

/// `(beta2/beta1) exp(lambda1 T) |eta(0)| exp(-lambda1 t)`.
pub fn exponential_envelope(t: f64, bounds: &StabilityBounds, eta0_norm: f64) -> Result<f64> {
    let t_excite = bounds.t_excite.ok_or(IclError::EnvelopeUnavailable)?;
    Ok(bounds.beta2 / bounds.beta1 * eta0_norm * (bounds.lambda1 * (t_excite - t)).exp())
}

/// `x_meas = x_true + nu`, `nu ~ N(0, sigma^2 I)`. With `sigma = 0` no draw
/// is made and the state is returned unchanged.
pub fn add_measurement_noise<R: Rng + ?Sized>(x_true: &DVector<f64>, sigma: f64, rng: &mut R) -> DVector<f64> {
    if sigma == 0.0 {
        return x_true.clone();
    }
    x_true.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
}

/// A history-stack candidate formed during a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub t: f64,
    pub entry: StackEntry,
    pub accepted: bool,
    pub lambda_min: f64,
    pub stack_size: usize,
}

/// Compact record of one recording event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingLog {
    pub t: f64,
    pub lambda_min: f64,
    pub stack_size: usize,
    pub accepted: bool,
}

/// Step-to-step behaviour of the Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCheck {
    /// Largest `(V_{k+1} - V_k) / (1 + V_k)` over all steps.
    pub max_relative_increase: f64,
    /// Steps after excitation with `|e| > 1e-6` where `V` did not strictly drop.
    pub strict_decrease_violations: usize,
    pub steps_checked: usize,
}

/// Logged series of one trial on the decimated grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub times: Vec<f64>,
    /// Row-major, `times.len() x n`, true tracking error.
    pub tracking_error: Vec<f64>,
    /// Row-major, `times.len() x m`.
    pub theta_tilde: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub lyapunov: Vec<f64>,
    /// Exponential envelope on the grid; empty when excitation was never reached.
    pub envelope: Vec<f64>,
    pub t_excite: Option<f64>,
    pub diverged_at: Option<f64>,
    pub bounds: StabilityBounds,
    pub eta0_norm: f64,
    pub lyapunov_check: LyapunovCheck,
    pub recordings: Vec<RecordingLog>,
    /// First three scalar noise draws, for paired-run verification.
    pub first_noise: Vec<f64>,
}

impl TrialResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn error_row(&self, i: usize) -> &[f64] {
        &self.tracking_error[i * self.n..(i + 1) * self.n]
    }

    pub fn theta_tilde_row(&self, i: usize) -> &[f64] {
        &self.theta_tilde[i * self.m..(i + 1) * self.m]
    }

    /// `|eta| = |[e; theta_tilde]|` at logged row `i`.
    pub fn eta_norm(&self, i: usize) -> f64 {
        self.error_row(i)
            .iter()
            .chain(self.theta_tilde_row(i))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Per-channel RMS of `e_1..e_n, theta_tilde_1..theta_tilde_m` over `[start, end]`.
    pub fn rms(&self, start: f64, end: f64) -> Result<Vec<f64>> {
        let mut out = rms_window(&self.times, &self.tracking_error, self.n, (start, end))?;
        out.extend(rms_window(&self.times, &self.theta_tilde, self.m, (start, end))?);
        Ok(out)
    }

    /// Columns `t, e1..en, thetatilde1..m, lambda_min, V, envelope`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|i| format!("e{i}")));
        header.extend((1..=self.m).map(|i| format!("thetatilde{i}")));
        header.extend(["lambda_min", "V", "envelope"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![fmt_float(self.times[i])];
            row.extend(self.error_row(i).iter().map(|&v| fmt_float(v)));
            row.extend(self.theta_tilde_row(i).iter().map(|&v| fmt_float(v)));
            row.push(fmt_float(self.lambda_min[i]));
            row.push(fmt_float(self.lyapunov[i]));
            row.push(fmt_float(self.envelope.get(i).copied().unwrap_or(f64::NAN)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// One row per recording attempt: `t, lambda_min, stack_size, accepted`.
    pub fn write_recordings_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,lambda_min,stack_size,accepted")?;
        for r in &self.recordings {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_float(r.t),
                fmt_float(r.lambda_min),
                r.stack_size,
                r.accepted as u8
            )?;
        }
        Ok(())
    }
}

/// What happened during one call to [`Trial::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Time at the start of the step.
    pub t: f64,
    pub recording: Option<Recording>,
}

/// A running closed-loop trial. [`run_trial`] drives it to completion; the
/// stepping interface exists so callers can inspect the buffer, stack and
/// estimate between steps.
pub struct Trial {
    config: TrialConfig,
    model: PlantModel,
    traj: DesiredTrajectory,
    n: usize,
    m: usize,
    steps: usize,
    k: usize,
    x: DVector<f64>,
    theta_hat: DVector<f64>,
    buffer: Option<IntegrationBuffer>,
    stack: Option<HistoryStack>,
    propagator: AffinePropagator,
    rng: ChaCha8Rng,
    record_every: usize,
    filter_half: usize,
    t_excite: Option<f64>,
    diverged_at: Option<f64>,
    prev_v: Option<(f64, f64)>,
    check: LyapunovCheck,
    first_noise: Vec<f64>,
    result: TrialResult,
}

impl Trial {
    pub fn new(config: TrialConfig) -> Result<Self> {
        let (model, traj) = catalog::lookup(&config.model)?;
        Self::with_model(config, model, traj)
    }

    /// Runs against an explicit plant and trajectory instead of a catalog entry.
    pub fn with_model(config: TrialConfig, model: PlantModel, traj: DesiredTrajectory) -> Result<Self> {
        config.validate(&model)?;
        if traj.n() != model.n() {
            return Err(IclError::Dimension {
                what: "desired trajectory",
                expected: model.n().to_string(),
                got: traj.n().to_string(),
            });
        }
        let (n, m) = (model.n(), model.m());
        let method = config.method;
        let buffer = if method.uses_stack() {
            Some(IntegrationBuffer::new(config.delta_t, config.step_h)?)
        } else {
            None
        };
        let stack = if method.uses_stack() {
            Some(HistoryStack::with_margin(config.stack_size, m, DEFAULT_RECORD_MARGIN)?)
        } else {
            None
        };
        let record_every = ((0.5 * config.delta_t / config.step_h).round() as usize).max(1);
        let filter_half = filter_half_width(config.filter_window, config.step_h);

        let theta_tilde0 = model.true_theta() - &config.theta_hat0;
        let (xd0, _) = traj.eval(0.0)?;
        let e0 = &config.x0 - xd0;
        let eta0_norm = (e0.norm_squared() + theta_tilde0.norm_squared()).sqrt();

        let result = TrialResult {
            method,
            n,
            m,
            times: Vec::new(),
            tracking_error: Vec::new(),
            theta_tilde: Vec::new(),
            lambda_min: Vec::new(),
            lyapunov: Vec::new(),
            envelope: Vec::new(),
            t_excite: None,
            diverged_at: None,
            bounds: StabilityBounds::new(&config.gains, config.lambda_bar, None),
            eta0_norm,
            lyapunov_check: LyapunovCheck {
                max_relative_increase: f64::NEG_INFINITY,
                strict_decrease_violations: 0,
                steps_checked: 0,
            },
            recordings: Vec::new(),
            first_noise: Vec::new(),
        };

        Ok(Trial {
            steps: config.steps(),
            k: 0,
            x: config.x0.clone(),
            theta_hat: config.theta_hat0.clone(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            check: result.lyapunov_check,
            config,
            model,
            traj,
            n,
            m,
            buffer,
            stack,
            propagator: AffinePropagator::Identity,
            record_every,
            filter_half,
            t_excite: None,
            diverged_at: None,
            prev_v: None,
            first_noise: Vec::new(),
            result,
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn model(&self) -> &PlantModel {
        &self.model
    }

    /// Time of the current state.
    pub fn time(&self) -> f64 {
        self.k as f64 * self.config.step_h
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn buffer(&self) -> Option<&IntegrationBuffer> {
        self.buffer.as_ref()
    }

    pub fn stack(&self) -> Option<&HistoryStack> {
        self.stack.as_ref()
    }

    pub fn t_excite(&self) -> Option<f64> {
        self.t_excite
    }

    pub fn diverged_at(&self) -> Option<f64> {
        self.diverged_at
    }

    pub fn is_finished(&self) -> bool {
        self.k >= self.steps || self.diverged_at.is_some()
    }

    fn tracking_error(&self, t: f64) -> Result<DVector<f64>> {
        let (xd, _) = self.traj.eval(t)?;
        Ok(&self.x - xd)
    }

    /// Logs the true state at the current time and updates the Lyapunov check.
    fn observe(&mut self) -> Result<()> {
        let t = self.time();
        let e = self.tracking_error(t)?;
        let theta_tilde = self.model.true_theta() - &self.theta_hat;
        let v = lyapunov(&e, &theta_tilde, &self.config.gains);

        if let Some((prev, prev_t)) = self.prev_v {
            let c = &mut self.check;
            c.steps_checked += 1;
            c.max_relative_increase = c.max_relative_increase.max((v - prev) / (1.0 + prev));
            if self.t_excite.is_some_and(|te| prev_t >= te) && e.norm() > 1e-6 && !(v < prev) {
                c.strict_decrease_violations += 1;
            }
        }
        self.prev_v = Some((v, t));

        if self.k % self.config.decimation == 0 {
            let r = &mut self.result;
            r.times.push(t);
            r.tracking_error.extend(e.iter());
            r.theta_tilde.extend(theta_tilde.iter());
            r.lambda_min.push(self.stack.as_ref().map_or(0.0, |s| s.lambda_min()));
            r.lyapunov.push(v);
        }
        Ok(())
    }

    fn draw_noise(&mut self) -> DVector<f64> {
        let sigma = self.config.noise_sigma;
        let nu = add_measurement_noise(&DVector::zeros(self.n), sigma, &mut self.rng);
        if sigma > 0.0 && self.first_noise.len() < 3 {
            let need = 3 - self.first_noise.len();
            self.first_noise.extend(nu.iter().take(need));
        }
        nu
    }

    fn candidate(&self, t: f64) -> Result<Option<StackEntry>> {
        let buffer = self.buffer.as_ref().expect("stack methods keep a buffer");
        match self.config.method {
            Method::Gradient => Ok(None),
            Method::IntegralCl => {
                if t <= self.config.delta_t {
                    return Ok(None);
                }
                match buffer.window_integrals(t) {
                    Ok(w) => Ok(Some(StackEntry::from_window(t, &w)?)),
                    Err(IclError::NotReady(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            }
            Method::DerivativeCl => {
                let samples = buffer.samples();
                let k = self.filter_half;
                if samples.len() < 2 * k + 3 {
                    return Ok(None);
                }
                let centre = &samples[samples.len() - 2 - k];
                match estimate_state_derivative(buffer, self.config.filter_window, centre.t) {
                    Ok(xdot) => Ok(Some(StackEntry::new(
                        centre.t,
                        centre.y.clone(),
                        xdot,
                        centre.u.clone(),
                    )?)),
                    Err(IclError::NotReady(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn rebuild_propagator(&mut self) {
        let stack = self.stack.as_ref().expect("stack methods keep a stack");
        let g = &self.config.gains;
        let (n, m) = (self.n, self.m);
        let mut lin = DMatrix::zeros(n + m, n + m);
        let mut forcing = DVector::zeros(n + m);
        lin.view_mut((n, n), (m, m))
            .copy_from(&(g.gamma() * stack.gram() * -g.k_cl()));
        forcing.rows_mut(n, m).copy_from(&(g.gamma() * stack.rhs() * g.k_cl()));
        self.propagator = AffinePropagator::new(&lin, &forcing, self.config.step_h);
    }

    fn record(&mut self, t: f64) -> Result<Option<Recording>> {
        let Some(entry) = self.candidate(t)? else {
            return Ok(None);
        };
        let stack = self.stack.as_mut().expect("stack methods keep a stack");
        let accepted = stack.try_record(entry.clone())?;
        let (lambda_min, stack_size) = (stack.lambda_min(), stack.len());
        if accepted {
            self.rebuild_propagator();
        }
        if self.t_excite.is_none() && lambda_min >= self.config.lambda_bar {
            self.t_excite = Some(t);
        }
        self.result.recordings.push(RecordingLog {
            t,
            lambda_min,
            stack_size,
            accepted,
        });
        Ok(Some(Recording {
            t,
            entry,
            accepted,
            lambda_min,
            stack_size,
        }))
    }

    /// Advances the trial by one step. Divergence is flagged, not returned as an error.
    pub fn step(&mut self) -> Result<StepReport> {
        if self.is_finished() {
            return Err(IclError::InvalidConfig("trial already finished".into()));
        }
        let t = self.time();
        match self.advance(t) {
            Ok(report) => Ok(report),
            Err(IclError::Diverged { t }) => {
                self.diverged_at = Some(t);
                Ok(StepReport { t, recording: None })
            }
            Err(e) => Err(e),
        }
    }

    fn advance(&mut self, t: f64) -> Result<StepReport> {
        self.observe()?;

        let nu = self.draw_noise();
        let noiseless = self.config.noise_sigma == 0.0;
        let x_meas = &self.x + &nu;
        let ct = control_terms(&x_meas, t, &self.theta_hat, &self.traj, &self.config.gains, &self.model)?;

        let mut recording = None;
        if let Some(buffer) = self.buffer.as_mut() {
            buffer.push(WindowSample {
                t,
                x: x_meas,
                y: ct.y,
                u: ct.u,
            })?;
            if self.k > 0 && self.k % self.record_every == 0 {
                recording = self.record(t)?;
            }
        }

        let (n, m) = (self.n, self.m);
        let (model, traj, gains) = (&self.model, &self.traj, &self.config.gains);
        let theta = model.true_theta();
        let field = |s: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let x = y.rows(0, n).into_owned();
            let theta_hat = y.rows(n, m).into_owned();
            let y_true = model.regressor(&x, s).map_err(|_| IclError::Diverged { t: s })?;
            let (xd, xd_dot) = traj.eval(s)?;
            let (y_meas, e) = if noiseless {
                (y_true.clone(), x - xd)
            } else {
                let xm = x + &nu;
                let ym = model.regressor(&xm, s).map_err(|_| IclError::Diverged { t: s })?;
                (ym, xm - xd)
            };
            let u = xd_dot - &y_meas * &theta_hat - gains.k() * &e;
            let mut out = DVector::zeros(n + m);
            out.rows_mut(0, n).copy_from(&(y_true * theta + u));
            out.rows_mut(n, m).copy_from(&(gains.gamma() * y_meas.tr_mul(&e)));
            Ok(out)
        };

        let mut aug = DVector::zeros(n + m);
        aug.rows_mut(0, n).copy_from(&self.x);
        aug.rows_mut(n, m).copy_from(&self.theta_hat);
        let next = lawson_rk4_step(field, t, &aug, self.config.step_h, &self.propagator)?;

        let t_next = t + self.config.step_h;
        if next.iter().any(|v| !v.is_finite()) || next.rows(0, n).norm() > DIVERGENCE_NORM {
            return Err(IclError::Diverged { t: t_next });
        }
        self.x = next.rows(0, n).into_owned();
        self.theta_hat = next.rows(n, m).into_owned();
        self.k += 1;
        Ok(StepReport { t, recording })
    }

    /// Runs the remaining steps and returns the logged result.
    pub fn run(mut self) -> Result<TrialResult> {
        while !self.is_finished() {
            self.step()?;
        }
        self.finish()
    }

    /// Closes the log (final observation, envelope) and returns the result.
    pub fn finish(mut self) -> Result<TrialResult> {
        if self.diverged_at.is_none() {
            self.observe()?;
        }
        let mut r = self.result;
        r.t_excite = self.t_excite;
        r.diverged_at = self.diverged_at;
        r.lyapunov_check = self.check;
        r.first_noise = self.first_noise;
        r.bounds = StabilityBounds::new(&self.config.gains, self.config.lambda_bar, self.t_excite);
        if r.bounds.t_excite.is_some() {
            r.envelope = r
                .times
                .iter()
                .map(|&t| exponential_envelope(t, &r.bounds, r.eta0_norm))
                .collect::<Result<_>>()?;
        }
        Ok(r)
    }
}

/// Runs one closed-loop trial to completion.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    Trial::new(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{two_state_plant, SCALAR_LINEAR, TWO_STATE};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn lyapunov_examples() {
        let g = Gains::scalar(2, 4, 1.0, 2.0, 0.1).unwrap();
        assert_eq!(lyapunov(&DVector::zeros(2), &DVector::zeros(4), &g), 0.0);
        assert_eq!(lyapunov(&v(&[1.0, 0.0]), &DVector::zeros(4), &g), 0.5);
        assert!((lyapunov(&DVector::zeros(2), &v(&[2.0, 0.0, 0.0, 0.0]), &g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_examples() {
        let g = Gains::scalar(2, 4, 1.0, 1.0, 10.0).unwrap();
        let b = StabilityBounds::new(&g, 0.1, Some(0.0));
        assert_eq!((b.beta1, b.beta2), (0.5, 0.5));
        assert!((b.lambda1 - 2.0).abs() < 1e-15);
        assert!((exponential_envelope(0.0, &b, 3.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((exponential_envelope(1.5, &b, 3.0).unwrap() - 3.0 * (-3.0f64).exp()).abs() < 1e-14);

        let g = Gains::scalar(2, 4, 2.0, 4.0, 1.0).unwrap();
        let b = StabilityBounds::new(&g, 1e-4, Some(2.0));
        assert_eq!(b.beta1, 0.125);
        assert_eq!(b.beta2, 0.5);
        let mut last = f64::INFINITY;
        for i in 0..100 {
            let env = exponential_envelope(2.0 + i as f64, &b, 1.0).unwrap();
            assert!(env < last);
            last = env;
        }
        let unset = StabilityBounds::new(&g, 1e-4, None);
        assert!(matches!(
            exponential_envelope(1.0, &unset, 1.0),
            Err(IclError::EnvelopeUnavailable)
        ));
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = v(&[-0.0, 1.25, f64::MIN_POSITIVE]);
        let y = add_measurement_noise(&x, 0.0, &mut rng);
        assert!(x.iter().zip(y.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn config_validation() {
        let g = Gains::scalar(2, 4, 1.0, 1.0, 0.1).unwrap();
        let p = two_state_plant();
        let mut c = TrialConfig::new(TWO_STATE, Method::IntegralCl, g.clone(), 0.5).unwrap();
        assert!(c.validate(&p).is_ok());
        c.duration = 0.4;
        assert!(c.validate(&p).is_err());
        let mut c = TrialConfig::new(TWO_STATE, Method::IntegralCl, g.clone(), 0.5).unwrap();
        c.noise_sigma = -1.0;
        assert!(c.validate(&p).is_err());
        let mut c = TrialConfig::new(TWO_STATE, Method::IntegralCl, g, 0.5).unwrap();
        c.step_h = 0.0;
        assert!(c.validate(&p).is_err());
        let wrong = Gains::scalar(1, 1, 1.0, 1.0, 0.1).unwrap();
        assert!(TrialConfig::new(TWO_STATE, Method::Gradient, wrong, 0.5)
            .unwrap()
            .validate(&p)
            .is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn estimate_unchanged_without_error_or_data() {
        // perfect tracking from x_d(0) with theta_hat = theta: e stays ~0, theta_hat fixed
        let g = Gains::scalar(2, 4, 5.0, 1.0, 0.1).unwrap();
        let mut c = TrialConfig::new(TWO_STATE, Method::Gradient, g, 0.5).unwrap();
        c.theta_hat0 = two_state_plant().true_theta().clone();
        c.duration = 1.0;
        let mut trial = Trial::new(c).unwrap();
        trial.step().unwrap();
        let e = trial.tracking_error(trial.time()).unwrap();
        assert!(e.norm() <= 1e-8, "{}", e.norm());
        assert_eq!(trial.theta_hat(), two_state_plant().true_theta());
    }

    #[test]
    fn scalar_model_converges_with_icl() {
        let g = Gains::scalar(1, 1, 2.0, 1.0, 0.5).unwrap();
        let mut c = TrialConfig::new(SCALAR_LINEAR, Method::IntegralCl, g, 0.5).unwrap();
        c.duration = 30.0;
        c.step_h = 0.002;
        let r = run_trial(&c).unwrap();
        assert!(!r.diverged());
        let last = r.len() - 1;
        assert!(
            r.theta_tilde_row(last)[0].abs() < 1e-3 * 1.5,
            "{:?}",
            r.theta_tilde_row(last)
        );
        assert!(r.t_excite.is_some());
    }

    #[test]
    fn divergence_is_flagged() {
        let g = Gains::scalar(1, 1, 0.01, 1e-6, 0.1).unwrap();
        let mut c = TrialConfig::new(SCALAR_LINEAR, Method::Gradient, g, 0.5).unwrap();
        c.x0 = v(&[1.0]);
        c.theta_hat0 = v(&[-200.0]);
        c.step_h = 0.01;
        c.duration = 50.0;
        let r = run_trial(&c).unwrap();
        assert!(r.diverged());
        assert!(r.envelope.is_empty());
    }
}
