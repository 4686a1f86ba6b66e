//! Quick invariant suite behind `icl check`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimator::{estimate_state_derivative, icl_term, Gains};
use crate::memory::{IntegrationBuffer, WindowSample};
use crate::model::TWO_STATE;
use crate::sim::{add_measurement_noise, run_trial, Method, Trial, TrialConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Worst residuals over the recording instants of a noiseless integral run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingResiduals {
    /// max `|x(t) - x(t - dt) - script_Y theta - script_U|`
    pub ftc: f64,
    /// max `|icl_term - k_cl Gamma G theta_tilde| / (1 + |theta_hat|)`
    pub equivalence: f64,
    pub recordings: usize,
}

/// Steps a trial and measures both residuals at every recording instant.
pub fn recording_residuals(config: TrialConfig) -> Result<RecordingResiduals> {
    let mut trial = Trial::new(config)?;
    let theta = trial.model().true_theta().clone();
    let gains = trial.config().gains.clone();
    let mut worst = RecordingResiduals {
        ftc: 0.0,
        equivalence: 0.0,
        recordings: 0,
    };
    while !trial.is_finished() {
        let theta_hat = trial.theta_hat().clone();
        let report = trial.step()?;
        let Some(rec) = report.recording else { continue };
        let e = &rec.entry;
        let ftc = (e.response() - e.regressor() * &theta - e.input()).norm();
        let stack = trial.stack().expect("integral runs keep a stack");
        let mut gram = DMatrix::zeros(theta.len(), theta.len());
        for s in stack.entries() {
            gram += s.regressor().transpose() * s.regressor();
        }
        let ideal = gains.gamma() * gram * (&theta - &theta_hat) * gains.k_cl();
        let gap = (icl_term(stack, &theta_hat, &gains) - ideal).norm() / (1.0 + theta_hat.norm());
        worst.ftc = worst.ftc.max(ftc);
        worst.equivalence = worst.equivalence.max(gap);
        worst.recordings += 1;
    }
    Ok(worst)
}

fn fast_config(method: Method, duration: f64) -> Result<TrialConfig> {
    let gains = Gains::scalar(2, 4, 10.0, 1.0, 0.1)?;
    let mut c = TrialConfig::new(TWO_STATE, method, gains, 0.5)?;
    c.duration = duration;
    Ok(c)
}

/// Runs the invariant checks on short noiseless trials (a few seconds of compute).
pub fn run_checks() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();

    let res = recording_residuals(fast_config(Method::IntegralCl, 10.0)?)?;
    out.push(outcome(
        "window-integral identity",
        res.ftc <= 1e-5 && res.recordings > 0,
        format!(
            "max residual {:.3e} over {} recordings (bound 1e-5)",
            res.ftc, res.recordings
        ),
    ));
    out.push(outcome(
        "cl-term equivalence",
        res.equivalence <= 1e-6,
        format!("max scaled gap {:.3e} (bound 1e-6)", res.equivalence),
    ));

    let r = run_trial(&fast_config(Method::IntegralCl, 10.0)?)?;
    let inc = r.lyapunov_check.max_relative_increase;
    out.push(outcome(
        "lyapunov non-increasing",
        inc <= 1e-9 && !r.diverged(),
        format!(
            "max relative increase {inc:.3e} over {} steps",
            r.lyapunov_check.steps_checked
        ),
    ));
    let lam_ok = r.recordings.windows(2).all(|w| w[1].lambda_min >= w[0].lambda_min);
    out.push(outcome(
        "excitation monotone",
        lam_ok && r.t_excite.is_some(),
        format!("t_excite = {:?}", r.t_excite),
    ));

    let h = 0.0004;
    let mut buf = IntegrationBuffer::new(1.0, h)?;
    for k in 0..3000 {
        let t = k as f64 * h;
        buf.push(WindowSample {
            t,
            x: DVector::from_vec(vec![t, 2.0 * t]),
            y: DMatrix::zeros(2, 1),
            u: DVector::zeros(2),
        })?;
    }
    let mut worst = 0.0f64;
    for w in [0.1, 0.5] {
        let d = estimate_state_derivative(&buf, w, 2000.0 * h)?;
        worst = worst.max((d[0] - 1.0).abs()).max((d[1] - 2.0).abs());
    }
    out.push(outcome(
        "derivative exact on linear signals",
        worst <= 1e-12,
        format!("max error {worst:.3e}"),
    ));

    let sigma = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let zero = DVector::zeros(1);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| add_measurement_noise(&zero, sigma, &mut rng)[0])
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let std = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
    out.push(outcome(
        "noise statistics",
        (std / sigma - 1.0).abs() <= 0.01 && mean.abs() <= 0.0012,
        format!("mean {mean:.2e}, std {std:.5}"),
    ));

    let mut noisy = fast_config(Method::DerivativeCl, 3.0)?;
    noisy.noise_sigma = 0.3;
    noisy.seed = 42;
    let same = run_trial(&noisy)? == run_trial(&noisy)?;
    out.push(outcome("determinism", same, "two runs with seed 42".to_string()));

    Ok(out)
}
