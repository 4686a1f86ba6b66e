//! Browser bindings for the adaptive-control simulator.
//!
//! Every export has a plain Rust twin returning `Result<_, String>` so the
//! numerics can be tested natively; the `#[wasm_bindgen]` wrappers only
//! convert errors.

use icl_core::estimator::estimate_state_derivative;
use icl_core::memory::WindowSample;
use icl_core::sim::add_measurement_noise;
use icl_core::{run_trial, Gains, IntegrationBuffer, Method, TrialConfig, TrialResult};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const MODEL: &str = "two-state";

/// Gains and run settings shared by the demo operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoParams {
    pub k_s: f64,
    pub gamma_s: f64,
    pub k_cl: f64,
    pub delta_t: f64,
    pub noise_sigma: f64,
    pub duration: f64,
    pub seed: u64,
}

fn config(method: Method, p: &DemoParams) -> Result<TrialConfig, String> {
    let gains = Gains::scalar(2, 4, p.k_s, p.gamma_s, p.k_cl).map_err(|e| e.to_string())?;
    let mut c = TrialConfig::new(MODEL, method, gains, p.delta_t).map_err(|e| e.to_string())?;
    c.noise_sigma = p.noise_sigma;
    c.duration = p.duration;
    c.seed = p.seed;
    // coarser log for plotting
    c.decimation = 100;
    Ok(c)
}

/// Per logged sample: `t, |e|, |theta_tilde|, lambda_min, V, envelope` (NaN when unavailable).
pub fn trace(method: Method, p: &DemoParams) -> Result<Vec<f64>, String> {
    let r = run_trial(&config(method, p)?).map_err(|e| e.to_string())?;
    Ok(flatten(&r))
}

fn flatten(r: &TrialResult) -> Vec<f64> {
    let norm = |row: &[f64]| row.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = Vec::with_capacity(r.len() * 6);
    for i in 0..r.len() {
        out.extend([
            r.times[i],
            norm(r.error_row(i)),
            norm(r.theta_tilde_row(i)),
            r.lambda_min[i],
            r.lyapunov[i],
            r.envelope.get(i).copied().unwrap_or(f64::NAN),
        ]);
    }
    out
}

/// RMS of `e1, e2, theta_tilde1..4` over the last 40% of the run, integral
/// method first then derivative method (12 values). Diverged runs give NaN.
pub fn compare_rms(p: &DemoParams) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(12);
    for method in [Method::IntegralCl, Method::DerivativeCl] {
        let r = run_trial(&config(method, p)?).map_err(|e| e.to_string())?;
        if r.diverged() {
            out.extend([f64::NAN; 6]);
            continue;
        }
        let rms = r.rms(0.6 * p.duration, p.duration).map_err(|e| e.to_string())?;
        out.extend(rms);
    }
    Ok(out)
}

/// Derivative estimate of a noisy `sin 2t` over 6 s.
/// Per point: `t, true derivative, estimate`.
pub fn derivative_trace(filter_window: f64, sigma: f64, seed: u64) -> Result<Vec<f64>, String> {
    if !(0.0..=2.0).contains(&filter_window) {
        return Err(format!("filter window must lie in [0, 2], got {filter_window}"));
    }
    let h = 0.0004;
    let total = 15_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = IntegrationBuffer::new(total as f64 * h, h).map_err(|e| e.to_string())?;
    for k in 0..=total {
        let t = k as f64 * h;
        let clean = DVector::from_element(1, (2.0 * t).sin());
        buf.push(WindowSample {
            t,
            x: add_measurement_noise(&clean, sigma, &mut rng),
            y: DMatrix::zeros(1, 1),
            u: DVector::zeros(1),
        })
        .map_err(|e| e.to_string())?;
    }
    let mut out = Vec::new();
    for k in (0..=total).step_by(50) {
        let t = k as f64 * h;
        if let Ok(d) = estimate_state_derivative(&buf, filter_window, t) {
            out.extend([t, 2.0 * (2.0 * t).cos(), d[0]]);
        }
    }
    Ok(out)
}

fn parse_method(name: &str) -> Result<Method, String> {
    name.parse::<Method>().map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn params(k_s: f64, gamma_s: f64, k_cl: f64, delta_t: f64, noise_sigma: f64, duration: f64, seed: u32) -> DemoParams {
    DemoParams {
        k_s,
        gamma_s,
        k_cl,
        delta_t,
        noise_sigma,
        duration,
        seed: seed as u64,
    }
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    method: &str,
    k_s: f64,
    gamma_s: f64,
    k_cl: f64,
    delta_t: f64,
    noise_sigma: f64,
    duration: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    let m = parse_method(method).map_err(|e| JsError::new(&e))?;
    trace(m, &params(k_s, gamma_s, k_cl, delta_t, noise_sigma, duration, seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare(
    k_s: f64,
    gamma_s: f64,
    k_cl: f64,
    delta_t: f64,
    noise_sigma: f64,
    duration: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    compare_rms(&params(k_s, gamma_s, k_cl, delta_t, noise_sigma, duration, seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn derivative_demo(filter_window: f64, sigma: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    derivative_trace(filter_window, sigma, seed as u64).map_err(|e| JsError::new(&e))
}
