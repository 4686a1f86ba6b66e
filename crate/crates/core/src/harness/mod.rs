//! Monte Carlo comparison of integral and derivative concurrent learning.
//!
//! Each trial draws one gain set `(k_s, gamma_s, k_cl, delta_t)` and runs the
//! plant once with each method on the same noise stream. Per-trial RNGs are
//! derived from the master seed and the trial index, and results are folded
//! in index order, so the output does not depend on the worker count.

pub mod check;
mod config;
pub mod output;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IclError, Result};
use crate::estimator::Gains;
use crate::model::catalog;
use crate::sim::{run_trial, Method, TrialConfig, TrialResult};

pub use config::{McConfig, DEFAULT_TRIALS, FULL_TRIALS};
pub use output::{emit_outputs, OutputFiles};

/// Methods compared by the Monte Carlo run, in output order.
pub const COMPARED: [Method; 2] = [Method::IntegralCl, Method::DerivativeCl];

/// One draw of the sampled gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDraw {
    pub k_s: f64,
    pub gamma_s: f64,
    pub k_cl: f64,
    pub delta_t: f64,
    pub filter_window: f64,
    /// Seed of the measurement-noise stream shared by both runs of the trial.
    pub noise_seed: u64,
}

/// Paired configurations for one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPair {
    pub index: usize,
    pub draw: GainDraw,
    pub icl: TrialConfig,
    pub dcl: TrialConfig,
}

/// RNG for trial `index`: the master seed selects the key, the index the stream.
pub fn trial_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// Draws the gains of one trial and builds the paired configurations.
pub fn sample_trial_config<R: Rng + ?Sized>(rng: &mut R, mc: &McConfig, index: usize) -> Result<TrialPair> {
    let (plant, _) = catalog::lookup(&mc.model)?;
    let k_s = open_uniform(rng, mc.k_s_range);
    let gamma_s = open_uniform(rng, mc.gamma_s_range);
    let k_cl = open_uniform(rng, mc.k_cl_range);
    let delta_t = open_uniform(rng, mc.delta_t_range);
    let noise_seed = rng.gen::<u64>();
    let filter_window = mc.filter_window_max.min(delta_t);

    let gains = Gains::scalar(plant.n(), plant.m(), k_s, gamma_s, k_cl)?;
    let mut icl = TrialConfig::new(&mc.model, Method::IntegralCl, gains, delta_t)?;
    icl.filter_window = filter_window;
    icl.stack_size = mc.stack_size;
    icl.noise_sigma = mc.noise_sigma;
    icl.step_h = mc.step_h;
    icl.duration = mc.duration;
    icl.seed = noise_seed;
    icl.lambda_bar = mc.lambda_bar;
    icl.decimation = mc.decimation;
    let dcl = TrialConfig {
        method: Method::DerivativeCl,
        ..icl.clone()
    };
    Ok(TrialPair {
        index,
        draw: GainDraw {
            k_s,
            gamma_s,
            k_cl,
            delta_t,
            filter_window,
            noise_seed,
        },
        icl,
        dcl,
    })
}

/// Per-channel RMS of a row-major series over samples with `t` in `[start, end]`.
pub fn rms_window(times: &[f64], values: &[f64], channels: usize, (start, end): (f64, f64)) -> Result<Vec<f64>> {
    if channels == 0 || values.len() != times.len() * channels {
        return Err(IclError::Dimension {
            what: "rms series",
            expected: format!("{} x {channels}", times.len()),
            got: values.len().to_string(),
        });
    }
    let tol = 1e-9 * end.abs().max(1.0);
    let mut sums = vec![0.0; channels];
    let mut count = 0usize;
    for (i, &t) in times.iter().enumerate() {
        if t >= start - tol && t <= end + tol {
            count += 1;
            for (s, v) in sums.iter_mut().zip(&values[i * channels..(i + 1) * channels]) {
                *s += v * v;
            }
        }
    }
    if count == 0 {
        return Err(IclError::EmptyWindow { start, end });
    }
    Ok(sums.into_iter().map(|s| (s / count as f64).sqrt()).collect())
}

/// Outcome of one method within one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// `e_1..e_n, theta_tilde_1..theta_tilde_m`; `None` for diverged runs.
    pub rms: Option<Vec<f64>>,
    pub diverged_at: Option<f64>,
    pub t_excite: Option<f64>,
    pub first_noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub draw: GainDraw,
    /// Ordered as [`COMPARED`].
    pub outcomes: Vec<MethodOutcome>,
}

/// Aggregates for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean over non-diverged trials of the per-trial RMS rows; NaN when none completed.
    pub mean_rms: Vec<f64>,
    pub completed: usize,
    pub diverged: usize,
    /// Row-major `times x n` mean tracking error over completed trials.
    pub mean_error: Vec<f64>,
    /// Row-major `times x m` mean parameter error over completed trials.
    pub mean_theta_tilde: Vec<f64>,
}

/// Result of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub n: usize,
    pub m: usize,
    pub rms_window: (f64, f64),
    pub trials: Vec<TrialRecord>,
    /// Ordered as [`COMPARED`].
    pub methods: Vec<MethodSummary>,
    /// Logged time grid shared by the mean trajectories.
    pub times: Vec<f64>,
}

impl McSummary {
    pub fn empty(n: usize, m: usize, rms_window: (f64, f64)) -> Self {
        McSummary {
            n,
            m,
            rms_window,
            trials: Vec::new(),
            methods: COMPARED
                .iter()
                .map(|&method| MethodSummary {
                    method,
                    mean_rms: vec![f64::NAN; n + m],
                    completed: 0,
                    diverged: 0,
                    mean_error: Vec::new(),
                    mean_theta_tilde: Vec::new(),
                })
                .collect(),
            times: Vec::new(),
        }
    }

    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

struct PairRun {
    index: usize,
    draw: GainDraw,
    results: Vec<Result<TrialResult>>,
}

fn run_pair(pair: &TrialPair) -> PairRun {
    PairRun {
        index: pair.index,
        draw: pair.draw,
        results: vec![run_trial(&pair.icl), run_trial(&pair.dcl)],
    }
}

#[cfg(feature = "parallel")]
fn run_chunk(pool: &rayon::ThreadPool, chunk: &[TrialPair]) -> Vec<PairRun> {
    use rayon::prelude::*;
    pool.install(|| chunk.par_iter().map(run_pair).collect())
}

struct Accumulator {
    sums: Vec<Vec<f64>>,
    err_sum: Vec<Vec<f64>>,
    theta_sum: Vec<Vec<f64>>,
    completed: Vec<usize>,
    diverged: Vec<usize>,
}

/// Runs every paired trial and aggregates the comparison.
///
/// Trials run in batches on a pool of `mc.threads` workers; each batch is
/// folded in trial order. Diverged runs are counted and excluded from means.
pub fn run_monte_carlo(mc: &McConfig) -> Result<McSummary> {
    mc.validate()?;
    let (plant, _) = catalog::lookup(&mc.model)?;
    let (n, m) = (plant.n(), plant.m());
    let pairs = (0..mc.trials)
        .map(|i| sample_trial_config(&mut trial_rng(mc.seed, i), mc, i))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = McSummary::empty(n, m, mc.rms_window);
    let methods = COMPARED.len();
    let mut acc = Accumulator {
        sums: vec![vec![0.0; n + m]; methods],
        err_sum: vec![Vec::new(); methods],
        theta_sum: vec![Vec::new(); methods],
        completed: vec![0; methods],
        diverged: vec![0; methods],
    };

    #[cfg(feature = "parallel")]
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(mc.threads)
        .build()
        .map_err(|e| IclError::InvalidConfig(format!("cannot start worker pool: {e}")))?;

    for chunk in pairs.chunks(mc.threads.max(1) * 2) {
        #[cfg(feature = "parallel")]
        let runs = run_chunk(&pool, chunk);
        #[cfg(not(feature = "parallel"))]
        let runs: Vec<PairRun> = chunk.iter().map(run_pair).collect();

        for run in runs {
            let mut outcomes = Vec::with_capacity(methods);
            for (j, res) in run.results.into_iter().enumerate() {
                let r = res?;
                let rms = if r.diverged() {
                    acc.diverged[j] += 1;
                    None
                } else {
                    let rms = r.rms(mc.rms_window.0, mc.rms_window.1)?;
                    fold(&mut acc, j, &r, &rms, &mut summary.times);
                    Some(rms)
                };
                outcomes.push(MethodOutcome {
                    method: r.method,
                    rms,
                    diverged_at: r.diverged_at,
                    t_excite: r.t_excite,
                    first_noise: r.first_noise,
                });
            }
            summary.trials.push(TrialRecord {
                index: run.index,
                draw: run.draw,
                outcomes,
            });
        }
    }

    for (j, s) in summary.methods.iter_mut().enumerate() {
        s.completed = acc.completed[j];
        s.diverged = acc.diverged[j];
        if s.completed > 0 {
            let c = s.completed as f64;
            s.mean_rms = acc.sums[j].iter().map(|v| v / c).collect();
            s.mean_error = acc.err_sum[j].iter().map(|v| v / c).collect();
            s.mean_theta_tilde = acc.theta_sum[j].iter().map(|v| v / c).collect();
        }
    }
    Ok(summary)
}

fn fold(acc: &mut Accumulator, j: usize, r: &TrialResult, rms: &[f64], times: &mut Vec<f64>) {
    acc.completed[j] += 1;
    for (s, v) in acc.sums[j].iter_mut().zip(rms) {
        *s += v;
    }
    if times.is_empty() {
        times.clone_from(&r.times);
    }
    for (sum, series) in [
        (&mut acc.err_sum[j], &r.tracking_error),
        (&mut acc.theta_sum[j], &r.theta_tilde),
    ] {
        if sum.is_empty() {
            *sum = vec![0.0; series.len()];
        }
        for (s, v) in sum.iter_mut().zip(series) {
            *s += v;
        }
    }
}
