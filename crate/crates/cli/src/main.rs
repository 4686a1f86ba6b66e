use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use icl_core::harness::check::run_checks;
use icl_core::harness::emit_outputs;
use icl_core::harness::output::summary_csv;
use icl_core::harness::FULL_TRIALS;
use icl_core::model::catalog;
use icl_core::{run_monte_carlo, run_trial, Gains, McConfig, Method, TrialConfig};
use nalgebra::{DMatrix, DVector};

#[derive(Parser)]
#[command(name = "icl", version, about = "Integral concurrent-learning adaptive control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop trial and write its log as CSV.
    Trial(TrialArgs),
    /// Run the paired integral/derivative Monte Carlo comparison.
    MonteCarlo(McArgs),
    /// Run the invariant checks on a short noiseless configuration.
    Check,
    /// List the registered plant models.
    Models,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long, default_value = "two-state")]
    model: String,
    /// gradient, integral_cl or derivative_cl
    #[arg(long, default_value = "integral_cl")]
    method: Method,
    /// Feedback gain: a scalar or a comma-separated diagonal.
    #[arg(long, default_value = "10")]
    k: String,
    /// Adaptation gain: a scalar or a comma-separated diagonal.
    #[arg(long, default_value = "1")]
    gamma: String,
    #[arg(long, default_value_t = 0.1)]
    k_cl: f64,
    #[arg(long, default_value_t = 0.5)]
    delta_t: f64,
    /// Defaults to min(0.5, delta_t).
    #[arg(long)]
    filter_window: Option<f64>,
    #[arg(long)]
    stack_size: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long)]
    step_h: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Comma-separated initial state (default zeros).
    #[arg(long)]
    x0: Option<String>,
    /// Comma-separated initial estimate (default zeros).
    #[arg(long)]
    theta_hat0: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lambda_bar: Option<f64>,
    #[arg(long)]
    decimation: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the recording log (t, lambda_min, stack_size, accepted).
    #[arg(long)]
    recordings: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Use the full trial count.
    #[arg(long, conflicts_with = "trials")]
    full: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, short, env = "ICL_OUTPUT_DIR")]
    out: Option<PathBuf>,
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}`")))
        .collect()
}

fn diag(s: &str, dim: usize, name: &str) -> Result<DMatrix<f64>> {
    let v = parse_list(s)?;
    let d = match v.len() {
        1 => vec![v[0]; dim],
        l if l == dim => v,
        l => bail!("{name} needs 1 or {dim} values, got {l}"),
    };
    Ok(DMatrix::from_diagonal(&DVector::from_vec(d)))
}

fn trial_config(a: &TrialArgs) -> Result<TrialConfig> {
    let (plant, _) = catalog::lookup(&a.model)?;
    let gains = Gains::new(diag(&a.k, plant.n(), "k")?, diag(&a.gamma, plant.m(), "gamma")?, a.k_cl)?;
    let mut c = TrialConfig::new(&a.model, a.method, gains, a.delta_t)?;
    c.noise_sigma = a.noise_sigma;
    c.seed = a.seed;
    if let Some(v) = a.filter_window {
        c.filter_window = v;
    }
    if let Some(v) = a.stack_size {
        c.stack_size = v;
    }
    if let Some(v) = a.step_h {
        c.step_h = v;
    }
    if let Some(v) = a.duration {
        c.duration = v;
    }
    if let Some(v) = &a.x0 {
        c.x0 = DVector::from_vec(parse_list(v)?);
    }
    if let Some(v) = &a.theta_hat0 {
        c.theta_hat0 = DVector::from_vec(parse_list(v)?);
    }
    if let Some(v) = a.lambda_bar {
        c.lambda_bar = v;
    }
    if let Some(v) = a.decimation {
        c.decimation = v;
    }
    Ok(c)
}

fn trial(a: TrialArgs) -> Result<()> {
    let r = run_trial(&trial_config(&a)?)?;
    match &a.out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(f);
            r.write_csv(&mut w)?;
            w.flush()?;
        }
        None => r.write_csv(io::stdout().lock())?,
    }
    if let Some(p) = &a.recordings {
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        let mut w = BufWriter::new(f);
        r.write_recordings_csv(&mut w)?;
        w.flush()?;
    }
    let last = r.len() - 1;
    let tt: f64 = r.theta_tilde_row(last).iter().map(|v| v * v).sum::<f64>().sqrt();
    eprintln!(
        "{}: t_excite = {}, |theta_tilde(end)| = {tt:.3e}{}",
        r.method,
        r.t_excite.map_or("never".into(), |t| format!("{t}")),
        r.diverged_at
            .map_or(String::new(), |t| format!(", diverged at t = {t}"))
    );
    Ok(())
}

fn monte_carlo(a: McArgs) -> Result<()> {
    let mut mc = match &a.config {
        Some(p) => McConfig::load(p)?,
        None => McConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("expected key=value, got `{kv}`"))?;
        mc.set(k.trim(), v.trim()).map_err(anyhow::Error::msg)?;
    }
    if a.full {
        mc.trials = FULL_TRIALS;
    }
    if let Some(v) = a.trials {
        mc.trials = v;
    }
    if let Some(v) = a.seed {
        mc.seed = v;
    }
    if let Some(v) = a.threads {
        mc.threads = v;
    }
    if let Some(v) = a.noise_sigma {
        mc.noise_sigma = v;
    }
    if let Some(v) = a.out {
        mc.output_dir = v;
    }
    mc.validate()?;
    let summary = run_monte_carlo(&mc)?;
    let files = emit_outputs(&summary, &mc, &mc.output_dir)?;
    print!("{}", summary_csv(&summary));
    for ms in &summary.methods {
        if ms.diverged > 0 {
            eprintln!(
                "{}: {} of {} trials diverged (excluded)",
                ms.method, ms.diverged, mc.trials
            );
        }
    }
    eprintln!("wrote {}", files.summary.parent().unwrap_or(&mc.output_dir).display());
    Ok(())
}

fn check() -> Result<bool> {
    let mut ok = true;
    for c in run_checks()? {
        ok &= c.passed;
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Trial(a) => trial(a).map(|_| true),
        Command::MonteCarlo(a) => monte_carlo(a).map(|_| true),
        Command::Check => check(),
        Command::Models => {
            for name in catalog::names() {
                println!("{name}");
            }
            Ok(true)
        }
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
