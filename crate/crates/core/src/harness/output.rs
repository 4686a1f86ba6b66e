//! CSV and manifest files written by a Monte Carlo run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{IclError, Result};
use crate::format::fmt_float;
use crate::sim::Method;

use super::{McConfig, McSummary};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const TRIALS_CSV: &str = "trials.csv";
pub const MEAN_TRAJECTORIES_CSV: &str = "mean_trajectories.csv";
pub const MANIFEST: &str = "manifest.txt";

/// Paths of the files written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub summary: PathBuf,
    pub trials: PathBuf,
    pub mean_trajectories: PathBuf,
    pub manifest: PathBuf,
}

/// Row label used in the comparison table.
pub fn table_label(method: Method) -> &'static str {
    match method {
        Method::IntegralCl => "integral",
        Method::DerivativeCl => "derivative",
        Method::Gradient => "gradient",
    }
}

fn channel_names(n: usize, m: usize, prefix: &str) -> Vec<String> {
    (1..=n)
        .map(|i| format!("{prefix}e{i}"))
        .chain((1..=m).map(|i| format!("{prefix}theta{i}")))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_float)
}

/// Comparison table: one row per method, mean steady-state RMS per channel.
pub fn summary_csv(s: &McSummary) -> String {
    let mut out = String::new();
    let mut header = vec!["method".to_string()];
    header.extend(channel_names(s.n, s.m, ""));
    let _ = writeln!(out, "{}", header.join(","));
    if s.trials.is_empty() {
        return out;
    }
    for ms in &s.methods {
        let mut row = vec![table_label(ms.method).to_string()];
        row.extend(ms.mean_rms.iter().map(|&v| fmt_float(v)));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// One row per (trial, method): sampled gains, divergence, per-channel RMS.
pub fn trials_csv(s: &McSummary) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = [
        "trial",
        "method",
        "k_s",
        "gamma_s",
        "k_cl",
        "delta_t",
        "filter_window",
        "noise_seed",
        "diverged",
        "diverged_at",
        "t_excite",
    ]
    .map(String::from)
    .to_vec();
    header.extend(channel_names(s.n, s.m, "rms_"));
    let _ = writeln!(out, "{}", header.join(","));
    for t in &s.trials {
        for o in &t.outcomes {
            let d = &t.draw;
            let mut row = vec![
                t.index.to_string(),
                table_label(o.method).to_string(),
                fmt_float(d.k_s),
                fmt_float(d.gamma_s),
                fmt_float(d.k_cl),
                fmt_float(d.delta_t),
                fmt_float(d.filter_window),
                d.noise_seed.to_string(),
                (o.diverged_at.is_some() as u8).to_string(),
                opt(o.diverged_at),
                opt(o.t_excite),
            ];
            match &o.rms {
                Some(rms) => row.extend(rms.iter().map(|&v| fmt_float(v))),
                None => row.extend(std::iter::repeat_n(String::new(), s.n + s.m)),
            }
            let _ = writeln!(out, "{}", row.join(","));
        }
    }
    out
}

/// Mean tracking and parameter errors over completed trials, per method.
pub fn mean_trajectories_csv(s: &McSummary) -> String {
    let mut out = String::new();
    let mut header = vec!["t".to_string()];
    for ms in &s.methods {
        header.extend(channel_names(s.n, s.m, &format!("{}_", table_label(ms.method))));
    }
    let _ = writeln!(out, "{}", header.join(","));
    for (i, &t) in s.times.iter().enumerate() {
        let mut row = vec![fmt_float(t)];
        for ms in &s.methods {
            let cell = |series: &Vec<f64>, width: usize, c: usize| {
                series
                    .get(i * width + c)
                    .map_or_else(|| "NaN".to_string(), |&v| fmt_float(v))
            };
            row.extend((0..s.n).map(|c| cell(&ms.mean_error, s.n, c)));
            row.extend((0..s.m).map(|c| cell(&ms.mean_theta_tilde, s.m, c)));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Config echo plus build identifier, divergence counts and every sampled gain.
pub fn manifest(s: &McSummary, mc: &McConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "build = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    out.push_str(&mc.to_kv());
    for ms in &s.methods {
        let _ = writeln!(out, "diverged.{} = {}", table_label(ms.method), ms.diverged);
    }
    for t in &s.trials {
        let d = &t.draw;
        let i = t.index;
        let _ = writeln!(out, "trial.{i}.k_s = {}", fmt_float(d.k_s));
        let _ = writeln!(out, "trial.{i}.gamma_s = {}", fmt_float(d.gamma_s));
        let _ = writeln!(out, "trial.{i}.k_cl = {}", fmt_float(d.k_cl));
        let _ = writeln!(out, "trial.{i}.delta_t = {}", fmt_float(d.delta_t));
        let _ = writeln!(out, "trial.{i}.filter_window = {}", fmt_float(d.filter_window));
        let _ = writeln!(out, "trial.{i}.noise_seed = {}", d.noise_seed);
    }
    out
}

fn write(path: PathBuf, body: String) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|e| IclError::io(&path, e))?;
    Ok(path)
}

/// Writes `summary.csv`, `trials.csv`, `mean_trajectories.csv` and
/// `manifest.txt` into `dir`, creating it if needed.
pub fn emit_outputs(summary: &McSummary, mc: &McConfig, dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(dir).map_err(|e| IclError::io(dir, e))?;
    Ok(OutputFiles {
        summary: write(dir.join(SUMMARY_CSV), summary_csv(summary))?,
        trials: write(dir.join(TRIALS_CSV), trials_csv(summary))?,
        mean_trajectories: write(dir.join(MEAN_TRAJECTORIES_CSV), mean_trajectories_csv(summary))?,
        manifest: write(dir.join(MANIFEST), manifest(summary, mc))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_summary_gives_headers_only() {
        let s = McSummary::empty(2, 4, (60.0, 100.0));
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&s, &McConfig::default(), dir.path()).unwrap();
        for p in [&files.summary, &files.trials, &files.mean_trajectories] {
            let body = fs::read_to_string(p).unwrap();
            assert_eq!(body.lines().count(), 1, "{}", p.display());
            assert!(body.ends_with('\n'));
        }
        assert_eq!(
            fs::read_to_string(&files.summary).unwrap(),
            "method,e1,e2,theta1,theta2,theta3,theta4\n"
        );
        let back = McConfig::load(&files.manifest).unwrap();
        assert_eq!(back, McConfig::default());
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_outputs(
            &McSummary::empty(1, 1, (0.0, 1.0)),
            &McConfig::default(),
            &blocker.join("sub"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
