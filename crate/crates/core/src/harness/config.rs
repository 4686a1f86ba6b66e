//! Flat `key = value` configuration files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{IclError, Result};
use crate::format::fmt_float;
use crate::model::TWO_STATE;
use crate::sim::{
    DEFAULT_DECIMATION, DEFAULT_DURATION, DEFAULT_FILTER_WINDOW, DEFAULT_LAMBDA_BAR, DEFAULT_STACK_SIZE, DEFAULT_STEP,
};

/// Trial count used when none is given.
pub const DEFAULT_TRIALS: usize = 50;
/// Trial count of the full reproduction run.
pub const FULL_TRIALS: usize = 200;

/// Monte Carlo configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub model: String,
    pub trials: usize,
    /// Open interval for the feedback gain scale, `K = k_s I`.
    pub k_s_range: (f64, f64),
    /// Open interval for the adaptation gain scale, `Gamma = gamma_s I`.
    pub gamma_s_range: (f64, f64),
    pub k_cl_range: (f64, f64),
    pub delta_t_range: (f64, f64),
    pub noise_sigma: f64,
    pub step_h: f64,
    pub duration: f64,
    pub stack_size: usize,
    pub rms_window: (f64, f64),
    /// The derivative baseline filters over `min(filter_window_max, delta_t)`.
    pub filter_window_max: f64,
    pub lambda_bar: f64,
    pub decimation: usize,
    pub seed: u64,
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            model: TWO_STATE.to_string(),
            trials: DEFAULT_TRIALS,
            k_s_range: (0.1, 15.0),
            gamma_s_range: (0.3, 3.0),
            k_cl_range: (0.002, 0.2),
            delta_t_range: (0.01, 1.0),
            noise_sigma: 0.3,
            step_h: DEFAULT_STEP,
            duration: DEFAULT_DURATION,
            stack_size: DEFAULT_STACK_SIZE,
            rms_window: (60.0, 100.0),
            filter_window_max: DEFAULT_FILTER_WINDOW,
            lambda_bar: DEFAULT_LAMBDA_BAR,
            decimation: DEFAULT_DECIMATION,
            seed: 0,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            output_dir: PathBuf::from("mc-output"),
        }
    }
}

/// Keys written to manifests that carry no configuration.
fn is_informational(key: &str) -> bool {
    key == "build" || key.starts_with("trial.") || key.starts_with("diverged.")
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(IclError::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        for (name, (lo, hi)) in [
            ("k_s_range", self.k_s_range),
            ("gamma_s_range", self.gamma_s_range),
            ("k_cl_range", self.k_cl_range),
            ("delta_t_range", self.delta_t_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo > 0.0) {
                return bad(format!("{name} must satisfy 0 < lo < hi, got ({lo}, {hi})"));
            }
        }
        if !(self.duration > self.delta_t_range.1) {
            return bad(format!(
                "duration ({}) must exceed the largest delta_t ({})",
                self.duration, self.delta_t_range.1
            ));
        }
        let (a, b) = self.rms_window;
        if !(a < b && b <= self.duration + 1e-9 && a >= 0.0) {
            return bad(format!("rms_window ({a}, {b}) must lie inside [0, duration]"));
        }
        if !(self.noise_sigma >= 0.0) || !(self.step_h > 0.0) || !(self.filter_window_max >= 0.0) {
            return bad("noise_sigma, step_h and filter_window_max must be non-negative (step_h positive)".into());
        }
        if self.stack_size == 0 || self.threads == 0 || self.decimation == 0 {
            return bad("stack_size, threads and decimation must be positive".into());
        }
        Ok(())
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        fn range(v: &str) -> std::result::Result<(f64, f64), String> {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [a, b] => Ok((num(a)?, num(b)?)),
                _ => Err(format!("expected `lo, hi`, got `{v}`")),
            }
        }
        match key {
            "model" => self.model = value.to_string(),
            "trials" => self.trials = num(value)?,
            "k_s_range" => self.k_s_range = range(value)?,
            "gamma_s_range" => self.gamma_s_range = range(value)?,
            "k_cl_range" => self.k_cl_range = range(value)?,
            "delta_t_range" => self.delta_t_range = range(value)?,
            "noise_sigma" => self.noise_sigma = num(value)?,
            "step_h" => self.step_h = num(value)?,
            "duration" => self.duration = num(value)?,
            "stack_size" => self.stack_size = num(value)?,
            "rms_window" => self.rms_window = range(value)?,
            "filter_window_max" => self.filter_window_max = num(value)?,
            "lambda_bar" => self.lambda_bar = num(value)?,
            "decimation" => self.decimation = num(value)?,
            "seed" => self.seed = num(value)?,
            "threads" => self.threads = num(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults. Manifest-only keys
    /// (`build`, `trial.*`, `diverged.*`) are skipped, so a run manifest can be
    /// fed back in unchanged.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = McConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| IclError::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if is_informational(key) {
                continue;
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IclError::io(path, e))?;
        McConfig::parse(&text, &path.display().to_string())
    }

    /// Renders the configuration in the same `key = value` format `parse` reads.
    pub fn to_kv(&self) -> String {
        let r = |(a, b): (f64, f64)| format!("{}, {}", fmt_float(a), fmt_float(b));
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model", self.model.clone());
        put("trials", self.trials.to_string());
        put("k_s_range", r(self.k_s_range));
        put("gamma_s_range", r(self.gamma_s_range));
        put("k_cl_range", r(self.k_cl_range));
        put("delta_t_range", r(self.delta_t_range));
        put("noise_sigma", fmt_float(self.noise_sigma));
        put("step_h", fmt_float(self.step_h));
        put("duration", fmt_float(self.duration));
        put("stack_size", self.stack_size.to_string());
        put("rms_window", r(self.rms_window));
        put("filter_window_max", fmt_float(self.filter_window_max));
        put("lambda_bar", fmt_float(self.lambda_bar));
        put("decimation", self.decimation.to_string());
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        put("output_dir", self.output_dir.display().to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_experiment() {
        let c = McConfig::default();
        assert_eq!(c.k_s_range, (0.1, 15.0));
        assert_eq!(c.gamma_s_range, (0.3, 3.0));
        assert_eq!(c.k_cl_range, (0.002, 0.2));
        assert_eq!(c.delta_t_range, (0.01, 1.0));
        assert_eq!(
            (c.noise_sigma, c.step_h, c.duration, c.stack_size),
            (0.3, 0.0004, 100.0, 20)
        );
        assert_eq!(c.rms_window, (60.0, 100.0));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn kv_round_trip() {
        let mut c = McConfig::default();
        c.trials = 7;
        c.seed = 99;
        c.k_cl_range = (0.01, 0.05);
        c.output_dir = PathBuf::from("/tmp/x y");
        let back = McConfig::parse(&c.to_kv(), "mem").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = McConfig::parse("trials = 3\nbogus = 1\n", "cfg.txt").unwrap_err();
        assert!(matches!(err, IclError::Parse { line: 2, .. }), "{err}");
        let err = McConfig::parse("k_s_range = 3\n", "cfg.txt").unwrap_err();
        assert!(matches!(err, IclError::Parse { line: 1, .. }));
        assert!(McConfig::parse("k_s_range = 3, 1\n", "cfg.txt").is_err());
        assert!(McConfig::parse("trials = 0\n", "cfg.txt").is_err());
    }

    #[test]
    fn comments_and_manifest_keys_are_skipped() {
        let text =
            "# header\ntrials = 4 # inline\n\nbuild = icl-core 0.1.0\ntrial.0.k_s = 1.0\ndiverged.integral = 0\n";
        let c = McConfig::parse(text, "m").unwrap();
        assert_eq!(c.trials, 4);
    }
}
