use std::fs;

use icl_core::harness::output::{emit_outputs, summary_csv};
use icl_core::harness::{sample_trial_config, trial_rng};
use icl_core::{run_monte_carlo, McConfig, Method};

fn small() -> McConfig {
    let mut mc = McConfig::default();
    mc.trials = 4;
    mc.duration = 6.0;
    mc.rms_window = (3.0, 6.0);
    mc.seed = 11;
    mc
}

#[test]
fn paired_runs_share_noise() {
    let s = run_monte_carlo(&small()).unwrap();
    for t in &s.trials {
        let [icl, dcl] = &t.outcomes[..] else {
            panic!("two outcomes expected")
        };
        assert_eq!(icl.method, Method::IntegralCl);
        assert_eq!(dcl.method, Method::DerivativeCl);
        assert_eq!(icl.first_noise.len(), 3);
        assert_eq!(icl.first_noise, dcl.first_noise, "trial {}", t.index);
    }
}

#[test]
fn means_match_trials_csv() {
    let mc = small();
    let s = run_monte_carlo(&mc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&s, &mc, dir.path()).unwrap();
    let body = fs::read_to_string(&files.trials).unwrap();
    let mut lines = body.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let first_rms = header.iter().position(|h| h.starts_with("rms_")).unwrap();
    for ms in &s.methods {
        let label = if ms.method == Method::IntegralCl {
            "integral"
        } else {
            "derivative"
        };
        let rows: Vec<Vec<f64>> = body
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|c| c[1] == label && c[8] == "0")
            .map(|c| c[first_rms..].iter().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), ms.completed);
        for (c, &mean) in ms.mean_rms.iter().enumerate() {
            let brute = rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
            assert!(
                (brute - mean).abs() <= 1e-12 * mean.abs().max(1e-300),
                "{label} column {c}"
            );
        }
    }
}

#[test]
fn manifest_reproduces_summary() {
    let mc = small();
    let s = run_monte_carlo(&mc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&s, &mc, dir.path()).unwrap();
    let back = McConfig::load(&files.manifest).unwrap();
    assert_eq!(back, mc);
    let again = run_monte_carlo(&back).unwrap();
    assert_eq!(summary_csv(&again), fs::read_to_string(&files.summary).unwrap());
    let manifest = fs::read_to_string(&files.manifest).unwrap();
    for i in 0..mc.trials {
        assert!(manifest.contains(&format!("trial.{i}.k_cl = ")));
    }
}

#[test]
fn summary_has_two_rows_of_six() {
    let s = run_monte_carlo(&small()).unwrap();
    let csv = summary_csv(&s);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("integral,"));
    assert!(lines[2].starts_with("derivative,"));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn thread_count_does_not_change_results() {
    let mut a = small();
    a.threads = 1;
    let mut b = small();
    b.threads = 3;
    assert_eq!(run_monte_carlo(&a).unwrap(), run_monte_carlo(&b).unwrap());
}

#[test]
fn sampled_gains_lie_in_open_ranges() {
    let mc = McConfig::default();
    for i in 0..200 {
        let d = sample_trial_config(&mut trial_rng(5, i), &mc, i).unwrap().draw;
        assert!(d.k_s > 0.1 && d.k_s < 15.0);
        assert!(d.gamma_s > 0.3 && d.gamma_s < 3.0);
        assert!(d.k_cl > 0.002 && d.k_cl < 0.2);
        assert!(d.delta_t > 0.01 && d.delta_t < 1.0);
        assert_eq!(d.filter_window, d.delta_t.min(0.5));
    }
}
