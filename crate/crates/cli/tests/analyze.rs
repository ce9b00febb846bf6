mod common;

use std::path::Path;

use common::{run_ok, s, spv};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spv_cli::commands::TableRow;
use spv_core::analysis::angular_resolution;
use spv_core::experiment::{stimulus_corpus, Completion, ObjectClass, Response, SessionLog, StepRecord};
use spv_core::Condition;

fn step(step: u32, scene: &str, condition: Condition, times: &[f64]) -> StepRecord {
    let responses: Vec<Response> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| Response {
            class: ObjectClass::Chair,
            count: k as u32 + 1,
            time_s: t,
        })
        .collect();
    let timed_out = responses.is_empty();
    StepRecord {
        step,
        scene: scene.into(),
        condition,
        fixation_offset_s: -2.0,
        elapsed_s: if timed_out { 60.0 } else { times.last().unwrap() + 0.5 },
        completion: if timed_out { Completion::Timeout } else { Completion::Done },
        responses,
        onset_s: 0.0,
        trajectory: Vec::new(),
    }
}

/// Synthetic participants whose first-response times follow
/// `83.14 − 18.78·ln(AR)` and whose counts follow `−1.0345 + 0.4482·ln(AR)`
/// of an 8-object scene, both with Gaussian noise.
fn synthetic_logs(dir: &Path, seed: u64) {
    let scenes: Vec<String> = (0..50).map(|i| format!("s{i:02}")).collect();
    let mut stimuli = stimulus_corpus(&scenes, &Condition::default_grid());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stimuli.shuffle(&mut rng);
    let time_noise = Normal::new(0.0, 4.0).unwrap();
    let count_noise = Normal::new(0.0, 0.6).unwrap();
    for (p, chunk) in stimuli.chunks(15).enumerate() {
        let steps = chunk
            .iter()
            .enumerate()
            .map(|(k, st)| {
                let ln_ar = angular_resolution(st.condition.phosphenes, st.condition.fov_deg).value().ln();
                let rt = (83.14 - 18.78 * ln_ar + time_noise.sample(&mut rng)).clamp(0.5, 59.0);
                let ratio = (-1.0345 + 0.4482 * ln_ar).clamp(0.0, 1.0);
                let n = (8.0 * ratio + count_noise.sample(&mut rng)).round().clamp(1.0, 8.0) as usize;
                let times: Vec<f64> = (0..n).map(|j| (rt + 0.1 * j as f64).min(60.0)).collect();
                step(k as u32 + 1, &st.scene, st.condition, &times)
            })
            .collect();
        let log = SessionLog {
            participant: format!("p{p:02}"),
            steps,
        };
        std::fs::write(dir.join(format!("p{p:02}.jsonl")), log.to_jsonl()).unwrap();
    }
}

fn read_table(path: &Path) -> Vec<TableRow> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn six_conditions_give_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    std::fs::create_dir(&logs).unwrap();
    synthetic_logs(&logs, 1);
    let out = dir.path().join("out");
    run_ok(&["analyze", "--logs", s(&logs), "--out", s(&out)]);
    let rows = read_table(&out.join("table.csv"));
    assert_eq!(rows.len(), 6);
    let order: Vec<&str> = rows.iter().map(|r| r.condition.as_str()).collect();
    assert_eq!(order, ["60x200", "40x200", "60x500", "40x500", "20x200", "20x500"]);
    for r in &rows {
        let c = Condition::new(r.fov_deg, r.phosphenes);
        assert_eq!(r.angular_resolution, angular_resolution(c.phosphenes, c.fov_deg).value());
        assert_eq!(r.n, 50);
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["observations"], 300);
    assert_eq!(report["time_regression"]["n"], 300);
    assert!(report["recognition_anova"]["factor_a"]["f"].is_number());
}

#[test]
fn refit_recovers_generating_slopes() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_logs(dir.path(), 42);
    let out = dir.path().join("out");
    run_ok(&["analyze", "--logs", s(dir.path()), "--out", s(&out)]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rt = report["time_regression"]["slope"].as_f64().unwrap();
    let or = report["recognition_regression"]["slope"].as_f64().unwrap();
    // sd(slope) ≈ 4 / sqrt(300 · var(ln AR)) ≈ 0.45 s
    assert!((rt + 18.78).abs() < 2.5, "time slope {rt}");
    assert!(or > 0.3 && or < 0.6, "recognition slope {or}");
    assert_eq!(report["time_regression"]["p_band"], "***");
}

#[test]
fn single_condition_refuses_regression() {
    let dir = tempfile::tempdir().unwrap();
    let c = Condition::new(40.0, 500);
    let log = SessionLog {
        participant: "p".into(),
        steps: (1..=15)
            .map(|k| step(k, &format!("s{k}"), c, &[k as f64]))
            .collect(),
    };
    let path = dir.path().join("one.jsonl");
    std::fs::write(&path, log.to_jsonl()).unwrap();
    let out = dir.path().join("out");
    run_ok(&["analyze", "--logs", s(&path), "--out", s(&out)]);
    let rows = read_table(&out.join("table.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].time_mean_s, 8.0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["time_regression"].is_null() && report["recognition_regression"].is_null());
    assert!(report["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("regression refused")));
}

#[test]
fn empty_or_corrupt_logs_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "\n").unwrap();
    let r = spv(&["analyze", "--logs", s(&empty), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("empty"));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"timestamp_s\": 1}\n").unwrap();
    let r = spv(&["analyze", "--logs", s(&bad), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.jsonl"));

    let none = dir.path().join("nothing");
    std::fs::create_dir(&none).unwrap();
    assert!(!spv(&["analyze", "--logs", s(&none), "--out", s(&out)]).status.success());
}
