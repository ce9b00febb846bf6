use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::condition::Condition;
use crate::experiment::{Completion, SessionLog, TIME_LIMIT_S};

use super::anova::{two_way_anova, AnovaTable, FactorialObservation};
use super::regression::{fit_log_regression, RegressionFit};
use super::{angular_resolution, AnalysisError};

/// One valid scene presentation, flattened out of a session log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub participant: String,
    pub scene: String,
    pub condition: Condition,
    pub recognized: u32,
    pub first_response_s: Option<f64>,
    pub timed_out: bool,
    /// `recognized` divided by the most objects anyone found in this scene.
    pub recognition: f64,
}

impl Observation {
    /// Time to the first response, or the full time limit if there was none.
    pub fn recognition_time_s(&self) -> f64 {
        self.first_response_s.unwrap_or(TIME_LIMIT_S)
    }

    pub fn angular_resolution(&self) -> f64 {
        angular_resolution(self.condition.phosphenes, self.condition.fov_deg).value()
    }
}

/// Divides each count by the largest count; all zeros stay zero.
pub fn normalize_recognition(counts: &[u32]) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0);
    counts
        .iter()
        .map(|&c| if max == 0 { 0.0 } else { c as f64 / max as f64 })
        .collect()
}

/// Flattens logs into observations, skipping invalid steps. Recognition is
/// normalized per scene across every participant and condition.
pub fn observations(logs: &[SessionLog]) -> Vec<Observation> {
    let mut out: Vec<Observation> = logs
        .iter()
        .flat_map(|log| {
            log.steps.iter().filter(|s| s.is_valid()).map(move |s| Observation {
                participant: log.participant.clone(),
                scene: s.scene.clone(),
                condition: s.condition,
                recognized: s.recognized_objects(),
                first_response_s: s.first_response_s(),
                timed_out: s.completion == Completion::Timeout,
                recognition: 0.0,
            })
        })
        .collect();
    let mut by_scene: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, o) in out.iter().enumerate() {
        by_scene.entry(o.scene.clone()).or_default().push(i);
    }
    for idx in by_scene.values() {
        let counts: Vec<u32> = idx.iter().map(|&i| out[i].recognized).collect();
        for (&i, r) in idx.iter().zip(normalize_recognition(&counts)) {
            out[i].recognition = r;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub angular_resolution: f64,
    pub n: usize,
    pub recognition_mean: f64,
    pub recognition_std: f64,
    pub time_mean_s: f64,
    pub time_std_s: f64,
    pub timeouts: usize,
}

/// Mean and sample standard deviation; the deviation is 0 below two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per-condition rows ordered by increasing angular resolution.
pub fn summarize(obs: &[Observation]) -> Vec<ConditionSummary> {
    let mut groups: BTreeMap<Condition, Vec<&Observation>> = BTreeMap::new();
    for o in obs {
        groups.entry(o.condition).or_default().push(o);
    }
    let mut rows: Vec<ConditionSummary> = groups
        .into_iter()
        .map(|(condition, g)| {
            let rec: Vec<f64> = g.iter().map(|o| o.recognition).collect();
            let times: Vec<f64> = g.iter().map(|o| o.recognition_time_s()).collect();
            let (recognition_mean, recognition_std) = mean_std(&rec);
            let (time_mean_s, time_std_s) = mean_std(&times);
            ConditionSummary {
                condition,
                angular_resolution: angular_resolution(condition.phosphenes, condition.fov_deg).value(),
                n: g.len(),
                recognition_mean,
                recognition_std,
                time_mean_s,
                time_std_s,
                timeouts: g.iter().filter(|o| o.timed_out).count(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.angular_resolution.total_cmp(&b.angular_resolution));
    rows
}

pub fn condition_summary(logs: &[SessionLog]) -> Vec<ConditionSummary> {
    summarize(&observations(logs))
}

/// Two-way design with phosphene count as factor A and aperture as factor B.
pub fn anova_by_condition(
    obs: &[Observation],
    response: impl Fn(&Observation) -> f64,
) -> Result<AnovaTable, AnalysisError> {
    let mut counts: Vec<u32> = obs.iter().map(|o| o.condition.phosphenes).collect();
    counts.sort_unstable();
    counts.dedup();
    let mut fovs: Vec<f64> = obs.iter().map(|o| o.condition.fov_deg).collect();
    fovs.sort_by(f64::total_cmp);
    fovs.dedup();
    let data: Vec<FactorialObservation> = obs
        .iter()
        .map(|o| FactorialObservation {
            a: counts.binary_search(&o.condition.phosphenes).unwrap_or_default(),
            b: fovs.binary_search_by(|f| f.total_cmp(&o.condition.fov_deg)).unwrap_or_default(),
            y: response(o),
        })
        .collect();
    two_way_anova(&data)
}

/// Everything the analysis step reports; a statistic that cannot be computed
/// is `None` with the reason in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub observations: usize,
    pub conditions: Vec<ConditionSummary>,
    pub recognition_fit: Option<RegressionFit>,
    pub time_fit: Option<RegressionFit>,
    pub recognition_anova: Option<AnovaTable>,
    pub time_anova: Option<AnovaTable>,
    pub notes: Vec<String>,
}

pub fn analyze(logs: &[SessionLog]) -> AnalysisReport {
    let obs = observations(logs);
    let conditions = summarize(&obs);
    let mut notes = Vec::new();

    let distinct_ar = {
        let mut ars: Vec<f64> = conditions.iter().map(|c| c.angular_resolution).collect();
        ars.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        ars.len()
    };
    let mut fit = |label: &str, y: fn(&Observation) -> f64| {
        if distinct_ar < 2 {
            notes.push(format!("{label} regression refused: fewer than 2 distinct angular resolutions"));
            return None;
        }
        let pairs: Vec<(f64, f64)> = obs.iter().map(|o| (o.angular_resolution(), y(o))).collect();
        fit_log_regression(&pairs)
            .map_err(|e| notes.push(format!("{label} regression refused: {e}")))
            .ok()
    };
    let recognition_fit = fit("recognition", |o| o.recognition);
    let time_fit = fit("time", Observation::recognition_time_s);

    let mut anova = |label: &str, y: fn(&Observation) -> f64| {
        anova_by_condition(&obs, y)
            .map_err(|e| notes.push(format!("{label} ANOVA refused: {e}")))
            .ok()
    };
    let recognition_anova = anova("recognition", |o| o.recognition);
    let time_anova = anova("time", Observation::recognition_time_s);

    AnalysisReport {
        observations: obs.len(),
        conditions,
        recognition_fit,
        time_fit,
        recognition_anova,
        time_anova,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{Response, StepRecord};
    use crate::experiment::ObjectClass;

    fn step(step: u32, scene: &str, cond: Condition, responses: &[(ObjectClass, u32, f64)], completion: Completion) -> StepRecord {
        StepRecord {
            step,
            scene: scene.into(),
            condition: cond,
            fixation_offset_s: -2.0,
            responses: responses
                .iter()
                .map(|&(class, count, time_s)| Response { class, count, time_s })
                .collect(),
            completion,
            elapsed_s: if completion == Completion::Timeout { 60.0 } else { 10.0 },
            onset_s: 0.0,
            trajectory: Vec::new(),
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_recognition(&[0, 2, 4]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_recognition(&[0, 0]), vec![0.0, 0.0]);
        assert!(normalize_recognition(&[]).is_empty());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn summary_uses_scene_max_and_time_limit() {
        use ObjectClass::*;
        let a = Condition::new(20.0, 500);
        let b = Condition::new(60.0, 200);
        let log1 = SessionLog {
            participant: "p1".into(),
            steps: vec![
                step(1, "s1", a, &[(Bed, 1, 3.0), (Door, 1, 5.0), (Door, 2, 6.0)], Completion::Done),
                step(2, "s2", b, &[], Completion::Timeout),
                step(3, "s3", b, &[], Completion::Invalid),
            ],
        };
        let log2 = SessionLog {
            participant: "p2".into(),
            steps: vec![
                step(1, "s1", b, &[(Bed, 1, 12.0)], Completion::Done),
                step(2, "s2", a, &[(Lamp, 1, 4.0)], Completion::Done),
            ],
        };
        let rows = condition_summary(&[log1, log2]);
        assert_eq!(rows.len(), 2);
        // ascending angular resolution: 60°/200 before 20°/500
        let (low, high) = (&rows[0], &rows[1]);
        assert_eq!(low.condition, b);
        assert_eq!(low.n, 2);
        assert_eq!(low.timeouts, 1);
        // s1 by p2 found 1 of the 3 seen by p1; s2 by p1 found 0 of 1
        assert!((low.recognition_mean - (1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((low.time_mean_s - 36.0).abs() < 1e-12);
        assert_eq!(high.recognition_mean, 1.0);
        assert_eq!(high.recognition_std, 0.0);
        assert!((high.time_mean_s - 3.5).abs() < 1e-12);
    }

    #[test]
    fn single_condition_refuses_regression_and_anova() {
        let c = Condition::new(20.0, 500);
        let log = SessionLog {
            participant: "p".into(),
            steps: (1..=5)
                .map(|i| step(i, &format!("s{i}"), c, &[(ObjectClass::Bed, 1, i as f64)], Completion::Done))
                .collect(),
        };
        let report = analyze(&[log]);
        assert_eq!(report.conditions.len(), 1);
        assert!(report.recognition_fit.is_none() && report.time_fit.is_none());
        assert!(report.recognition_anova.is_none());
        assert_eq!(report.notes.len(), 4);
    }
}
