//! Session logs and their line-delimited JSON form.
//!
//! One record per line, fields in this order:
//!
//! | field          | type            | meaning                                          |
//! |----------------|-----------------|--------------------------------------------------|
//! | `timestamp_s`  | number          | seconds relative to the step's scene onset       |
//! | `step`         | integer         | 1-based step in the trial plan                   |
//! | `scene`        | string          | scene id                                         |
//! | `fov_deg`      | number          | aperture of the step's condition                 |
//! | `phosphenes`   | integer         | nominal phosphene count of the condition         |
//! | `event_type`   | string          | `fixation`, `response`, `done`, `timeout`, `invalid` |
//! | `object_class` | string or null  | set on `response` records only                   |
//! | `count`        | integer         | running count of `object_class` in this step; 0 otherwise |
//!
//! Every step is a `fixation` record (timestamp = minus the fixation
//! duration), zero or more `response` records, then exactly one terminal
//! record whose timestamp is the step's elapsed time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, ObjectClass};
use crate::condition::Condition;
use crate::geometry::Quaternion;

/// Per-step time cap in seconds.
pub const TIME_LIMIT_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Fixation,
    Response,
    Done,
    Timeout,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub timestamp_s: f64,
    pub step: u32,
    pub scene: String,
    pub fov_deg: f64,
    pub phosphenes: u32,
    pub event_type: EventType,
    pub object_class: Option<ObjectClass>,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub class: ObjectClass,
    /// Running count of this class within the step.
    pub count: u32,
    /// Seconds since scene onset.
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    /// Subject declared they could see no more objects, or the time cap ended
    /// a step that already had responses.
    Done,
    /// Nothing recognized within the time cap.
    Timeout,
    /// The scene could not be presented.
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub scene: String,
    pub condition: Condition,
    /// Fixation onset relative to scene onset (≤ 0).
    pub fixation_offset_s: f64,
    pub responses: Vec<Response>,
    pub completion: Completion,
    pub elapsed_s: f64,
    /// Session clock at scene onset. Not serialized.
    pub onset_s: f64,
    /// Orientation used for each rendered frame. Not serialized.
    pub trajectory: Vec<(f64, Quaternion)>,
}

impl StepRecord {
    /// Objects recognized: for each class the highest running count.
    pub fn recognized_objects(&self) -> u32 {
        let mut per_class: BTreeMap<ObjectClass, u32> = BTreeMap::new();
        for r in &self.responses {
            let c = per_class.entry(r.class).or_default();
            *c = (*c).max(r.count);
        }
        per_class.values().sum()
    }

    /// Time of the first response, if any.
    pub fn first_response_s(&self) -> Option<f64> {
        self.responses.iter().map(|r| r.time_s).min_by(f64::total_cmp)
    }

    pub fn is_valid(&self) -> bool {
        self.completion != Completion::Invalid
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    pub participant: String,
    pub steps: Vec<StepRecord>,
}

impl SessionLog {
    pub fn records(&self) -> Vec<LogRecord> {
        let mut out = Vec::new();
        for s in &self.steps {
            let rec = |timestamp_s, event_type, object_class, count| LogRecord {
                timestamp_s,
                step: s.step,
                scene: s.scene.clone(),
                fov_deg: s.condition.fov_deg,
                phosphenes: s.condition.phosphenes,
                event_type,
                object_class,
                count,
            };
            out.push(rec(s.fixation_offset_s, EventType::Fixation, None, 0));
            for r in &s.responses {
                out.push(rec(r.time_s, EventType::Response, Some(r.class), r.count));
            }
            let terminal = match s.completion {
                Completion::Done => EventType::Done,
                Completion::Timeout => EventType::Timeout,
                Completion::Invalid => EventType::Invalid,
            };
            out.push(rec(s.elapsed_s, terminal, None, 0));
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&serde_json::to_string(&r).expect("log records serialize"));
            s.push('\n');
        }
        s
    }

    /// Parses and validates a line-delimited log. Blank lines are ignored.
    pub fn from_jsonl(participant: &str, text: &str) -> Result<Self, ExperimentError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(line).map_err(|e| ExperimentError::Log {
                line: i + 1,
                msg: e.to_string(),
            })?;
            records.push((i + 1, rec));
        }
        Self::from_records(participant, records)
    }

    fn from_records(
        participant: &str,
        records: Vec<(usize, LogRecord)>,
    ) -> Result<Self, ExperimentError> {
        let err = |line: usize, msg: String| ExperimentError::Log { line, msg };
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut open: Option<StepRecord> = None;

        for (line, r) in records {
            if !r.timestamp_s.is_finite() {
                return Err(err(line, "non-finite timestamp".into()));
            }
            match r.event_type {
                EventType::Fixation => {
                    if open.is_some() {
                        return Err(err(line, "fixation before previous step ended".into()));
                    }
                    if let Some(prev) = steps.last() {
                        if r.step <= prev.step {
                            return Err(err(line, format!("step {} after step {}", r.step, prev.step)));
                        }
                    }
                    if !(r.fov_deg > 0.0 && r.fov_deg < 180.0) || r.phosphenes == 0 {
                        return Err(err(line, "invalid condition".into()));
                    }
                    if r.timestamp_s > 0.0 {
                        return Err(err(line, "fixation must precede scene onset".into()));
                    }
                    if r.object_class.is_some() || r.count != 0 {
                        return Err(err(line, "fixation record carries a response".into()));
                    }
                    open = Some(StepRecord {
                        step: r.step,
                        scene: r.scene,
                        condition: Condition::new(r.fov_deg, r.phosphenes),
                        fixation_offset_s: r.timestamp_s,
                        responses: Vec::new(),
                        completion: Completion::Invalid,
                        elapsed_s: 0.0,
                        onset_s: 0.0,
                        trajectory: Vec::new(),
                    });
                }
                ev => {
                    let Some(mut cur) = open.take() else {
                        return Err(err(line, format!("{ev:?} record outside a step")));
                    };
                    if cur.step != r.step
                        || cur.scene != r.scene
                        || cur.condition != Condition::new(r.fov_deg, r.phosphenes)
                    {
                        return Err(err(line, "record does not match its step header".into()));
                    }
                    if !(0.0..=TIME_LIMIT_S).contains(&r.timestamp_s) {
                        return Err(err(line, format!("timestamp {} outside [0, 60]", r.timestamp_s)));
                    }
                    let last = cur.responses.last().map_or(0.0, |x| x.time_s);
                    if r.timestamp_s < last {
                        return Err(err(line, "timestamps go backwards".into()));
                    }
                    match ev {
                        EventType::Response => {
                            let class = r
                                .object_class
                                .ok_or_else(|| err(line, "response without object_class".into()))?;
                            if r.count == 0 {
                                return Err(err(line, "response with zero count".into()));
                            }
                            cur.responses.push(Response {
                                class,
                                count: r.count,
                                time_s: r.timestamp_s,
                            });
                            open = Some(cur);
                        }
                        EventType::Done | EventType::Timeout | EventType::Invalid => {
                            if r.object_class.is_some() || r.count != 0 {
                                return Err(err(line, "terminal record carries a response".into()));
                            }
                            cur.completion = match ev {
                                EventType::Done => Completion::Done,
                                EventType::Timeout => Completion::Timeout,
                                _ => Completion::Invalid,
                            };
                            cur.elapsed_s = r.timestamp_s;
                            if cur.completion == Completion::Timeout
                                && (!cur.responses.is_empty() || r.timestamp_s != TIME_LIMIT_S)
                            {
                                return Err(err(
                                    line,
                                    "timeout must have no responses and elapsed = 60".into(),
                                ));
                            }
                            if cur.completion == Completion::Invalid && !cur.responses.is_empty() {
                                return Err(err(line, "invalid step with responses".into()));
                            }
                            steps.push(cur);
                        }
                        EventType::Fixation => unreachable!(),
                    }
                }
            }
        }
        if let Some(cur) = open {
            return Err(ExperimentError::Log {
                line: 0,
                msg: format!("step {} has no terminal record", cur.step),
            });
        }
        if steps.is_empty() {
            return Err(ExperimentError::Log {
                line: 0,
                msg: "log contains no steps".into(),
            });
        }
        Ok(SessionLog {
            participant: participant.to_string(),
            steps,
        })
    }
}
