use crate::condition::Condition;
use crate::geometry::{compute_ray, quat_to_rotation, ray_to_spherical, CameraModel, Quaternion, RotationMatrix};
use crate::renderer::StimulusFrame;

use super::{Annotations, ObjectClass};

/// What an agent knows when a scene starts.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub step: u32,
    pub scene: &'a str,
    pub condition: Condition,
    pub annotations: Option<&'a Annotations>,
}

/// A reported object: `count` is the running total for `class` in this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseEvent {
    pub class: ObjectClass,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentAction {
    /// Head orientation for the next frame.
    pub orientation: Quaternion,
    pub responses: Vec<ResponseEvent>,
    /// "I cannot see more objects".
    pub done: bool,
}

impl AgentAction {
    pub fn look(orientation: Quaternion) -> Self {
        Self {
            orientation,
            responses: Vec::new(),
            done: false,
        }
    }
}

/// Scanning policy standing in for a participant.
pub trait Agent {
    fn name(&self) -> &str;

    /// Whether the agent needs ground-truth annotations.
    fn requires_annotations(&self) -> bool {
        false
    }

    /// Shown the fixation dot before each scene.
    fn fixate(&mut self, _frame: &StimulusFrame) {}

    fn begin_step(&mut self, _ctx: &StepContext<'_>) {}

    /// Called once per rendered frame with the time since scene onset.
    fn act(&mut self, elapsed_s: f64, frame: &StimulusFrame) -> AgentAction;
}

/// Never moves, never responds.
#[derive(Debug, Default, Clone)]
pub struct NullAgent;

impl Agent for NullAgent {
    fn name(&self) -> &str {
        "null"
    }

    fn act(&mut self, _elapsed_s: f64, _frame: &StimulusFrame) -> AgentAction {
        AgentAction::look(Quaternion::IDENTITY)
    }
}

/// Turns at a constant yaw rate along the horizon and never responds.
#[derive(Debug, Clone)]
pub struct SweepAgent {
    pub rate_deg_s: f64,
}

impl Default for SweepAgent {
    fn default() -> Self {
        Self { rate_deg_s: 30.0 }
    }
}

impl Agent for SweepAgent {
    fn name(&self) -> &str {
        "sweep"
    }

    fn act(&mut self, elapsed_s: f64, _frame: &StimulusFrame) -> AgentAction {
        let yaw = (self.rate_deg_s * elapsed_s).to_radians();
        AgentAction::look(Quaternion::from_yaw_pitch_roll(yaw, 0.0, 0.0))
    }
}

/// Reads the scene's annotations back one object at a time, then reports
/// done.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    /// Seconds between consecutive responses.
    pub interval_s: f64,
    pending: Vec<ResponseEvent>,
    sent: usize,
}

impl OracleAgent {
    pub fn new(interval_s: f64) -> Self {
        Self {
            interval_s,
            pending: Vec::new(),
            sent: 0,
        }
    }
}

impl Default for OracleAgent {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> &str {
        "oracle"
    }

    fn requires_annotations(&self) -> bool {
        true
    }

    fn begin_step(&mut self, ctx: &StepContext<'_>) {
        self.sent = 0;
        self.pending = ctx
            .annotations
            .map(|a| {
                a.objects
                    .iter()
                    .flat_map(|(&class, &n)| (1..=n).map(move |count| ResponseEvent { class, count }))
                    .collect()
            })
            .unwrap_or_default();
    }

    fn act(&mut self, elapsed_s: f64, _frame: &StimulusFrame) -> AgentAction {
        let due = ((elapsed_s / self.interval_s).floor() as usize).min(self.pending.len());
        let responses = if due > self.sent {
            let r = self.pending[self.sent..due].to_vec();
            self.sent = due;
            r
        } else {
            Vec::new()
        };
        AgentAction {
            orientation: Quaternion::IDENTITY,
            done: self.sent == self.pending.len(),
            responses,
        }
    }
}

/// Azimuth (radians) of the optical axis in the panorama frame.
pub fn view_azimuth(head: Quaternion, cam: &CameraModel, r_pan: &RotationMatrix) -> f64 {
    let r_imu = quat_to_rotation(head).unwrap_or_default();
    let ray = compute_ray((cam.cx, cam.cy), cam, &r_imu, r_pan);
    ray_to_spherical(ray.vector()).map(|s| s.phi).unwrap_or(0.0)
}

/// Fraction of the 360° horizon that fell inside the aperture for at least
/// one of the given view azimuths (radians), on a 0.1° grid.
pub fn azimuth_coverage(azimuths: impl IntoIterator<Item = f64>, fov_deg: f64) -> f64 {
    const BINS: usize = 3600;
    let half = 0.5 * fov_deg;
    let mut covered = vec![false; BINS];
    for az in azimuths {
        let centre = az.to_degrees().rem_euclid(360.0);
        for (b, c) in covered.iter_mut().enumerate() {
            let bin_deg = (b as f64 + 0.5) * 360.0 / BINS as f64;
            let d = (bin_deg - centre).abs();
            if d.min(360.0 - d) <= half {
                *c = true;
            }
        }
    }
    covered.iter().filter(|&&c| c).count() as f64 / BINS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frame() -> StimulusFrame {
        StimulusFrame::blank(4, 4)
    }

    #[test]
    fn oracle_reports_annotations_then_done() {
        let ann: Annotations = [(ObjectClass::Bed, 1), (ObjectClass::Door, 2)].into_iter().collect();
        let mut a = OracleAgent::new(1.0);
        a.begin_step(&StepContext {
            step: 1,
            scene: "s",
            condition: Condition::new(20.0, 200),
            annotations: Some(&ann),
        });
        let mut all = Vec::new();
        let mut done_at = None;
        for tick in 0..100 {
            let t = tick as f64 * 0.5;
            let act = a.act(t, &frame());
            all.extend(act.responses);
            if act.done {
                done_at = Some(t);
                break;
            }
        }
        assert_eq!(done_at, Some(3.0));
        assert_eq!(
            all,
            vec![
                ResponseEvent { class: ObjectClass::Bed, count: 1 },
                ResponseEvent { class: ObjectClass::Door, count: 1 },
                ResponseEvent { class: ObjectClass::Door, count: 2 },
            ]
        );
    }

    #[test]
    fn oracle_with_empty_scene_is_done_immediately() {
        let mut a = OracleAgent::default();
        a.begin_step(&StepContext {
            step: 1,
            scene: "s",
            condition: Condition::new(20.0, 200),
            annotations: Some(&Annotations::default()),
        });
        assert!(a.act(0.0, &frame()).done);
    }

    #[test]
    fn sweep_azimuth_follows_rate() {
        let cam = CameraModel::default();
        let r_pan = RotationMatrix::screen_to_panorama();
        let mut a = SweepAgent::default();
        let q = a.act(3.0, &frame()).orientation;
        assert_abs_diff_eq!(view_azimuth(q, &cam, &r_pan), 90f64.to_radians(), epsilon = 1e-9);
    }

    #[test]
    fn coverage_of_partial_and_full_sweeps() {
        // integrate the footprint analytically: a sweep over Δ degrees with a
        // 20° aperture covers Δ + 20 degrees until it wraps
        let az = |secs: f64| (0..=(secs * 10.0) as usize).map(|k| (30.0 * k as f64 / 10.0).to_radians());
        assert_abs_diff_eq!(azimuth_coverage(az(6.0), 20.0), 200.0 / 360.0, epsilon = 1e-3);
        assert_abs_diff_eq!(azimuth_coverage(az(12.0), 20.0), 1.0, epsilon = 1e-9);
        assert_eq!(azimuth_coverage(std::iter::empty(), 20.0), 0.0);
    }
}
