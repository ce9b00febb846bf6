use std::collections::HashMap;
use std::sync::Arc;

use super::{
    Agent, Annotations, Completion, ExperimentError, Response, SessionLog, StepContext, StepRecord,
    TrialPlan, TIME_LIMIT_S,
};
use crate::condition::Condition;
use crate::geometry::{CameraModel, Panorama, Quaternion};
use crate::renderer::{precompute_ray_table, render_frame, RayTable, RenderConfig, StimulusFrame};

/// Where session scenes come from.
pub trait SceneSource {
    fn panorama(&self, scene: &str) -> Result<Arc<Panorama>, ExperimentError>;
    fn annotations(&self, scene: &str) -> Option<Annotations>;
}

/// Scenes held in memory.
#[derive(Debug, Default, Clone)]
pub struct InMemoryScenes {
    scenes: HashMap<String, (Arc<Panorama>, Option<Annotations>)>,
}

impl InMemoryScenes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, panorama: Panorama, annotations: Option<Annotations>) {
        self.scenes.insert(id.into(), (Arc::new(panorama), annotations));
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.scenes.keys().cloned().collect();
        ids.sort();
        ids
    }
}

impl SceneSource for InMemoryScenes {
    fn panorama(&self, scene: &str) -> Result<Arc<Panorama>, ExperimentError> {
        self.scenes
            .get(scene)
            .map(|(p, _)| p.clone())
            .ok_or_else(|| ExperimentError::Scene(format!("unknown scene {scene:?}")))
    }

    fn annotations(&self, scene: &str) -> Option<Annotations> {
        self.scenes.get(scene).and_then(|(_, a)| a.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Agent decisions (and rendered frames) per simulated second.
    pub tick_hz: f64,
    pub fixation_s: f64,
    /// Pause after the plan's break step.
    pub break_s: f64,
    pub fixation_dot_radius_px: f64,
    /// Base render settings; FOV and phosphene count come from each step.
    pub render: RenderConfig,
    /// Defaults to the agent name.
    pub participant: Option<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_hz: 10.0,
            fixation_s: 2.0,
            break_s: 60.0,
            fixation_dot_radius_px: 4.0,
            render: RenderConfig::default(),
            participant: None,
        }
    }
}

/// Scene source, settings and per-condition ray tables for headless runs.
pub struct SessionEngine<S> {
    source: S,
    config: SessionConfig,
    tables: HashMap<Condition, RayTable>,
    frames_rendered: usize,
}

impl<S: SceneSource> SessionEngine<S> {
    pub fn new(source: S, config: SessionConfig) -> Result<Self, ExperimentError> {
        if !(config.tick_hz > 0.0 && config.tick_hz.is_finite()) {
            return Err(ExperimentError::Config(format!("tick rate {} must be positive", config.tick_hz)));
        }
        if !(config.fixation_s >= 0.0 && config.break_s >= 0.0) {
            return Err(ExperimentError::Config("durations must be non-negative".into()));
        }
        config.render.validate()?;
        Ok(Self {
            source,
            config,
            tables: HashMap::new(),
            frames_rendered: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    /// Phosphene frames rendered so far (fixation frames excluded).
    pub fn frames_rendered(&self) -> usize {
        self.frames_rendered
    }

    fn render_config(&self, condition: Condition) -> RenderConfig {
        RenderConfig::for_condition(condition, &self.config.render)
    }

    fn table(&mut self, condition: Condition) -> Result<&RayTable, ExperimentError> {
        if !self.tables.contains_key(&condition) {
            let t = precompute_ray_table(&self.render_config(condition))?;
            self.tables.insert(condition, t);
        }
        Ok(&self.tables[&condition])
    }
}

/// White dot at the display centre on black.
pub fn emit_fixation_frame(cam: &CameraModel, radius_px: f64) -> StimulusFrame {
    let mut f = StimulusFrame::blank(cam.width, cam.height);
    let r2 = radius_px * radius_px;
    let x0 = (cam.cx - radius_px).floor().max(0.0) as u32;
    let y0 = (cam.cy - radius_px).floor().max(0.0) as u32;
    let x1 = ((cam.cx + radius_px).ceil() as u32).min(cam.width - 1);
    let y1 = ((cam.cy + radius_px).ceil() as u32).min(cam.height - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cam.cx, y as f64 - cam.cy);
            if dx * dx + dy * dy <= r2 {
                f.set(x, y, 1.0);
            }
        }
    }
    f
}

/// Runs a plan against a scripted agent on a simulated clock.
///
/// Each step shows the fixation dot, then renders a frame per tick and feeds
/// it to the agent until it reports done or 60 s pass. A step whose scene
/// cannot be loaded is logged as invalid and the session moves on.
pub fn run_headless_session<S: SceneSource>(
    plan: &TrialPlan,
    agent: &mut dyn Agent,
    engine: &mut SessionEngine<S>,
) -> Result<SessionLog, ExperimentError> {
    if agent.requires_annotations() {
        if let Some(step) = plan
            .steps
            .iter()
            .find(|s| engine.source.annotations(&s.scene).is_none())
        {
            return Err(ExperimentError::MissingAnnotations(step.scene.clone()));
        }
    }

    let cfg = engine.config.clone();
    let max_ticks = (TIME_LIMIT_S * cfg.tick_hz).floor() as u64;
    let mut clock = 0.0;
    let mut steps = Vec::with_capacity(plan.steps.len());

    for ps in &plan.steps {
        let mut fixation = emit_fixation_frame(&cfg.render.camera, cfg.fixation_dot_radius_px);
        fixation.timestamp_s = clock;
        agent.fixate(&fixation);
        clock += cfg.fixation_s;
        let onset = clock;
        let mut record = StepRecord {
            step: ps.step,
            scene: ps.scene.clone(),
            condition: ps.condition,
            fixation_offset_s: -cfg.fixation_s,
            responses: Vec::new(),
            completion: Completion::Invalid,
            elapsed_s: 0.0,
            onset_s: onset,
            trajectory: Vec::new(),
        };

        match engine.source.panorama(&ps.scene) {
            Err(e) => {
                log::warn!("step {}: {e}; marking invalid", ps.step);
            }
            Ok(pano) => {
                let annotations = engine.source.annotations(&ps.scene);
                agent.begin_step(&StepContext {
                    step: ps.step,
                    scene: &ps.scene,
                    condition: ps.condition,
                    annotations: annotations.as_ref(),
                });
                let rcfg = engine.render_config(ps.condition);
                let mut head = Quaternion::IDENTITY;
                let mut done_at = None;
                for n in 0..=max_ticks {
                    let t = n as f64 / cfg.tick_hz;
                    let table = engine.table(ps.condition)?;
                    let mut frame = render_frame(&pano, head, &rcfg, table)?;
                    engine.frames_rendered += 1;
                    frame.timestamp_s = onset + t;
                    record.trajectory.push((t, head));

                    let action = agent.act(t, &frame);
                    record.responses.extend(action.responses.iter().map(|r| Response {
                        class: r.class,
                        count: r.count,
                        time_s: t,
                    }));
                    if action.orientation.normalized().is_ok() {
                        head = action.orientation;
                    }
                    if action.done {
                        done_at = Some(t);
                        break;
                    }
                }
                (record.completion, record.elapsed_s) = match done_at {
                    Some(t) => (Completion::Done, t),
                    None if record.responses.is_empty() => (Completion::Timeout, TIME_LIMIT_S),
                    None => (Completion::Done, TIME_LIMIT_S),
                };
            }
        }

        clock = onset + record.elapsed_s;
        if plan.has_break_after(ps.step) {
            clock += cfg.break_s;
        }
        steps.push(record);
    }

    Ok(SessionLog {
        participant: cfg.participant.unwrap_or_else(|| agent.name().to_string()),
        steps,
    })
}
