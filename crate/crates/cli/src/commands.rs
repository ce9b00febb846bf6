use std::collections::HashSet;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spv_core::analysis::{analyze, p_band, AnalysisReport, AnovaTable, ConditionSummary, RegressionFit};
use spv_core::experiment::{
    build_trial_plan, run_headless_session, Agent, NullAgent, OracleAgent, SessionConfig, SessionEngine, SessionLog,
    SweepAgent,
};
use spv_core::geometry::{Panorama, QuatOrder, Quaternion};
use spv_core::renderer::{precompute_ray_table, render_frame, StimulusFrame};
use spv_core::Condition;

use crate::corpus::Corpus;
use crate::service::{serve, FrameService};
use crate::settings::{parse_conditions, DisplaySettings, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "spv", version, about = "Simulated prosthetic vision toolkit")]
pub struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one phosphene frame from a panorama.
    Render(RenderArgs),
    /// Run a headless session with a scripted agent.
    Session(SessionArgs),
    /// Summarize session logs into a table and a statistics report.
    Analyze(AnalyzeArgs),
    /// Serve frames and sessions over a local TCP socket.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DisplayArgs {
    /// Display width in pixels.
    #[arg(long)]
    pub width: Option<u32>,
    /// Display height in pixels.
    #[arg(long)]
    pub height: Option<u32>,
    /// Horizontal field of view of the display in degrees.
    #[arg(long)]
    pub hfov: Option<f64>,
    /// Number of phosphene intensity levels.
    #[arg(long)]
    pub levels: Option<u32>,
    /// Gaussian sigma as a fraction of the phosphene radius.
    #[arg(long)]
    pub sigma_ratio: Option<f64>,
    /// Side of the sub-ray stencil per phosphene.
    #[arg(long)]
    pub stencil: Option<u32>,
}

impl DisplayArgs {
    fn settings(&self) -> DisplaySettings {
        DisplaySettings {
            width: self.width,
            height: self.height,
            hfov_deg: self.hfov,
            levels: self.levels,
            sigma_ratio: self.sigma_ratio,
            stencil: self.stencil,
        }
    }
}

fn parse_quat_order(s: &str) -> Result<QuatOrder, String> {
    match s {
        "wxyz" | "scalar_first" => Ok(QuatOrder::ScalarFirst),
        "xyzw" | "scalar_last" => Ok(QuatOrder::ScalarLast),
        _ => Err(format!("unknown quaternion order {s:?}; use wxyz or xyzw")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub panorama: Option<PathBuf>,
    /// Head yaw in degrees; positive turns right.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "quat")]
    pub yaw: Option<f64>,
    /// Head pitch in degrees; positive looks up.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "quat")]
    pub pitch: Option<f64>,
    /// Head roll in degrees.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "quat")]
    pub roll: Option<f64>,
    /// Orientation quaternion as four comma-separated numbers.
    #[arg(long, allow_hyphen_values = true)]
    pub quat: Option<String>,
    /// Component order of --quat: wxyz (default) or xyzw.
    #[arg(long, value_parser = parse_quat_order)]
    pub quat_order: Option<QuatOrder>,
    /// Aperture diameter in degrees.
    #[arg(long)]
    pub fov: Option<f64>,
    /// Nominal phosphene count.
    #[arg(long)]
    pub phosphenes: Option<u32>,
    /// Output PNG path.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub display: DisplayArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// null, sweep or oracle.
    #[arg(long)]
    pub agent: Option<String>,
    /// Comma-separated FOVxCOUNT conditions; defaults to the full 2 x 3 grid.
    #[arg(long)]
    pub conditions: Option<String>,
    /// Simulated frames per second.
    #[arg(long)]
    pub tick_hz: Option<f64>,
    #[arg(long)]
    pub participant: Option<String>,
    /// Output log path (JSON lines).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub display: DisplayArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Log files or directories of *.jsonl logs.
    #[arg(long, num_args = 1..)]
    pub logs: Vec<PathBuf>,
    /// Output directory for table.csv and report.json.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Port on 127.0.0.1; 0 picks a free one.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub display: DisplayArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Render(a) => cmd_render(&a, &file),
        Command::Session(a) => cmd_session(&a, &file),
        Command::Analyze(a) => cmd_analyze(&a, &file),
        Command::Serve(a) => cmd_serve(&a, &file),
    }
}

fn parse_quat(s: &str, order: QuatOrder) -> Result<Quaternion> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad quaternion {s:?}"))?;
    let arr: [f64; 4] = parts
        .try_into()
        .map_err(|v: Vec<f64>| anyhow::anyhow!("quaternion needs 4 components, got {}", v.len()))?;
    Ok(Quaternion::from_array(arr, order).normalized()?)
}

/// Renders one frame with a freshly built ray table.
pub fn render_still(
    panorama: &Panorama,
    head: Quaternion,
    condition: Condition,
    display: &DisplaySettings,
) -> Result<StimulusFrame> {
    let cfg = display.render_config(condition)?;
    let table = precompute_ray_table(&cfg)?;
    Ok(render_frame(panorama, head, &cfg, &table)?)
}

pub fn cmd_render(a: &RenderArgs, file: &FileConfig) -> Result<()> {
    let f = &file.render;
    let panorama = a.panorama.as_ref().or(f.panorama.as_ref()).context("--panorama is required")?;
    let out = a.out.as_ref().or(f.out.as_ref()).context("--out is required")?;
    let condition = Condition::new(
        a.fov.or(f.fov).unwrap_or(20.0),
        a.phosphenes.or(f.phosphenes).unwrap_or(500),
    );
    let head = match &a.quat {
        Some(q) => parse_quat(q, a.quat_order.or(f.quat_order).unwrap_or_default())?,
        None => Quaternion::from_yaw_pitch_roll(
            a.yaw.unwrap_or(0.0).to_radians(),
            a.pitch.unwrap_or(0.0).to_radians(),
            a.roll.unwrap_or(0.0).to_radians(),
        ),
    };
    let pano = Panorama::load(panorama)?;
    let frame = render_still(&pano, head, condition, &a.display.settings().or(&file.display))?;
    frame.save_png(out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn make_agent(name: &str) -> Result<Box<dyn Agent>> {
    Ok(match name {
        "null" => Box::new(NullAgent),
        "sweep" => Box::new(SweepAgent::default()),
        "oracle" => Box::new(OracleAgent::default()),
        other => bail!("unknown agent {other:?}; expected null, sweep or oracle"),
    })
}

/// Runs a headless session and returns its log.
pub fn run_session(a: &SessionArgs, file: &FileConfig) -> Result<SessionLog> {
    let f = &file.session;
    let corpus_path = a.corpus.as_ref().or(f.corpus.as_ref()).context("--corpus is required")?;
    let corpus = Corpus::load(corpus_path)?;
    let grid = match (&a.conditions, &f.conditions) {
        (Some(c), _) => parse_conditions(&[c])?,
        (None, Some(c)) => parse_conditions(c)?,
        (None, None) => Condition::default_grid(),
    };
    let seed = a.seed.or(f.seed).unwrap_or(0);
    let agent_name = a.agent.as_deref().or(f.agent.as_deref()).unwrap_or("null");
    let mut agent = make_agent(agent_name)?;
    let display = a.display.settings().or(&file.display);
    let defaults = SessionConfig::default();
    let config = SessionConfig {
        tick_hz: a.tick_hz.or(f.tick_hz).unwrap_or(defaults.tick_hz),
        render: display.render_config(grid[0])?,
        participant: a.participant.clone().or(f.participant.clone()),
        ..defaults
    };
    let plan = build_trial_plan(&corpus.scene_ids(), &grid, seed)?;
    let mut engine = SessionEngine::new(corpus, config)?;
    Ok(run_headless_session(&plan, agent.as_mut(), &mut engine)?)
}

pub fn cmd_session(a: &SessionArgs, file: &FileConfig) -> Result<()> {
    let out = a.out.as_ref().or(file.session.out.as_ref()).context("--out is required")?;
    let log = run_session(a, file)?;
    fs::write(out, log.to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
    let invalid = log.steps.iter().filter(|s| !s.is_valid()).count();
    if invalid > 0 {
        log::warn!("{invalid} step(s) could not be shown and were logged as invalid");
    }
    log::info!("wrote {} steps to {}", log.steps.len(), out.display());
    Ok(())
}

/// Expands directories to their `*.jsonl` files, sorted.
fn collect_log_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Reads and validates session logs; the file stem names the participant.
pub fn load_logs(inputs: &[PathBuf]) -> Result<Vec<SessionLog>> {
    let paths = collect_log_paths(inputs)?;
    ensure!(!paths.is_empty(), "no log files given");
    let mut logs = Vec::new();
    let mut names = HashSet::new();
    for p in paths {
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        ensure!(!text.trim().is_empty(), "{}: log is empty", p.display());
        let mut participant = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        while !names.insert(participant.clone()) {
            participant.push('_');
        }
        let log = SessionLog::from_jsonl(&participant, &text).with_context(|| format!("{}: corrupt log", p.display()))?;
        logs.push(log);
    }
    Ok(logs)
}

/// One row of `table.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TableRow {
    pub condition: String,
    pub fov_deg: f64,
    pub phosphenes: u32,
    pub angular_resolution: f64,
    pub recognition_mean: f64,
    pub recognition_std: f64,
    pub time_mean_s: f64,
    pub time_std_s: f64,
    pub timeouts: usize,
    pub n: usize,
}

impl From<&ConditionSummary> for TableRow {
    fn from(s: &ConditionSummary) -> Self {
        Self {
            condition: s.condition.to_string(),
            fov_deg: s.condition.fov_deg,
            phosphenes: s.condition.phosphenes,
            angular_resolution: s.angular_resolution,
            recognition_mean: s.recognition_mean,
            recognition_std: s.recognition_std,
            time_mean_s: s.time_mean_s,
            time_std_s: s.time_std_s,
            timeouts: s.timeouts,
            n: s.n,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    /// `null` when the fit is exact.
    pub f_value: Option<f64>,
    pub p_value: f64,
    pub p_band: &'static str,
    pub n: usize,
}

impl From<&RegressionFit> for FitReport {
    fn from(f: &RegressionFit) -> Self {
        Self {
            intercept: f.intercept,
            slope: f.slope,
            r_squared: f.r_squared,
            f_value: f.f_value.is_finite().then_some(f.f_value),
            p_value: f.p_value,
            p_band: p_band(f.p_value),
            n: f.n,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub observations: usize,
    pub recognition_regression: Option<FitReport>,
    pub time_regression: Option<FitReport>,
    pub recognition_anova: Option<AnovaTable>,
    pub time_anova: Option<AnovaTable>,
    pub notes: Vec<String>,
}

impl From<&AnalysisReport> for ReportJson {
    fn from(r: &AnalysisReport) -> Self {
        Self {
            observations: r.observations,
            recognition_regression: r.recognition_fit.as_ref().map(FitReport::from),
            time_regression: r.time_fit.as_ref().map(FitReport::from),
            recognition_anova: r.recognition_anova.clone(),
            time_anova: r.time_anova.clone(),
            notes: r.notes.clone(),
        }
    }
}

pub fn write_table(path: &Path, rows: &[ConditionSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(TableRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_analyze(a: &AnalyzeArgs, file: &FileConfig) -> Result<()> {
    let inputs = if a.logs.is_empty() {
        file.analyze.logs.clone().unwrap_or_default()
    } else {
        a.logs.clone()
    };
    let out = a.out.as_ref().or(file.analyze.out.as_ref()).context("--out is required")?;
    let logs = load_logs(&inputs)?;
    let report = analyze(&logs);
    ensure!(report.observations > 0, "logs contain no valid steps");
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_table(&out.join("table.csv"), &report.conditions)?;
    let json = serde_json::to_string_pretty(&ReportJson::from(&report))?;
    fs::write(out.join("report.json"), json)?;
    for n in &report.notes {
        log::warn!("{n}");
    }
    for c in &report.conditions {
        println!(
            "{:>8}  AR {:6.2}  recognition {:.3} ± {:.3}  time {:5.2} ± {:5.2} s  timeouts {}",
            c.condition.to_string(),
            c.angular_resolution,
            c.recognition_mean,
            c.recognition_std,
            c.time_mean_s,
            c.time_std_s,
            c.timeouts
        );
    }
    Ok(())
}

pub fn cmd_serve(a: &ServeArgs, file: &FileConfig) -> Result<()> {
    let corpus_path = a.corpus.as_ref().or(file.serve.corpus.as_ref()).context("--corpus is required")?;
    let corpus = Arc::new(Corpus::load(corpus_path)?);
    let port = a.port.or(file.serve.port).unwrap_or(7878);
    let listener = TcpListener::bind(("127.0.0.1", port)).with_context(|| format!("binding port {port}"))?;
    let service = Arc::new(FrameService::new(corpus, a.display.settings().or(&file.display)));
    eprintln!("listening on {}", listener.local_addr()?);
    serve(listener, service)?;
    Ok(())
}
