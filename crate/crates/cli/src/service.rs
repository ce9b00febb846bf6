//! TCP frame service: one thread per connection over shared scene and
//! ray-table caches. See [`crate::protocol`] for the message format.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, BufReader, BufWriter};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use spv_core::experiment::{
    build_trial_plan, EventType, LogRecord, ObjectClass, SceneSource, SessionLog, TrialPlan, TIME_LIMIT_S,
};
use spv_core::geometry::Quaternion;
use spv_core::renderer::{precompute_ray_table, render_frame, RayTable, RenderConfig, StimulusFrame};
use spv_core::Condition;

use crate::corpus::Corpus;
use crate::protocol::{
    read_reply, write_reply, ErrorCode, FrameRequest, Reply, Request, SessionEventRequest, SessionStartRequest,
};
use crate::settings::DisplaySettings;

#[derive(Debug)]
struct Failure(ErrorCode, String);

impl Failure {
    fn new(code: ErrorCode, msg: impl Into<String>) -> Self {
        Self(code, msg.into())
    }
}

/// A session driven by client events.
#[derive(Debug)]
struct LiveSession {
    participant: String,
    plan: TrialPlan,
    /// Records of completed steps.
    records: Vec<LogRecord>,
    /// Records of the step in progress, starting with its fixation.
    open: Vec<LogRecord>,
    counts: BTreeMap<ObjectClass, u32>,
    next_step: u32,
}

impl LiveSession {
    fn event(&mut self, ev: &SessionEventRequest) -> Result<u32, Failure> {
        let bad = |m: String| Failure::new(ErrorCode::InvalidEvent, m);
        if !ev.timestamp_s.is_finite() {
            return Err(bad("non-finite timestamp".into()));
        }
        let Some(ps) = self.plan.steps.iter().find(|s| s.step == ev.step) else {
            return Err(bad(format!("step {} is not in the plan", ev.step)));
        };
        let mut rec = LogRecord {
            timestamp_s: ev.timestamp_s,
            step: ps.step,
            scene: ps.scene.clone(),
            fov_deg: ps.condition.fov_deg,
            phosphenes: ps.condition.phosphenes,
            event_type: ev.event_type,
            object_class: None,
            count: 0,
        };
        match ev.event_type {
            EventType::Fixation => {
                if !self.open.is_empty() {
                    return Err(bad("previous step has not ended".into()));
                }
                if ev.step != self.next_step {
                    return Err(bad(format!("expected step {}, got {}", self.next_step, ev.step)));
                }
                if ev.timestamp_s > 0.0 {
                    return Err(bad("fixation must precede scene onset".into()));
                }
                self.counts.clear();
                self.open.push(rec);
                Ok(0)
            }
            other => {
                let Some(last) = self.open.last() else {
                    return Err(bad(format!("{other:?} outside a step")));
                };
                if last.step != ev.step {
                    return Err(bad(format!("step {} is in progress", last.step)));
                }
                if !(0.0..=TIME_LIMIT_S).contains(&ev.timestamp_s) || ev.timestamp_s < last.timestamp_s.max(0.0) {
                    return Err(bad(format!("timestamp {} out of order or past the limit", ev.timestamp_s)));
                }
                if other == EventType::Response {
                    let class = ev.object_class.ok_or_else(|| bad("response without object_class".into()))?;
                    let n = self.counts.entry(class).or_insert(0);
                    *n += 1;
                    rec.object_class = Some(class);
                    rec.count = *n;
                    self.open.push(rec);
                    return Ok(*n);
                }
                // check the finished step with the log validator before committing it
                let mut step = self.open.clone();
                step.push(rec);
                SessionLog::from_jsonl(&self.participant, &to_jsonl(&step)).map_err(|e| bad(e.to_string()))?;
                self.records.extend(step);
                self.open.clear();
                self.next_step += 1;
                Ok(0)
            }
        }
    }
}

fn to_jsonl(records: &[LogRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("log records serialize"));
        s.push('\n');
    }
    s
}

/// Shared, thread-safe request handler.
pub struct FrameService {
    corpus: Arc<Corpus>,
    display: DisplaySettings,
    tables: Mutex<HashMap<Condition, Arc<(RenderConfig, RayTable)>>>,
    sessions: Mutex<HashMap<u64, LiveSession>>,
    next_session: AtomicU64,
}

impl FrameService {
    pub fn new(corpus: Arc<Corpus>, display: DisplaySettings) -> Self {
        Self {
            corpus,
            display,
            tables: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    fn table(&self, condition: Condition) -> Result<Arc<(RenderConfig, RayTable)>, Failure> {
        if let Some(t) = self.tables.lock().expect("table cache poisoned").get(&condition) {
            return Ok(t.clone());
        }
        let render_err = |e: String| Failure::new(ErrorCode::RenderFailed, e);
        let cfg = self.display.render_config(condition).map_err(|e| render_err(e.to_string()))?;
        let table = precompute_ray_table(&cfg).map_err(|e| render_err(e.to_string()))?;
        let entry = Arc::new((cfg, table));
        Ok(self
            .tables
            .lock()
            .expect("table cache poisoned")
            .entry(condition)
            .or_insert(entry)
            .clone())
    }

    /// Renders a frame request; the time covers the frame render only.
    pub fn render(&self, req: &FrameRequest) -> Result<(StimulusFrame, f64), (ErrorCode, String)> {
        self.render_inner(req).map_err(|Failure(c, m)| (c, m))
    }

    fn render_inner(&self, req: &FrameRequest) -> Result<(StimulusFrame, f64), Failure> {
        let head = Quaternion::from_array(req.orientation, req.quat_order)
            .normalized()
            .map_err(|e| Failure::new(ErrorCode::InvalidOrientation, e.to_string()))?;
        let pano = self
            .corpus
            .panorama(&req.scene)
            .map_err(|e| Failure::new(ErrorCode::UnknownScene, e.to_string()))?;
        let entry = self.table(req.condition)?;
        let (cfg, table) = entry.as_ref();
        let t0 = Instant::now();
        let frame = render_frame(&pano, head, cfg, table).map_err(|e| Failure::new(ErrorCode::RenderFailed, e.to_string()))?;
        Ok((frame, t0.elapsed().as_secs_f64() * 1e3))
    }

    fn start_session(&self, req: &SessionStartRequest) -> Result<Reply, Failure> {
        let grid = req.conditions.clone().unwrap_or_else(Condition::default_grid);
        let plan = build_trial_plan(&self.corpus.scene_ids(), &grid, req.seed)
            .map_err(|e| Failure::new(ErrorCode::InvalidEvent, e.to_string()))?;
        let session_id = self.next_session.fetch_add(1, Ordering::Relaxed);
        let participant = req.participant.clone().unwrap_or_else(|| format!("session{session_id}"));
        let reply = Reply::Session {
            id: req.id,
            session_id,
            participant: participant.clone(),
            break_after: plan.break_after,
            steps: plan.steps.clone(),
            payload_len: 0,
        };
        self.sessions.lock().expect("session table poisoned").insert(
            session_id,
            LiveSession {
                participant,
                plan,
                records: Vec::new(),
                open: Vec::new(),
                counts: BTreeMap::new(),
                next_step: 1,
            },
        );
        Ok(reply)
    }

    fn with_session<T>(&self, id: u64, f: impl FnOnce(&mut LiveSession) -> Result<T, Failure>) -> Result<T, Failure> {
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        let s = sessions
            .get_mut(&id)
            .ok_or_else(|| Failure::new(ErrorCode::UnknownSession, format!("no session {id}")))?;
        f(s)
    }

    fn dispatch(&self, req: &Request) -> Result<(Reply, Vec<u8>), Failure> {
        match req {
            Request::Frame(f) => {
                let (frame, render_ms) = self.render_inner(f)?;
                let bytes = frame.to_bytes();
                Ok((
                    Reply::Frame {
                        id: f.id,
                        width: frame.width(),
                        height: frame.height(),
                        render_ms,
                        payload_len: bytes.len(),
                    },
                    bytes,
                ))
            }
            Request::SessionStart(s) => Ok((self.start_session(s)?, Vec::new())),
            Request::SessionEvent(ev) => {
                let count = self.with_session(ev.session_id, |s| s.event(ev))?;
                Ok((
                    Reply::Ack {
                        id: ev.id,
                        session_id: ev.session_id,
                        step: ev.step,
                        count,
                        payload_len: 0,
                    },
                    Vec::new(),
                ))
            }
            Request::SessionLog { id, session_id } => {
                let text = self.with_session(*session_id, |s| {
                    let text = to_jsonl(&s.records);
                    SessionLog::from_jsonl(&s.participant, &text)
                        .map_err(|e| Failure::new(ErrorCode::InvalidEvent, e.to_string()))?;
                    Ok(text)
                })?;
                let bytes = text.into_bytes();
                Ok((
                    Reply::SessionLog {
                        id: *id,
                        session_id: *session_id,
                        payload_len: bytes.len(),
                    },
                    bytes,
                ))
            }
        }
    }

    /// Answers one request line. Never fails: problems become error replies.
    pub fn handle_line(&self, line: &str) -> (Reply, Vec<u8>) {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()));
                return (Reply::error(id, ErrorCode::MalformedRequest, e.to_string()), Vec::new());
            }
        };
        match self.dispatch(&req) {
            Ok(r) => r,
            Err(Failure(code, msg)) => {
                log::debug!("request failed: {msg}");
                (Reply::error(req.id(), code, msg), Vec::new())
            }
        }
    }
}

fn handle_connection(stream: TcpStream, service: &FrameService) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let (header, payload) = service.handle_line(line.trim_end());
        write_reply(&mut writer, &header, &payload)?;
    }
}

/// Accepts connections until the listener fails, one thread per client.
pub fn serve(listener: TcpListener, service: Arc<FrameService>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let service = service.clone();
        std::thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = handle_connection(stream, &service) {
                log::debug!("connection {peer:?} closed: {e}");
            }
        });
    }
    Ok(())
}

/// Blocking client for the service.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }

    /// Sends a raw request line and waits for the reply.
    pub fn send_line(&mut self, line: &str) -> io::Result<(Reply, Vec<u8>)> {
        use std::io::Write;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        read_reply(&mut self.reader)?.ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "service closed"))
    }

    pub fn request(&mut self, req: &Request) -> io::Result<(Reply, Vec<u8>)> {
        self.send_line(&serde_json::to_string(req).map_err(io::Error::other)?)
    }
}
