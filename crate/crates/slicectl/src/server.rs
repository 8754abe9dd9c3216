//! HTTP control plane over a live emulator.
//!
//! Every mutating request becomes one command submitted one tick after the
//! current sim time; the reply is that command's result. Views and metrics are
//! read under the same lock, so they always fall between events.

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use slicenet::api::{
    ApiError, Command, HandoffArgs, JoinArgs, MobilityArgs, MoveArgs, ParticipantRef, PublishArgs, Scenario, SliceRef,
    StreamArgs,
};
use slicenet::conference::Role;
use slicenet::emulator::{run_scenario, Emulator, EmulatorConfig};
use slicenet::orchestrator::SliceTemplate;
use slicenet::substrate::{AccessType, Topology};
use slicenet::SimDuration;
use tokio::sync::broadcast;

/// Wall-clock period of the live ticker.
pub const TICK_PERIOD: Duration = Duration::from_millis(20);
const EVENT_BUFFER: usize = 8192;

pub struct AppState {
    topo: Topology,
    seed: u64,
    live: Mutex<Live>,
    events: broadcast::Sender<String>,
}

struct Live {
    em: Emulator,
    /// Log records before this index have been pushed to /events.
    cursor: usize,
}

impl AppState {
    pub fn new(topo: Topology, seed: u64) -> Arc<AppState> {
        let em = Emulator::new(topo.clone(), EmulatorConfig::with_seed(seed));
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        Arc::new(AppState { topo, seed, live: Mutex::new(Live { em, cursor: 0 }), events })
    }

    fn lock(&self) -> MutexGuard<'_, Live> {
        self.live.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Pushes log records written since the last flush.
    fn flush(&self, live: &mut Live) {
        for r in &live.em.log()[live.cursor..] {
            // no subscribers is fine
            let _ = self.events.send(r.to_line());
        }
        live.cursor = live.em.log_len();
    }

    fn submit(&self, cmd: Command) -> Result<Value, ApiError> {
        let mut live = self.lock();
        let r = live.em.submit(cmd);
        self.flush(&mut live);
        r
    }

    /// Advances the sim by `ms`.
    pub fn advance(&self, ms: f64) {
        let mut live = self.lock();
        let t = live.em.now() + SimDuration::from_ms(ms);
        live.em.run_until(t);
        self.flush(&mut live);
    }

    fn with<T>(&self, f: impl FnOnce(&Emulator) -> T) -> T {
        f(&self.lock().em)
    }
}

/// Advances the sim by elapsed wall time times `time_scale`. A zero scale
/// leaves the clock to move only with commands.
pub fn spawn_ticker(state: Arc<AppState>, time_scale: f64) -> Option<tokio::task::JoinHandle<()>> {
    if time_scale <= 0.0 {
        return None;
    }
    Some(tokio::spawn(async move {
        let mut interval = tokio::time::interval(TICK_PERIOD);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let mut last = Instant::now();
        loop {
            interval.tick().await;
            let now = Instant::now();
            let ms = now.duration_since(last).as_secs_f64() * 1000.0 * time_scale;
            last = now;
            state.advance(ms);
        }
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/slices", post(create_slice))
        .route("/slices/{id}", delete(delete_slice))
        .route("/slices/{id}/mobility", post(toggle_mobility))
        .route("/slices/{id}/participants", post(join))
        .route("/slices/{id}/participants/{pid}", delete(leave))
        .route("/participants/{pid}/handoff", post(handoff))
        .route("/participants/{pid}/move", post(move_consumer))
        .route("/participants/{pid}/publish", post(publish))
        .route("/participants/{pid}/stream", post(stream))
        .route("/views", get(views))
        .route("/metrics", get(metrics))
        .route("/scenario", post(scenario))
        .route("/events", get(events))
        .with_state(state)
}

pub struct HttpError(pub ApiError);

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        HttpError(e)
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0.body())).into_response()
    }
}

type Reply = Result<(StatusCode, Json<Value>), HttpError>;

fn ok(v: Value) -> Reply {
    Ok((StatusCode::OK, Json(v)))
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::BadRequest(format!("{path}: {}", e.into_inner()))
    })
}

fn parse_value(body: &[u8]) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("body is not JSON: {e}")))
}

/// `{id}` is a numeric slice id or a slice name.
fn slice_name(state: &AppState, id: &str) -> Result<String, ApiError> {
    state.with(|em| {
        let by_id = id.parse::<u32>().ok().and_then(|n| em.slice_name(n)).map(str::to_string);
        by_id
            .or_else(|| em.slice_id(id).map(|_| id.to_string()))
            .ok_or_else(|| ApiError::UnknownSlice(id.to_string()))
    })
}

/// The slice a participant request targets: the named one, or the only slice
/// the participant belongs to.
fn participant_slice(state: &AppState, pid: &str, slice: Option<String>) -> Result<String, ApiError> {
    if let Some(s) = slice {
        return slice_name(state, &s);
    }
    let mut slices = state.with(|em| em.slices_of(pid));
    match slices.len() {
        0 => Err(ApiError::UnknownParticipant(pid.to_string())),
        1 => Ok(slices.remove(0)),
        _ => Err(ApiError::AmbiguousParticipant(pid.to_string())),
    }
}

async fn create_slice(State(state): State<Arc<AppState>>, body: Bytes) -> Reply {
    let t = SliceTemplate::from_value(parse_value(&body)?).map_err(ApiError::from)?;
    let v = state.submit(Command::CreateSlice(t))?;
    Ok((StatusCode::CREATED, Json(v)))
}

async fn delete_slice(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Reply {
    let slice = slice_name(&state, &id)?;
    ok(state.submit(Command::DeleteSlice(SliceRef { slice }))?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MobilityBody {
    enabled: bool,
}

async fn toggle_mobility(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let b: MobilityBody = parse(&body)?;
    let slice = slice_name(&state, &id)?;
    ok(state.submit(Command::ToggleMobility(MobilityArgs { slice, enabled: b.enabled }))?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinBody {
    participant: String,
    poa: String,
    #[serde(default)]
    iface: Option<AccessType>,
    #[serde(default)]
    roles: Option<Vec<Role>>,
}

async fn join(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let b: JoinBody = parse(&body)?;
    let slice = slice_name(&state, &id)?;
    ok(state.submit(Command::Join(JoinArgs {
        slice,
        participant: b.participant,
        poa: b.poa,
        iface: b.iface,
        roles: b.roles,
    }))?)
}

async fn leave(State(state): State<Arc<AppState>>, Path((id, pid)): Path<(String, String)>) -> Reply {
    let slice = slice_name(&state, &id)?;
    ok(state.submit(Command::Leave(ParticipantRef { slice, participant: pid }))?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HandoffBody {
    #[serde(default)]
    slice: Option<String>,
    to_poa: String,
    #[serde(default)]
    iface: Option<AccessType>,
    #[serde(default)]
    gap_ms: Option<u64>,
}

async fn handoff(State(state): State<Arc<AppState>>, Path(pid): Path<String>, body: Bytes) -> Reply {
    let b: HandoffBody = parse(&body)?;
    let slice = participant_slice(&state, &pid, b.slice)?;
    ok(state.submit(Command::Handoff(HandoffArgs {
        slice,
        participant: pid,
        to_poa: b.to_poa,
        iface: b.iface,
        gap_ms: b.gap_ms,
    }))?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveBody {
    #[serde(default)]
    slice: Option<String>,
    to_poa: String,
    #[serde(default)]
    iface: Option<AccessType>,
}

async fn move_consumer(State(state): State<Arc<AppState>>, Path(pid): Path<String>, body: Bytes) -> Reply {
    let b: MoveBody = parse(&body)?;
    let slice = participant_slice(&state, &pid, b.slice)?;
    ok(state.submit(Command::Move(MoveArgs { slice, participant: pid, to_poa: b.to_poa, iface: b.iface }))?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PublishBody {
    #[serde(default)]
    slice: Option<String>,
    #[serde(default)]
    payload_bytes: Option<u64>,
}

async fn publish(State(state): State<Arc<AppState>>, Path(pid): Path<String>, body: Bytes) -> Reply {
    // an empty body publishes one default-sized segment
    let b: PublishBody = if body.is_empty() { PublishBody { slice: None, payload_bytes: None } } else { parse(&body)? };
    let slice = participant_slice(&state, &pid, b.slice)?;
    ok(state.submit(Command::Publish(PublishArgs { slice, participant: pid, payload_bytes: b.payload_bytes }))?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamBody {
    #[serde(default)]
    slice: Option<String>,
    count: u64,
    interval_ms: u64,
    #[serde(default)]
    payload_bytes: Option<u64>,
}

async fn stream(State(state): State<Arc<AppState>>, Path(pid): Path<String>, body: Bytes) -> Reply {
    let b: StreamBody = parse(&body)?;
    let slice = participant_slice(&state, &pid, b.slice)?;
    ok(state.submit(Command::Stream(StreamArgs {
        slice,
        participant: pid,
        count: b.count,
        interval_ms: b.interval_ms,
        payload_bytes: b.payload_bytes,
    }))?)
}

async fn views(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(state.with(|em| json!(em.views())))
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(state.with(|em| json!(em.metrics())))
}

/// Runs a script headless on a fresh emulator over the server's topology. The
/// body is a scenario document with an optional `seed`; the live emulation is
/// untouched.
async fn scenario(State(state): State<Arc<AppState>>, body: Bytes) -> Reply {
    let mut doc = parse_value(&body)?;
    let seed = match doc.as_object_mut().and_then(|o| o.remove("seed")) {
        None => state.seed,
        Some(v) => v.as_u64().ok_or_else(|| ApiError::BadRequest("seed: expected an unsigned integer".into()))?,
    };
    let script = Scenario::from_value(doc)?;
    let topo = state.topo.clone();
    let out = tokio::task::spawn_blocking(move || run_scenario(topo, &script, EmulatorConfig::with_seed(seed)))
        .await
        .map_err(|e| ApiError::BadRequest(format!("scenario run aborted: {e}")))?;
    ok(json!({ "seed": seed, "log": out.log, "metrics": out.metrics }))
}

/// Log records as server-sent events, one record per event.
async fn events(State(state): State<Arc<AppState>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.events.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let ev = match rx.recv().await {
            Ok(line) => Event::default().data(line),
            Err(broadcast::error::RecvError::Lagged(n)) => Event::default().event("lagged").data(n.to_string()),
            Err(broadcast::error::RecvError::Closed) => return None,
        };
        Some((Ok(ev), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}
