//! The event-driven engine that ties substrate, slices, conference and mobility together.
//!
//! Every mutation is an event on one seeded clock. Commands from scripts or HTTP
//! requests are events too, so a live session and a scripted run share one path.

mod log;
mod net;
mod routing;
mod scenario;
mod views;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::api::{ApiError, Command, HandoffArgs, JoinArgs, MoveArgs};
use crate::conference::{names, Participant, ParticipantStats, Role, SyncService, DEFAULT_PAYLOAD_BYTES};
use crate::icn::{FaceId, ForwarderState, Packet, SliceId, DEFAULT_INTEREST_LIFETIME_MS};
use crate::name::Name;
use crate::mobility::{HandoffReport, PoaState, DEFAULT_DETACH_GAP_MS};
use crate::orchestrator::{
    adapt, admit, release_all, AdaptError, AdmitError, AllocationMatrix, ServiceGraph, SliceTemplate, VNodeKind,
    SYNC_VNODE,
};
use crate::substrate::{AccessType, CapacityLedger, EventClock, LinkScheduler, NodeRole, Topology};
use crate::time::{SimDuration, SimTime, TICK};

pub use log::{slice_trace, to_ndjson, LogRecord};
pub use scenario::{run_scenario, ScenarioOutcome};
pub use views::{
    FibRow, ForwarderSliceView, ForwarderStateView, Metrics, ParticipantView, SliceMetrics, SliceView, VLinkView,
    VNodeView, Views, SCHEMA_VERSION,
};

/// How long after the old PoA detached a handoff report stays open.
pub const REPORT_WINDOW_MS: u64 = 8000;
/// Delay before a consumer re-polls after its poll was NACKed.
pub const POLL_RETRY_MS: u64 = 100;
/// Grace period past an Interest's lifetime before the application gives up waiting.
pub const APP_TIMER_SLACK_MS: u64 = 200;
pub const MONITOR_INTERVAL_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct EmulatorConfig {
    pub seed: u64,
    pub interest_lifetime_ms: u64,
    /// When false every slice gets a zero cache budget.
    pub cache_enabled: bool,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        EmulatorConfig {
            seed: 42,
            interest_lifetime_ms: DEFAULT_INTEREST_LIFETIME_MS,
            cache_enabled: true,
        }
    }
}

impl EmulatorConfig {
    pub fn with_seed(seed: u64) -> Self {
        EmulatorConfig { seed, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Event {
    Deliver { node: String, face: FaceId, packet: Packet },
    ToParticipant { slice: SliceId, pid: String, attach: u64, packet: Packet },
    ToSync { slice: SliceId, packet: Packet },
    ToAgent { node: String, packet: Packet },
    PitExpire { node: String, slice: SliceId, subject: SliceId },
    PollTimer { slice: SliceId, pid: String, nonce: u64 },
    MediaTimer { slice: SliceId, pid: String, name: Name, nonce: u64 },
    StreamTick { slice: SliceId, pid: String, remaining: u64, interval_ms: u64, payload: u64 },
    Attach { slice: SliceId, pid: String, handoff: u64 },
    HandoffDeadline { slice: SliceId, handoff: u64 },
    Command { id: u64, cmd: Command },
    MonitorTick,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Face {
    Link { link: String, peer: String },
    Access { slice: SliceId, pid: String, link: String, attach: u64, alive: bool },
    Sync { slice: SliceId },
    Agent,
}

#[derive(Debug, Clone)]
pub(crate) struct Member {
    pub p: Participant,
    pub poa: String,
    pub iface: AccessType,
    pub link: String,
    /// None while detached by a handoff.
    pub face: Option<FaceId>,
    /// Bumped on every face change; packets for older attachments are dropped.
    pub attach_id: u64,
    /// Where the slice FIB sends Interests for this participant's prefix.
    pub home: String,
    /// Current (or, while detached, last) access face.
    pub face_route: (String, FaceId),
    pub epoch: u64,
    /// (nonce, known version) of the outstanding roster poll.
    pub poll: Option<(u64, u64)>,
    pub deferred: Vec<Packet>,
    pub handoff: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tracked {
    Pending,
    Resolved,
    Lost,
}

#[derive(Debug, Clone)]
pub(crate) struct HandoffTrack {
    pub report: HandoffReport,
    pub prefix: Name,
    pub to_iface: AccessType,
    pub open: bool,
    pub tracked: BTreeMap<Name, Tracked>,
    pub late_bound: BTreeSet<Name>,
}

#[derive(Debug, Clone)]
pub(crate) struct SliceRt {
    pub id: SliceId,
    pub name: String,
    pub template: SliceTemplate,
    pub graph: ServiceGraph,
    pub alloc: AllocationMatrix,
    pub mobility: bool,
    pub footprint: BTreeSet<String>,
    pub links: BTreeSet<String>,
    pub sync_node: String,
    pub sync: SyncService,
    pub members: BTreeMap<String, Member>,
    pub rng: ChaCha8Rng,
    pub face_counter: BTreeMap<String, u32>,
    pub handoff_seq: u64,
    pub handoffs: BTreeMap<u64, HandoffTrack>,
    pub reports: Vec<HandoffReport>,
    /// Counters of participants that have left.
    pub departed: ParticipantStats,
}

impl SliceRt {
    pub fn nonce(&mut self) -> u64 {
        self.rng.random()
    }

    pub fn cache_budget(&self, enabled: bool) -> u64 {
        if !enabled {
            return 0;
        }
        let mb = self
            .graph
            .vnodes
            .iter()
            .filter(|v| v.kind == VNodeKind::Forwarder)
            .map(|v| v.cache_mb)
            .fold(0.0, f64::max);
        (mb * 1e6).round() as u64
    }

    pub fn sync_face(&self) -> FaceId {
        FaceId(self.id.0 << 20)
    }

    pub fn new_face(&mut self, node: &str) -> FaceId {
        let c = self.face_counter.entry(node.to_string()).or_insert(0);
        *c += 1;
        FaceId((self.id.0 << 20) | *c)
    }
}

/// Stable per-slice RNG stream so one slice's draws never depend on another's.
fn stream_of(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub struct Emulator {
    pub(crate) topo: Topology,
    pub(crate) config: EmulatorConfig,
    pub(crate) clock: EventClock<Event>,
    pub(crate) links: LinkScheduler,
    pub(crate) ledger: CapacityLedger,
    pub(crate) fwd: BTreeMap<String, ForwarderState>,
    pub(crate) faces: BTreeMap<String, BTreeMap<FaceId, Face>>,
    pub(crate) link_face: BTreeMap<(String, String), FaceId>,
    pub(crate) agent_face: BTreeMap<String, FaceId>,
    pub(crate) poas: BTreeMap<String, PoaState>,
    pub(crate) slices: BTreeMap<SliceId, SliceRt>,
    pub(crate) by_name: BTreeMap<String, SliceId>,
    pub(crate) control_rng: ChaCha8Rng,
    next_slice: u32,
    next_command: u64,
    results: BTreeMap<u64, Result<Value, ApiError>>,
    pub(crate) log: Vec<LogRecord>,
}

impl Emulator {
    pub fn new(topo: Topology, config: EmulatorConfig) -> Self {
        let clock = EventClock::new(config.seed);
        let control_rng = clock.rng(0);
        let mut em = Emulator {
            ledger: CapacityLedger::new(&topo),
            config,
            clock,
            links: LinkScheduler::new(),
            fwd: BTreeMap::new(),
            faces: BTreeMap::new(),
            link_face: BTreeMap::new(),
            agent_face: BTreeMap::new(),
            poas: BTreeMap::new(),
            slices: BTreeMap::new(),
            by_name: BTreeMap::new(),
            control_rng,
            next_slice: 1,
            next_command: 0,
            results: BTreeMap::new(),
            log: Vec::new(),
            topo,
        };
        em.build_substrate();
        em.clock
            .schedule(SimTime::from_ms(MONITOR_INTERVAL_MS as f64), Event::MonitorTick)
            .expect("future");
        em
    }

    fn build_substrate(&mut self) {
        for node in self.topo.nodes() {
            let mut fwd = ForwarderState::new(node.id.clone());
            fwd.provision(SliceId::CONTROL, 0);
            self.fwd.insert(node.id.clone(), fwd);
            let mut faces = BTreeMap::new();
            for (i, (link, peer)) in self.topo.neighbors(&node.id).iter().enumerate() {
                let f = FaceId(i as u32 + 1);
                faces.insert(f, Face::Link { link: link.clone(), peer: peer.clone() });
                self.link_face.insert((node.id.clone(), link.clone()), f);
            }
            if node.role == NodeRole::AccessPoa {
                let f = FaceId(faces.len() as u32 + 1);
                faces.insert(f, Face::Agent);
                self.agent_face.insert(node.id.clone(), f);
                self.poas.insert(node.id.clone(), PoaState::new(&node.id));
            }
            self.faces.insert(node.id.clone(), faces);
        }
        routing::install_control_routes(self);
    }

    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn config(&self) -> &EmulatorConfig {
        &self.config
    }

    pub fn ledger(&self) -> &CapacityLedger {
        &self.ledger
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn log_len(&self) -> usize {
        self.log.len()
    }

    pub fn forwarder(&self, node: &str) -> Option<&ForwarderState> {
        self.fwd.get(node)
    }

    pub fn poa_state(&self, node: &str) -> Option<&PoaState> {
        self.poas.get(node)
    }

    pub fn slice_name(&self, id: u32) -> Option<&str> {
        self.slices.get(&SliceId(id)).map(|rt| rt.name.as_str())
    }

    pub fn slice_id(&self, name: &str) -> Option<SliceId> {
        self.by_name.get(name).copied()
    }

    /// Handoff reports finalised so far for a slice.
    pub fn handoff_reports(&self, slice: &str) -> Vec<HandoffReport> {
        self.by_name
            .get(slice)
            .and_then(|id| self.slices.get(id))
            .map(|s| s.reports.clone())
            .unwrap_or_default()
    }

    pub fn participant(&self, slice: &str, pid: &str) -> Option<&Participant> {
        let id = self.by_name.get(slice)?;
        self.slices.get(id)?.members.get(pid).map(|m| &m.p)
    }

    /// Slices containing a participant with this id.
    pub fn slices_of(&self, pid: &str) -> Vec<String> {
        self.slices
            .values()
            .filter(|s| s.members.contains_key(pid))
            .map(|s| s.name.clone())
            .collect()
    }

    pub(crate) fn emit(&mut self, kind: &str, slice: Option<&str>, fields: Value) {
        let Value::Object(mut fields) = fields else {
            panic!("log fields must be an object");
        };
        for k in ["t_ms", "kind", "slice"] {
            fields.remove(k);
        }
        self.log.push(LogRecord {
            t_ms: self.clock.now().as_ms(),
            kind: kind.to_string(),
            slice: slice.map(str::to_string),
            fields,
        });
    }

    pub(crate) fn schedule(&mut self, at: SimTime, e: Event) {
        self.clock.schedule(at, e).expect("events are never scheduled in the past");
    }

    pub(crate) fn schedule_in_ms(&mut self, ms: u64, e: Event) {
        self.clock.schedule_in(SimDuration::from_ms_u64(ms), e);
    }

    /// Queues a command at `at` and returns its ticket.
    pub fn enqueue(&mut self, at: SimTime, cmd: Command) -> u64 {
        let id = self.next_command;
        self.next_command += 1;
        let at = at.max(self.clock.now());
        self.schedule(at, Event::Command { id, cmd });
        id
    }

    /// Result of a completed command, if it has run.
    pub fn take_result(&mut self, ticket: u64) -> Option<Result<Value, ApiError>> {
        self.results.remove(&ticket)
    }

    /// Runs one command one clock tick from now, after every event already due,
    /// and returns its reply.
    pub fn submit(&mut self, cmd: Command) -> Result<Value, ApiError> {
        let at = self.clock.now() + TICK;
        let ticket = self.enqueue(at, cmd);
        while !self.results.contains_key(&ticket) {
            if !self.step_until(at) {
                break;
            }
        }
        self.take_result(ticket).expect("command ran")
    }

    /// Dispatches the next event due at or before `limit`. Returns false if none is due.
    pub fn step_until(&mut self, limit: SimTime) -> bool {
        match self.clock.pop_until(limit) {
            Some((_, e)) => {
                self.dispatch(e);
                true
            }
            None => false,
        }
    }

    /// Dispatches every event up to `t` and leaves the clock at `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while self.step_until(t) {}
        self.clock.advance_to(t);
    }

    pub fn run_for_ms(&mut self, ms: f64) {
        let t = self.clock.now() + SimDuration::from_ms(ms);
        self.run_until(t);
    }

    fn dispatch(&mut self, e: Event) {
        match e {
            Event::Deliver { node, face, packet } => self.on_deliver(&node, face, packet),
            Event::ToParticipant { slice, pid, attach, packet } => self.on_participant_packet(slice, &pid, attach, packet),
            Event::ToSync { slice, packet } => self.on_sync_packet(slice, packet),
            Event::ToAgent { node, packet } => self.on_agent_packet(&node, packet),
            Event::PitExpire { node, slice, subject } => self.on_pit_expire(&node, slice, subject),
            Event::PollTimer { slice, pid, nonce } => self.on_poll_timer(slice, &pid, nonce),
            Event::MediaTimer { slice, pid, name, nonce } => self.on_media_timer(slice, &pid, &name, nonce),
            Event::StreamTick { slice, pid, remaining, interval_ms, payload } => {
                self.on_stream_tick(slice, &pid, remaining, interval_ms, payload)
            }
            Event::Attach { slice, pid, handoff } => self.on_attach(slice, &pid, handoff),
            Event::HandoffDeadline { slice, handoff } => self.finalize_handoff(slice, handoff),
            Event::Command { id, cmd } => {
                let name = cmd.name();
                let slice = cmd.slice().to_string();
                let result = self.execute(cmd);
                if let Err(e) = &result {
                    let body = e.body();
                    self.emit(
                        "command_error",
                        Some(&slice),
                        json!({"command": name, "code": body.code, "message": body.message}),
                    );
                }
                self.results.insert(id, result);
            }
            Event::MonitorTick => {
                self.monitor();
                self.schedule_in_ms(MONITOR_INTERVAL_MS, Event::MonitorTick);
            }
        }
    }

    fn execute(&mut self, cmd: Command) -> Result<Value, ApiError> {
        match cmd {
            Command::CreateSlice(t) => self.create_slice(t),
            Command::DeleteSlice(a) => self.delete_slice(&a.slice),
            Command::ToggleMobility(a) => self.toggle_mobility(&a.slice, a.enabled),
            Command::Join(a) => self.join(a),
            Command::Leave(a) => self.leave(&a.slice, &a.participant),
            Command::Publish(a) => {
                let id = self.slice_by_name(&a.slice)?;
                let seq = self.publish(id, &a.participant, a.payload_bytes.unwrap_or(DEFAULT_PAYLOAD_BYTES))?;
                Ok(json!({"seq": seq}))
            }
            Command::Stream(a) => {
                let id = self.slice_by_name(&a.slice)?;
                let m = self.member(id, &a.participant)?;
                if !m.p.is_producer() {
                    return Err(ApiError::NotProducer(a.participant));
                }
                if a.count > 0 {
                    self.schedule(
                        self.clock.now(),
                        Event::StreamTick {
                            slice: id,
                            pid: a.participant,
                            remaining: a.count,
                            interval_ms: a.interval_ms,
                            payload: a.payload_bytes.unwrap_or(DEFAULT_PAYLOAD_BYTES),
                        },
                    );
                }
                Ok(json!({"count": a.count}))
            }
            Command::Move(a) => self.consumer_move(a),
            Command::Handoff(a) => self.handoff(a),
            Command::Adapt(a) => self.adapt_slice(&a.slice, &a.participants),
        }
    }

    pub(crate) fn slice_by_name(&self, name: &str) -> Result<SliceId, ApiError> {
        self.by_name.get(name).copied().ok_or_else(|| ApiError::UnknownSlice(name.to_string()))
    }

    fn member(&self, id: SliceId, pid: &str) -> Result<&Member, ApiError> {
        self.slices[&id]
            .members
            .get(pid)
            .ok_or_else(|| ApiError::UnknownParticipant(pid.to_string()))
    }

    fn access_link(&self, poa: &str, iface: Option<AccessType>) -> Result<(String, AccessType), ApiError> {
        if self.topo.node(poa).is_none_or(|n| n.role != NodeRole::AccessPoa) {
            return Err(ApiError::InvalidPoa(poa.to_string()));
        }
        let link = match iface {
            Some(kind) => self.topo.access_link(poa, kind),
            None => self.topo.access_links(poa).into_iter().min_by(|a, b| a.id.cmp(&b.id)),
        };
        match link {
            Some(l) => Ok((l.id.clone(), l.access_type.expect("access link"))),
            None => Err(ApiError::NoSuchInterface {
                poa: poa.to_string(),
                iface: iface.map_or_else(|| "any".to_string(), |k| k.to_string()),
            }),
        }
    }

    // ---- slice lifecycle ----

    fn create_slice(&mut self, t: SliceTemplate) -> Result<Value, ApiError> {
        if self.by_name.contains_key(&t.slice_name) {
            return Err(ApiError::DuplicateSlice(t.slice_name.clone()));
        }
        let adm = match admit(&t, &self.topo, &mut self.ledger) {
            Ok(a) => a,
            Err(AdmitError::Template(e)) => return Err(ApiError::Template(e)),
            Err(AdmitError::Embedding(e)) => {
                self.emit(
                    "slice_rejected",
                    Some(&t.slice_name),
                    json!({"reason": e.reason, "detail": e.detail}),
                );
                return Err(ApiError::Embedding(e));
            }
        };
        let id = SliceId(self.next_slice);
        self.next_slice += 1;
        let footprint = adm.alloc.footprint(&self.topo);
        let links: BTreeSet<String> = adm.alloc.link_map.values().flatten().cloned().collect();
        let sync_node = adm.alloc.node_map[SYNC_VNODE].clone();
        let mut rt = SliceRt {
            id,
            name: t.slice_name.clone(),
            mobility: t.mobility_enabled,
            graph: adm.graph,
            alloc: adm.alloc,
            footprint: BTreeSet::new(),
            links,
            sync: SyncService::new(id, &t.slice_name),
            sync_node,
            members: BTreeMap::new(),
            rng: self.clock.rng(stream_of(&t.slice_name)),
            face_counter: BTreeMap::new(),
            handoff_seq: 0,
            handoffs: BTreeMap::new(),
            reports: Vec::new(),
            departed: ParticipantStats::default(),
            template: t,
        };
        let budget = rt.cache_budget(self.config.cache_enabled);
        for n in &footprint {
            self.fwd.get_mut(n).expect("known node").provision(id, budget);
        }
        rt.footprint = footprint;
        let sync_face = rt.sync_face();
        self.faces
            .get_mut(&rt.sync_node)
            .expect("known node")
            .insert(sync_face, Face::Sync { slice: id });
        let name = rt.name.clone();
        let fields = json!({
            "slice_id": id.0,
            "mobility": rt.mobility,
            "sync_node": rt.sync_node,
            "node_map": rt.alloc.node_map,
            "footprint": rt.footprint,
        });
        self.by_name.insert(name.clone(), id);
        self.slices.insert(id, rt);
        routing::rebuild(self, id);
        self.emit("slice_created", Some(&name), fields);
        Ok(json!({"slice_id": id.0, "name": name}))
    }

    fn delete_slice(&mut self, name: &str) -> Result<Value, ApiError> {
        let id = self.slice_by_name(name)?;
        let mut rt = self.slices.remove(&id).expect("indexed");
        self.by_name.remove(name);
        let released = release_all(&mut rt.alloc, &mut self.ledger);
        for n in &rt.footprint {
            if let Some(f) = self.fwd.get_mut(n) {
                f.deprovision(id);
            }
        }
        for faces in self.faces.values_mut() {
            faces.retain(|_, f| match f {
                Face::Access { slice, .. } | Face::Sync { slice } => *slice != id,
                _ => true,
            });
        }
        for poa in self.poas.values_mut() {
            poa.clear_slice(id);
        }
        self.emit(
            "slice_deleted",
            Some(name),
            json!({"slice_id": id.0, "released": {"compute": released.compute, "storage_mb": released.storage_mb, "bandwidth_kbps": released.bandwidth_kbps}}),
        );
        Ok(json!({"slice_id": id.0, "deleted": true}))
    }

    fn toggle_mobility(&mut self, name: &str, enabled: bool) -> Result<Value, ApiError> {
        let id = self.slice_by_name(name)?;
        let rt = self.slices.get_mut(&id).expect("indexed");
        let changed = rt.mobility != enabled;
        rt.mobility = enabled;
        if changed {
            for m in rt.members.values_mut() {
                m.home = m.poa.clone();
            }
            if enabled {
                for poa in self.poas.values_mut() {
                    poa.clear_slice(id);
                }
                let attach: Vec<(String, Name, FaceId, u64)> = rt
                    .members
                    .values()
                    .filter(|m| m.p.is_producer())
                    .filter_map(|m| Some((m.poa.clone(), names::participant_prefix(name, &m.p.id), m.face?, m.epoch)))
                    .collect();
                for (poa, prefix, face, epoch) in attach {
                    self.poas.get_mut(&poa).expect("poa").attach(id, &prefix, face, epoch);
                }
            }
            routing::rebuild(self, id);
        }
        self.emit("mobility_toggled", Some(name), json!({"enabled": enabled, "changed": changed}));
        Ok(json!({"slice": name, "mobility_enabled": enabled}))
    }

    fn adapt_slice(&mut self, name: &str, counts: &[u32]) -> Result<Value, ApiError> {
        let id = self.slice_by_name(name)?;
        let rt = self.slices.get(&id).expect("indexed");
        let (t, g, report) = match adapt(&rt.template, &rt.alloc, counts, &mut self.ledger) {
            Ok(r) => r,
            Err(AdaptError::Template(e)) => return Err(ApiError::Template(e)),
            Err(AdaptError::Rejected(msg)) => return Err(ApiError::AdaptRejected(msg)),
        };
        let rt = self.slices.get_mut(&id).expect("indexed");
        rt.template = t;
        rt.graph = g;
        let budget = rt.cache_budget(self.config.cache_enabled);
        for n in rt.footprint.clone() {
            if let Some(tables) = self.fwd.get_mut(&n).and_then(|f| f.tables_mut(id)) {
                tables.cs.set_budget(budget);
            }
        }
        let fields = json!({"participants": counts, "in_place_shrink": report.in_place_shrink, "cache_budget_bytes": budget});
        self.emit("adapt", Some(name), fields.clone());
        Ok(fields)
    }

    // ---- participants ----

    fn join(&mut self, a: JoinArgs) -> Result<Value, ApiError> {
        let id = self.slice_by_name(&a.slice)?;
        if !names::valid_participant_id(&a.participant) {
            return Err(ApiError::InvalidParticipant(a.participant));
        }
        let (link, iface) = self.access_link(&a.poa, a.iface)?;
        if self.slices[&id].members.contains_key(&a.participant) {
            return Err(ApiError::DuplicateParticipant(a.participant));
        }
        let roles: BTreeSet<Role> = match a.roles {
            Some(r) if !r.is_empty() => r.into_iter().collect(),
            Some(_) => return Err(ApiError::BadRequest("roles must not be empty".into())),
            None => Participant::both_roles(),
        };
        routing::extend_footprint(self, id, &a.poa);
        let rt = self.slices.get_mut(&id).expect("indexed");
        let face = rt.new_face(&a.poa);
        let version = rt.sync.state.join(&a.participant).expect("checked above");
        let producer = roles.contains(&Role::Producer);
        let consumer = roles.contains(&Role::Consumer);
        rt.members.insert(
            a.participant.clone(),
            Member {
                p: Participant::new(&a.participant, roles),
                poa: a.poa.clone(),
                iface,
                link: link.clone(),
                face: Some(face),
                attach_id: 1,
                home: a.poa.clone(),
                face_route: (a.poa.clone(), face),
                epoch: 1,
                poll: None,
                deferred: Vec::new(),
                handoff: None,
            },
        );
        let mobility = rt.mobility;
        self.faces.get_mut(&a.poa).expect("poa").insert(
            face,
            Face::Access { slice: id, pid: a.participant.clone(), link, attach: 1, alive: true },
        );
        if mobility && producer {
            let prefix = names::participant_prefix(&a.slice, &a.participant);
            self.poas.get_mut(&a.poa).expect("poa").attach(id, &prefix, face, 1);
        }
        routing::rebuild(self, id);
        self.emit(
            "join",
            Some(&a.slice),
            json!({"participant": a.participant, "poa": a.poa, "iface": iface.to_string(), "producer": producer, "consumer": consumer, "version": version}),
        );
        self.flush_sync(id);
        if consumer {
            self.send_poll(id, &a.participant);
        }
        Ok(json!({"participant": a.participant, "poa": a.poa, "iface": iface.to_string(), "version": version}))
    }

    fn leave(&mut self, slice: &str, pid: &str) -> Result<Value, ApiError> {
        let id = self.slice_by_name(slice)?;
        let rt = self.slices.get_mut(&id).expect("indexed");
        let m = rt.members.remove(pid).ok_or_else(|| ApiError::UnknownParticipant(pid.to_string()))?;
        let version = rt.sync.state.leave(pid).expect("member is on the roster");
        rt.departed += m.p.stats;
        self.kill_face(&m.face_route.0, m.face_route.1);
        let prefix = names::participant_prefix(slice, pid);
        for poa in self.poas.values_mut() {
            poa.remove_prefix(id, &prefix);
        }
        routing::rebuild(self, id);
        self.emit("leave", Some(slice), json!({"participant": pid, "version": version}));
        self.flush_sync(id);
        Ok(json!({"participant": pid, "version": version}))
    }

    pub(crate) fn kill_face(&mut self, node: &str, face: FaceId) {
        if let Some(Face::Access { alive, .. }) = self.faces.get_mut(node).and_then(|f| f.get_mut(&face)) {
            *alive = false;
        }
    }

    fn consumer_move(&mut self, a: MoveArgs) -> Result<Value, ApiError> {
        let id = self.slice_by_name(&a.slice)?;
        let m = self.member(id, &a.participant)?;
        if m.p.is_producer() {
            return Err(ApiError::ProducerMustHandoff(a.participant));
        }
        let (link, iface) = self.access_link(&a.to_poa, a.iface.or(Some(m.iface)).filter(|_| a.iface.is_some()))?;
        let from = m.poa.clone();
        if from == a.to_poa && (a.iface.is_none() || iface == m.iface) {
            return Ok(json!({"participant": a.participant, "poa": from, "moved": false}));
        }
        let (old_node, old_face) = m.face_route.clone();
        self.kill_face(&old_node, old_face);
        routing::extend_footprint(self, id, &a.to_poa);
        let rt = self.slices.get_mut(&id).expect("indexed");
        let face = rt.new_face(&a.to_poa);
        let m = rt.members.get_mut(&a.participant).expect("checked");
        m.attach_id += 1;
        m.poa = a.to_poa.clone();
        m.iface = iface;
        m.link = link.clone();
        m.face = Some(face);
        m.home = a.to_poa.clone();
        m.face_route = (a.to_poa.clone(), face);
        let attach = m.attach_id;
        self.faces.get_mut(&a.to_poa).expect("poa").insert(
            face,
            Face::Access { slice: id, pid: a.participant.clone(), link, attach, alive: true },
        );
        routing::rebuild(self, id);
        let outstanding: Vec<Name> = self.slices[&id].members[&a.participant].p.outstanding().keys().cloned().collect();
        self.emit(
            "move",
            Some(&a.slice),
            json!({"participant": a.participant, "from": from, "to": a.to_poa, "iface": iface.to_string(), "reexpressed": outstanding.len()}),
        );
        for name in &outstanding {
            self.reexpress_media(id, &a.participant, name);
        }
        Ok(json!({"participant": a.participant, "poa": a.to_poa, "moved": true, "reexpressed": outstanding.len()}))
    }

    fn handoff(&mut self, a: HandoffArgs) -> Result<Value, ApiError> {
        let id = self.slice_by_name(&a.slice)?;
        let m = self.member(id, &a.participant)?;
        if !m.p.is_producer() {
            return Err(ApiError::UnknownPrefix(a.participant));
        }
        if m.face.is_none() {
            return Err(ApiError::HandoffInProgress(a.participant));
        }
        let (_, to_iface) = self.access_link(&a.to_poa, a.iface)?;
        if m.poa == a.to_poa && m.iface == to_iface {
            return Err(ApiError::InvalidHandoff(a.participant));
        }
        let gap = a.gap_ms.unwrap_or(DEFAULT_DETACH_GAP_MS);
        let now = self.clock.now();
        let lifetime = self.config.interest_lifetime_ms;
        let prefix = names::participant_prefix(&a.slice, &a.participant);

        let rt = self.slices.get_mut(&id).expect("indexed");
        rt.handoff_seq += 1;
        let hid = rt.handoff_seq;
        let mobility = rt.mobility;
        let m = rt.members.get_mut(&a.participant).expect("checked");
        if let Some(prev) = m.handoff.replace(hid) {
            if let Some(t) = rt.handoffs.get_mut(&prev) {
                t.open = false;
            }
        }
        let old_face = m.face.take().expect("attached");
        m.attach_id += 1;
        let from = m.poa.clone();
        let from_iface = m.iface;

        self.kill_face(&from, old_face);
        let pending = if mobility {
            self.poas.get_mut(&from).expect("poa").detach(id, &prefix);
            let until = now + SimDuration::from_ms_u64(gap + lifetime);
            let held = self.fwd.get_mut(&from).expect("node").hold_pending(id, &prefix, old_face, until);
            if !held.is_empty() {
                self.schedule(until, Event::PitExpire { node: from.clone(), slice: id, subject: id });
            }
            held
        } else {
            self.fwd[&from].pending_on(id, &prefix, old_face)
        };
        let report = HandoffReport {
            handoff_id: hid,
            slice: a.slice.clone(),
            participant: a.participant.clone(),
            from: from.clone(),
            from_iface: from_iface.to_string(),
            to: a.to_poa.clone(),
            to_iface: to_iface.to_string(),
            at_ms: now.as_ms(),
            gap_ms: gap,
            mobility_enabled: mobility,
            interests_pending: pending.len() as u64,
            interests_late_bound: 0,
            interests_lost: 0,
            stretch_before: None,
            stretch_after: None,
        };
        let track = HandoffTrack {
            report,
            prefix,
            to_iface,
            open: true,
            tracked: pending.iter().map(|n| (n.clone(), Tracked::Pending)).collect(),
            late_bound: BTreeSet::new(),
        };
        self.slices.get_mut(&id).expect("indexed").handoffs.insert(hid, track);
        self.emit(
            "detach",
            Some(&a.slice),
            json!({"handoff_id": hid, "participant": a.participant, "from": from, "iface": from_iface.to_string(), "pending": pending.len(), "gap_ms": gap}),
        );
        self.schedule(
            now + SimDuration::from_ms_u64(gap),
            Event::Attach { slice: id, pid: a.participant.clone(), handoff: hid },
        );
        self.schedule(
            now + SimDuration::from_ms_u64(gap + REPORT_WINDOW_MS),
            Event::HandoffDeadline { slice: id, handoff: hid },
        );
        if mobility {
            Ok(json!({"handoff_id": hid, "participant": a.participant, "from": from, "to": a.to_poa}))
        } else {
            Err(ApiError::MobilityDisabled { slice: a.slice, handoff_id: hid })
        }
    }

    fn finalize_handoff(&mut self, slice: SliceId, hid: u64) {
        let Some(rt) = self.slices.get_mut(&slice) else { return };
        let Some(mut t) = rt.handoffs.remove(&hid) else { return };
        t.report.interests_late_bound = t.late_bound.len() as u64;
        t.report.interests_lost = t.tracked.values().filter(|s| **s == Tracked::Lost).count() as u64;
        rt.reports.push(t.report.clone());
        for m in rt.members.values_mut() {
            if m.handoff == Some(hid) {
                m.handoff = None;
            }
        }
        let name = rt.name.clone();
        let fields = serde_json::to_value(&t.report).expect("report serializes");
        self.emit("handoff_report", Some(&name), fields);
    }

    /// Closes every open handoff report now (end of a scripted run).
    pub fn finalize_reports(&mut self) {
        let open: Vec<(SliceId, u64)> = self
            .slices
            .iter()
            .flat_map(|(id, s)| s.handoffs.keys().map(move |h| (*id, *h)))
            .collect();
        for (s, h) in open {
            self.finalize_handoff(s, h);
        }
    }

    fn monitor(&mut self) {
        let ids: Vec<SliceId> = self.slices.keys().copied().collect();
        for id in ids {
            let rt = &self.slices[&id];
            let mut c = crate::icn::SliceCounters::default();
            let (mut pit, mut cs_bytes) = (0usize, 0u64);
            for n in &rt.footprint {
                if let Some(t) = self.fwd.get(n).and_then(|f| f.tables(id)) {
                    c.accumulate(&t.counters);
                    pit += t.pit.len();
                    cs_bytes += t.cs.used_bytes();
                }
            }
            let (mut delivered, mut published) = (0, 0);
            for m in rt.members.values() {
                delivered += m.p.stats.delivered;
                published += m.p.stats.published;
            }
            let mut fields = Map::new();
            fields.insert("pit_size".into(), json!(pit));
            fields.insert("cs_bytes".into(), json!(cs_bytes));
            fields.insert("interests_in".into(), json!(c.interests_in));
            fields.insert("interests_out".into(), json!(c.interests_out));
            fields.insert("data_out".into(), json!(c.data_out));
            fields.insert("cs_hits".into(), json!(c.cs_hits));
            fields.insert("published".into(), json!(published));
            fields.insert("delivered".into(), json!(delivered));
            fields.insert("roster_version".into(), json!(rt.sync.state.version()));
            fields.insert("conserved".into(), json!(c.is_conserved()));
            let name = rt.name.clone();
            self.emit("monitor", Some(&name), Value::Object(fields));
        }
    }
}
