//! Packet handling: forwarders, access faces, the sync function and PoA control agents.

use std::collections::BTreeSet;

use serde_json::json;

use super::{routing, Emulator, Event, Face, Tracked, APP_TIMER_SLACK_MS, POLL_RETRY_MS};
use crate::api::ApiError;
use crate::conference::{names, RosterSnapshot, SyncReply, TimeoutAction};
use crate::icn::{
    fib_route, Data, FaceId, Fib, ForwardError, Hint, HintOrigin, Interest, InterestOutcome, Nack, Packet, Route,
    SliceId,
};
use crate::mobility::{self, control_subject, poa_name, poa_node, ControlMessage, Decision};
use crate::name::Name;

/// Routing choice made before the forwarder pipeline runs.
#[derive(Debug, Clone, Copy)]
enum Plan {
    Fib,
    Face(FaceId),
    Hold,
    /// Route on the hint target; may leave through the arrival face.
    Hint,
}

fn hint_route(fib: &Fib, interest: &Interest) -> Route {
    let Some(h) = &interest.hint else { return Route::NoRoute };
    fib.longest_prefix_match(&h.target)
        .and_then(|e| e.nexthops.first().copied())
        .map_or(Route::NoRoute, Route::Face)
}

fn outcome_label(o: &InterestOutcome) -> &'static str {
    match o {
        InterestOutcome::CsHit => "cs_hit",
        InterestOutcome::Aggregated => "aggregated",
        InterestOutcome::Forwarded(_) => "forwarded",
        InterestOutcome::Held => "held",
        InterestOutcome::NoRoute => "no_route",
        InterestOutcome::LoopDropped => "loop_dropped",
        InterestOutcome::HopLimit => "hop_limit",
    }
}

impl Emulator {
    /// Name of the slice a packet concerns; control packets concern their subject slice.
    fn subject_of(&self, slice: SliceId, name: &Name) -> Option<String> {
        if slice == SliceId::CONTROL {
            control_subject(name).map(str::to_string)
        } else {
            self.slices.get(&slice).map(|s| s.name.clone())
        }
    }

    /// Link queue class: the subject slice id.
    fn class_of(&self, packet: &Packet) -> u32 {
        let slice = packet.slice_id();
        if slice == SliceId::CONTROL {
            control_subject(packet.name())
                .and_then(|s| self.by_name.get(s))
                .map_or(0, |id| id.0)
        } else {
            slice.0
        }
    }

    pub(super) fn send(&mut self, node: &str, face: FaceId, packet: Packet) {
        let now = self.clock.now();
        let Some(f) = self.faces.get(node).and_then(|m| m.get(&face)).cloned() else {
            return;
        };
        let class = self.class_of(&packet);
        match f {
            Face::Link { link, peer } => {
                let l = self.topo.link(&link).expect("known link");
                match self.links.transmit(l, node, class, packet.wire_len(), now) {
                    Ok(at) => {
                        let pf = self.link_face[&(peer.clone(), link)];
                        self.schedule(at, Event::Deliver { node: peer, face: pf, packet });
                    }
                    Err(e) => {
                        let subject = self.subject_of(packet.slice_id(), packet.name());
                        self.emit(
                            "link_down",
                            subject.as_deref(),
                            json!({"node": node, "to": peer, "kind": packet.kind(), "name": packet.name(), "error": e.to_string()}),
                        );
                    }
                }
            }
            Face::Access { slice, pid, link, attach, alive } => {
                if !alive {
                    let subject = self.subject_of(packet.slice_id(), packet.name());
                    self.emit(
                        "link_down",
                        subject.as_deref(),
                        json!({"node": node, "to": format!("participant:{pid}"), "kind": packet.kind(), "name": packet.name(), "error": "access face detached"}),
                    );
                    return;
                }
                let l = self.topo.link(&link).expect("known link");
                if let Ok(at) = self.links.transmit(l, node, class, packet.wire_len(), now) {
                    self.schedule(at, Event::ToParticipant { slice, pid, attach, packet });
                }
            }
            Face::Sync { slice } => self.schedule(now, Event::ToSync { slice, packet }),
            Face::Agent => self.schedule(now, Event::ToAgent { node: node.to_string(), packet }),
        }
    }

    pub(super) fn on_deliver(&mut self, node: &str, face: FaceId, packet: Packet) {
        match packet {
            Packet::Interest(i) => self.handle_interest(node, face, i),
            Packet::Data(d) => self.handle_data(node, face, d),
            Packet::Nack(n) => self.handle_nack(node, face, n),
        }
    }

    // ---- forwarder pipeline ----

    fn handle_interest(&mut self, node: &str, in_face: FaceId, mut i: Interest) {
        let now = self.clock.now();
        let sid = i.slice_id;
        let subject = self.subject_of(sid, &i.name);
        let mut plan = Plan::Fib;
        let mut late_binding = false;
        let mut notify: Option<(String, Name, String, u64)> = None;

        if sid != SliceId::CONTROL && self.slices.contains_key(&sid) {
            let is_access = matches!(self.faces[node].get(&in_face), Some(Face::Access { .. }));
            if is_access && i.ingress.is_none() {
                i.ingress = Some(poa_name(node));
            }
            let me = poa_name(node);
            let ingress = i.ingress.as_ref().and_then(poa_node).map(str::to_string);
            let rt = self.slices.get_mut(&sid).expect("checked");
            let targeted = i.hint.as_ref().is_some_and(|h| h.target == me);
            match self.poas.get_mut(node) {
                Some(poa) if rt.mobility => {
                    let mapped = poa.lookup(sid, &i.name).map(|(p, m)| (p.clone(), m.current.clone(), m.epoch));
                    if let (Some((prefix, current, _)), Some(ing)) = (&mapped, &ingress) {
                        if *current == me {
                            poa.record_ingress(sid, prefix, ing);
                        }
                    }
                    if targeted {
                        i.routed_by = i.hint.as_ref().map(|h| h.origin);
                    }
                    if i.hint.is_none() || targeted {
                        match poa.decide(sid, &i.name, is_access && !targeted) {
                            Decision::Fib => {
                                i.hint = None;
                                plan = Plan::Fib;
                            }
                            Decision::Local(f) => plan = Plan::Face(f),
                            Decision::Hold => plan = Plan::Hold,
                            Decision::Redirect { target, origin } => {
                                if origin == HintOrigin::LateBinding {
                                    // fresh nonce: the redirected copy may retrace nodes the original crossed
                                    i.nonce = rt.nonce();
                                    late_binding = true;
                                    if let (Some((prefix, _, epoch)), Some(ing)) = (&mapped, &ingress) {
                                        if poa.mark_notified(sid, prefix, ing, *epoch) {
                                            let new_poa = poa_node(&target).unwrap_or_default().to_string();
                                            notify = Some((ing.clone(), prefix.clone(), new_poa, *epoch));
                                        }
                                    }
                                }
                                i.hint = Some(Hint { target, origin });
                                plan = Plan::Hint;
                            }
                        }
                    } else {
                        plan = Plan::Hint;
                    }
                }
                _ if targeted => i.hint = None,
                _ if i.hint.is_some() => plan = Plan::Hint,
                _ => {}
            }
        }

        let hop = i.hop_count + 1;
        let name = i.name.clone();
        let hint = i.hint.as_ref().map(|h| h.target.to_string());
        let steered = i.routed_by.zip(i.ingress.as_ref().and_then(poa_node).map(str::to_string));
        let fwd = self.fwd.get_mut(node).expect("known node");
        let result = fwd.on_interest_with(in_face, i, now, |fib, int| match plan {
            Plan::Fib => fib_route(fib, int, in_face),
            Plan::Face(f) => Route::Face(f),
            Plan::Hold => Route::Hold,
            Plan::Hint => hint_route(fib, int),
        });
        let r = match result {
            Ok(r) => r,
            Err(ForwardError::UnknownSlice { nack, .. }) => {
                self.emit(
                    "interest",
                    subject.as_deref(),
                    json!({"node": node, "name": name, "outcome": "no_slice", "hop_count": hop}),
                );
                self.send(node, nack.face, nack.packet);
                return;
            }
        };

        let mut fields = json!({"node": node, "name": name, "outcome": outcome_label(&r.outcome), "hop_count": hop});
        if let InterestOutcome::Forwarded(f) = r.outcome {
            fields["next"] = json!(routing::face_label(self, node, f));
        }
        if let Some(h) = &hint {
            fields["hint"] = json!(h);
        }
        self.emit("interest", subject.as_deref(), fields);

        if matches!(
            r.outcome,
            InterestOutcome::Forwarded(_) | InterestOutcome::Held | InterestOutcome::Aggregated
        ) {
            let expiry = self.fwd[node].tables(sid).and_then(|t| t.pit.get(&name)).map(|e| e.expiry);
            if let Some(at) = expiry {
                let subject_id = if sid == SliceId::CONTROL {
                    subject.as_ref().and_then(|s| self.by_name.get(s)).copied().unwrap_or(SliceId::CONTROL)
                } else {
                    sid
                };
                self.schedule(at, Event::PitExpire { node: node.to_string(), slice: sid, subject: subject_id });
            }
        }

        if sid != SliceId::CONTROL {
            let adds = matches!(r.outcome, InterestOutcome::Forwarded(_) | InterestOutcome::Held);
            self.track_interest(sid, node, &name, adds, late_binding);
            if let Some((origin, ingress)) = steered {
                self.stretch_sample(sid, node, &name, origin, &ingress, hop);
            }
        }
        for a in r.actions {
            self.send(node, a.face, a.packet);
        }
        if let Some((ing, prefix, new_poa, epoch)) = notify {
            self.send_update(node, sid, &ing, &new_poa, epoch, &prefix);
        }
    }

    fn handle_data(&mut self, node: &str, in_face: FaceId, d: Data) {
        let now = self.clock.now();
        let sid = d.slice_id;
        let name = d.name.clone();
        let subject = self.subject_of(sid, &name);
        let r = self.fwd.get_mut(node).expect("known node").on_data(in_face, d, now);
        self.emit(
            "data",
            subject.as_deref(),
            json!({"node": node, "name": name, "served": r.served.len(), "cached": r.cached}),
        );
        if sid != SliceId::CONTROL && !r.served.is_empty() {
            self.settle(sid, node, &name, Tracked::Resolved);
        }
        for a in r.actions {
            self.send(node, a.face, a.packet);
        }
    }

    fn handle_nack(&mut self, node: &str, in_face: FaceId, n: Nack) {
        let now = self.clock.now();
        let sid = n.slice_id;
        let name = n.name.clone();
        let reason = n.reason;
        let subject = self.subject_of(sid, &name);
        let actions = self.fwd.get_mut(node).expect("known node").on_nack(in_face, n, now);
        self.emit(
            "nack",
            subject.as_deref(),
            json!({"node": node, "name": name, "reason": reason, "propagated": actions.len()}),
        );
        if sid != SliceId::CONTROL && !actions.is_empty() {
            self.settle(sid, node, &name, Tracked::Lost);
        }
        for a in actions {
            self.send(node, a.face, a.packet);
        }
    }

    pub(super) fn on_pit_expire(&mut self, node: &str, slice: SliceId, subject: SliceId) {
        let now = self.clock.now();
        let result = if slice == SliceId::CONTROL {
            let subject_name = self.slices.get(&subject).map(|s| s.name.clone());
            let live: BTreeSet<String> = self.by_name.keys().cloned().collect();
            self.fwd.get_mut(node).expect("known node").pit_sweep_where(slice, now, |n| {
                match (control_subject(n), &subject_name) {
                    (Some(s), Some(want)) => s == want,
                    (Some(s), None) => !live.contains(s),
                    (None, want) => want.is_none(),
                }
            })
        } else {
            self.fwd.get_mut(node).expect("known node").pit_sweep_slice(slice, now)
        };
        for (sid, entry) in &result.expired {
            let subj = self.subject_of(*sid, &entry.name);
            self.emit(
                "expire",
                subj.as_deref(),
                json!({"node": node, "name": entry.name, "held": entry.held, "downstream": entry.downstream.len()}),
            );
            if *sid != SliceId::CONTROL {
                self.settle(*sid, node, &entry.name, Tracked::Lost);
            }
        }
        for a in result.actions {
            self.send(node, a.face, a.packet);
        }
    }

    // ---- handoff bookkeeping ----

    /// Records an Interest seen at the old PoA of an open handoff.
    fn track_interest(&mut self, sid: SliceId, node: &str, name: &Name, adds: bool, late_bound: bool) {
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        for t in rt.handoffs.values_mut() {
            if !t.open || t.report.from != node || !t.prefix.is_prefix_of(name) {
                continue;
            }
            if adds {
                let s = t.tracked.entry(name.clone()).or_insert(Tracked::Pending);
                if *s == Tracked::Resolved {
                    *s = Tracked::Pending;
                }
            }
            if late_bound {
                t.late_bound.insert(name.clone());
            }
        }
    }

    /// Settles a pending tracked Interest at the old PoA.
    fn settle(&mut self, sid: SliceId, node: &str, name: &Name, to: Tracked) {
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        for t in rt.handoffs.values_mut() {
            if t.report.from != node {
                continue;
            }
            if let Some(s) = t.tracked.get_mut(name) {
                if *s == Tracked::Pending {
                    *s = to;
                }
            }
        }
    }

    /// Path stretch of a hint-steered Interest reaching the PoA its producer is attached to.
    fn stretch_sample(&mut self, sid: SliceId, node: &str, name: &Name, origin: HintOrigin, ingress: &str, hop: u32) {
        let Some(hops) = self.topo.hop_distance(ingress, node) else { return };
        let s = mobility::stretch(hop, hops);
        let rt = self.slices.get_mut(&sid).expect("live slice");
        let Some(t) = rt.handoffs.values_mut().find(|t| t.open && t.report.to == node && t.prefix.is_prefix_of(name))
        else {
            return;
        };
        let slot = match origin {
            HintOrigin::LateBinding => &mut t.report.stretch_before,
            HintOrigin::IngressMapping => &mut t.report.stretch_after,
        };
        *slot = Some(slot.map_or(s, |v: f64| v.max(s)));
    }

    // ---- participants ----

    /// Sends a packet from a participant over its access link.
    pub(super) fn participant_send(&mut self, sid: SliceId, pid: &str, packet: Packet) {
        let now = self.clock.now();
        let Some(m) = self.slices.get_mut(&sid).and_then(|rt| rt.members.get_mut(pid)) else {
            return;
        };
        let Some(face) = m.face else {
            let is_update = matches!(&packet, Packet::Interest(i) if i.name.get(2) == Some(names::SYNC));
            if is_update {
                m.deferred.push(packet);
            }
            return;
        };
        let poa = m.poa.clone();
        let link = self.topo.link(&m.link).expect("access link");
        let client = link.other(&poa).expect("access link touches its PoA").to_string();
        if let Ok(at) = self.links.transmit(link, &client, sid.0, packet.wire_len(), now) {
            self.schedule(at, Event::Deliver { node: poa, face, packet });
        }
    }

    pub(super) fn send_poll(&mut self, sid: SliceId, pid: &str) {
        let lifetime = self.config.interest_lifetime_ms;
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        let nonce = rt.nonce();
        let name = rt.name.clone();
        let Some(m) = rt.members.get_mut(pid) else { return };
        let known = m.p.known_version();
        m.poll = Some((nonce, known));
        let i = Interest::new(sid, names::sync_state(&name, known), nonce).with_lifetime(lifetime);
        self.participant_send(sid, pid, Packet::Interest(i));
        self.schedule_in_ms(lifetime + APP_TIMER_SLACK_MS, Event::PollTimer { slice: sid, pid: pid.to_string(), nonce });
    }

    pub(super) fn on_poll_timer(&mut self, sid: SliceId, pid: &str, nonce: u64) {
        let Some(m) = self.slices.get(&sid).and_then(|rt| rt.members.get(pid)) else { return };
        if m.p.is_consumer() && m.poll.is_none_or(|(n, _)| n == nonce) {
            self.send_poll(sid, pid);
        }
    }

    fn express_media(&mut self, sid: SliceId, pid: &str, producer: &str, seq: u64) {
        let now = self.clock.now();
        let lifetime = self.config.interest_lifetime_ms;
        let rt = self.slices.get_mut(&sid).expect("live slice");
        let nonce = rt.nonce();
        let name = names::media(&rt.name, producer, seq);
        let m = rt.members.get_mut(pid).expect("member");
        m.p.track(name.clone(), producer, seq, nonce, lifetime, now);
        self.send_media_interest(sid, pid, name, nonce, lifetime);
    }

    fn send_media_interest(&mut self, sid: SliceId, pid: &str, name: Name, nonce: u64, lifetime: u64) {
        let i = Interest::new(sid, name.clone(), nonce).with_lifetime(lifetime);
        self.participant_send(sid, pid, Packet::Interest(i));
        self.schedule_in_ms(
            lifetime + APP_TIMER_SLACK_MS,
            Event::MediaTimer { slice: sid, pid: pid.to_string(), name, nonce },
        );
    }

    /// Re-expresses an outstanding fetch with a new nonce (consumer move).
    pub(super) fn reexpress_media(&mut self, sid: SliceId, pid: &str, name: &Name) {
        let rt = self.slices.get_mut(&sid).expect("live slice");
        let nonce = rt.nonce();
        let m = rt.members.get_mut(pid).expect("member");
        let Some(lifetime) = m.p.pending(name).map(|o| o.lifetime_ms) else { return };
        m.p.reexpressed(name, nonce);
        self.send_media_interest(sid, pid, name.clone(), nonce, lifetime);
    }

    pub(super) fn on_media_timer(&mut self, sid: SliceId, pid: &str, name: &Name, nonce: u64) {
        self.media_timeout(sid, pid, name, nonce);
    }

    fn media_timeout(&mut self, sid: SliceId, pid: &str, name: &Name, nonce: u64) {
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        let fresh = rt.nonce();
        let slice_name = rt.name.clone();
        let Some(m) = rt.members.get_mut(pid) else { return };
        match m.p.on_timeout(name, nonce) {
            Some(TimeoutAction::Retry { lifetime_ms }) => {
                m.p.reexpressed(name, fresh);
                let attempt = m.p.pending(name).map_or(0, |o| o.attempt);
                self.emit(
                    "retry",
                    Some(&slice_name),
                    json!({"participant": pid, "name": name, "attempt": attempt, "lifetime_ms": lifetime_ms}),
                );
                self.send_media_interest(sid, pid, name.clone(), fresh, lifetime_ms);
            }
            Some(TimeoutAction::GiveUp) => {
                self.emit("give_up", Some(&slice_name), json!({"participant": pid, "name": name}));
            }
            None => {}
        }
    }

    pub(super) fn on_participant_packet(&mut self, sid: SliceId, pid: &str, attach: u64, packet: Packet) {
        let now = self.clock.now();
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        let slice_name = rt.name.clone();
        let freshness_ms = (rt.template.cache_window_s * 1000.0).round() as u64;
        let Some(m) = rt.members.get_mut(pid) else { return };
        if m.attach_id != attach {
            return;
        }
        match packet {
            Packet::Interest(i) => {
                let Some((producer, seq)) = names::parse_media(&slice_name, &i.name) else { return };
                if producer != pid {
                    return;
                }
                let Some(len) = m.p.serve(seq) else { return };
                let data = Data::synthetic(sid, i.name.clone(), len, freshness_ms);
                self.emit("serve", Some(&slice_name), json!({"participant": pid, "name": i.name, "seq": seq}));
                self.participant_send(sid, pid, Packet::Data(data));
            }
            Packet::Data(d) => {
                if let Some(names::SyncName::State(known)) = names::parse_sync(&slice_name, &d.name) {
                    let Ok(snap) = serde_json::from_slice::<RosterSnapshot>(&d.payload) else { return };
                    let repoll = m.poll.is_some_and(|(_, k)| k == known);
                    if repoll {
                        m.poll = None;
                    }
                    let fetch = m.p.on_roster(&snap);
                    for (q, seq) in fetch {
                        self.express_media(sid, pid, &q, seq);
                    }
                    if repoll {
                        self.send_poll(sid, pid);
                    }
                } else if let Some((producer, seq)) = names::parse_media(&slice_name, &d.name) {
                    if let Some(latency) = m.p.on_data(&d.name, now) {
                        self.emit(
                            "deliver",
                            Some(&slice_name),
                            json!({"participant": pid, "producer": producer, "seq": seq, "name": d.name, "latency_ms": latency as f64 / 1000.0}),
                        );
                    }
                }
            }
            Packet::Nack(n) => {
                if let Some(names::SyncName::State(known)) = names::parse_sync(&slice_name, &n.name) {
                    if m.poll == Some((n.nonce, known)) {
                        m.poll = None;
                        self.schedule_in_ms(
                            POLL_RETRY_MS,
                            Event::PollTimer { slice: sid, pid: pid.to_string(), nonce: n.nonce },
                        );
                    }
                } else if names::parse_media(&slice_name, &n.name).is_some() {
                    self.media_timeout(sid, pid, &n.name, n.nonce);
                }
            }
        }
    }

    pub(super) fn publish(&mut self, sid: SliceId, pid: &str, bytes: u64) -> Result<u64, ApiError> {
        let lifetime = self.config.interest_lifetime_ms;
        let rt = self.slices.get_mut(&sid).expect("live slice");
        let nonce = rt.nonce();
        let slice_name = rt.name.clone();
        let m = rt.members.get_mut(pid).ok_or_else(|| ApiError::UnknownParticipant(pid.to_string()))?;
        let seq = m.p.publish(bytes).map_err(|_| ApiError::NotProducer(pid.to_string()))?;
        let name = names::media(&slice_name, pid, seq);
        self.emit(
            "publish",
            Some(&slice_name),
            json!({"participant": pid, "seq": seq, "name": name, "bytes": bytes}),
        );
        let update = Interest::new(sid, names::sync_update(&slice_name, pid, seq), nonce).with_lifetime(lifetime);
        self.participant_send(sid, pid, Packet::Interest(update));
        Ok(seq)
    }

    pub(super) fn on_stream_tick(&mut self, sid: SliceId, pid: &str, remaining: u64, interval_ms: u64, payload: u64) {
        if !self.slices.get(&sid).is_some_and(|rt| rt.members.contains_key(pid)) {
            return;
        }
        if self.publish(sid, pid, payload).is_err() {
            return;
        }
        if remaining > 1 {
            self.schedule_in_ms(
                interval_ms,
                Event::StreamTick { slice: sid, pid: pid.to_string(), remaining: remaining - 1, interval_ms, payload },
            );
        }
    }

    // ---- sync function ----

    pub(super) fn on_sync_packet(&mut self, sid: SliceId, packet: Packet) {
        let now = self.clock.now();
        let Packet::Interest(i) = packet else { return };
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        let reply = rt.sync.on_interest(&i.name, i.lifetime_ms, now);
        if let SyncReply::Data(d) = reply {
            self.sync_send(sid, d);
        }
        self.flush_sync(sid);
    }

    /// Answers long polls made stale by a roster change.
    pub(super) fn flush_sync(&mut self, sid: SliceId) {
        let now = self.clock.now();
        let Some(rt) = self.slices.get_mut(&sid) else { return };
        for d in rt.sync.flush(now) {
            self.sync_send(sid, d);
        }
    }

    fn sync_send(&mut self, sid: SliceId, d: Data) {
        let rt = &self.slices[&sid];
        let (node, face) = (rt.sync_node.clone(), rt.sync_face());
        self.handle_data(&node, face, d);
    }

    // ---- mobility control plane ----

    fn control_interest(&mut self, from: &str, name: Name) {
        let nonce = rand::Rng::random(&mut self.control_rng);
        let i = Interest::new(SliceId::CONTROL, name, nonce).with_lifetime(self.config.interest_lifetime_ms);
        let agent = self.agent_face[from];
        self.handle_interest(from, agent, i);
    }

    fn send_update(&mut self, from: &str, sid: SliceId, ingress: &str, new_poa: &str, epoch: u64, prefix: &Name) {
        let slice = self.slices[&sid].name.clone();
        self.control_interest(from, mobility::update_name(ingress, &slice, new_poa, epoch, prefix));
    }

    pub(super) fn on_agent_packet(&mut self, node: &str, packet: Packet) {
        let Packet::Interest(i) = packet else { return };
        let Some(msg) = ControlMessage::parse(&i.name) else { return };
        match msg {
            ControlMessage::Notify { slice, new_poa, epoch, prefix, .. } => {
                if let Some(sid) = self.by_name.get(&slice).copied().filter(|s| self.slices[s].mobility) {
                    let applied = self.poas.get_mut(node).expect("poa").apply_update(sid, &prefix, &new_poa, epoch);
                    let mut rebound = 0;
                    let mut notified = Vec::new();
                    if applied {
                        rebound = self.late_bind_held(node, sid, &prefix, &new_poa);
                        let poa = self.poas.get_mut(node).expect("poa");
                        let ingresses = poa.take_ingresses(sid, &prefix);
                        for ing in ingresses {
                            if ing != new_poa && poa.mark_notified(sid, &prefix, &ing, epoch) {
                                notified.push(ing);
                            }
                        }
                    }
                    self.emit(
                        "mapping_update",
                        Some(&slice),
                        json!({"node": node, "prefix": prefix, "new_poa": new_poa, "epoch": epoch, "applied": applied, "late_bound": rebound, "ingresses": notified}),
                    );
                    for ing in notified {
                        self.send_update(node, sid, &ing, &new_poa, epoch, &prefix);
                    }
                }
            }
            ControlMessage::Update { slice, new_poa, epoch, prefix, .. } => {
                if let Some(sid) = self.by_name.get(&slice).copied().filter(|s| self.slices[s].mobility) {
                    let applied = self.poas.get_mut(node).expect("poa").apply_update(sid, &prefix, &new_poa, epoch);
                    self.emit(
                        "ingress_update",
                        Some(&slice),
                        json!({"node": node, "prefix": prefix, "new_poa": new_poa, "epoch": epoch, "applied": applied}),
                    );
                }
            }
        }
        let ack = Data::new(SliceId::CONTROL, i.name, Vec::new(), 1);
        let agent = self.agent_face[node];
        self.handle_data(node, agent, ack);
    }

    /// Re-expresses Interests parked at `node` toward the producer's new PoA.
    fn late_bind_held(&mut self, node: &str, sid: SliceId, prefix: &Name, new_poa: &str) -> usize {
        let now = self.clock.now();
        let target = poa_name(new_poa);
        let Some(face) = self.fwd[node]
            .tables(sid)
            .and_then(|t| t.fib.get(&target))
            .and_then(|e| e.nexthops.first().copied())
        else {
            return 0;
        };
        let held = self.fwd[node].held_under(sid, prefix);
        let mut count = 0;
        for name in held {
            let Some(mut i) = self.fwd.get_mut(node).expect("node").rebind(sid, &name, face, now) else { continue };
            i.nonce = self.slices.get_mut(&sid).expect("slice").nonce();
            i.hint = Some(Hint { target: target.clone(), origin: HintOrigin::LateBinding });
            self.emit(
                "late_bind",
                self.slices.get(&sid).map(|s| s.name.clone()).as_deref(),
                json!({"node": node, "name": name, "to": new_poa}),
            );
            self.track_interest(sid, node, &name, false, true);
            self.schedule_expiry(node, sid, &name);
            self.send(node, face, Packet::Interest(i));
            count += 1;
        }
        count
    }

    fn schedule_expiry(&mut self, node: &str, sid: SliceId, name: &Name) {
        if let Some(at) = self.fwd[node].tables(sid).and_then(|t| t.pit.get(name)).map(|e| e.expiry) {
            self.schedule(at, Event::PitExpire { node: node.to_string(), slice: sid, subject: sid });
        }
    }

    /// Second half of a handoff: the producer appears at its new PoA.
    pub(super) fn on_attach(&mut self, sid: SliceId, pid: &str, hid: u64) {
        let Some(rt) = self.slices.get(&sid) else { return };
        let Some(m) = rt.members.get(pid).filter(|m| m.handoff == Some(hid) && m.face.is_none()) else {
            return;
        };
        let _ = m;
        let Some(t) = rt.handoffs.get(&hid) else { return };
        let (from, to, to_iface, prefix) = (t.report.from.clone(), t.report.to.clone(), t.to_iface, t.prefix.clone());
        let mobility = rt.mobility;
        let link = self.topo.access_link(&to, to_iface).expect("validated at handoff").id.clone();
        routing::extend_footprint(self, sid, &to);

        let rt = self.slices.get_mut(&sid).expect("live slice");
        let face = rt.new_face(&to);
        let slice_name = rt.name.clone();
        let m = rt.members.get_mut(pid).expect("member");
        m.attach_id += 1;
        m.poa = to.clone();
        m.iface = to_iface;
        m.link = link.clone();
        m.face = Some(face);
        m.face_route = (to.clone(), face);
        m.epoch += 1;
        if !mobility {
            m.home = to.clone();
        }
        let (attach, epoch) = (m.attach_id, m.epoch);
        let deferred = std::mem::take(&mut m.deferred);
        self.faces.get_mut(&to).expect("poa").insert(
            face,
            Face::Access { slice: sid, pid: pid.to_string(), link, attach, alive: true },
        );
        routing::rebuild(self, sid);
        self.emit(
            "attach",
            Some(&slice_name),
            json!({"handoff_id": hid, "participant": pid, "poa": to, "iface": to_iface.to_string(), "epoch": epoch}),
        );

        if mobility {
            self.poas.get_mut(&to).expect("poa").attach(sid, &prefix, face, epoch);
            if to == from {
                let now = self.clock.now();
                for name in self.fwd[&to].held_under(sid, &prefix) {
                    if let Some(i) = self.fwd.get_mut(&to).expect("node").rebind(sid, &name, face, now) {
                        self.emit("late_bind", Some(&slice_name), json!({"node": to, "name": name, "to": to}));
                        self.track_interest(sid, &to, &name, false, true);
                        self.schedule_expiry(&to, sid, &name);
                        self.send(&to, face, Packet::Interest(i));
                    }
                }
            } else {
                self.control_interest(&to, mobility::notify_name(&from, &slice_name, &to, epoch, &prefix));
            }
        }
        for p in deferred {
            self.participant_send(sid, pid, p);
        }
    }
}
