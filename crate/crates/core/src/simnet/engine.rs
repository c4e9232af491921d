//! Discrete-event execution of a [`Scenario`].
//!
//! Events are ordered by (tick, insertion order), and all randomness comes
//! from one ChaCha stream seeded by the scenario, so a run is a pure
//! function of its input.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::report::{
    cross_link_windows, Check, DropRecord, FlowReport, RecordedPacket, TranscriptReport,
};
use super::scenario::{Action, InterceptorSpec, Location, Scenario, Traffic};
use super::topology::Topology;
use super::SimError;
use crate::protocol::{
    dest_build_reply, node_process_data, node_process_setup, rendezvous_connect,
    rendezvous_publish, source_announce, source_begin_setup, source_complete_setup,
    source_receive_data, source_send_data, DataStep, DestEndpoint, NodeState, PathNode,
    PendingSession, RendezvousClient, RendezvousRecord, RendezvousService, SetupInit, SetupStep,
};
use crate::wire::{DataPacket, Packet, PacketType, SetupPacket};
use crate::{Error, ExpiryTime, NodeId, Session, SymKey, NESTED_AHDR_LEN};

/// Safety net against runaway scenarios.
const MAX_EVENTS: u64 = 5_000_000;
const TICKS_PER_DECASECOND: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Plain,
    Client,
    Service,
}

#[derive(Debug)]
enum Event {
    Start { flow: usize, role: Role },
    Arrive { to: usize, bytes: Vec<u8> },
    Send { flow: usize, i: usize },
    AnnounceCheck { flow: usize, attempt: u32 },
}

struct Queued {
    tick: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        (self.tick, self.seq) == (o.tick, o.seq)
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, o: &Self) -> Ordering {
        (o.tick, o.seq).cmp(&(self.tick, self.seq))
    }
}

struct Flow {
    report: FlowReport,
    traffic: Traffic,
    lifetime: u32,
    payload_size: usize,
    /// Initiator (source or client) and, for rendezvous, the service.
    initiator: usize,
    service: Option<usize>,
    forward: [Vec<usize>; 2],
    backward: [Vec<usize>; 2],
    sent: BTreeSet<Vec<u8>>,
    replied: bool,
}

#[derive(Default)]
struct Endpoint {
    pending: Vec<(usize, Role, PendingSession)>,
    sessions: Vec<(usize, Session)>,
    dest: DestEndpoint,
    services: Vec<(usize, RendezvousService)>,
    clients: Vec<(usize, RendezvousClient)>,
}

impl Endpoint {
    fn entries(&self) -> usize {
        self.pending.len()
            + self.sessions.len()
            + self.dest.session_count()
            + self.services.len()
            + self.clients.len()
    }
}

struct Interceptor {
    spec: InterceptorSpec,
    at: Target,
    matched: usize,
    acted: usize,
}

enum Target {
    Node(usize),
    Link(usize, usize),
}

struct Sim<'a> {
    sc: &'a Scenario,
    topo: Topology,
    rng: ChaCha20Rng,
    nodes: Vec<NodeState>,
    by_id: HashMap<NodeId, usize>,
    queue: BinaryHeap<Queued>,
    seq: u64,
    tick: u64,
    flows: Vec<Flow>,
    endpoints: BTreeMap<usize, Endpoint>,
    end_hosts: BTreeSet<usize>,
    interceptors: Vec<Interceptor>,
    directory: BTreeMap<usize, RendezvousRecord>,
    waiting_clients: BTreeMap<usize, Session>,
    // Omniscient bookkeeping for the invariants.
    key_owner: HashMap<[u8; 16], usize>,
    dest_key_flow: HashMap<[u8; 16], usize>,
    learned: Vec<(usize, [u8; 16])>,
    observed: Vec<(usize, usize, Vec<u8>)>,
    report: TranscriptReport,
}

/// Runs a scenario to completion.
pub fn run_scenario(sc: &Scenario) -> Result<TranscriptReport, SimError> {
    let topo = sc.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(sc.seed);
    let nodes: Vec<NodeState> = (0..topo.len())
        .map(|i| {
            let neighbors: Vec<NodeId> = topo
                .edges(i)
                .iter()
                .map(|e| NodeId(topo.node(e.to).id))
                .collect();
            NodeState::generate(NodeId(topo.node(i).id), &mut rng).with_neighbors(neighbors)
        })
        .collect();
    let by_id = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let interceptors = sc
        .adversary
        .iter()
        .map(|a| Interceptor {
            at: match &a.at {
                Location::Node(n) => Target::Node(topo.index_of(n).unwrap()),
                Location::Link([x, y]) => {
                    Target::Link(topo.index_of(x).unwrap(), topo.index_of(y).unwrap())
                }
            },
            spec: a.clone(),
            matched: 0,
            acted: 0,
        })
        .collect();

    let mut sim = Sim {
        sc,
        rng,
        nodes,
        by_id,
        queue: BinaryHeap::new(),
        seq: 0,
        tick: 0,
        flows: Vec::new(),
        endpoints: BTreeMap::new(),
        end_hosts: BTreeSet::new(),
        interceptors,
        directory: BTreeMap::new(),
        waiting_clients: BTreeMap::new(),
        key_owner: HashMap::new(),
        dest_key_flow: HashMap::new(),
        learned: Vec::new(),
        observed: Vec::new(),
        report: TranscriptReport {
            seed: sc.seed,
            ..Default::default()
        },
        topo,
    };
    sim.load_flows();
    sim.run()?;
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn idx(&self, name: &str) -> usize {
        self.topo.index_of(name).expect("validated")
    }

    fn path(&self, names: &[String]) -> Vec<usize> {
        names.iter().map(|n| self.idx(n)).collect()
    }

    fn name(&self, i: usize) -> String {
        self.topo.node(i).name.clone()
    }

    fn now(&self) -> ExpiryTime {
        ExpiryTime(self.sc.start_time + (self.tick / TICKS_PER_DECASECOND) as u32)
    }

    fn schedule(&mut self, tick: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Queued {
            tick,
            seq: self.seq,
            event,
        });
    }

    fn load_flows(&mut self) {
        for s in &self.sc.sessions {
            let src = self.idx(&s.source);
            let fwd = self.path(&s.forward);
            self.end_hosts.insert(src);
            self.end_hosts.insert(*fwd.last().unwrap());
            let flow = self.flows.len();
            self.flows.push(Flow {
                report: FlowReport {
                    name: s.name.clone(),
                    kind: "session".into(),
                    ..Default::default()
                },
                traffic: s.traffic.clone(),
                lifetime: s.lifetime,
                payload_size: s.payload_size,
                initiator: src,
                service: None,
                backward: [self.path(&s.backward), Vec::new()],
                forward: [fwd, Vec::new()],
                sent: BTreeSet::new(),
                replied: false,
            });
            self.schedule(
                s.traffic.start,
                Event::Start {
                    flow,
                    role: Role::Plain,
                },
            );
        }
        for r in &self.sc.rendezvous {
            let (client, service) = (self.idx(&r.client), self.idx(&r.service));
            self.end_hosts.insert(client);
            self.end_hosts.insert(service);
            let flow = self.flows.len();
            self.flows.push(Flow {
                report: FlowReport {
                    name: r.name.clone(),
                    kind: "rendezvous".into(),
                    ..Default::default()
                },
                traffic: r.traffic.clone(),
                lifetime: r.lifetime,
                payload_size: r.payload_size,
                initiator: client,
                service: Some(service),
                forward: [self.path(&r.client_forward), self.path(&r.service_forward)],
                backward: [
                    self.path(&r.client_backward),
                    self.path(&r.service_backward),
                ],
                sent: BTreeSet::new(),
                replied: false,
            });
            self.schedule(
                r.traffic.start,
                Event::Start {
                    flow,
                    role: Role::Service,
                },
            );
            self.schedule(
                r.traffic.start,
                Event::Start {
                    flow,
                    role: Role::Client,
                },
            );
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        let mut events = 0u64;
        while let Some(q) = self.queue.pop() {
            events += 1;
            if events > MAX_EVENTS {
                return Err(SimError::validation("scenario", "event limit exceeded"));
            }
            self.tick = q.tick;
            match q.event {
                Event::Start { flow, role } => self.start(flow, role),
                Event::Arrive { to, bytes } => self.arrive(to, bytes),
                Event::Send { flow, i } => self.send(flow, i),
                Event::AnnounceCheck { flow, attempt } => self.announce_check(flow, attempt),
            }
        }
        Ok(())
    }

    fn flow_error(&mut self, flow: usize, what: &str, e: impl std::fmt::Display) {
        self.flows[flow]
            .report
            .errors
            .push(format!("tick {}: {what}: {e}", self.tick));
    }

    fn drop_packet(&mut self, node: usize, packet_type: &str, reason: impl std::fmt::Display) {
        self.report.drops.push(DropRecord {
            tick: self.tick,
            node: self.name(node),
            packet_type: packet_type.to_string(),
            reason: reason.to_string(),
        });
    }

    fn path_nodes(&self, path: &[usize], last_next: Option<usize>) -> Vec<PathNode> {
        path.iter()
            .enumerate()
            .map(|(i, &v)| {
                let next = path.get(i + 1).copied().or(last_next);
                PathNode {
                    id: self.nodes[v].id,
                    public: self.nodes[v].dh_public,
                    egress: next
                        .and_then(|n| self.topo.edge(v, n))
                        .map_or(0, |e| e.link),
                }
            })
            .collect()
    }

    fn start(&mut self, flow: usize, role: Role) {
        let f = &self.flows[flow];
        let (src, side) = match role {
            Role::Service => (f.service.unwrap(), 1),
            _ => (f.initiator, 0),
        };
        let init = SetupInit {
            source: self.nodes[src].id,
            forward: self.path_nodes(&f.forward[side], None),
            backward: self.path_nodes(&f.backward[side], Some(src)),
            payload_size: f.payload_size,
        };
        let now = self.now();
        let exp = ExpiryTime(now.0 + f.lifetime);
        match source_begin_setup(&init, now, exp, &mut self.rng) {
            Ok((pending, pkt)) => {
                let first = self.by_id[&pending.first_hop()];
                self.endpoints
                    .entry(src)
                    .or_default()
                    .pending
                    .push((flow, role, pending));
                self.transmit(src, first, pkt.encode());
            }
            Err(e) => self.flow_error(flow, "setup", e),
        }
    }

    /// Applies interceptors and schedules delivery over the link.
    fn transmit(&mut self, from: usize, to: usize, mut bytes: Vec<u8>) {
        if from == to {
            self.schedule(self.tick, Event::Arrive { to, bytes });
            return;
        }
        let ptype = bytes.first().and_then(|&b| PacketType::from_byte(b).ok());
        let (mut delay, mut copies, mut dropped, mut record) = (0u64, 0usize, false, false);
        for ic in &mut self.interceptors {
            let here = match ic.at {
                Target::Node(n) => n == to,
                Target::Link(a, b) => (a, b) == (from, to),
            };
            if !here || ic.spec.packet_type.is_some_and(|t| Some(t) != ptype) {
                continue;
            }
            ic.matched += 1;
            if ic.matched <= ic.spec.skip || ic.spec.limit.is_some_and(|l| ic.acted >= l) {
                continue;
            }
            ic.acted += 1;
            match &ic.spec.action {
                Action::Record => record = true,
                Action::FlipBit { position } => {
                    if !bytes.is_empty() {
                        let p = position % (bytes.len() * 8);
                        bytes[p / 8] ^= 0x80 >> (p % 8);
                    }
                }
                Action::Replay { copies: c } => copies += c,
                Action::Delay { ticks } => delay += ticks,
                Action::Drop => dropped = true,
            }
        }
        if record {
            self.report.recorded.push(RecordedPacket {
                tick: self.tick,
                from: self.name(from),
                to: self.name(to),
                bytes: bytes.clone(),
            });
        }
        if dropped {
            let t = ptype.map_or("unknown", PacketType::name);
            self.drop_packet(to, t, "dropped by adversary");
            return;
        }
        self.observed.push((from, to, bytes.clone()));
        let at = self.tick + self.sc.link_delay + delay;
        for c in 0..copies {
            self.observed.push((from, to, bytes.clone()));
            self.schedule(
                at + 1 + c as u64,
                Event::Arrive {
                    to,
                    bytes: bytes.clone(),
                },
            );
        }
        self.schedule(at, Event::Arrive { to, bytes });
    }

    fn arrive(&mut self, to: usize, bytes: Vec<u8>) {
        self.report.packets_delivered += 1;
        *self.report.observations.entry(self.name(to)).or_default() += 1;
        let pkt = match Packet::decode(&bytes) {
            Ok(p) => p,
            Err(e) => {
                let t = bytes
                    .first()
                    .and_then(|&b| PacketType::from_byte(b).ok())
                    .map_or("unknown", PacketType::name);
                return self.drop_packet(to, t, e);
            }
        };
        match pkt {
            Packet::Setup(p) => {
                if p.chdr.packet_type == PacketType::SetupBwd && self.try_complete(to, &p) {
                    return;
                }
                self.process_setup(to, bytes.len(), &p);
            }
            Packet::Data(p) => {
                let had_endpoint =
                    p.chdr.packet_type == PacketType::DataBwd && self.endpoints.contains_key(&to);
                if had_endpoint && self.try_endpoint(to, &p) {
                    return;
                }
                self.process_data(to, bytes.len(), &p);
            }
        }
    }

    fn process_setup(&mut self, at: usize, in_len: usize, p: &SetupPacket) {
        let t = p.chdr.packet_type.name();
        match node_process_setup(&self.nodes[at], p, self.now()) {
            Ok(SetupStep::Forward { next, packet }) => {
                let out = packet.encode();
                self.check_length(at, in_len, out.len(), t, false);
                let next = self.by_id[&next];
                self.transmit(at, next, out);
            }
            Ok(SetupStep::Deliver { key, packet }) => {
                self.learned.push((at, key.0));
                match dest_build_reply(&key, &packet) {
                    Ok((reply, first)) => {
                        let first = self.by_id[&first];
                        self.transmit(at, first, reply.encode());
                    }
                    Err(e) => self.drop_packet(at, t, e),
                }
            }
            Err(e) => self.drop_packet(at, t, e),
        }
    }

    fn process_data(&mut self, at: usize, in_len: usize, p: &DataPacket) {
        let t = p.chdr.packet_type.name();
        match node_process_data(&self.nodes[at], p, self.now()) {
            Ok(DataStep::Forward { next, packet }) => {
                let out = packet.encode();
                let nested_strip = p.chdr.packet_type == PacketType::DataFwdNested
                    && packet.chdr.packet_type == PacketType::DataBwd;
                self.check_length(at, in_len, out.len(), t, nested_strip);
                let next = self.by_id[&next];
                self.transmit(at, next, out);
            }
            Ok(DataStep::Deliver { key, exp, block }) => {
                self.learned.push((at, key.0));
                self.deliver(at, key, exp, block);
            }
            Err(e) => self.drop_packet(at, t, e),
        }
    }

    fn check_length(
        &mut self,
        at: usize,
        in_len: usize,
        out_len: usize,
        t: &str,
        nested_strip: bool,
    ) {
        let expected = if nested_strip {
            in_len - NESTED_AHDR_LEN / 2
        } else {
            in_len
        };
        if out_len == expected {
            self.report.invariants.length_invariance.pass();
        } else {
            let name = self.name(at);
            self.report
                .invariants
                .length_invariance
                .fail(|| format!("{name}: {t} packet of {in_len} bytes left as {out_len}"));
        }
    }

    /// Offers a backward setup packet to the node's pending sessions.
    fn try_complete(&mut self, at: usize, p: &SetupPacket) -> bool {
        let Some(ep) = self.endpoints.get_mut(&at) else {
            return false;
        };
        for i in 0..ep.pending.len() {
            match source_complete_setup(&ep.pending[i].2, p, &mut self.rng) {
                Ok(session) => {
                    let (flow, role, _) = ep.pending.remove(i);
                    self.session_ready(flow, role, at, session);
                    return true;
                }
                Err(Error::TagMismatch) => continue,
                Err(e) => {
                    let (flow, _, _) = ep.pending.remove(i);
                    self.flow_error(flow, "setup completion", e);
                    return true;
                }
            }
        }
        false
    }

    fn session_ready(&mut self, flow: usize, role: Role, at: usize, session: Session) {
        for (ids, keys) in [
            (&session.forward, &session.keys.forward),
            (&session.backward, &session.keys.backward),
        ] {
            for (id, k) in ids.iter().zip(keys) {
                self.key_owner.insert(k.0, self.by_id[id]);
            }
        }
        match role {
            Role::Plain => {
                self.dest_key_flow.insert(session.dest_key().0, flow);
                self.flows[flow].report.setup_complete = true;
                self.endpoints
                    .entry(at)
                    .or_default()
                    .sessions
                    .push((flow, session));
                self.schedule_traffic(flow);
            }
            Role::Service => match rendezvous_publish(
                &self.flows[flow].report.name.clone(),
                session,
                &mut self.rng,
            ) {
                Ok((service, record)) => {
                    self.directory.insert(flow, record);
                    self.endpoints
                        .entry(at)
                        .or_default()
                        .services
                        .push((flow, service));
                    if let Some(s) = self.waiting_clients.remove(&flow) {
                        self.connect(flow, s);
                    }
                }
                Err(e) => self.flow_error(flow, "publish", e),
            },
            Role::Client => {
                if self.directory.contains_key(&flow) {
                    self.connect(flow, session);
                } else {
                    self.waiting_clients.insert(flow, session);
                }
            }
        }
    }

    fn connect(&mut self, flow: usize, session: Session) {
        let record = &self.directory[&flow];
        match rendezvous_connect(session, record, self.now(), &mut self.rng) {
            Ok(client) => {
                let at = self.flows[flow].initiator;
                self.flows[flow].report.setup_complete = true;
                self.endpoints
                    .entry(at)
                    .or_default()
                    .clients
                    .push((flow, client));
                self.schedule_traffic(flow);
            }
            Err(e) => self.flow_error(flow, "connect", e),
        }
    }

    fn schedule_traffic(&mut self, flow: usize) {
        let t = self.flows[flow].traffic.clone();
        for i in 0..t.messages {
            self.schedule(self.tick + i as u64 * t.interval, Event::Send { flow, i });
        }
        if t.echo && t.messages > 0 {
            self.schedule(
                self.tick + self.sc.announce_timeout,
                Event::AnnounceCheck { flow, attempt: 1 },
            );
        }
    }

    fn message(&mut self, flow: usize, i: usize) -> Vec<u8> {
        let mut m = vec![0u8; self.flows[flow].traffic.message_len];
        m[..4].copy_from_slice(&(flow as u32).to_be_bytes());
        m[4..8].copy_from_slice(&(i as u32).to_be_bytes());
        self.rng.fill_bytes(&mut m[8..]);
        m
    }

    fn send(&mut self, flow: usize, i: usize) {
        let msg = self.message(flow, i);
        let at = self.flows[flow].initiator;
        let now = self.now();
        let ep = self.endpoints.get_mut(&at).expect("initiator state");
        let sent = if self.flows[flow].service.is_none() {
            let (_, s) = ep
                .sessions
                .iter_mut()
                .find(|(f, _)| *f == flow)
                .expect("session");
            source_send_data(s, &msg, now, &mut self.rng).map(|p| (p, s.first_hop()))
        } else {
            let (_, c) = ep
                .clients
                .iter_mut()
                .find(|(f, _)| *f == flow)
                .expect("client");
            c.send(&msg, now, &mut self.rng)
                .map(|p| (p, c.session().first_hop()))
        };
        match sent {
            Ok((pkt, first)) => {
                let f = &mut self.flows[flow];
                f.report.sent += 1;
                f.sent.insert(msg);
                let first = self.by_id[&first];
                self.transmit(at, first, pkt.encode());
            }
            Err(e) => self.flow_error(flow, "send", e),
        }
    }

    fn announce_check(&mut self, flow: usize, attempt: u32) {
        if self.flows[flow].replied || attempt > self.sc.announce_retries {
            return;
        }
        let at = self.flows[flow].initiator;
        let now = self.now();
        let ep = self.endpoints.get_mut(&at).expect("initiator state");
        let sent = if self.flows[flow].service.is_none() {
            let (_, s) = ep
                .sessions
                .iter_mut()
                .find(|(f, _)| *f == flow)
                .expect("session");
            source_announce(s, now, &mut self.rng).map(|p| (p, s.first_hop()))
        } else {
            let (_, c) = ep
                .clients
                .iter_mut()
                .find(|(f, _)| *f == flow)
                .expect("client");
            c.announce(now, &mut self.rng)
                .map(|p| (p, c.session().first_hop()))
        };
        match sent {
            Ok((pkt, first)) => {
                self.flows[flow].report.announce_resends += 1;
                let first = self.by_id[&first];
                self.transmit(at, first, pkt.encode());
                self.schedule(
                    self.tick + self.sc.announce_timeout,
                    Event::AnnounceCheck {
                        flow,
                        attempt: attempt + 1,
                    },
                );
            }
            Err(e) => self.flow_error(flow, "announce", e),
        }
    }

    /// Offers a backward data packet to the node's sessions, clients and
    /// services, identifying the owner by trial decryption.
    fn try_endpoint(&mut self, at: usize, p: &DataPacket) -> bool {
        let mut ep = self.endpoints.remove(&at).expect("checked");
        let mut handled = None;
        for (flow, s) in &mut ep.sessions {
            match source_receive_data(s, p) {
                Err(Error::E2eMacMismatch) | Err(Error::UnexpectedPacket) => continue,
                r => {
                    handled = Some((*flow, r));
                    break;
                }
            }
        }
        if handled.is_none() {
            for (flow, c) in &mut ep.clients {
                match c.receive(p) {
                    Err(Error::E2eMacMismatch) | Err(Error::UnexpectedPacket) => continue,
                    r => {
                        handled = Some((*flow, r));
                        break;
                    }
                }
            }
        }
        if let Some((flow, r)) = handled {
            self.endpoints.insert(at, ep);
            match r {
                Ok(data) => self.echoed(flow, data),
                Err(Error::ReplayDetected(_)) => self.flows[flow].report.replays_detected += 1,
                Err(e) => self.flow_error(flow, "receive", e),
            }
            return true;
        }
        let now = self.now();
        let mut out = None;
        for (flow, svc) in &mut ep.services {
            match svc.receive(p, &mut self.rng) {
                Err(Error::E2eMacMismatch) | Err(Error::UnexpectedPacket) => continue,
                Ok((handle, data)) => {
                    let echo = self.flows[*flow].traffic.echo;
                    let reply = echo.then(|| svc.send(&handle, &data, now, &mut self.rng));
                    out = Some((*flow, Ok(data), reply));
                    break;
                }
                Err(e) => {
                    out = Some((*flow, Err(e), None));
                    break;
                }
            }
        }
        self.endpoints.insert(at, ep);
        let Some((flow, r, reply)) = out else {
            return false;
        };
        match r {
            Ok(data) => self.delivered(flow, &data),
            Err(Error::ReplayDetected(_)) => self.flows[flow].report.replays_detected += 1,
            Err(e) => self.flow_error(flow, "service receive", e),
        }
        match reply {
            Some(Ok((pkt, first))) => {
                let first = self.by_id[&first];
                self.transmit(at, first, pkt.encode());
            }
            Some(Err(e)) => self.flow_error(flow, "service reply", e),
            None => {}
        }
        true
    }

    fn deliver(&mut self, at: usize, key: SymKey, exp: ExpiryTime, block: Vec<u8>) {
        let Some(&flow) = self.dest_key_flow.get(&key.0) else {
            return self.drop_packet(at, "data-fwd", "delivered for an unknown session");
        };
        let now = self.now();
        let ep = self.endpoints.entry(at).or_default();
        match ep.dest.receive(&key, exp, &block) {
            Ok(data) => {
                let reply = self.flows[flow]
                    .traffic
                    .echo
                    .then(|| ep.dest.send(&key, &data, block.len(), now, &mut self.rng));
                self.delivered(flow, &data);
                match reply {
                    Some(Ok((pkt, first))) => {
                        let first = self.by_id[&first];
                        self.transmit(at, first, pkt.encode());
                    }
                    Some(Err(e)) => self.flow_error(flow, "reply", e),
                    None => {}
                }
            }
            Err(Error::ReplayDetected(_)) => self.flows[flow].report.replays_detected += 1,
            Err(Error::E2eMacMismatch) => self.flows[flow].report.corrupt += 1,
            Err(e) => self.flow_error(flow, "deliver", e),
        }
    }

    fn delivered(&mut self, flow: usize, data: &[u8]) {
        let f = &mut self.flows[flow];
        // Bare announcements carry no message.
        if data.is_empty() {
            return;
        }
        if f.sent.contains(data) {
            f.report.delivered += 1;
        } else {
            f.report.corrupt += 1;
        }
    }

    fn echoed(&mut self, flow: usize, data: Vec<u8>) {
        let f = &mut self.flows[flow];
        f.replied = true;
        if data.is_empty() {
            return;
        }
        if f.sent.contains(&data) {
            f.report.echoed += 1;
        } else {
            f.report.corrupt += 1;
        }
    }

    fn finish(mut self) -> TranscriptReport {
        self.report.final_tick = self.tick;

        let inv = &mut self.report.invariants;
        for &(node, key) in &self.learned {
            match self.key_owner.get(&key) {
                Some(&owner) if owner == node => inv.key_confinement.pass(),
                Some(&owner) => {
                    let (n, o) = (
                        self.topo.node(node).name.clone(),
                        self.topo.node(owner).name.clone(),
                    );
                    inv.key_confinement
                        .fail(|| format!("{n} learned a key that belongs to {o}"));
                }
                // The owning session never completed; nothing to compare.
                None => {}
            }
        }
        let keys: HashSet<[u8; 16]> = self.key_owner.keys().copied().collect();
        for (from, to, bytes) in &self.observed {
            match bytes.windows(16).find(|w| keys.contains(*w)) {
                None => inv.key_confinement.pass(),
                Some(_) => {
                    let (a, b) = (
                        self.topo.node(*from).name.clone(),
                        self.topo.node(*to).name.clone(),
                    );
                    inv.key_confinement
                        .fail(|| format!("session key visible on link {a}->{b}"));
                }
            }
        }

        for i in 0..self.topo.len() {
            let entries = self.endpoints.get(&i).map_or(0, Endpoint::entries);
            let name = self.topo.node(i).name.clone();
            self.report
                .session_entries
                .insert(name.clone(), entries as u64);
            if self.end_hosts.contains(&i) {
                continue;
            }
            if entries == 0 {
                inv.statelessness.pass();
            } else {
                inv.statelessness
                    .fail(|| format!("{name} holds {entries} session entries"));
            }
        }

        let mut unlink = Check::default();
        cross_link_windows(&self.report.recorded, &mut unlink);
        self.report.invariants.unlinkability = unlink;

        self.report.flows = self.flows.into_iter().map(|f| f.report).collect();
        self.report
    }
}
