#![allow(dead_code)]

use std::collections::HashMap;

use hornet_core::protocol::{
    dest_build_reply, node_process_data, node_process_setup, source_begin_setup,
    source_complete_setup, DataStep, NodeState, PathNode, PendingSession, SetupInit, SetupStep,
};
use hornet_core::wire::{DataPacket, SetupPacket};
use hornet_core::{Error, ExpiryTime, NodeId, Result, Session, SymKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

pub const NOW: ExpiryTime = ExpiryTime(170_000_000);
pub const SOURCE: NodeId = NodeId(0);

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Source 0, forward nodes 1..=lf (the last is the destination) and
/// backward nodes 101..=100+lb.
pub struct Line {
    pub forward: Vec<NodeId>,
    pub backward: Vec<NodeId>,
    pub nodes: HashMap<NodeId, NodeState>,
}

impl Line {
    pub fn new(rng: &mut ChaCha20Rng, lf: usize, lb: usize) -> Self {
        let forward: Vec<NodeId> = (1..=lf as u32).map(NodeId).collect();
        let backward: Vec<NodeId> = (101..=100 + lb as u32).map(NodeId).collect();
        let nodes = forward
            .iter()
            .chain(&backward)
            .map(|&id| (id, NodeState::generate(id, rng)))
            .collect();
        Line {
            forward,
            backward,
            nodes,
        }
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[&id]
    }

    pub fn init(&self) -> SetupInit {
        let hop = |id: &NodeId| PathNode {
            id: *id,
            public: self.nodes[id].dh_public,
            egress: 0,
        };
        SetupInit {
            source: SOURCE,
            forward: self.forward.iter().map(hop).collect(),
            backward: self.backward.iter().map(hop).collect(),
            payload_size: hornet_core::DEFAULT_PAYLOAD_LEN,
        }
    }

    /// Carries the first setup packet to the destination and the reply back
    /// to the source.
    pub fn run_setup(&self, p1: &SetupPacket, now: ExpiryTime) -> Result<SetupPacket> {
        let mut pkt = p1.clone();
        let mut at = self.forward[0];
        let (mut pkt_b, mut at_b) = loop {
            match node_process_setup(self.node(at), &pkt, now)? {
                SetupStep::Forward { next, packet } => {
                    pkt = packet;
                    at = next;
                }
                SetupStep::Deliver { key, packet } => break dest_build_reply(&key, &packet)?,
            }
        };
        while at_b != SOURCE {
            match node_process_setup(self.node(at_b), &pkt_b, now)? {
                SetupStep::Forward { next, packet } => {
                    pkt_b = packet;
                    at_b = next;
                }
                SetupStep::Deliver { .. } => return Err(Error::UnexpectedPacket),
            }
        }
        Ok(pkt_b)
    }

    pub fn session(
        &self,
        rng: &mut ChaCha20Rng,
        lifetime: u32,
    ) -> Result<(PendingSession, Session)> {
        let (pending, p1) =
            source_begin_setup(&self.init(), NOW, ExpiryTime(NOW.0 + lifetime), rng)?;
        let p2 = self.run_setup(&p1, NOW)?;
        let session = source_complete_setup(&pending, &p2, rng)?;
        Ok((pending, session))
    }

    /// Forward data packet through every hop to the destination.
    pub fn deliver(
        &self,
        pkt: &DataPacket,
        now: ExpiryTime,
    ) -> Result<(SymKey, ExpiryTime, Vec<u8>)> {
        let mut pkt = pkt.clone();
        let mut at = self.forward[0];
        loop {
            match node_process_data(self.node(at), &pkt, now)? {
                DataStep::Forward { next, packet } => {
                    pkt = packet;
                    at = next;
                }
                DataStep::Deliver { key, exp, block } => return Ok((key, exp, block)),
            }
        }
    }

    /// Backward data packet from the destination to the source.
    pub fn return_to_source(
        &self,
        pkt: &DataPacket,
        first: NodeId,
        now: ExpiryTime,
    ) -> Result<DataPacket> {
        let mut pkt = pkt.clone();
        let mut at = first;
        while at != SOURCE {
            match node_process_data(self.node(at), &pkt, now)? {
                DataStep::Forward { next, packet } => {
                    pkt = packet;
                    at = next;
                }
                DataStep::Deliver { .. } => return Err(Error::UnexpectedPacket),
            }
        }
        Ok(pkt)
    }
}

/// A scenario over a ring: S, F1..F(lf-1), D forward and D, B1..Blb, S back.
pub fn ring_scenario(lf: usize, lb: usize, messages: usize, seed: u64, record_all: bool) -> Value {
    let mut fwd: Vec<String> = (1..lf).map(|i| format!("F{i}")).collect();
    fwd.push("D".into());
    let bwd: Vec<String> = (1..=lb).map(|i| format!("B{i}")).collect();
    let mut names = vec!["S".to_string()];
    names.extend(fwd.iter().cloned());
    names.extend(bwd.iter().cloned());
    let nodes: Vec<Value> = names
        .iter()
        .enumerate()
        .map(|(i, n)| json!({"name": n, "id": i}))
        .collect();

    let mut hops: Vec<(String, String)> = Vec::new();
    let mut prev = "S".to_string();
    for n in &fwd {
        hops.push((prev.clone(), n.clone()));
        prev = n.clone();
    }
    for n in bwd.iter().chain(std::iter::once(&"S".to_string())) {
        hops.push((prev.clone(), n.clone()));
        prev = n.clone();
    }
    let links: Vec<Value> = hops
        .iter()
        .map(|(a, b)| json!({"a": a, "b": b, "rel": "customer-provider"}))
        .collect();
    let adversary: Vec<Value> = if record_all {
        hops.iter()
            .flat_map(|(a, b)| {
                [
                    json!({"at": {"link": [a, b]}, "action": "record"}),
                    json!({"at": {"link": [b, a]}, "action": "record"}),
                ]
            })
            .collect()
    } else {
        Vec::new()
    };
    json!({
        "seed": seed,
        "topology": {"nodes": nodes, "links": links},
        "sessions": [{
            "name": format!("ring-{lf}-{lb}"),
            "source": "S",
            "forward": fwd,
            "backward": bwd,
            "messages": messages,
            "interval": 2,
        }],
        "adversary": adversary,
    })
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}
