//! Per-node processing cost of setup and data packets.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::crypto::{op_counters, reset_op_counters};
use crate::protocol::{
    dest_build_reply, node_process_data, node_process_setup, source_begin_setup,
    source_complete_setup, source_send_data, NodeState, PathNode, SetupInit, SetupStep,
};
use crate::wire::{DataPacket, SetupPacket};
use crate::{ExpiryTime, NodeId, Result, R};

/// A complete 7-hop session and the first node on its forward path.
pub struct Fixture {
    pub node: NodeState,
    pub setup: SetupPacket,
    pub data: DataPacket,
    pub now: ExpiryTime,
}

impl Fixture {
    pub fn new(seed: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let now = ExpiryTime(170_000_000);
        let exp = ExpiryTime(now.0 + 60);
        let nodes: Vec<NodeState> = (1..=R as u32)
            .map(|i| NodeState::generate(NodeId(i), &mut rng))
            .collect();
        let hop = |n: &NodeState| PathNode {
            id: n.id,
            public: n.dh_public,
            egress: 0,
        };
        let init = SetupInit {
            source: NodeId(0),
            forward: nodes.iter().map(hop).collect(),
            backward: nodes[..R - 1].iter().rev().map(hop).collect(),
            payload_size: crate::DEFAULT_PAYLOAD_LEN,
        };
        let by_id = |id: NodeId| &nodes[id.0 as usize - 1];

        let (pending, p1) = source_begin_setup(&init, now, exp, &mut rng)?;
        let mut pkt = p1.clone();
        let mut at = pending.first_hop();
        let (p2, mut at_b) = loop {
            match node_process_setup(by_id(at), &pkt, now)? {
                SetupStep::Forward { next, packet } => {
                    pkt = packet;
                    at = next;
                }
                SetupStep::Deliver { key, packet } => break dest_build_reply(&key, &packet)?,
            }
        };
        let mut pkt = p2;
        while at_b != NodeId(0) {
            match node_process_setup(by_id(at_b), &pkt, now)? {
                SetupStep::Forward { next, packet } => {
                    pkt = packet;
                    at_b = next;
                }
                SetupStep::Deliver { .. } => return Err(crate::Error::UnexpectedPacket),
            }
        }
        let mut session = source_complete_setup(&pending, &pkt, &mut rng)?;
        let data = source_send_data(&mut session, &[0x42; 64], now, &mut rng)?;
        Ok(Fixture {
            node: nodes[0].clone(),
            setup: p1,
            data,
            now,
        })
    }

    pub fn process_setup(&self) -> Result<SetupStep> {
        node_process_setup(&self.node, &self.setup, self.now)
    }

    pub fn process_data(&self) -> Result<crate::protocol::DataStep> {
        node_process_data(&self.node, &self.data, self.now)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub median_ns: u64,
    pub p95_ns: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub setup_iterations: usize,
    pub data_iterations: usize,
    pub setup: Timing,
    pub data: Timing,
    /// Median setup time over median data time.
    pub ratio: f64,
    pub setup_dh_calls: u64,
    pub data_dh_calls: u64,
}

fn time(iterations: usize, mut f: impl FnMut()) -> Timing {
    let mut t: Vec<u64> = (0..iterations)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_nanos() as u64
        })
        .collect();
    t.sort_unstable();
    let at = |q: f64| t[((t.len() - 1) as f64 * q).round() as usize];
    Timing {
        median_ns: at(0.5),
        p95_ns: at(0.95),
    }
}

/// Times `iterations` data packets and a tenth as many (at least 100) setup
/// packets at the fixture's first node.
pub fn run_bench(iterations: usize, seed: u64) -> Result<BenchReport> {
    let data_iterations = iterations.max(1);
    let setup_iterations = (iterations / 10).max(100);
    let fx = Fixture::new(seed)?;
    fx.process_setup()?;
    fx.process_data()?;

    reset_op_counters();
    fx.process_setup()?;
    let setup_dh_calls = op_counters().dh;
    reset_op_counters();
    fx.process_data()?;
    let data_dh_calls = op_counters().dh;

    // Warm-up.
    for _ in 0..50 {
        let _ = std::hint::black_box(fx.process_setup());
        let _ = std::hint::black_box(fx.process_data());
    }
    let setup = time(setup_iterations, || {
        let _ = std::hint::black_box(fx.process_setup());
    });
    let data = time(data_iterations, || {
        let _ = std::hint::black_box(fx.process_data());
    });
    Ok(BenchReport {
        setup_iterations,
        data_iterations,
        ratio: setup.median_ns as f64 / data.median_ns.max(1) as f64,
        setup,
        data,
        setup_dh_calls,
        data_dh_calls,
    })
}
