use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Outcome of one invariant over a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub checked: u64,
    pub violations: u64,
    /// First few violations, for diagnosis.
    pub examples: Vec<String>,
}

const MAX_EXAMPLES: usize = 10;

impl Check {
    pub fn pass(&mut self) {
        self.checked += 1;
    }

    pub fn fail(&mut self, what: impl FnOnce() -> String) {
        self.checked += 1;
        self.violations += 1;
        if self.examples.len() < MAX_EXAMPLES {
            self.examples.push(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invariants {
    pub key_confinement: Check,
    pub statelessness: Check,
    pub length_invariance: Check,
    pub unlinkability: Check,
}

impl Invariants {
    pub fn violations(&self) -> u64 {
        self.key_confinement.violations
            + self.statelessness.violations
            + self.length_invariance.violations
            + self.unlinkability.violations
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowReport {
    pub name: String,
    pub kind: String,
    pub setup_complete: bool,
    pub sent: u64,
    pub delivered: u64,
    pub echoed: u64,
    pub corrupt: u64,
    pub replays_detected: u64,
    pub announce_resends: u64,
    pub errors: Vec<String>,
}

impl FlowReport {
    /// Every message reached the peer and, when echoing, came back intact.
    pub fn complete(&self, echo: bool) -> bool {
        self.setup_complete
            && self.sent > 0
            && self.delivered == self.sent
            && (!echo || self.echoed == self.sent)
            && self.corrupt == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub tick: u64,
    pub node: String,
    pub packet_type: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedPacket {
    pub tick: u64,
    pub from: String,
    pub to: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptReport {
    pub seed: u64,
    pub final_tick: u64,
    pub packets_delivered: u64,
    pub flows: Vec<FlowReport>,
    pub drops: Vec<DropRecord>,
    /// Packets received per node.
    pub observations: BTreeMap<String, u64>,
    /// End-host session entries per node at the end of the run.
    pub session_entries: BTreeMap<String, u64>,
    pub invariants: Invariants,
    #[serde(skip)]
    pub recorded: Vec<RecordedPacket>,
}

impl TranscriptReport {
    pub fn violations(&self) -> u64 {
        self.invariants.violations()
    }

    pub fn flow(&self, name: &str) -> Option<&FlowReport> {
        self.flows.iter().find(|f| f.name == name)
    }

    /// Hex dump of the packets captured by `record` interceptors.
    pub fn observation_log(&self) -> String {
        let mut out = String::new();
        for p in &self.recorded {
            let kind = p.bytes.first().map_or("?".into(), |b| format!("{b:#04x}"));
            let _ = writeln!(
                out,
                "# tick={} link={}->{} type={} len={}",
                p.tick,
                p.from,
                p.to,
                kind,
                p.bytes.len()
            );
            for (i, row) in p.bytes.chunks(32).enumerate() {
                let _ = writeln!(out, "{:04x}  {}", i * 32, hex::encode(row));
            }
        }
        out
    }
}

/// Counts 16-byte windows shared by packets recorded on different links.
pub(crate) fn cross_link_windows(recorded: &[RecordedPacket], check: &mut Check) {
    let mut links: HashMap<(&str, &str), u32> = HashMap::new();
    let mut windows: Vec<(u128, u32, u32)> = Vec::new();
    for (pi, p) in recorded.iter().enumerate() {
        let next = links.len() as u32;
        let link = *links
            .entry((p.from.as_str(), p.to.as_str()))
            .or_insert(next);
        for w in p.bytes.windows(16) {
            windows.push((u128::from_be_bytes(w.try_into().unwrap()), link, pi as u32));
        }
        check.pass();
    }
    windows.sort_unstable();
    windows.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    for pair in windows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.0 == b.0 {
            check.fail(|| {
                format!(
                    "window {:032x} on {}->{} and {}->{}",
                    a.0,
                    recorded[a.2 as usize].from,
                    recorded[a.2 as usize].to,
                    recorded[b.2 as usize].from,
                    recorded[b.2 as usize].to
                )
            });
            check.checked -= 1;
        }
    }
}
