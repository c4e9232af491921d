use serde::{Deserialize, Serialize};

use super::topology::{Topology, TopologySpec};
use super::SimError;
use crate::protocol::{ALLOWED_LIFETIMES, BLOCK_OVERHEAD, RENDEZVOUS_OVERHEAD};
use crate::wire::PacketType;
use crate::{DEFAULT_PAYLOAD_LEN, R};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    /// Simulated wall clock at tick 0, in decaseconds.
    #[serde(default = "default_start")]
    pub start_time: u32,
    /// Ticks (milliseconds) per link traversal.
    #[serde(default = "default_link_delay")]
    pub link_delay: u64,
    /// Ticks a source waits for a reply before re-sending its backward AHDR.
    #[serde(default = "default_announce_timeout")]
    pub announce_timeout: u64,
    #[serde(default = "default_announce_retries")]
    pub announce_retries: u32,
    pub topology: TopologySpec,
    #[serde(default)]
    pub sessions: Vec<SessionSpec>,
    #[serde(default)]
    pub rendezvous: Vec<RendezvousSpec>,
    #[serde(default)]
    pub adversary: Vec<InterceptorSpec>,
}

fn default_start() -> u32 {
    170_000_000
}
fn default_link_delay() -> u64 {
    1
}
fn default_announce_timeout() -> u64 {
    1000
}
fn default_announce_retries() -> u32 {
    3
}

/// Traffic shared by plain and rendezvous sessions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traffic {
    #[serde(default = "default_messages")]
    pub messages: usize,
    /// Application bytes per message.
    #[serde(default = "default_message_len")]
    pub message_len: usize,
    #[serde(default = "yes")]
    pub echo: bool,
    /// Ticks between messages.
    #[serde(default = "default_interval")]
    pub interval: u64,
    /// Tick at which setup starts.
    #[serde(default)]
    pub start: u64,
}

impl Default for Traffic {
    fn default() -> Self {
        Traffic {
            messages: default_messages(),
            message_len: default_message_len(),
            echo: true,
            interval: default_interval(),
            start: 0,
        }
    }
}

fn default_messages() -> usize {
    10
}
fn default_message_len() -> usize {
    64
}
fn yes() -> bool {
    true
}
fn default_interval() -> u64 {
    10
}
fn default_lifetime() -> u32 {
    60
}
fn default_payload() -> usize {
    DEFAULT_PAYLOAD_LEN
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub name: String,
    pub source: String,
    /// Forward path, ending with the destination.
    pub forward: Vec<String>,
    /// Backward path from the destination's side towards the source,
    /// excluding both end hosts.
    pub backward: Vec<String>,
    /// Session lifetime in decaseconds.
    #[serde(default = "default_lifetime")]
    pub lifetime: u32,
    #[serde(default = "default_payload")]
    pub payload_size: usize,
    #[serde(default, flatten)]
    pub traffic: Traffic,
}

impl SessionSpec {
    pub fn destination(&self) -> &str {
        self.forward.last().map(String::as_str).unwrap_or("")
    }
}

/// A client and a hidden service meeting at a rendezvous point. Both
/// sessions' forward paths end at `rp` and their backward paths start there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RendezvousSpec {
    pub name: String,
    pub client: String,
    pub service: String,
    pub rp: String,
    pub client_forward: Vec<String>,
    pub client_backward: Vec<String>,
    pub service_forward: Vec<String>,
    pub service_backward: Vec<String>,
    #[serde(default = "default_lifetime")]
    pub lifetime: u32,
    #[serde(default = "default_payload")]
    pub payload_size: usize,
    #[serde(default, flatten)]
    pub traffic: Traffic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// Packets arriving at the node.
    Node(String),
    /// Packets sent from the first node to the second.
    Link([String; 2]),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Record,
    /// Flips one bit; positions past the end wrap around.
    FlipBit {
        position: usize,
    },
    Replay {
        copies: usize,
    },
    Delay {
        ticks: u64,
    },
    Drop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterceptorSpec {
    pub at: Location,
    pub action: Action,
    #[serde(default)]
    pub packet_type: Option<PacketType>,
    /// Matching packets to let through before acting.
    #[serde(default)]
    pub skip: usize,
    /// Maximum number of packets to act on.
    #[serde(default)]
    pub limit: Option<usize>,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Checks names, paths and parameters. Returns the built topology.
    pub fn validate(&self) -> Result<Topology, SimError> {
        let topo = Topology::new(self.topology.clone())?;
        let mut names = std::collections::BTreeSet::new();
        for (i, s) in self.sessions.iter().enumerate() {
            let at = format!("sessions[{i}]");
            if !names.insert(s.name.clone()) {
                return Err(SimError::validation(
                    format!("{at}.name"),
                    "duplicate flow name",
                ));
            }
            let src = node(&topo, &format!("{at}.source"), &s.source)?;
            let fwd = path(&topo, &format!("{at}.forward"), src, &s.forward, false)?;
            let dst = *fwd.last().unwrap();
            let bwd = path(&topo, &format!("{at}.backward"), dst, &s.backward, false)?;
            ends_at(&topo, &format!("{at}.backward"), *bwd.last().unwrap(), src)?;
            if src == dst {
                return Err(SimError::validation(
                    format!("{at}.forward"),
                    "destination equals source",
                ));
            }
            params(&at, s.lifetime, s.payload_size, &s.traffic, 0)?;
        }
        for (i, r) in self.rendezvous.iter().enumerate() {
            let at = format!("rendezvous[{i}]");
            if !names.insert(r.name.clone()) {
                return Err(SimError::validation(
                    format!("{at}.name"),
                    "duplicate flow name",
                ));
            }
            let rp = node(&topo, &format!("{at}.rp"), &r.rp)?;
            for (who, f, b) in [
                ("client", &r.client, (&r.client_forward, &r.client_backward)),
                (
                    "service",
                    &r.service,
                    (&r.service_forward, &r.service_backward),
                ),
            ] {
                let end = node(&topo, &format!("{at}.{who}"), f)?;
                if end == rp {
                    return Err(SimError::validation(
                        format!("{at}.{who}"),
                        "endpoint equals rendezvous point",
                    ));
                }
                let fwd = path(&topo, &format!("{at}.{who}_forward"), end, b.0, false)?;
                if *fwd.last().unwrap() != rp {
                    return Err(SimError::validation(
                        format!("{at}.{who}_forward"),
                        "must end at the rendezvous point",
                    ));
                }
                let bwd = path(&topo, &format!("{at}.{who}_backward"), rp, b.1, true)?;
                if bwd[0] != rp {
                    return Err(SimError::validation(
                        format!("{at}.{who}_backward"),
                        "must start at the rendezvous point",
                    ));
                }
                ends_at(
                    &topo,
                    &format!("{at}.{who}_backward"),
                    *bwd.last().unwrap(),
                    end,
                )?;
            }
            params(
                &at,
                r.lifetime,
                r.payload_size,
                &r.traffic,
                RENDEZVOUS_OVERHEAD,
            )?;
        }
        for (i, a) in self.adversary.iter().enumerate() {
            let at = format!("adversary[{i}].at");
            match &a.at {
                Location::Node(n) => {
                    node(&topo, &at, n)?;
                }
                Location::Link([x, y]) => {
                    let (x, y) = (node(&topo, &at, x)?, node(&topo, &at, y)?);
                    if topo.edge(x, y).is_none() {
                        return Err(SimError::validation(at, "no such link"));
                    }
                }
            }
        }
        Ok(topo)
    }
}

fn node(topo: &Topology, at: &str, name: &str) -> Result<usize, SimError> {
    topo.index_of(name)
        .ok_or_else(|| SimError::validation(at, format!("unknown node {name:?}")))
}

/// Resolves a path that continues from `from`. With `starts_here` the first
/// element is `from` itself.
fn path(
    topo: &Topology,
    at: &str,
    from: usize,
    names: &[String],
    starts_here: bool,
) -> Result<Vec<usize>, SimError> {
    if names.is_empty() || names.len() > R {
        return Err(SimError::validation(
            at,
            format!("path length {} outside 1..={R}", names.len()),
        ));
    }
    let ids = names
        .iter()
        .enumerate()
        .map(|(i, n)| node(topo, &format!("{at}[{i}]"), n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut prev = from;
    for (i, &v) in ids.iter().enumerate() {
        if !(i == 0 && starts_here && v == from) && topo.edge(prev, v).is_none() {
            return Err(SimError::validation(
                format!("{at}[{i}]"),
                format!("no link {} -> {}", topo.node(prev).name, topo.node(v).name),
            ));
        }
        prev = v;
    }
    Ok(ids)
}

fn ends_at(topo: &Topology, at: &str, last: usize, end: usize) -> Result<(), SimError> {
    if topo.edge(last, end).is_none() {
        return Err(SimError::validation(
            at,
            format!("last hop is not linked to {}", topo.node(end).name),
        ));
    }
    Ok(())
}

fn params(
    at: &str,
    lifetime: u32,
    payload: usize,
    traffic: &Traffic,
    extra: usize,
) -> Result<(), SimError> {
    if !ALLOWED_LIFETIMES.contains(&lifetime) {
        return Err(SimError::validation(
            format!("{at}.lifetime"),
            format!("must be one of {ALLOWED_LIFETIMES:?}"),
        ));
    }
    // Room for the first packet: overhead, the announcement and the message.
    let needed = extra + BLOCK_OVERHEAD + crate::AHDR_LEN + 4 + traffic.message_len;
    if !payload.is_multiple_of(16) || payload < needed || payload > u16::MAX as usize {
        return Err(SimError::validation(
            format!("{at}.payload_size"),
            format!("must be a multiple of 16 and at least {needed}"),
        ));
    }
    if traffic.message_len < 16 {
        return Err(SimError::validation(
            format!("{at}.message_len"),
            "must be at least 16",
        ));
    }
    Ok(())
}
