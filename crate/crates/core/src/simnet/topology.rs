use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relationship {
    /// `a` is a customer of `b`.
    #[serde(rename = "customer-provider")]
    CustomerProvider,
    #[serde(rename = "peer")]
    Peer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub id: u32,
    /// Address-count weight used by anonymity-set analysis.
    #[serde(default = "one")]
    pub weight: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub rel: Relationship,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
}

/// Direction of travel over a link, from the traveller's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hop {
    /// Customer to provider.
    Up,
    Peer,
    /// Provider to customer.
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub to: usize,
    pub hop: Hop,
    pub link: u16,
}

#[derive(Clone, Debug)]
pub struct Topology {
    spec: TopologySpec,
    index: BTreeMap<String, usize>,
    adj: Vec<Vec<Edge>>,
}

impl Topology {
    pub fn new(spec: TopologySpec) -> Result<Self, SimError> {
        let mut index = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if index.insert(n.name.clone(), i).is_some() {
                return Err(SimError::validation(
                    format!("topology.nodes[{i}].name"),
                    format!("duplicate node {:?}", n.name),
                ));
            }
            if !ids.insert(n.id) {
                return Err(SimError::validation(
                    format!("topology.nodes[{i}].id"),
                    format!("duplicate id {}", n.id),
                ));
            }
        }
        if spec.links.len() > u16::MAX as usize {
            return Err(SimError::validation("topology.links", "too many links"));
        }
        let mut adj = vec![Vec::new(); spec.nodes.len()];
        let mut seen = BTreeSet::new();
        for (li, l) in spec.links.iter().enumerate() {
            let lookup = |name: &str, field: &str| {
                index.get(name).copied().ok_or_else(|| {
                    SimError::validation(
                        format!("topology.links[{li}].{field}"),
                        format!("unknown node {name:?}"),
                    )
                })
            };
            let a = lookup(&l.a, "a")?;
            let b = lookup(&l.b, "b")?;
            if a == b {
                return Err(SimError::validation(
                    format!("topology.links[{li}]"),
                    "self-link",
                ));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(SimError::validation(
                    format!("topology.links[{li}]"),
                    "duplicate link",
                ));
            }
            let (ab, ba) = match l.rel {
                Relationship::CustomerProvider => (Hop::Up, Hop::Down),
                Relationship::Peer => (Hop::Peer, Hop::Peer),
            };
            let link = li as u16;
            adj[a].push(Edge {
                to: b,
                hop: ab,
                link,
            });
            adj[b].push(Edge {
                to: a,
                hop: ba,
                link,
            });
        }
        Ok(Topology { spec, index, adj })
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn node(&self, i: usize) -> &NodeSpec {
        &self.spec.nodes[i]
    }

    pub fn edges(&self, i: usize) -> &[Edge] {
        &self.adj[i]
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<Edge> {
        self.adj[a].iter().copied().find(|e| e.to == b)
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.spec.nodes[i].weight
    }
}
