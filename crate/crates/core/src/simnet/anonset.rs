//! Anonymity sets from valley-free routing.
//!
//! An adversary at node A that receives a packet over the link from B learns
//! that the source is one of the nodes with a valley-free path ending in
//! B to A. With a known hop distance the set shrinks to the sources with
//! such a path of exactly that many links.

use serde::Serialize;

use super::topology::{Hop, Topology};
use super::SimError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnonymitySet {
    pub adversary: String,
    pub ingress: String,
    pub distance: Option<usize>,
    pub members: Vec<String>,
    pub weight: u64,
}

// Links allowed before the earliest link seen so far, reading a path
// backwards. A valley-free path is up* peer? down*.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Prefix {
    Any,
    UpOnly,
}

impl Prefix {
    fn after(hop: Hop) -> Prefix {
        match hop {
            Hop::Down => Prefix::Any,
            Hop::Up | Hop::Peer => Prefix::UpOnly,
        }
    }

    fn allows(self, hop: Hop) -> bool {
        self == Prefix::Any || hop == Hop::Up
    }
}

pub fn anonymity_set_size(
    topo: &Topology,
    adversary: &str,
    ingress: &str,
    known_distance: Option<usize>,
) -> Result<AnonymitySet, SimError> {
    let adv = topo
        .index_of(adversary)
        .ok_or_else(|| SimError::validation("adversary", format!("unknown node {adversary:?}")))?;
    let ing = topo
        .index_of(ingress)
        .ok_or_else(|| SimError::validation("ingress", format!("unknown node {ingress:?}")))?;
    let last = topo.edge(ing, adv).ok_or_else(|| {
        SimError::validation(
            "ingress",
            format!("{ingress} is not adjacent to {adversary}"),
        )
    })?;

    // by_distance[v] holds every link count d such that v reaches the
    // adversary over a valley-free simple path of d links ending B -> A.
    let n = topo.len();
    let mut by_distance: Vec<Vec<bool>> = vec![vec![false; n + 1]; n];
    let mut on_path = vec![false; n];
    on_path[adv] = true;
    on_path[ing] = true;
    by_distance[ing][1] = true;
    walk(
        topo,
        ing,
        Prefix::after(last.hop),
        1,
        &mut on_path,
        &mut by_distance,
    );

    let mut members = Vec::new();
    let mut weight = 0u64;
    for (v, ds) in by_distance.iter().enumerate() {
        let hit = match known_distance {
            Some(d) => ds.get(d).copied().unwrap_or(false),
            None => ds.iter().any(|&b| b),
        };
        if hit {
            members.push(topo.node(v).name.clone());
            weight += topo.weight(v);
        }
    }
    Ok(AnonymitySet {
        adversary: adversary.to_string(),
        ingress: ingress.to_string(),
        distance: known_distance,
        members,
        weight,
    })
}

fn walk(
    topo: &Topology,
    at: usize,
    prefix: Prefix,
    depth: usize,
    on_path: &mut [bool],
    out: &mut [Vec<bool>],
) {
    for e in topo.edges(at) {
        let prev = e.to;
        if on_path[prev] {
            continue;
        }
        // The link prev -> at is travelled in the opposite direction of e.
        let hop = match e.hop {
            Hop::Up => Hop::Down,
            Hop::Down => Hop::Up,
            Hop::Peer => Hop::Peer,
        };
        if !prefix.allows(hop) {
            continue;
        }
        on_path[prev] = true;
        out[prev][depth + 1] = true;
        walk(topo, prev, Prefix::after(hop), depth + 1, on_path, out);
        on_path[prev] = false;
    }
}
