use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};

use crate::ahdr::{proc_ahdr, proc_nested_ahdr};
use crate::crypto::{public_key, Scalar, SymKey};
use crate::fs::{add_fs, fs_create, RoutingSegment};
use crate::onion::{add_layer_in_place, remove_layer_in_place};
use crate::sphinx::proc_sphx_pkt;
use crate::wire::{CommonHeader, DataHeader, DataPacket, PacketType, SetupPacket};
use crate::{Error, ExpiryTime, GroupElement, NodeId, Result};

/// A node's long-lived secrets. Holds nothing keyed by session.
#[derive(Clone)]
pub struct NodeState {
    pub id: NodeId,
    sv: SymKey,
    dh_secret: Scalar,
    pub dh_public: GroupElement,
    neighbors: Option<BTreeSet<NodeId>>,
}

impl std::fmt::Debug for NodeState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeState")
            .field("id", &self.id)
            .field("dh_public", &self.dh_public)
            .finish_non_exhaustive()
    }
}

impl NodeState {
    pub fn new(id: NodeId, sv: SymKey, dh_secret: Scalar) -> Result<Self> {
        let dh_public = public_key(&dh_secret)?;
        Ok(NodeState {
            id,
            sv,
            dh_secret,
            dh_public,
            neighbors: None,
        })
    }

    pub fn generate<G: RngCore + CryptoRng>(id: NodeId, rng: &mut G) -> Self {
        Self::new(id, SymKey::random(rng), Scalar::random(rng)).expect("random scalar is nonzero")
    }

    /// Restricts forwarding to `neighbors`; other next hops are
    /// [`Error::InvalidRoute`].
    pub fn with_neighbors(mut self, neighbors: impl IntoIterator<Item = NodeId>) -> Self {
        self.neighbors = Some(neighbors.into_iter().collect());
        self
    }

    /// Replaces the local secret value. FSes sealed under the old value stop
    /// opening.
    pub fn rotate_sv(&mut self, sv: SymKey) {
        self.sv = sv;
    }

    fn check_route(&self, r: &RoutingSegment) -> Result<()> {
        let ok = if r.is_destination() {
            r.next_hop == self.id
        } else {
            r.next_hop != self.id
                && self
                    .neighbors
                    .as_ref()
                    .is_none_or(|n| n.contains(&r.next_hop))
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRoute)
        }
    }
}

#[derive(Clone, Debug)]
pub enum SetupStep {
    Forward {
        next: NodeId,
        packet: SetupPacket,
    },
    /// The packet reached the hop flagged as destination.
    Deliver {
        key: SymKey,
        packet: SetupPacket,
    },
}

pub fn node_process_setup(
    node: &NodeState,
    pkt: &SetupPacket,
    now: ExpiryTime,
) -> Result<SetupStep> {
    if !pkt.chdr.packet_type.is_setup() {
        return Err(Error::UnexpectedPacket);
    }
    let chdr = pkt.chdr.to_bytes();
    let out = proc_sphx_pkt(&pkt.shdr, &pkt.sp, &node.dh_secret, &chdr)?;
    let exp = pkt.chdr.exp();
    if now >= exp {
        return Err(Error::SessionExpired);
    }
    node.check_route(&out.routing)?;
    let fs = fs_create(&node.sv, &out.key, &out.routing, exp);
    let packet = SetupPacket {
        chdr: pkt.chdr,
        shdr: out.header,
        sp: out.payload,
        fs_payload: add_fs(&out.key, &fs, &pkt.fs_payload),
    };
    Ok(if out.routing.is_destination() {
        SetupStep::Deliver {
            key: out.key,
            packet,
        }
    } else {
        SetupStep::Forward {
            next: out.routing.next_hop,
            packet,
        }
    })
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum DataStep {
    Forward {
        next: NodeId,
        packet: DataPacket,
    },
    /// A forward packet reached its destination; `block` is the plaintext.
    Deliver {
        key: SymKey,
        exp: ExpiryTime,
        block: Vec<u8>,
    },
}

/// Symmetric-key-only processing of a data packet.
///
/// A nested forward packet that reaches its last hop (the rendezvous point)
/// is cut down to the embedded header, turned into a backward packet and
/// processed again here, since that header starts with this node's own FS.
pub fn node_process_data(node: &NodeState, pkt: &DataPacket, now: ExpiryTime) -> Result<DataStep> {
    match (&pkt.chdr.packet_type, &pkt.header) {
        (PacketType::DataFwd, DataHeader::Standard(hdr)) => {
            let v = proc_ahdr(&node.sv, hdr, now)?;
            node.check_route(&v.routing)?;
            let mut payload = pkt.payload.clone();
            let iv = remove_layer_in_place(&v.key, &pkt.iv, &mut payload)?;
            if v.routing.is_destination() {
                return Ok(DataStep::Deliver {
                    key: v.key,
                    exp: v.exp,
                    block: payload,
                });
            }
            Ok(DataStep::Forward {
                next: v.routing.next_hop,
                packet: DataPacket {
                    chdr: pkt.chdr,
                    iv,
                    header: DataHeader::Standard(v.next),
                    payload,
                },
            })
        }
        (PacketType::DataBwd, DataHeader::Standard(hdr)) => {
            let v = proc_ahdr(&node.sv, hdr, now)?;
            if v.routing.is_destination() {
                return Err(Error::UnexpectedPacket);
            }
            node.check_route(&v.routing)?;
            let mut payload = pkt.payload.clone();
            let iv = add_layer_in_place(&v.key, &pkt.iv, &mut payload)?;
            Ok(DataStep::Forward {
                next: v.routing.next_hop,
                packet: DataPacket {
                    chdr: pkt.chdr,
                    iv,
                    header: DataHeader::Standard(v.next),
                    payload,
                },
            })
        }
        (PacketType::DataFwdNested, DataHeader::Nested(hdr)) => {
            let v = proc_nested_ahdr(&node.sv, hdr, now)?;
            node.check_route(&v.routing)?;
            let mut payload = pkt.payload.clone();
            let iv = remove_layer_in_place(&v.key, &pkt.iv, &mut payload)?;
            if !v.routing.is_destination() {
                return Ok(DataStep::Forward {
                    next: v.routing.next_hop,
                    packet: DataPacket {
                        chdr: pkt.chdr,
                        iv,
                        header: DataHeader::Nested(v.next),
                        payload,
                    },
                });
            }
            let spliced = DataPacket {
                chdr: CommonHeader::data(PacketType::DataBwd, payload.len()),
                iv,
                header: DataHeader::Standard(v.next.inner()),
                payload,
            };
            node_process_data(node, &spliced, now)
        }
        _ => Err(Error::UnexpectedPacket),
    }
}
