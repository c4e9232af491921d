use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};

use super::block::{open_block, seal_block, Announcement, ReplayWindow};
use super::node::{node_process_setup, NodeState, SetupStep};
use super::{DIR_BACKWARD, DIR_FORWARD};
use crate::crypto::SymKey;
use crate::fs::init_fs_payload;
use crate::onion::{add_layer_in_place, Iv};
use crate::sphinx::{gen_sphx_pl_recv, unwrap_sphx_pl_send, SphinxHeader};
use crate::wire::{CommonHeader, DataHeader, DataPacket, PacketType, SetupPacket};
use crate::{Error, ExpiryTime, NodeId, Result};

/// Turns a processed first setup packet into the second. `packet` is the
/// output of this node's own setup processing, so its FS is already in the
/// forward FS payload.
pub fn dest_build_reply(s_d: &SymKey, packet: &SetupPacket) -> Result<(SetupPacket, NodeId)> {
    let inner = unwrap_sphx_pl_send(s_d, &packet.sp)?;
    if inner.len() < 4 {
        return Err(Error::TagMismatch);
    }
    let first = NodeId(u32::from_be_bytes(inner[..4].try_into().unwrap()));
    let shdr_b = SphinxHeader::from_bytes(&inner[4..])?;
    let reply = SetupPacket {
        chdr: CommonHeader::setup(PacketType::SetupBwd, packet.chdr.exp()),
        shdr: shdr_b,
        sp: gen_sphx_pl_recv(s_d, &packet.fs_payload.0)?,
        fs_payload: init_fs_payload(s_d),
    };
    Ok((reply, first))
}

pub fn dest_turnaround(
    dest: &NodeState,
    pkt: &SetupPacket,
    now: ExpiryTime,
) -> Result<(SetupPacket, NodeId)> {
    match node_process_setup(dest, pkt, now)? {
        SetupStep::Deliver { key, packet } => dest_build_reply(&key, &packet),
        SetupStep::Forward { .. } => Err(Error::UnexpectedPacket),
    }
}

#[derive(Clone, Debug)]
struct DestSession {
    exp: ExpiryTime,
    reply: Option<Announcement>,
    window: ReplayWindow,
    send_seq: u64,
}

/// Destination end-host state, keyed by `s_D`.
#[derive(Clone, Debug, Default)]
pub struct DestEndpoint {
    sessions: BTreeMap<[u8; 16], DestSession>,
}

impl DestEndpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Checks a delivered plaintext block. A block that carries the backward
    /// AHDR (re)arms replies for this session.
    pub fn receive(&mut self, s_d: &SymKey, exp: ExpiryTime, block: &[u8]) -> Result<Vec<u8>> {
        let opened = open_block(s_d, DIR_FORWARD, block)?;
        let entry = self.sessions.entry(s_d.0).or_insert_with(|| DestSession {
            exp,
            reply: None,
            window: ReplayWindow::new(),
            send_seq: 0,
        });
        entry.window.check(opened.seq)?;
        if let Some(a) = opened.announce {
            entry.reply = Some(a);
        }
        Ok(opened.data)
    }

    /// Builds a backward packet with a single layer keyed by `s_D`. Returns
    /// the packet and the node to send it to.
    pub fn send<G: RngCore + CryptoRng>(
        &mut self,
        s_d: &SymKey,
        data: &[u8],
        payload_size: usize,
        now: ExpiryTime,
        rng: &mut G,
    ) -> Result<(DataPacket, NodeId)> {
        let entry = self
            .sessions
            .get_mut(&s_d.0)
            .ok_or(Error::NoBackwardHeader)?;
        if now >= entry.exp {
            return Err(Error::SessionExpired);
        }
        let reply = entry.reply.clone().ok_or(Error::NoBackwardHeader)?;
        let mut payload = seal_block(s_d, DIR_BACKWARD, entry.send_seq, None, data, payload_size)?;
        entry.send_seq += 1;
        let iv = add_layer_in_place(s_d, &Iv::random(rng), &mut payload)?;
        Ok((
            DataPacket::new(
                PacketType::DataBwd,
                iv,
                DataHeader::Standard(reply.ahdr),
                payload,
            ),
            reply.first_hop,
        ))
    }

    /// Drops sessions whose expiry has passed.
    pub fn expire(&mut self, now: ExpiryTime) {
        self.sessions.retain(|_, s| now < s.exp);
    }
}
