use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::block::{open_block, seal_block, Announcement, ReplayWindow};
use super::{check_lifetime, DIR_BACKWARD, DIR_FORWARD};
use crate::ahdr::{create_ahdr, Ahdr};
use crate::crypto::{Scalar, SymKey};
use crate::fs::{init_fs_payload, retrieve_fses, ForwardingSegment, FsPayload, RoutingSegment};
use crate::onion::{unwrap_backward, wrap_forward, Iv};
use crate::sphinx::{gen_sphx_hdr, gen_sphx_pl_send, unwrap_sphx_pl_recv, SetupKeys, SphinxHop};
use crate::wire::{CommonHeader, DataHeader, DataPacket, PacketType, SetupPacket};
use crate::{Error, ExpiryTime, GroupElement, NodeId, Result, R};

/// One hop of a path as known to the source.
#[derive(Clone, Debug)]
pub struct PathNode {
    pub id: NodeId,
    pub public: GroupElement,
    /// Link the node uses towards the next hop.
    pub egress: u16,
}

/// Source bootstrap input: the two paths and the payload size. `forward`
/// ends with the destination; `backward` runs from the destination's side
/// towards the source and does not include either end host.
#[derive(Clone, Debug)]
pub struct SetupInit {
    pub source: NodeId,
    pub forward: Vec<PathNode>,
    pub backward: Vec<PathNode>,
    pub payload_size: usize,
}

impl SetupInit {
    fn hops(&self) -> (Vec<SphinxHop>, Vec<SphinxHop>) {
        let lf = self.forward.len();
        let fwd = self
            .forward
            .iter()
            .enumerate()
            .map(|(i, n)| SphinxHop {
                public: n.public,
                routing: if i + 1 == lf {
                    RoutingSegment::destination(n.id)
                } else {
                    RoutingSegment::to_next(self.forward[i + 1].id, n.egress)
                },
            })
            .collect();
        let bwd = self
            .backward
            .iter()
            .enumerate()
            .map(|(i, n)| SphinxHop {
                public: n.public,
                routing: RoutingSegment::to_next(
                    self.backward.get(i + 1).map_or(self.source, |m| m.id),
                    n.egress,
                ),
            })
            .collect();
        (fwd, bwd)
    }
}

/// Source state between sending the first setup packet and receiving the
/// second.
#[derive(Clone, Debug)]
pub struct PendingSession {
    pub handle: [u8; 16],
    pub exp: ExpiryTime,
    keys: SetupKeys,
    fs_key: SymKey,
    forward: Vec<NodeId>,
    backward: Vec<NodeId>,
    payload_size: usize,
}

impl PendingSession {
    pub fn first_hop(&self) -> NodeId {
        self.forward[0]
    }

    pub fn keys(&self) -> &SetupKeys {
        &self.keys
    }
}

/// An established session at the source.
#[derive(Clone, Debug)]
pub struct Session {
    pub handle: [u8; 16],
    pub exp: ExpiryTime,
    pub keys: SetupKeys,
    pub fwd_fses: Vec<ForwardingSegment>,
    pub bwd_fses: Vec<ForwardingSegment>,
    pub ahdr_f: Ahdr,
    pub ahdr_b: Ahdr,
    pub forward: Vec<NodeId>,
    pub backward: Vec<NodeId>,
    pub payload_size: usize,
    send_seq: u64,
    window: ReplayWindow,
    announced: bool,
}

impl Session {
    /// `s_D`, the key shared with the destination.
    pub fn dest_key(&self) -> &SymKey {
        self.keys.forward.last().expect("non-empty path")
    }

    pub fn destination(&self) -> NodeId {
        *self.forward.last().expect("non-empty path")
    }

    pub fn first_hop(&self) -> NodeId {
        self.forward[0]
    }

    pub fn send_seq(&self) -> u64 {
        self.send_seq
    }

    fn announcement(&self) -> Announcement {
        Announcement {
            ahdr: self.ahdr_b.clone(),
            first_hop: self.backward[0],
        }
    }

    pub(crate) fn next_seq(&mut self) -> u64 {
        let s = self.send_seq;
        self.send_seq += 1;
        s
    }

    pub(crate) fn replay_check(&mut self, seq: u64) -> Result<()> {
        self.window.check(seq)
    }
}

fn fs_init_key(x_s: &Scalar) -> SymKey {
    let d = Sha256::new()
        .chain_update(b"HORNET-fs-init")
        .chain_update(x_s.to_bytes())
        .finalize();
    SymKey(d[..16].try_into().unwrap())
}

/// Builds the first setup packet. The backward Sphinx header travels to the
/// destination inside the forward Sphinx payload, preceded by the id of the
/// first backward hop.
pub fn source_begin_setup<G: RngCore + CryptoRng>(
    init: &SetupInit,
    now: ExpiryTime,
    exp: ExpiryTime,
    rng: &mut G,
) -> Result<(PendingSession, SetupPacket)> {
    check_lifetime(now, exp)?;
    for l in [init.forward.len(), init.backward.len()] {
        if l == 0 || l > R {
            return Err(Error::PathLength(l));
        }
    }
    if init.payload_size == 0
        || !init.payload_size.is_multiple_of(16)
        || init.payload_size > u16::MAX as usize
    {
        return Err(Error::InvalidLength {
            what: "payload size (multiple of 16)",
            expected: crate::DEFAULT_PAYLOAD_LEN,
            got: init.payload_size,
        });
    }

    let x_s = Scalar::random(rng);
    let chdr_f = CommonHeader::setup(PacketType::SetupFwd, exp);
    let chdr_b = CommonHeader::setup(PacketType::SetupBwd, exp);
    let (fwd, bwd) = init.hops();
    let (shdr_f, shdr_b, keys) = gen_sphx_hdr(
        &x_s,
        &fwd,
        &bwd,
        &chdr_f.to_bytes(),
        &chdr_b.to_bytes(),
        rng,
    )?;

    let mut inner = Vec::with_capacity(4 + crate::sphinx::SPHINX_HEADER_LEN);
    inner.extend_from_slice(&init.backward[0].id.0.to_be_bytes());
    inner.extend_from_slice(&shdr_b.to_bytes());
    let sp = gen_sphx_pl_send(&keys.forward, &inner)?;
    let fs_key = fs_init_key(&x_s);

    let mut handle = [0u8; 16];
    rng.fill_bytes(&mut handle);
    let pending = PendingSession {
        handle,
        exp,
        keys,
        fs_key,
        forward: init.forward.iter().map(|n| n.id).collect(),
        backward: init.backward.iter().map(|n| n.id).collect(),
        payload_size: init.payload_size,
    };
    let packet = SetupPacket {
        chdr: chdr_f,
        shdr: shdr_f,
        sp,
        fs_payload: init_fs_payload(&pending.fs_key),
    };
    Ok((pending, packet))
}

/// Extracts both FS lists from the second setup packet and builds the two
/// AHDRs. Fails with [`Error::TagMismatch`] when the packet belongs to a
/// different pending session.
pub fn source_complete_setup<G: RngCore + CryptoRng>(
    pending: &PendingSession,
    pkt: &SetupPacket,
    rng: &mut G,
) -> Result<Session> {
    if pkt.chdr.packet_type != PacketType::SetupBwd {
        return Err(Error::UnexpectedPacket);
    }
    let keys = &pending.keys;
    let s_d = keys.forward.last().expect("non-empty path");
    let p_f = FsPayload::from_slice(&unwrap_sphx_pl_recv(&keys.backward, s_d, &pkt.sp)?)?;
    let fwd_fses = retrieve_fses(&p_f, &pending.fs_key, &keys.forward)?;
    let bwd_fses = retrieve_fses(&pkt.fs_payload, s_d, &keys.backward)?;
    let ahdr_f = create_ahdr(&keys.forward, &fwd_fses, rng)?;
    let ahdr_b = create_ahdr(&keys.backward, &bwd_fses, rng)?;
    Ok(Session {
        handle: pending.handle,
        exp: pending.exp,
        keys: keys.clone(),
        fwd_fses,
        bwd_fses,
        ahdr_f,
        ahdr_b,
        forward: pending.forward.clone(),
        backward: pending.backward.clone(),
        payload_size: pending.payload_size,
        send_seq: 0,
        window: ReplayWindow::new(),
        announced: false,
    })
}

fn send(
    session: &mut Session,
    data: &[u8],
    announce: bool,
    now: ExpiryTime,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<DataPacket> {
    if now >= session.exp {
        return Err(Error::SessionExpired);
    }
    let a = announce.then(|| session.announcement());
    let block = seal_block(
        session.dest_key(),
        DIR_FORWARD,
        session.send_seq,
        a.as_ref(),
        data,
        session.payload_size,
    )?;
    session.next_seq();
    let (payload, iv) = wrap_forward(&session.keys.forward, Iv::random(rng), &block)?;
    Ok(DataPacket::new(
        PacketType::DataFwd,
        iv,
        DataHeader::Standard(session.ahdr_f.clone()),
        payload,
    ))
}

/// Sends `data` to the destination. The first packet of a session also
/// carries the backward AHDR.
pub fn source_send_data<G: RngCore + CryptoRng>(
    session: &mut Session,
    data: &[u8],
    now: ExpiryTime,
    rng: &mut G,
) -> Result<DataPacket> {
    let announce = !session.announced;
    let pkt = send(session, data, announce, now, rng)?;
    session.announced = true;
    Ok(pkt)
}

/// Re-sends the backward AHDR in a packet of its own, for when the first
/// data packet may have been lost.
pub fn source_announce<G: RngCore + CryptoRng>(
    session: &mut Session,
    now: ExpiryTime,
    rng: &mut G,
) -> Result<DataPacket> {
    let pkt = send(session, &[], true, now, rng)?;
    session.announced = true;
    Ok(pkt)
}

/// Recovers a backward payload. [`Error::E2eMacMismatch`] means the packet
/// does not belong to this session or was modified in transit.
pub fn source_receive_data(session: &mut Session, pkt: &DataPacket) -> Result<Vec<u8>> {
    if pkt.chdr.packet_type != PacketType::DataBwd {
        return Err(Error::UnexpectedPacket);
    }
    let block = unwrap_backward(
        &session.keys.backward,
        session.dest_key(),
        pkt.iv,
        &pkt.payload,
    )?;
    let opened = open_block(session.dest_key(), DIR_BACKWARD, &block)?;
    session.replay_check(opened.seq)?;
    Ok(opened.data)
}
