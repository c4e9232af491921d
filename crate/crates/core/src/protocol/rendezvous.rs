//! Sender-receiver anonymity through a rendezvous point (RP).
//!
//! The service D holds a session D to RP whose backward path starts at the
//! RP itself and publishes that backward AHDR. A client S, holding its own
//! session S to RP, sends nested packets whose inner header is D's published
//! one; the RP swaps headers without keeping state. Replies travel the same
//! way in reverse around S's announced backward AHDR.
//!
//! End-to-end protection uses a key from a DH between the client's ephemeral
//! secret and the service key. Every payload is
//! `sender_pub(32) | nonce(16) | ENC(K, nonce, block)`.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};

use super::block::{open_block, seal_block, Announcement, ReplayWindow};
use super::source::Session;
use super::{DIR_BACKWARD, DIR_FORWARD};
use crate::ahdr::{create_nested_ahdr, Ahdr, NestedAhdr};
use crate::crypto::{
    self, derive_subkey, dh, key_from_element, public_key, Direction, Scalar, SubkeyLabel, SymKey,
};
use crate::onion::{remove_layer_in_place, wrap_forward, Iv};
use crate::wire::{DataHeader, DataPacket, PacketType};
use crate::{Error, ExpiryTime, GroupElement, NodeId, Result, K};

pub const RENDEZVOUS_OVERHEAD: usize = 32 + K;

/// Directory entry published by a hidden service.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RendezvousRecord {
    pub label: String,
    /// Backward AHDR of the service's session, RP to service.
    pub ahdr_rd: Ahdr,
    pub exp: ExpiryTime,
    pub service_key: GroupElement,
    pub rp: NodeId,
}

/// Client identity as seen by the service: the client's ephemeral public key.
pub type ClientHandle = [u8; 32];

fn check_rp_session(session: &Session) -> Result<NodeId> {
    let rp = session.destination();
    if session.backward.first() != Some(&rp) {
        return Err(Error::InvalidRoute);
    }
    Ok(rp)
}

fn strip_backward(session: &Session, pkt: &DataPacket) -> Result<Vec<u8>> {
    if pkt.chdr.packet_type != PacketType::DataBwd {
        return Err(Error::UnexpectedPacket);
    }
    let mut o = pkt.payload.clone();
    let mut iv = pkt.iv;
    for k in session.keys.backward.iter().rev() {
        iv = remove_layer_in_place(k, &iv, &mut o)?;
    }
    Ok(o)
}

#[allow(clippy::too_many_arguments)]
fn seal(
    key: &SymKey,
    sender: &GroupElement,
    dir: u8,
    seq: u64,
    announce: Option<&Announcement>,
    data: &[u8],
    size: usize,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<Vec<u8>> {
    if size < RENDEZVOUS_OVERHEAD + 16 {
        return Err(Error::PayloadTooLarge {
            len: data.len(),
            capacity: 0,
        });
    }
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);
    let mut block = seal_block(key, dir, seq, announce, data, size - RENDEZVOUS_OVERHEAD)?;
    crypto::stream_in_place(
        &derive_subkey(key, SubkeyLabel::Enc),
        &nonce,
        &mut block,
        Direction::Forward,
    )?;
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(sender.as_bytes());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&block);
    Ok(out)
}

fn open(key: &SymKey, dir: u8, payload: &[u8]) -> Result<super::block::OpenedBlock> {
    if payload.len() <= RENDEZVOUS_OVERHEAD {
        return Err(Error::E2eMacMismatch);
    }
    let nonce: [u8; 16] = payload[32..RENDEZVOUS_OVERHEAD].try_into().unwrap();
    let mut block = payload[RENDEZVOUS_OVERHEAD..].to_vec();
    crypto::stream_in_place(
        &derive_subkey(key, SubkeyLabel::Enc),
        &nonce,
        &mut block,
        Direction::Inverse,
    )?;
    open_block(key, dir, &block)
}

#[derive(Clone, Debug)]
struct ServiceClient {
    key: SymKey,
    reply: Option<NestedAhdr>,
    window: ReplayWindow,
    send_seq: u64,
}

/// Hidden-service side.
#[derive(Clone, Debug)]
pub struct RendezvousService {
    session: Session,
    secret: Scalar,
    public: GroupElement,
    clients: BTreeMap<ClientHandle, ServiceClient>,
}

/// Publishes `session` (service to RP) under `label`.
pub fn rendezvous_publish<G: RngCore + CryptoRng>(
    label: &str,
    session: Session,
    rng: &mut G,
) -> Result<(RendezvousService, RendezvousRecord)> {
    let rp = check_rp_session(&session)?;
    let secret = Scalar::random(rng);
    let public = public_key(&secret)?;
    let record = RendezvousRecord {
        label: label.to_string(),
        ahdr_rd: session.ahdr_b.clone(),
        exp: session.exp,
        service_key: public,
        rp,
    };
    Ok((
        RendezvousService {
            session,
            secret,
            public,
            clients: BTreeMap::new(),
        },
        record,
    ))
}

impl RendezvousService {
    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    /// Accepts a packet that arrived over the service's backward path.
    pub fn receive<G: RngCore + CryptoRng>(
        &mut self,
        pkt: &DataPacket,
        rng: &mut G,
    ) -> Result<(ClientHandle, Vec<u8>)> {
        let payload = strip_backward(&self.session, pkt)?;
        let handle: ClientHandle = payload
            .get(..32)
            .ok_or(Error::E2eMacMismatch)?
            .try_into()
            .unwrap();
        let key = match self.clients.get(&handle) {
            Some(c) => c.key,
            None => {
                let client_pub =
                    GroupElement::from_bytes(&handle).map_err(|_| Error::E2eMacMismatch)?;
                key_from_element(&dh(&self.secret, &client_pub)?)
            }
        };
        let opened = open(&key, DIR_FORWARD, &payload)?;
        let client = self.clients.entry(handle).or_insert_with(|| ServiceClient {
            key,
            reply: None,
            window: ReplayWindow::new(),
            send_seq: 0,
        });
        client.window.check(opened.seq)?;
        if let Some(a) = opened.announce {
            let nested = create_nested_ahdr(
                &self.session.keys.forward,
                &self.session.fwd_fses,
                &a.ahdr,
                rng,
            )?;
            client.reply = Some(nested);
        }
        Ok((handle, opened.data))
    }

    /// Sends to a client that has announced its backward header. Returns the
    /// packet and the first hop of the service's own forward path.
    pub fn send<G: RngCore + CryptoRng>(
        &mut self,
        client: &ClientHandle,
        data: &[u8],
        now: ExpiryTime,
        rng: &mut G,
    ) -> Result<(DataPacket, NodeId)> {
        if now >= self.session.exp {
            return Err(Error::SessionExpired);
        }
        let c = self
            .clients
            .get_mut(client)
            .ok_or(Error::NoBackwardHeader)?;
        let nested = c.reply.clone().ok_or(Error::NoBackwardHeader)?;
        let payload = seal(
            &c.key,
            &self.public,
            DIR_BACKWARD,
            c.send_seq,
            None,
            data,
            self.session.payload_size,
            rng,
        )?;
        c.send_seq += 1;
        let (payload, iv) = wrap_forward(&self.session.keys.forward, Iv::random(rng), &payload)?;
        Ok((
            DataPacket::new(
                PacketType::DataFwdNested,
                iv,
                DataHeader::Nested(nested),
                payload,
            ),
            self.session.first_hop(),
        ))
    }
}

/// Client side of a rendezvous connection.
#[derive(Clone, Debug)]
pub struct RendezvousClient {
    session: Session,
    key: SymKey,
    public: GroupElement,
    nested: NestedAhdr,
    send_seq: u64,
    window: ReplayWindow,
    announced: bool,
}

/// Connects through `session` (client to RP) to the service in `record`.
pub fn rendezvous_connect<G: RngCore + CryptoRng>(
    session: Session,
    record: &RendezvousRecord,
    now: ExpiryTime,
    rng: &mut G,
) -> Result<RendezvousClient> {
    if now >= record.exp {
        return Err(Error::RecordExpired);
    }
    if check_rp_session(&session)? != record.rp {
        return Err(Error::InvalidRoute);
    }
    let secret = Scalar::random(rng);
    let public = public_key(&secret)?;
    let key = key_from_element(&dh(&secret, &record.service_key)?);
    let nested = create_nested_ahdr(
        &session.keys.forward,
        &session.fwd_fses,
        &record.ahdr_rd,
        rng,
    )?;
    Ok(RendezvousClient {
        session,
        key,
        public,
        nested,
        send_seq: 0,
        window: ReplayWindow::new(),
        announced: false,
    })
}

impl RendezvousClient {
    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn handle(&self) -> ClientHandle {
        self.public.to_bytes()
    }

    fn build(
        &mut self,
        data: &[u8],
        announce: bool,
        now: ExpiryTime,
        rng: &mut (impl RngCore + CryptoRng),
    ) -> Result<DataPacket> {
        if now >= self.session.exp {
            return Err(Error::SessionExpired);
        }
        let a = announce.then(|| Announcement {
            ahdr: self.session.ahdr_b.clone(),
            first_hop: self.session.backward[0],
        });
        let payload = seal(
            &self.key,
            &self.public,
            DIR_FORWARD,
            self.send_seq,
            a.as_ref(),
            data,
            self.session.payload_size,
            rng,
        )?;
        self.send_seq += 1;
        self.announced = true;
        let (payload, iv) = wrap_forward(&self.session.keys.forward, Iv::random(rng), &payload)?;
        Ok(DataPacket::new(
            PacketType::DataFwdNested,
            iv,
            DataHeader::Nested(self.nested.clone()),
            payload,
        ))
    }

    /// Sends `data`; the first packet also announces the client's backward
    /// header from the RP.
    pub fn send<G: RngCore + CryptoRng>(
        &mut self,
        data: &[u8],
        now: ExpiryTime,
        rng: &mut G,
    ) -> Result<DataPacket> {
        let announce = !self.announced;
        self.build(data, announce, now, rng)
    }

    pub fn announce<G: RngCore + CryptoRng>(
        &mut self,
        now: ExpiryTime,
        rng: &mut G,
    ) -> Result<DataPacket> {
        self.build(&[], true, now, rng)
    }

    pub fn receive(&mut self, pkt: &DataPacket) -> Result<Vec<u8>> {
        let payload = strip_backward(&self.session, pkt)?;
        let opened = open(&self.key, DIR_BACKWARD, &payload)?;
        self.window.check(opened.seq)?;
        Ok(opened.data)
    }
}
