//! Forwarding segments and the FS payload.
//!
//! A forwarding segment is a node's per-session state sealed under the
//! node's local secret value, so the node can hand it to the source and
//! recover it from every later packet. The FS payload is the fixed-length
//! onion into which each hop inserts its FS during setup; only the source,
//! holding every hop key, can peel it.

use crate::crypto::{self, derive_subkey, Direction, PrgVariant, SubkeyLabel, SymKey};
use crate::{Error, NodeId, Result, C, FS_LEN, K, R};

pub const ROUTING_SEGMENT_LEN: usize = 8;
pub const FS_PAYLOAD_LEN: usize = R * C;

/// Flag bit marking the hop that terminates the session.
pub const FLAG_DESTINATION: u16 = 0x0001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RoutingSegment {
    pub next_hop: NodeId,
    pub egress_link: u16,
    pub flags: u16,
}

impl RoutingSegment {
    pub fn to_next(next_hop: NodeId, egress_link: u16) -> Self {
        RoutingSegment {
            next_hop,
            egress_link,
            flags: 0,
        }
    }

    pub fn destination(self_id: NodeId) -> Self {
        RoutingSegment {
            next_hop: self_id,
            egress_link: 0,
            flags: FLAG_DESTINATION,
        }
    }

    pub fn is_destination(&self) -> bool {
        self.flags & FLAG_DESTINATION != 0
    }

    pub fn to_bytes(&self) -> [u8; ROUTING_SEGMENT_LEN] {
        let mut out = [0u8; ROUTING_SEGMENT_LEN];
        out[..4].copy_from_slice(&self.next_hop.0.to_be_bytes());
        out[4..6].copy_from_slice(&self.egress_link.to_be_bytes());
        out[6..].copy_from_slice(&self.flags.to_be_bytes());
        out
    }

    /// Fails with [`Error::PadCheckFailed`] if any reserved flag bit is set.
    pub fn from_bytes(b: &[u8; ROUTING_SEGMENT_LEN]) -> Result<Self> {
        let flags = u16::from_be_bytes([b[6], b[7]]);
        if flags & !FLAG_DESTINATION != 0 {
            return Err(Error::PadCheckFailed);
        }
        Ok(RoutingSegment {
            next_hop: NodeId(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
            egress_link: u16::from_be_bytes([b[4], b[5]]),
            flags,
        })
    }
}

/// Session expiration time in units of 10 seconds since the epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExpiryTime(pub u32);

impl ExpiryTime {
    pub fn from_secs(secs: u64) -> Self {
        ExpiryTime((secs / 10) as u32)
    }

    pub fn as_secs(&self) -> u64 {
        self.0 as u64 * 10
    }

    pub fn to_bytes(&self) -> [u8; 4] {
        self.0.to_be_bytes()
    }

    pub fn from_bytes(b: [u8; 4]) -> Self {
        ExpiryTime(u32::from_be_bytes(b))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForwardingSegment(pub [u8; FS_LEN]);

impl std::fmt::Debug for ForwardingSegment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FS({})", hex::encode(self.0))
    }
}

/// Contents of an opened forwarding segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FsContents {
    pub key: SymKey,
    pub routing: RoutingSegment,
    pub exp: ExpiryTime,
}

// Plaintext layout: key(16) | R(8) | EXP(4) | zero(4).
pub fn fs_create(
    sv: &SymKey,
    s: &SymKey,
    r: &RoutingSegment,
    exp: ExpiryTime,
) -> ForwardingSegment {
    let mut block = [0u8; FS_LEN];
    block[..16].copy_from_slice(&s.0);
    block[16..24].copy_from_slice(&r.to_bytes());
    block[24..28].copy_from_slice(&exp.to_bytes());
    crypto::prp_in_place(
        &derive_subkey(sv, SubkeyLabel::Prp),
        &mut block,
        Direction::Forward,
    )
    .expect("32-byte PRP is supported");
    ForwardingSegment(block)
}

pub fn fs_open(sv: &SymKey, fs: &ForwardingSegment) -> Result<FsContents> {
    let mut block = fs.0;
    crypto::prp_in_place(
        &derive_subkey(sv, SubkeyLabel::Prp),
        &mut block,
        Direction::Inverse,
    )
    .expect("32-byte PRP is supported");
    if block[28..] != [0u8; 4] {
        return Err(Error::PadCheckFailed);
    }
    let routing = RoutingSegment::from_bytes(block[16..24].try_into().unwrap())?;
    Ok(FsContents {
        key: SymKey(block[..16].try_into().unwrap()),
        routing,
        exp: ExpiryTime::from_bytes(block[24..28].try_into().unwrap()),
    })
}

#[derive(Clone, PartialEq, Eq)]
pub struct FsPayload(pub [u8; FS_PAYLOAD_LEN]);

impl FsPayload {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr = bytes.try_into().map_err(|_| Error::InvalidLength {
            what: "FS payload",
            expected: FS_PAYLOAD_LEN,
            got: bytes.len(),
        })?;
        Ok(FsPayload(arr))
    }

    pub fn as_bytes(&self) -> &[u8; FS_PAYLOAD_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for FsPayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FsPayload({}..)", hex::encode(&self.0[..8]))
    }
}

fn prg_stream(s: &SymKey, label: SubkeyLabel, variant: PrgVariant, len: usize) -> Vec<u8> {
    crypto::prg(&derive_subkey(s, label), variant, len).expect("length within PRG range")
}

pub fn init_fs_payload(s: &SymKey) -> FsPayload {
    let p = prg_stream(s, SubkeyLabel::Prg1, PrgVariant::One, FS_PAYLOAD_LEN);
    FsPayload(p.try_into().unwrap())
}

/// Inserts `fs` at the front of the payload, dropping the trailing block, then
/// re-encrypts and MACs the result. Length is unchanged.
pub fn add_fs(s: &SymKey, fs: &ForwardingSegment, p_in: &FsPayload) -> FsPayload {
    let mut tmp = [0u8; FS_PAYLOAD_LEN - K];
    tmp[..FS_LEN].copy_from_slice(&fs.0);
    tmp[FS_LEN..].copy_from_slice(&p_in.0[..(R - 1) * C]);
    let stream = prg_stream(s, SubkeyLabel::Prg0, PrgVariant::Zero, FS_PAYLOAD_LEN);
    for (t, k) in tmp.iter_mut().zip(&stream[K..]) {
        *t ^= k;
    }
    let alpha = crypto::mac(&derive_subkey(s, SubkeyLabel::Mac), &tmp);
    let mut out = [0u8; FS_PAYLOAD_LEN];
    out[..K].copy_from_slice(&alpha);
    out[K..].copy_from_slice(&tmp);
    FsPayload(out)
}

/// Recovers the FSes inserted by the hops holding `keys`, in insertion order.
///
/// `s` is the key the payload was initialised with. The bytes each hop
/// dropped are recomputed first, then layers are peeled from the last hop
/// backwards, checking each hop's MAC.
pub fn retrieve_fses(p: &FsPayload, s: &SymKey, keys: &[SymKey]) -> Result<Vec<ForwardingSegment>> {
    let l = keys.len();
    if l == 0 || l > R {
        return Err(Error::PathLength(l));
    }
    let rc = FS_PAYLOAD_LEN;

    // psi: the l*c bytes of the initial payload pushed out by the hops, under
    // the keystream bytes the hops applied before dropping them.
    let init = init_fs_payload(s);
    let mut psi = init.0[(R - l) * C..].to_vec();
    for (i, key) in keys.iter().enumerate().take(l - 1) {
        let stream = prg_stream(key, SubkeyLabel::Prg0, PrgVariant::Zero, rc);
        let from = (R - l + 1 + i) * C;
        for (x, k) in psi.iter_mut().zip(&stream[from..]) {
            *x ^= k;
        }
    }

    let mut full = Vec::with_capacity(rc + l * C);
    full.extend_from_slice(&p.0);
    full.extend_from_slice(&psi);

    let mut fses = vec![ForwardingSegment([0; FS_LEN]); l];
    for i in (0..l).rev() {
        let expected = crypto::mac(&derive_subkey(&keys[i], SubkeyLabel::Mac), &full[K..rc]);
        if !crypto::tags_equal(&expected, &full[..K]) {
            return Err(Error::FsMacMismatch { layer: i });
        }
        let stream = prg_stream(&keys[i], SubkeyLabel::Prg0, PrgVariant::Zero, rc);
        for (x, k) in full.iter_mut().zip(&stream) {
            *x ^= k;
        }
        fses[i] = ForwardingSegment(full[K..C].try_into().unwrap());
        full.drain(..C);
    }
    Ok(fses)
}
