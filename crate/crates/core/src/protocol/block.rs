use crate::ahdr::Ahdr;
use crate::crypto::{self, derive_subkey, SubkeyLabel, SymKey};
use crate::{Error, NodeId, Result, AHDR_LEN};

/// `seq(8) | mac(16) | ... | len(2)`
pub const BLOCK_OVERHEAD: usize = 8 + 16 + 2;
const ANNOUNCE_LEN: usize = AHDR_LEN + 4;
const ANNOUNCE_FLAG: u16 = 0x8000;

/// Backward header handed to the peer, with the node it must be sent to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Announcement {
    pub ahdr: Ahdr,
    pub first_hop: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenedBlock {
    pub seq: u64,
    pub announce: Option<Announcement>,
    pub data: Vec<u8>,
}

fn e2e_mac(key: &SymKey, dir: u8, seq: &[u8], body: &[u8], len: &[u8]) -> [u8; 16] {
    crypto::mac_parts(
        &derive_subkey(key, SubkeyLabel::Mac),
        &[b"e2e", &[dir], seq, body, len],
    )
}

/// Plaintext block of `size` bytes: `seq | mac | body | len`. The top bit of
/// `len` marks a body that starts with an [`Announcement`].
pub fn seal_block(
    key: &SymKey,
    dir: u8,
    seq: u64,
    announce: Option<&Announcement>,
    data: &[u8],
    size: usize,
) -> Result<Vec<u8>> {
    let body_len = size.saturating_sub(BLOCK_OVERHEAD);
    let prefix = if announce.is_some() { ANNOUNCE_LEN } else { 0 };
    let capacity = body_len.saturating_sub(prefix);
    if data.len() > capacity || size < BLOCK_OVERHEAD + prefix {
        return Err(Error::PayloadTooLarge {
            len: data.len(),
            capacity,
        });
    }
    let mut block = vec![0u8; size];
    block[..8].copy_from_slice(&seq.to_be_bytes());
    let body = &mut block[24..size - 2];
    if let Some(a) = announce {
        body[..AHDR_LEN].copy_from_slice(&a.ahdr.0);
        body[AHDR_LEN..ANNOUNCE_LEN].copy_from_slice(&a.first_hop.0.to_be_bytes());
    }
    body[prefix..prefix + data.len()].copy_from_slice(data);
    let mut len = data.len() as u16;
    if announce.is_some() {
        len |= ANNOUNCE_FLAG;
    }
    block[size - 2..].copy_from_slice(&len.to_be_bytes());
    let tag = e2e_mac(
        key,
        dir,
        &block[..8],
        &block[24..size - 2],
        &block[size - 2..],
    );
    block[8..24].copy_from_slice(&tag);
    Ok(block)
}

pub fn open_block(key: &SymKey, dir: u8, block: &[u8]) -> Result<OpenedBlock> {
    let size = block.len();
    if size < BLOCK_OVERHEAD {
        return Err(Error::E2eMacMismatch);
    }
    let tag = e2e_mac(
        key,
        dir,
        &block[..8],
        &block[24..size - 2],
        &block[size - 2..],
    );
    if !crypto::tags_equal(&tag, &block[8..24]) {
        return Err(Error::E2eMacMismatch);
    }
    let seq = u64::from_be_bytes(block[..8].try_into().unwrap());
    let len = u16::from_be_bytes([block[size - 2], block[size - 1]]);
    let body = &block[24..size - 2];
    let (announce, rest) = if len & ANNOUNCE_FLAG != 0 {
        if body.len() < ANNOUNCE_LEN {
            return Err(Error::LengthMismatch);
        }
        let a = Announcement {
            ahdr: Ahdr::from_slice(&body[..AHDR_LEN])?,
            first_hop: NodeId(u32::from_be_bytes(
                body[AHDR_LEN..ANNOUNCE_LEN].try_into().unwrap(),
            )),
        };
        (Some(a), &body[ANNOUNCE_LEN..])
    } else {
        (None, body)
    };
    let n = (len & !ANNOUNCE_FLAG) as usize;
    if n > rest.len() {
        return Err(Error::LengthMismatch);
    }
    Ok(OpenedBlock {
        seq,
        announce,
        data: rest[..n].to_vec(),
    })
}

pub const REPLAY_WINDOW: u64 = 1024;

/// Sliding window over the most recent [`REPLAY_WINDOW`] sequence numbers.
#[derive(Clone, Debug, Default)]
pub struct ReplayWindow {
    top: Option<u64>,
    bits: [u64; (REPLAY_WINDOW / 64) as usize],
}

impl ReplayWindow {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(seq: u64) -> (usize, u64) {
        let i = seq % REPLAY_WINDOW;
        ((i / 64) as usize, 1 << (i % 64))
    }

    /// Accepts `seq` once. Sequence numbers that fall behind the window are
    /// treated as replays.
    pub fn check(&mut self, seq: u64) -> Result<()> {
        match self.top {
            Some(top) if seq <= top => {
                if top - seq >= REPLAY_WINDOW {
                    return Err(Error::ReplayDetected(seq));
                }
                let (w, m) = Self::slot(seq);
                if self.bits[w] & m != 0 {
                    return Err(Error::ReplayDetected(seq));
                }
                self.bits[w] |= m;
            }
            Some(top) => {
                if seq - top >= REPLAY_WINDOW {
                    self.bits = Default::default();
                } else {
                    for s in top + 1..seq {
                        let (w, m) = Self::slot(s);
                        self.bits[w] &= !m;
                    }
                }
                let (w, m) = Self::slot(seq);
                self.bits[w] |= m;
                self.top = Some(seq);
            }
            None => {
                let (w, m) = Self::slot(seq);
                self.bits[w] |= m;
                self.top = Some(seq);
            }
        }
        Ok(())
    }
}
