//! Anonymous headers.
//!
//! An AHDR is `FS | gamma | beta`: the current hop's forwarding segment, a
//! MAC over `FS | beta`, and the onion-encrypted remainder of the header.
//! Each hop strips one `c`-byte block from the front and appends `c` bytes of
//! keystream at the back, so the length never changes.
//!
//! A nested header has twice the width and carries a complete standard AHDR
//! that is revealed to the last hop (the rendezvous point).

use rand::{CryptoRng, RngCore};

use crate::crypto::{self, derive_subkey, PrgVariant, SubkeyLabel, SymKey};
use crate::fs::{fs_open, ExpiryTime, ForwardingSegment, RoutingSegment};
use crate::{Error, Result, AHDR_LEN, C, FS_LEN, K, NESTED_AHDR_LEN, R};

#[derive(Clone, PartialEq, Eq)]
pub struct Ahdr(pub [u8; AHDR_LEN]);

#[derive(Clone, PartialEq, Eq)]
pub struct NestedAhdr(pub [u8; NESTED_AHDR_LEN]);

impl Ahdr {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        Ok(Ahdr(bytes.try_into().map_err(|_| {
            Error::InvalidLength {
                what: "AHDR",
                expected: AHDR_LEN,
                got: bytes.len(),
            }
        })?))
    }

    pub fn fs(&self) -> ForwardingSegment {
        ForwardingSegment(self.0[..FS_LEN].try_into().unwrap())
    }

    pub fn gamma(&self) -> [u8; K] {
        self.0[FS_LEN..C].try_into().unwrap()
    }

    pub fn beta(&self) -> &[u8] {
        &self.0[C..]
    }
}

impl NestedAhdr {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        Ok(NestedAhdr(bytes.try_into().map_err(|_| {
            Error::InvalidLength {
                what: "nested AHDR",
                expected: NESTED_AHDR_LEN,
                got: bytes.len(),
            }
        })?))
    }

    /// The leading standard-width header. After the last hop of the outer
    /// path has processed the header, this is the embedded AHDR.
    pub fn inner(&self) -> Ahdr {
        Ahdr(self.0[..AHDR_LEN].try_into().unwrap())
    }
}

impl std::fmt::Debug for Ahdr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Ahdr({}..)", hex::encode(&self.0[..8]))
    }
}

impl std::fmt::Debug for NestedAhdr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NestedAhdr({}..)", hex::encode(&self.0[..8]))
    }
}

/// Width (in blocks) and keystream of a header flavour. Standard headers use
/// PRG2 over `r` blocks; nested headers use PRG0 over `2r` blocks.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    blocks: usize,
    label: SubkeyLabel,
    variant: PrgVariant,
}

const STANDARD: Geometry = Geometry {
    blocks: R,
    label: SubkeyLabel::Prg2,
    variant: PrgVariant::Two,
};

const NESTED: Geometry = Geometry {
    blocks: 2 * R,
    label: SubkeyLabel::Prg0,
    variant: PrgVariant::Zero,
};

impl Geometry {
    fn len(&self) -> usize {
        self.blocks * C
    }

    fn stream(&self, s: &SymKey) -> Vec<u8> {
        crypto::prg(&derive_subkey(s, self.label), self.variant, self.len())
            .expect("header length within PRG range")
    }

    fn xor_stream(&self, s: &SymKey, buf: &mut [u8]) {
        crypto::prg_xor(&derive_subkey(s, self.label), self.variant, buf)
            .expect("header length within PRG range")
    }
}

fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

fn check_lengths(keys: &[SymKey], fses: &[ForwardingSegment]) -> Result<usize> {
    if keys.len() != fses.len() {
        return Err(Error::KeyFsMismatch {
            keys: keys.len(),
            fses: fses.len(),
        });
    }
    let l = keys.len();
    if l == 0 || l > R {
        return Err(Error::PathLength(l));
    }
    Ok(l)
}

/// Builds a header by running hop processing in reverse. `tail` is the
/// `(blocks - l) * c` bytes the last hop finds at the front of its processed
/// header.
fn build(geom: Geometry, keys: &[SymKey], fses: &[ForwardingSegment], tail: Vec<u8>) -> Vec<u8> {
    let l = keys.len();
    let w = geom.blocks;
    let streams: Vec<Vec<u8>> = keys.iter().map(|k| geom.stream(k)).collect();

    // phi_i: the bytes hop i finds at the end of beta that stem from the zero
    // blocks appended by hops 0..i.
    let mut phi: Vec<u8> = Vec::new();
    for stream in streams.iter().take(l - 1) {
        phi.extend_from_slice(&[0u8; C]);
        let from = w * C - phi.len();
        xor_into(&mut phi, &stream[from..]);
    }

    debug_assert_eq!(tail.len(), (w - l) * C);
    let mut beta = tail;
    xor_into(&mut beta, &streams[l - 1]);
    beta.extend_from_slice(&phi);
    let mut gamma = hop_mac(&keys[l - 1], &fses[l - 1], &beta);

    for i in (0..l - 1).rev() {
        let mut next = Vec::with_capacity((w - 1) * C);
        next.extend_from_slice(&fses[i + 1].0);
        next.extend_from_slice(&gamma);
        next.extend_from_slice(&beta[..(w - 2) * C]);
        xor_into(&mut next, &streams[i]);
        beta = next;
        gamma = hop_mac(&keys[i], &fses[i], &beta);
    }

    let mut out = Vec::with_capacity(w * C);
    out.extend_from_slice(&fses[0].0);
    out.extend_from_slice(&gamma);
    out.extend_from_slice(&beta);
    out
}

fn hop_mac(s: &SymKey, fs: &ForwardingSegment, beta: &[u8]) -> [u8; K] {
    crypto::mac_parts(&derive_subkey(s, SubkeyLabel::Mac), &[&fs.0, beta])
}

pub fn create_ahdr<G: RngCore + CryptoRng>(
    keys: &[SymKey],
    fses: &[ForwardingSegment],
    rng: &mut G,
) -> Result<Ahdr> {
    let l = check_lengths(keys, fses)?;
    let mut tail = vec![0u8; (R - l) * C];
    rng.fill_bytes(&mut tail);
    let bytes = build(STANDARD, keys, fses, tail);
    Ok(Ahdr(bytes.try_into().unwrap()))
}

pub fn create_nested_ahdr<G: RngCore + CryptoRng>(
    keys: &[SymKey],
    fses: &[ForwardingSegment],
    inner: &Ahdr,
    rng: &mut G,
) -> Result<NestedAhdr> {
    let l = check_lengths(keys, fses)?;
    let mut tail = vec![0u8; (2 * R - l) * C];
    tail[..AHDR_LEN].copy_from_slice(&inner.0);
    rng.fill_bytes(&mut tail[AHDR_LEN..]);
    let bytes = build(NESTED, keys, fses, tail);
    Ok(NestedAhdr(bytes.try_into().unwrap()))
}

/// What a hop learns from its header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopView<H> {
    pub key: SymKey,
    pub routing: RoutingSegment,
    pub exp: ExpiryTime,
    pub next: H,
}

fn process(geom: Geometry, sv: &SymKey, hdr: &[u8], now: ExpiryTime) -> Result<HopView<Vec<u8>>> {
    let fs = ForwardingSegment(hdr[..FS_LEN].try_into().unwrap());
    let gamma = &hdr[FS_LEN..C];
    let beta = &hdr[C..];
    let contents = fs_open(sv, &fs)?;
    let expected = hop_mac(&contents.key, &fs, beta);
    if !crypto::tags_equal(&expected, gamma) {
        return Err(Error::MacMismatch);
    }
    if now >= contents.exp {
        return Err(Error::SessionExpired);
    }
    let mut next = Vec::with_capacity(geom.len());
    next.extend_from_slice(beta);
    next.extend_from_slice(&[0u8; C]);
    geom.xor_stream(&contents.key, &mut next);
    Ok(HopView {
        key: contents.key,
        routing: contents.routing,
        exp: contents.exp,
        next,
    })
}

pub fn proc_ahdr(sv: &SymKey, hdr: &Ahdr, now: ExpiryTime) -> Result<HopView<Ahdr>> {
    let v = process(STANDARD, sv, &hdr.0, now)?;
    Ok(HopView {
        key: v.key,
        routing: v.routing,
        exp: v.exp,
        next: Ahdr(v.next.try_into().unwrap()),
    })
}

pub fn proc_nested_ahdr(
    sv: &SymKey,
    hdr: &NestedAhdr,
    now: ExpiryTime,
) -> Result<HopView<NestedAhdr>> {
    let v = process(NESTED, sv, &hdr.0, now)?;
    Ok(HopView {
        key: v.key,
        routing: v.routing,
        exp: v.exp,
        next: NestedAhdr(v.next.try_into().unwrap()),
    })
}
