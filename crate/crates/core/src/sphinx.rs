//! Sphinx-style setup header and payload.
//!
//! Header layout: `y(32) | gamma(16) | beta(r*c)`. Each hop derives the shared
//! element `y^x`, checks `gamma` over `beta | chdr`, peels one `c`-byte
//! routing block (`R(8) | gamma_next(16) | zero(24)`) and blinds `y`.
//!
//! The payload is a fixed-size block transformed at every non-destination
//! hop by a four-round wide-block permutation keyed by the hop's session key.
//! End hosts pre-compensate (forward) or post-invert (backward) those
//! transformations. A 16-byte zero tag marks a correctly unwrapped payload.

use rand::{CryptoRng, RngCore};

use crate::crypto::{
    self, derive_subkey, dh, key_from_element, public_key, Direction, GroupElement, PrgVariant,
    Scalar, SubkeyLabel, SymKey, GROUP_ELEMENT_LEN,
};
use crate::fs::{RoutingSegment, ROUTING_SEGMENT_LEN};
use crate::{Error, Result, C, K, R};

pub const SPHINX_BETA_LEN: usize = R * C;
pub const SPHINX_HEADER_LEN: usize = GROUP_ELEMENT_LEN + K + SPHINX_BETA_LEN;
pub const SPHINX_PAYLOAD_LEN: usize = 416;
const TAG_LEN: usize = 16;
const LEN_FIELD: usize = 2;
/// Largest inner message a Sphinx payload carries.
pub const SPHINX_PAYLOAD_CAPACITY: usize = SPHINX_PAYLOAD_LEN - TAG_LEN - LEN_FIELD;

#[derive(Clone, PartialEq, Eq)]
pub struct SphinxHeader {
    /// Encoded group element; validated when a hop processes the header.
    pub y: [u8; GROUP_ELEMENT_LEN],
    pub gamma: [u8; K],
    pub beta: [u8; SPHINX_BETA_LEN],
}

impl SphinxHeader {
    pub fn to_bytes(&self) -> [u8; SPHINX_HEADER_LEN] {
        let mut out = [0u8; SPHINX_HEADER_LEN];
        out[..GROUP_ELEMENT_LEN].copy_from_slice(&self.y);
        out[GROUP_ELEMENT_LEN..GROUP_ELEMENT_LEN + K].copy_from_slice(&self.gamma);
        out[GROUP_ELEMENT_LEN + K..].copy_from_slice(&self.beta);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() != SPHINX_HEADER_LEN {
            return Err(Error::InvalidLength {
                what: "Sphinx header",
                expected: SPHINX_HEADER_LEN,
                got: b.len(),
            });
        }
        Ok(SphinxHeader {
            y: b[..GROUP_ELEMENT_LEN].try_into().unwrap(),
            gamma: b[GROUP_ELEMENT_LEN..GROUP_ELEMENT_LEN + K]
                .try_into()
                .unwrap(),
            beta: b[GROUP_ELEMENT_LEN + K..].try_into().unwrap(),
        })
    }
}

impl std::fmt::Debug for SphinxHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SphinxHeader(y={}..)", hex::encode(&self.y[..8]))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SphinxPayload(pub [u8; SPHINX_PAYLOAD_LEN]);

impl SphinxPayload {
    pub fn from_slice(b: &[u8]) -> Result<Self> {
        Ok(SphinxPayload(b.try_into().map_err(|_| {
            Error::InvalidLength {
                what: "Sphinx payload",
                expected: SPHINX_PAYLOAD_LEN,
                got: b.len(),
            }
        })?))
    }
}

impl std::fmt::Debug for SphinxPayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SphinxPayload({}..)", hex::encode(&self.0[..8]))
    }
}

/// Keys the source shares with each hop, in path order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetupKeys {
    pub forward: Vec<SymKey>,
    pub backward: Vec<SymKey>,
}

/// One hop of a setup path as seen by the source.
#[derive(Clone, Debug)]
pub struct SphinxHop {
    pub public: GroupElement,
    pub routing: RoutingSegment,
}

/// Result of processing a setup packet at one hop.
#[derive(Clone, Debug)]
pub struct ProcessedSphinx {
    pub header: SphinxHeader,
    pub payload: SphinxPayload,
    pub key: SymKey,
    pub routing: RoutingSegment,
}

struct HopSecrets {
    key: SymKey,
    mac: SymKey,
    stream: Vec<u8>,
}

fn hop_secrets(shared: &GroupElement) -> HopSecrets {
    let stream = crypto::prg(
        &derive_subkey(shared, SubkeyLabel::Prg2),
        PrgVariant::Two,
        SPHINX_BETA_LEN + C,
    )
    .expect("length within PRG range");
    HopSecrets {
        key: key_from_element(shared),
        mac: derive_subkey(shared, SubkeyLabel::Mac),
        stream,
    }
}

fn blinding(alpha: &GroupElement, shared: &GroupElement) -> Scalar {
    Scalar::hash_from(&[b"blind", alpha.as_bytes(), shared.as_bytes()])
}

fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

fn header_mac(key: &SymKey, beta: &[u8], chdr: &[u8]) -> [u8; K] {
    crypto::mac_parts(key, &[beta, chdr])
}

/// Builds a header for one path from an ephemeral secret `x`.
fn build_header<G: RngCore + CryptoRng>(
    x: &Scalar,
    hops: &[SphinxHop],
    chdr: &[u8],
    rng: &mut G,
) -> Result<(SphinxHeader, Vec<SymKey>)> {
    let l = hops.len();
    if l == 0 || l > R {
        return Err(Error::PathLength(l));
    }

    let alpha0 = public_key(x)?;
    let mut alpha = alpha0;
    let mut acc = *x;
    let mut secrets = Vec::with_capacity(l);
    for (i, hop) in hops.iter().enumerate() {
        let shared = dh(&acc, &hop.public)?;
        secrets.push(hop_secrets(&shared));
        if i + 1 < l {
            let b = blinding(&alpha, &shared);
            alpha = dh(&b, &alpha)?;
            acc = acc.mul(&b);
        }
    }

    let mut phi: Vec<u8> = Vec::new();
    for s in secrets.iter().take(l - 1) {
        phi.extend_from_slice(&[0u8; C]);
        let from = SPHINX_BETA_LEN + C - phi.len();
        xor_into(&mut phi, &s.stream[from..]);
    }

    let mut beta = vec![0u8; SPHINX_BETA_LEN];
    beta[..ROUTING_SEGMENT_LEN].copy_from_slice(&hops[l - 1].routing.to_bytes());
    rng.fill_bytes(&mut beta[C..(R - l + 1) * C]);
    beta.truncate((R - l + 1) * C);
    xor_into(&mut beta, &secrets[l - 1].stream);
    beta.extend_from_slice(&phi);
    let mut gamma = header_mac(&secrets[l - 1].mac, &beta, chdr);

    for i in (0..l - 1).rev() {
        let mut next = vec![0u8; SPHINX_BETA_LEN];
        next[..ROUTING_SEGMENT_LEN].copy_from_slice(&hops[i].routing.to_bytes());
        next[ROUTING_SEGMENT_LEN..ROUTING_SEGMENT_LEN + K].copy_from_slice(&gamma);
        next[C..].copy_from_slice(&beta[..(R - 1) * C]);
        xor_into(&mut next, &secrets[i].stream);
        beta = next;
        gamma = header_mac(&secrets[i].mac, &beta, chdr);
    }

    let header = SphinxHeader {
        y: alpha0.to_bytes(),
        gamma,
        beta: beta.try_into().unwrap(),
    };
    Ok((header, secrets.into_iter().map(|s| s.key).collect()))
}

/// Generates the forward and backward setup headers for a session with
/// ephemeral secret `x_s`. Each header's MACs cover its common header.
pub fn gen_sphx_hdr<G: RngCore + CryptoRng>(
    x_s: &Scalar,
    forward: &[SphinxHop],
    backward: &[SphinxHop],
    chdr_f: &[u8],
    chdr_b: &[u8],
    rng: &mut G,
) -> Result<(SphinxHeader, SphinxHeader, SetupKeys)> {
    let (hf, kf) = build_header(x_s, forward, chdr_f, rng)?;
    let g_xs = public_key(x_s)?;
    let x_b = x_s.mul(&Scalar::hash_from(&[b"bwd", g_xs.as_bytes()]));
    let (hb, kb) = build_header(&x_b, backward, chdr_b, rng)?;
    Ok((
        hf,
        hb,
        SetupKeys {
            forward: kf,
            backward: kb,
        },
    ))
}

/// Processes one hop. Nodes flagged as the destination leave the payload
/// untouched; the destination unwraps it with [`unwrap_sphx_pl_send`].
pub fn proc_sphx_pkt(
    hdr: &SphinxHeader,
    pl: &SphinxPayload,
    node_secret: &Scalar,
    chdr: &[u8],
) -> Result<ProcessedSphinx> {
    let alpha = GroupElement::from_bytes(&hdr.y)?;
    let shared = dh(node_secret, &alpha)?;
    let secrets = hop_secrets(&shared);
    if !crypto::tags_equal(&header_mac(&secrets.mac, &hdr.beta, chdr), &hdr.gamma) {
        return Err(Error::MacMismatch);
    }

    let mut full = [0u8; SPHINX_BETA_LEN + C];
    full[..SPHINX_BETA_LEN].copy_from_slice(&hdr.beta);
    xor_into(&mut full, &secrets.stream);
    let routing = RoutingSegment::from_bytes(full[..ROUTING_SEGMENT_LEN].try_into().unwrap())?;
    let gamma: [u8; K] = full[ROUTING_SEGMENT_LEN..ROUTING_SEGMENT_LEN + K]
        .try_into()
        .unwrap();

    let b = blinding(&alpha, &shared);
    let next_alpha = dh(&b, &alpha)?;

    let mut payload = pl.clone();
    if !routing.is_destination() {
        wide_prp(&secrets.key, &mut payload.0, Direction::Inverse);
    }
    Ok(ProcessedSphinx {
        header: SphinxHeader {
            y: next_alpha.to_bytes(),
            gamma,
            beta: full[C..].try_into().unwrap(),
        },
        payload,
        key: secrets.key,
        routing,
    })
}

fn encode_inner(inner: &[u8]) -> Result<[u8; SPHINX_PAYLOAD_LEN]> {
    if inner.len() > SPHINX_PAYLOAD_CAPACITY {
        return Err(Error::PayloadTooLarge {
            len: inner.len(),
            capacity: SPHINX_PAYLOAD_CAPACITY,
        });
    }
    let mut block = [0u8; SPHINX_PAYLOAD_LEN];
    block[TAG_LEN..TAG_LEN + LEN_FIELD].copy_from_slice(&(inner.len() as u16).to_be_bytes());
    block[TAG_LEN + LEN_FIELD..TAG_LEN + LEN_FIELD + inner.len()].copy_from_slice(inner);
    Ok(block)
}

fn decode_inner(block: &[u8; SPHINX_PAYLOAD_LEN]) -> Result<Vec<u8>> {
    if !crypto::tags_equal(&block[..TAG_LEN], &[0u8; TAG_LEN]) {
        return Err(Error::TagMismatch);
    }
    let len = u16::from_be_bytes([block[TAG_LEN], block[TAG_LEN + 1]]) as usize;
    if len > SPHINX_PAYLOAD_CAPACITY {
        return Err(Error::TagMismatch);
    }
    Ok(block[TAG_LEN + LEN_FIELD..TAG_LEN + LEN_FIELD + len].to_vec())
}

/// Source-side forward payload. `keys_fwd` ends with the destination's key.
pub fn gen_sphx_pl_send(keys_fwd: &[SymKey], inner: &[u8]) -> Result<SphinxPayload> {
    let mut block = encode_inner(inner)?;
    for k in keys_fwd.iter().rev() {
        wide_prp(k, &mut block, Direction::Forward);
    }
    Ok(SphinxPayload(block))
}

pub fn unwrap_sphx_pl_send(s_d: &SymKey, pl: &SphinxPayload) -> Result<Vec<u8>> {
    let mut block = pl.0;
    wide_prp(s_d, &mut block, Direction::Inverse);
    decode_inner(&block)
}

/// Destination-side backward payload.
pub fn gen_sphx_pl_recv(s_d: &SymKey, inner: &[u8]) -> Result<SphinxPayload> {
    let mut block = encode_inner(inner)?;
    wide_prp(s_d, &mut block, Direction::Forward);
    Ok(SphinxPayload(block))
}

pub fn unwrap_sphx_pl_recv(
    keys_bwd: &[SymKey],
    s_d: &SymKey,
    pl: &SphinxPayload,
) -> Result<Vec<u8>> {
    let mut block = pl.0;
    for k in keys_bwd.iter().rev() {
        wide_prp(k, &mut block, Direction::Forward);
    }
    wide_prp(s_d, &mut block, Direction::Inverse);
    decode_inner(&block)
}

// Four-round unbalanced Feistel over `L(16) | R(400)`: stream rounds keyed by
// L encrypt R, MAC rounds fold R back into L.
fn wide_prp(s: &SymKey, block: &mut [u8; SPHINX_PAYLOAD_LEN], direction: Direction) {
    let base = derive_subkey(s, SubkeyLabel::Prp);
    let round_keys: [SymKey; 4] = std::array::from_fn(|j| SymKey(crypto::mac(&base, &[j as u8])));
    let (left, right) = block.split_at_mut(K);
    let stream_round = |k: &SymKey, left: &[u8], right: &mut [u8]| {
        let iv: [u8; 16] = left.try_into().unwrap();
        crypto::stream_in_place(k, &iv, right, Direction::Forward)
            .expect("400 is a multiple of 16");
    };
    let mac_round = |k: &SymKey, left: &mut [u8], right: &[u8]| {
        xor_into(left, &crypto::mac(k, right));
    };
    match direction {
        Direction::Forward => {
            stream_round(&round_keys[0], left, right);
            mac_round(&round_keys[1], left, right);
            stream_round(&round_keys[2], left, right);
            mac_round(&round_keys[3], left, right);
        }
        Direction::Inverse => {
            mac_round(&round_keys[3], left, right);
            stream_round(&round_keys[2], left, right);
            mac_round(&round_keys[1], left, right);
            stream_round(&round_keys[0], left, right);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::NodeId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    struct Node {
        secret: Scalar,
        hop: SphinxHop,
    }

    fn nodes(rng: &mut ChaCha20Rng, l: usize, base: u32) -> Vec<Node> {
        (0..l)
            .map(|i| {
                let secret = Scalar::random(rng);
                let routing = if i + 1 == l {
                    RoutingSegment::destination(NodeId(base + i as u32))
                } else {
                    RoutingSegment::to_next(NodeId(base + i as u32 + 1), 3)
                };
                let public = public_key(&secret).unwrap();
                Node {
                    secret,
                    hop: SphinxHop { public, routing },
                }
            })
            .collect()
    }

    fn hops(ns: &[Node]) -> Vec<SphinxHop> {
        ns.iter().map(|n| n.hop.clone()).collect()
    }

    const CHDR_F: [u8; 8] = [1, 7, 0, 0, 0, 9, 0, 0];
    const CHDR_B: [u8; 8] = [2, 7, 0, 0, 0, 9, 0, 0];

    #[test]
    fn every_hop_agrees_on_keys() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for l in 1..=R {
            let f = nodes(&mut rng, l, 0);
            let b = nodes(&mut rng, R + 1 - l, 100);
            let x = Scalar::random(&mut rng);
            let (hf, hb, keys) =
                gen_sphx_hdr(&x, &hops(&f), &hops(&b), &CHDR_F, &CHDR_B, &mut rng).unwrap();
            for (ns, hdr, ks, chdr) in [
                (&f, hf, &keys.forward, &CHDR_F),
                (&b, hb, &keys.backward, &CHDR_B),
            ] {
                let mut h = hdr;
                let pl = SphinxPayload([0; SPHINX_PAYLOAD_LEN]);
                for (i, n) in ns.iter().enumerate() {
                    let out = proc_sphx_pkt(&h, &pl, &n.secret, chdr).unwrap();
                    assert_eq!(out.key, ks[i]);
                    assert_eq!(out.routing, n.hop.routing);
                    assert_eq!(out.header.to_bytes().len(), SPHINX_HEADER_LEN);
                    h = out.header;
                }
            }
            assert!(keys.forward.iter().all(|k| !keys.backward.contains(k)));
        }
    }

    #[test]
    fn fresh_ephemeral_gives_fresh_keys() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let f = nodes(&mut rng, 3, 0);
        let b = nodes(&mut rng, 3, 10);
        let k1 = gen_sphx_hdr(
            &Scalar::random(&mut rng),
            &hops(&f),
            &hops(&b),
            &CHDR_F,
            &CHDR_B,
            &mut rng,
        )
        .unwrap()
        .2;
        let k2 = gen_sphx_hdr(
            &Scalar::random(&mut rng),
            &hops(&f),
            &hops(&b),
            &CHDR_F,
            &CHDR_B,
            &mut rng,
        )
        .unwrap()
        .2;
        for k in k1.forward.iter().chain(&k1.backward) {
            assert!(!k2.forward.contains(k) && !k2.backward.contains(k));
        }
    }

    #[test]
    fn chdr_is_bound() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let f = nodes(&mut rng, 4, 0);
        let x = Scalar::random(&mut rng);
        let (hf, _, _) =
            gen_sphx_hdr(&x, &hops(&f), &hops(&f), &CHDR_F, &CHDR_B, &mut rng).unwrap();
        let pl = SphinxPayload([0; SPHINX_PAYLOAD_LEN]);
        for byte in 0..8 {
            for bit in 0..8 {
                let mut chdr = CHDR_F;
                chdr[byte] ^= 1 << bit;
                let r = proc_sphx_pkt(&hf, &pl, &f[0].secret, &chdr);
                assert_eq!(r.unwrap_err(), Error::MacMismatch);
            }
        }
    }

    #[test]
    fn processing_is_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let f = nodes(&mut rng, 2, 0);
        let (hf, _, _) = gen_sphx_hdr(
            &Scalar::random(&mut rng),
            &hops(&f),
            &hops(&f),
            &CHDR_F,
            &CHDR_B,
            &mut rng,
        )
        .unwrap();
        let pl = SphinxPayload([7; SPHINX_PAYLOAD_LEN]);
        let a = proc_sphx_pkt(&hf, &pl, &f[0].secret, &CHDR_F).unwrap();
        let b = proc_sphx_pkt(&hf, &pl, &f[0].secret, &CHDR_F).unwrap();
        assert_eq!((a.header, a.payload, a.key), (b.header, b.payload, b.key));
    }

    #[test]
    fn header_bit_flips_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let f = nodes(&mut rng, 3, 0);
        let (hf, _, _) = gen_sphx_hdr(
            &Scalar::random(&mut rng),
            &hops(&f),
            &hops(&f),
            &CHDR_F,
            &CHDR_B,
            &mut rng,
        )
        .unwrap();
        let pl = SphinxPayload([0; SPHINX_PAYLOAD_LEN]);
        let bytes = hf.to_bytes();
        for _ in 0..200 {
            let mut b = bytes;
            let bit = rng.gen_range(0..SPHINX_HEADER_LEN * 8);
            b[bit / 8] ^= 1 << (bit % 8);
            let h = SphinxHeader::from_bytes(&b).unwrap();
            assert!(proc_sphx_pkt(&h, &pl, &f[0].secret, &CHDR_F).is_err());
        }
    }

    #[test]
    fn forward_payload_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for l in 1..=R {
            for _ in 0..100 {
                let keys: Vec<SymKey> = (0..l).map(|_| SymKey::random(&mut rng)).collect();
                let mut inner = vec![0u8; rng.gen_range(0..=SPHINX_PAYLOAD_CAPACITY)];
                rng.fill_bytes(&mut inner);
                let mut pl = gen_sphx_pl_send(&keys, &inner).unwrap();
                for k in &keys[..l - 1] {
                    wide_prp(k, &mut pl.0, Direction::Inverse);
                }
                assert_eq!(unwrap_sphx_pl_send(&keys[l - 1], &pl).unwrap(), inner);
            }
        }
    }

    #[test]
    fn backward_payload_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for l in 1..=R {
            for _ in 0..100 {
                let keys: Vec<SymKey> = (0..l).map(|_| SymKey::random(&mut rng)).collect();
                let d = SymKey::random(&mut rng);
                let mut inner = vec![0u8; 336];
                rng.fill_bytes(&mut inner);
                let mut pl = gen_sphx_pl_recv(&d, &inner).unwrap();
                for k in &keys {
                    wide_prp(k, &mut pl.0, Direction::Inverse);
                }
                assert_eq!(unwrap_sphx_pl_recv(&keys, &d, &pl).unwrap(), inner);
            }
        }
    }

    #[test]
    fn payload_through_real_hops() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let f = nodes(&mut rng, 5, 0);
        let (hf, _, keys) = gen_sphx_hdr(
            &Scalar::random(&mut rng),
            &hops(&f),
            &hops(&f),
            &CHDR_F,
            &CHDR_B,
            &mut rng,
        )
        .unwrap();
        let inner = b"reply header goes here".to_vec();
        let mut pl = gen_sphx_pl_send(&keys.forward, &inner).unwrap();
        let mut h = hf;
        let mut last_key = None;
        for n in &f {
            let out = proc_sphx_pkt(&h, &pl, &n.secret, &CHDR_F).unwrap();
            h = out.header;
            pl = out.payload;
            last_key = Some(out.key);
        }
        assert_eq!(unwrap_sphx_pl_send(&last_key.unwrap(), &pl).unwrap(), inner);
    }

    #[test]
    fn capacity_and_oversize() {
        let k = [SymKey([1; 16])];
        assert!(gen_sphx_pl_send(&k, &[0u8; SPHINX_PAYLOAD_CAPACITY]).is_ok());
        assert_eq!(
            gen_sphx_pl_send(&k, &[0u8; SPHINX_PAYLOAD_CAPACITY + 1]),
            Err(Error::PayloadTooLarge {
                len: SPHINX_PAYLOAD_CAPACITY + 1,
                capacity: SPHINX_PAYLOAD_CAPACITY
            })
        );
        assert!(gen_sphx_pl_recv(&k[0], &[0u8; SPHINX_PAYLOAD_CAPACITY]).is_ok());
        assert_eq!(
            gen_sphx_pl_recv(&k[0], b"x").unwrap(),
            gen_sphx_pl_recv(&k[0], b"x").unwrap()
        );
    }

    #[test]
    fn random_and_tampered_payloads_fail_tag() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let d = SymKey::random(&mut rng);
        for _ in 0..100 {
            let mut b = [0u8; SPHINX_PAYLOAD_LEN];
            rng.fill_bytes(&mut b);
            assert_eq!(
                unwrap_sphx_pl_send(&d, &SphinxPayload(b)),
                Err(Error::TagMismatch)
            );
        }
        let keys: Vec<SymKey> = (0..3).map(|_| SymKey::random(&mut rng)).collect();
        let pl = gen_sphx_pl_recv(&d, &[5u8; 336]).unwrap();
        for _ in 0..100 {
            let mut bad = pl.clone();
            let i = rng.gen_range(0..SPHINX_PAYLOAD_LEN);
            bad.0[i] ^= 1 << rng.gen_range(0..8);
            for k in &keys {
                wide_prp(k, &mut bad.0, Direction::Inverse);
            }
            assert_eq!(
                unwrap_sphx_pl_recv(&keys, &d, &bad),
                Err(Error::TagMismatch)
            );
        }
    }
}
