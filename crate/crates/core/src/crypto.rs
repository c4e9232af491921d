//! Cryptographic primitive family.
//!
//! Every other module goes through this one, so the concrete primitives are
//! pinned here:
//!
//! | role            | construction                                        |
//! |-----------------|-----------------------------------------------------|
//! | subkey `h_op`   | AES-128 of a label block (key input), SHA-256 (group) |
//! | MAC             | AES-128-CMAC                                        |
//! | PRG0/1/2        | AES-128-CTR keystream, variant in the counter block |
//! | PRP, 16 bytes   | AES-128                                             |
//! | PRP, 32 bytes   | 4-round Feistel with an AES-128 round function       |
//! | ENC/DEC         | AES-128-CTR with the IV as initial counter block     |
//! | group           | Ristretto255                                        |

use std::cell::Cell;
use std::fmt;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit, KeyIvInit, StreamCipher};
use aes::{Aes128Dec, Aes128Enc};
use cmac::{Cmac, Mac as _};
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256, Sha512};

use crate::{Error, Result, C, K, R};

type Aes128Ctr = ctr::Ctr128BE<Aes128Enc>;
type Aes128Cmac = Cmac<Aes128Enc>;

pub const KEY_LEN: usize = K;
pub const MAC_LEN: usize = K;
pub const GROUP_ELEMENT_LEN: usize = 32;
pub const SCALAR_LEN: usize = 32;
/// Longest PRG output any caller needs: a nested header's 2rc bytes.
pub const PRG_MAX_LEN: usize = 2 * R * C;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SymKey(pub [u8; KEY_LEN]);

impl SymKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| Error::InvalidLength {
            what: "symmetric key",
            expected: KEY_LEN,
            got: bytes.len(),
        })?;
        Ok(SymKey(arr))
    }

    pub fn random<G: RngCore + CryptoRng>(rng: &mut G) -> Self {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        SymKey(k)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymKey({})", hex::encode(self.0))
    }
}

/// Element of the prime-order group, kept together with its canonical
/// encoding. Construction rejects the identity and non-canonical encodings.
#[derive(Clone, Copy)]
pub struct GroupElement {
    point: RistrettoPoint,
    bytes: [u8; GROUP_ELEMENT_LEN],
}

impl GroupElement {
    pub fn generator() -> Self {
        Self::from_point(curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT)
            .expect("basepoint is not the identity")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; GROUP_ELEMENT_LEN] = bytes.try_into().map_err(|_| Error::InvalidElement)?;
        let point = CompressedRistretto(arr)
            .decompress()
            .ok_or(Error::InvalidElement)?;
        if point == RistrettoPoint::identity() {
            return Err(Error::InvalidElement);
        }
        Ok(GroupElement { point, bytes: arr })
    }

    fn from_point(point: RistrettoPoint) -> Result<Self> {
        if point == RistrettoPoint::identity() {
            return Err(Error::InvalidElement);
        }
        Ok(GroupElement {
            point,
            bytes: point.compress().to_bytes(),
        })
    }

    pub fn to_bytes(&self) -> [u8; GROUP_ELEMENT_LEN] {
        self.bytes
    }

    pub fn as_bytes(&self) -> &[u8; GROUP_ELEMENT_LEN] {
        &self.bytes
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for GroupElement {}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", hex::encode(self.bytes))
    }
}

/// Exponent modulo the group order.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(curve25519_dalek::Scalar);

impl Scalar {
    pub fn random<G: RngCore + CryptoRng>(rng: &mut G) -> Self {
        Scalar(curve25519_dalek::Scalar::random(rng))
    }

    /// Reduces 32 little-endian bytes modulo the group order.
    pub fn from_bytes_mod_order(bytes: [u8; SCALAR_LEN]) -> Self {
        Scalar(curve25519_dalek::Scalar::from_bytes_mod_order(bytes))
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(curve25519_dalek::Scalar::from(v))
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_LEN] {
        self.0.to_bytes()
    }

    /// Hashes the concatenation of `parts` to a uniformly distributed scalar.
    pub fn hash_from(parts: &[&[u8]]) -> Self {
        let mut h = Sha512::new();
        h.update(b"HORNET-scalar");
        for p in parts {
            h.update(p);
        }
        Scalar(curve25519_dalek::Scalar::from_hash(h))
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 * other.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// Keys one primitive out of the family (`h_op`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubkeyLabel {
    Mac,
    Prg0,
    Prg1,
    Prg2,
    Prp,
    Enc,
    Dec,
}

impl SubkeyLabel {
    pub const ALL: [SubkeyLabel; 7] = [
        SubkeyLabel::Mac,
        SubkeyLabel::Prg0,
        SubkeyLabel::Prg1,
        SubkeyLabel::Prg2,
        SubkeyLabel::Prp,
        SubkeyLabel::Enc,
        SubkeyLabel::Dec,
    ];

    fn tag(self) -> u8 {
        match self {
            SubkeyLabel::Mac => 1,
            SubkeyLabel::Prg0 => 2,
            SubkeyLabel::Prg1 => 3,
            SubkeyLabel::Prg2 => 4,
            SubkeyLabel::Prp => 5,
            SubkeyLabel::Enc => 6,
            SubkeyLabel::Dec => 7,
        }
    }
}

/// Input to [`derive_subkey`]: either a symmetric key or a DH shared element.
#[derive(Clone, Copy, Debug)]
pub enum KeyMaterial<'a> {
    Sym(&'a SymKey),
    Element(&'a GroupElement),
}

impl<'a> From<&'a SymKey> for KeyMaterial<'a> {
    fn from(k: &'a SymKey) -> Self {
        KeyMaterial::Sym(k)
    }
}

impl<'a> From<&'a GroupElement> for KeyMaterial<'a> {
    fn from(e: &'a GroupElement) -> Self {
        KeyMaterial::Element(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrgVariant {
    Zero,
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Per-thread primitive invocation counts, used to audit which operations a
/// code path performs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub dh: u64,
    pub mac: u64,
    pub prg: u64,
    pub prp: u64,
    pub stream: u64,
}

thread_local! {
    static COUNTERS: Cell<OpCounters> = Cell::new(OpCounters::default());
}

fn bump(f: impl FnOnce(&mut OpCounters)) {
    COUNTERS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

pub fn op_counters() -> OpCounters {
    COUNTERS.with(|c| c.get())
}

pub fn reset_op_counters() {
    COUNTERS.with(|c| c.set(OpCounters::default()));
}

fn sha256_16(parts: &[&[u8]]) -> [u8; 16] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let d = h.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&d[..16]);
    out
}

pub fn derive_subkey<'a>(material: impl Into<KeyMaterial<'a>>, label: SubkeyLabel) -> SymKey {
    match material.into() {
        KeyMaterial::Sym(k) => {
            let mut block = [0u8; 16];
            block[..8].copy_from_slice(b"HORNET-h");
            block[8] = label.tag();
            aes_enc(k).encrypt_block(GenericArray::from_mut_slice(&mut block));
            SymKey(block)
        }
        KeyMaterial::Element(e) => SymKey(sha256_16(&[b"HORNET-h", &[label.tag(), 1], &e.bytes])),
    }
}

/// Session key shared with the holder of the other half of a DH exchange.
pub fn key_from_element(shared: &GroupElement) -> SymKey {
    SymKey(sha256_16(&[b"HORNET-session", &shared.bytes]))
}

pub fn mac(key: &SymKey, data: &[u8]) -> [u8; MAC_LEN] {
    mac_parts(key, &[data])
}

/// MAC over the concatenation of `parts`.
pub fn mac_parts(key: &SymKey, parts: &[&[u8]]) -> [u8; MAC_LEN] {
    bump(|c| c.mac += 1);
    let mut m = <Aes128Cmac as cmac::Mac>::new(&key.0.into());
    for p in parts {
        m.update(p);
    }
    m.finalize().into_bytes().into()
}

/// Constant-length tag comparison.
pub fn tags_equal(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

pub fn prg(key: &SymKey, variant: PrgVariant, out_len: usize) -> Result<Vec<u8>> {
    let mut out = vec![0u8; out_len];
    prg_xor(key, variant, &mut out)?;
    Ok(out)
}

/// XORs the first `buf.len()` bytes of the PRG stream into `buf`.
pub fn prg_xor(key: &SymKey, variant: PrgVariant, buf: &mut [u8]) -> Result<()> {
    if buf.is_empty() || buf.len() > PRG_MAX_LEN {
        return Err(Error::PrgLength(buf.len()));
    }
    bump(|c| c.prg += 1);
    let v = match variant {
        PrgVariant::Zero => 0u8,
        PrgVariant::One => 1,
        PrgVariant::Two => 2,
    };
    let mut counter = [0u8; 16];
    counter[0] = v;
    let mut cipher = Aes128Ctr::new(&key.0.into(), &counter.into());
    cipher.apply_keystream(buf);
    Ok(())
}

fn aes_enc(key: &SymKey) -> Aes128Enc {
    Aes128Enc::new(GenericArray::from_slice(&key.0))
}

/// Pseudo-random permutation over 16- or 32-byte blocks.
pub fn prp_wide(key: &SymKey, block: &[u8], direction: Direction) -> Result<Vec<u8>> {
    let mut out = block.to_vec();
    prp_in_place(key, &mut out, direction)?;
    Ok(out)
}

pub fn prp_in_place(key: &SymKey, block: &mut [u8], direction: Direction) -> Result<()> {
    match block.len() {
        16 => {
            bump(|c| c.prp += 1);
            let b = GenericArray::from_mut_slice(block);
            match direction {
                Direction::Forward => aes_enc(key).encrypt_block(b),
                Direction::Inverse => {
                    Aes128Dec::new(GenericArray::from_slice(&key.0)).decrypt_block(b)
                }
            }
            Ok(())
        }
        32 => {
            bump(|c| c.prp += 1);
            feistel32(&aes_enc(key), block, direction);
            Ok(())
        }
        n => Err(Error::UnsupportedBlockLength(n)),
    }
}

const FEISTEL_ROUNDS: u8 = 4;

// Round function F_j(x) = AES_k(x ^ j), one tweak per round.
fn feistel_round(cipher: &Aes128Enc, round: u8, input: &[u8; 16]) -> [u8; 16] {
    let mut b = *input;
    b[15] ^= round + 1;
    cipher.encrypt_block(GenericArray::from_mut_slice(&mut b));
    b
}

fn feistel32(cipher: &Aes128Enc, block: &mut [u8], direction: Direction) {
    let mut left: [u8; 16] = block[..16].try_into().unwrap();
    let mut right: [u8; 16] = block[16..].try_into().unwrap();
    match direction {
        Direction::Forward => {
            for j in 0..FEISTEL_ROUNDS {
                let f = feistel_round(cipher, j, &right);
                let new_right: [u8; 16] = std::array::from_fn(|i| left[i] ^ f[i]);
                left = right;
                right = new_right;
            }
        }
        Direction::Inverse => {
            for j in (0..FEISTEL_ROUNDS).rev() {
                let f = feistel_round(cipher, j, &left);
                let new_left: [u8; 16] = std::array::from_fn(|i| right[i] ^ f[i]);
                right = left;
                left = new_left;
            }
        }
    }
    block[..16].copy_from_slice(&left);
    block[16..].copy_from_slice(&right);
}

pub fn stream_xcrypt(
    key: &SymKey,
    iv: &[u8; 16],
    data: &[u8],
    direction: Direction,
) -> Result<Vec<u8>> {
    let mut out = data.to_vec();
    stream_in_place(key, iv, &mut out, direction)?;
    Ok(out)
}

/// Encrypts or decrypts `data` in place. CTR mode is symmetric, so the
/// direction only documents intent.
pub fn stream_in_place(
    key: &SymKey,
    iv: &[u8; 16],
    data: &mut [u8],
    _direction: Direction,
) -> Result<()> {
    if data.is_empty() || !data.len().is_multiple_of(16) {
        return Err(Error::InvalidLength {
            what: "stream cipher input (multiple of 16)",
            expected: data.len().div_ceil(16).max(1) * 16,
            got: data.len(),
        });
    }
    bump(|c| c.stream += 1);
    let mut cipher = Aes128Ctr::new(&key.0.into(), iv.into());
    cipher.apply_keystream(data);
    Ok(())
}

/// Raises `element` to `scalar`.
pub fn dh(scalar: &Scalar, element: &GroupElement) -> Result<GroupElement> {
    bump(|c| c.dh += 1);
    GroupElement::from_point(element.point * scalar.0)
}

/// `g^scalar` for the fixed generator.
pub fn public_key(scalar: &Scalar) -> Result<GroupElement> {
    bump(|c| c.dh += 1);
    GroupElement::from_point(RistrettoPoint::mul_base(&scalar.0))
}
