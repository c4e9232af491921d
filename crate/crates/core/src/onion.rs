//! Onion payload layers with IV mutation.
//!
//! `add_layer` encrypts under the incoming IV and then permutes the IV;
//! `remove_layer` is its exact inverse. The source wraps forward payloads
//! innermost-first and nodes remove one layer each. On the backward path the
//! destination and every node add a layer, and the source removes them all.

use crate::crypto::{self, derive_subkey, Direction, SubkeyLabel, SymKey};
use crate::Result;

pub const IV_LEN: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Iv(pub [u8; IV_LEN]);

impl Iv {
    pub fn random<G: rand::RngCore + rand::CryptoRng>(rng: &mut G) -> Self {
        let mut b = [0u8; IV_LEN];
        rng.fill_bytes(&mut b);
        Iv(b)
    }
}

impl std::fmt::Debug for Iv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Iv({})", hex::encode(self.0))
    }
}

fn mutate(s: &SymKey, iv: &Iv, direction: Direction) -> Iv {
    let mut b = iv.0;
    crypto::prp_in_place(&derive_subkey(s, SubkeyLabel::Prp), &mut b, direction)
        .expect("16-byte PRP");
    Iv(b)
}

pub fn add_layer_in_place(s: &SymKey, iv: &Iv, o: &mut [u8]) -> Result<Iv> {
    crypto::stream_in_place(
        &derive_subkey(s, SubkeyLabel::Enc),
        &iv.0,
        o,
        Direction::Forward,
    )?;
    Ok(mutate(s, iv, Direction::Forward))
}

pub fn remove_layer_in_place(s: &SymKey, iv: &Iv, o: &mut [u8]) -> Result<Iv> {
    let prev = mutate(s, iv, Direction::Inverse);
    crypto::stream_in_place(
        &derive_subkey(s, SubkeyLabel::Enc),
        &prev.0,
        o,
        Direction::Inverse,
    )?;
    Ok(prev)
}

pub fn add_layer(s: &SymKey, iv: &Iv, o: &[u8]) -> Result<(Vec<u8>, Iv)> {
    let mut out = o.to_vec();
    let iv = add_layer_in_place(s, iv, &mut out)?;
    Ok((out, iv))
}

pub fn remove_layer(s: &SymKey, iv: &Iv, o: &[u8]) -> Result<(Vec<u8>, Iv)> {
    let mut out = o.to_vec();
    let iv = remove_layer_in_place(s, iv, &mut out)?;
    Ok((out, iv))
}

/// Wraps `m` for a forward path. `keys` is in path order; the last key's
/// layer is innermost. Returns the payload and the IV to put on the wire.
pub fn wrap_forward(keys: &[SymKey], iv: Iv, m: &[u8]) -> Result<(Vec<u8>, Iv)> {
    let mut o = m.to_vec();
    let mut iv = iv;
    for s in keys.iter().rev() {
        iv = add_layer_in_place(s, &iv, &mut o)?;
    }
    Ok((o, iv))
}

/// Removes layers in path order, as the nodes holding `keys` would.
pub fn unwrap_layers(keys: &[SymKey], iv: Iv, o: &[u8]) -> Result<(Vec<u8>, Iv)> {
    let mut o = o.to_vec();
    let mut iv = iv;
    for s in keys {
        iv = remove_layer_in_place(s, &iv, &mut o)?;
    }
    Ok((o, iv))
}

/// Source-side recovery of a backward payload: the destination added the
/// first layer with `dest_key`, then each node in `keys_backward` added one.
pub fn unwrap_backward(
    keys_backward: &[SymKey],
    dest_key: &SymKey,
    iv_final: Iv,
    o: &[u8],
) -> Result<Vec<u8>> {
    let mut o = o.to_vec();
    let mut iv = iv_final;
    for s in keys_backward.iter().rev() {
        iv = remove_layer_in_place(s, &iv, &mut o)?;
    }
    remove_layer_in_place(dest_key, &iv, &mut o)?;
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Error, DEFAULT_PAYLOAD_LEN, R};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn keys(rng: &mut ChaCha20Rng, n: usize) -> Vec<SymKey> {
        (0..n).map(|_| SymKey::random(rng)).collect()
    }

    fn payload(rng: &mut ChaCha20Rng) -> Vec<u8> {
        let mut m = vec![0u8; DEFAULT_PAYLOAD_LEN];
        rng.fill_bytes(&mut m);
        m
    }

    #[test]
    fn remove_inverts_add() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = SymKey::random(&mut rng);
        let iv = Iv::random(&mut rng);
        let m = payload(&mut rng);
        let (o, iv2) = add_layer(&s, &iv, &m).unwrap();
        assert_eq!(o.len(), m.len());
        assert_ne!(o, m);
        assert_eq!(remove_layer(&s, &iv2, &o).unwrap(), (m, iv));
    }

    #[test]
    fn distinct_keys_give_distinct_layers() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let iv = Iv::random(&mut rng);
        let m = payload(&mut rng);
        let a = add_layer(&SymKey::random(&mut rng), &iv, &m).unwrap();
        let b = add_layer(&SymKey::random(&mut rng), &iv, &m).unwrap();
        assert_ne!(a.0, b.0);
        assert_ne!(a.1, b.1);
    }

    #[test]
    fn bad_length() {
        let s = SymKey([0; 16]);
        assert!(matches!(
            add_layer(&s, &Iv([0; 16]), &[0u8; 17]),
            Err(Error::InvalidLength { .. })
        ));
        assert!(remove_layer(&s, &Iv([0; 16]), &[]).is_err());
    }

    #[test]
    fn forward_chain_delivers_plaintext() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for l in 1..=R {
            for _ in 0..100 {
                let ks = keys(&mut rng, l);
                let m = payload(&mut rng);
                let iv = Iv::random(&mut rng);
                let (o, iv0) = wrap_forward(&ks, iv, &m).unwrap();
                let (out, iv_end) = unwrap_layers(&ks, iv0, &o).unwrap();
                assert_eq!(out, m);
                assert_eq!(iv_end, iv);
            }
        }
    }

    #[test]
    fn single_hop_wrap_is_one_layer() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let ks = keys(&mut rng, 1);
        let m = payload(&mut rng);
        let iv = Iv::random(&mut rng);
        assert_eq!(
            wrap_forward(&ks, iv, &m).unwrap(),
            add_layer(&ks[0], &iv, &m).unwrap()
        );
    }

    #[test]
    fn backward_chain_recovers_plaintext() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for l in 0..=R {
            for _ in 0..100 {
                let ks = keys(&mut rng, l);
                let d = SymKey::random(&mut rng);
                let m = payload(&mut rng);
                let (mut o, mut iv) = add_layer(&d, &Iv::random(&mut rng), &m).unwrap();
                for s in &ks {
                    iv = add_layer_in_place(s, &iv, &mut o).unwrap();
                }
                assert_eq!(unwrap_backward(&ks, &d, iv, &o).unwrap(), m);
            }
        }
    }

    #[test]
    fn on_path_ciphertexts_share_no_window() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let ks = keys(&mut rng, R);
        let m = vec![0u8; DEFAULT_PAYLOAD_LEN];
        let (mut o, mut iv) = wrap_forward(&ks, Iv::random(&mut rng), &m).unwrap();
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        for s in &ks {
            let windows: HashSet<Vec<u8>> = o.windows(16).map(<[u8]>::to_vec).collect();
            assert!(seen.is_disjoint(&windows));
            seen.extend(windows);
            iv = remove_layer_in_place(s, &iv, &mut o).unwrap();
        }
        assert_eq!(o, m);
    }
}
