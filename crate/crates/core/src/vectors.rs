//! Golden wire vectors.
//!
//! Every vector is produced from fixed inputs or a fixed-seed RNG and stored
//! as a hex dump: `#` comment lines, then hex digits in any whitespace
//! layout. `check` regenerates each vector and compares bytes.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::ahdr::{create_ahdr, create_nested_ahdr};
use crate::crypto::{derive_subkey, mac, prg, prp_wide, Direction, PrgVariant, SubkeyLabel};
use crate::fs::fs_create;
use crate::onion::wrap_forward;
use crate::simnet::bench::Fixture;
use crate::wire::Packet;
use crate::{ExpiryTime, Iv, NodeId, Result, RoutingSegment, SymKey};

pub const VECTOR_SEED: u64 = 0x484f524e4554;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vector {
    pub name: &'static str,
    pub description: &'static str,
    pub bytes: Vec<u8>,
}

impl Vector {
    pub fn file_name(&self) -> String {
        format!("{}.hex", self.name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n# {} bytes\n", self.description, self.bytes.len());
        for row in self.bytes.chunks(32) {
            let _ = writeln!(out, "{}", hex::encode(row));
        }
        out
    }
}

/// Reads a hex dump back into bytes.
pub fn parse(text: &str) -> io::Result<Vec<u8>> {
    let digits: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    hex::decode(digits).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

fn ahdr_inputs(rng: &mut ChaCha20Rng, l: usize) -> (Vec<SymKey>, Vec<crate::ForwardingSegment>) {
    let keys: Vec<SymKey> = (0..l).map(|_| SymKey::random(rng)).collect();
    let fses = (0..l)
        .map(|i| {
            let sv = SymKey::random(rng);
            let r = if i + 1 == l {
                RoutingSegment::destination(NodeId(i as u32 + 1))
            } else {
                RoutingSegment::to_next(NodeId(i as u32 + 2), i as u16)
            };
            fs_create(&sv, &keys[i], &r, ExpiryTime(170_000_060))
        })
        .collect();
    (keys, fses)
}

/// The full vector set, in a fixed order.
pub fn golden_vectors() -> Result<Vec<Vector>> {
    let zero = SymKey([0; 16]);
    let mut rng = ChaCha20Rng::seed_from_u64(VECTOR_SEED);
    let (keys, fses) = ahdr_inputs(&mut rng, 3);
    let ahdr = create_ahdr(&keys, &fses, &mut rng)?;
    let (nkeys, nfses) = ahdr_inputs(&mut rng, 2);
    let nested = create_nested_ahdr(&nkeys, &nfses, &ahdr, &mut rng)?;
    let message: Vec<u8> = (0..64u8).collect();
    let (onion, _) = wrap_forward(&keys, Iv([0x11; 16]), &message)?;
    let fx = Fixture::new(VECTOR_SEED)?;

    Ok(vec![
        Vector {
            name: "subkey_mac_zero",
            description: "derive_subkey(0^16, MAC)",
            bytes: derive_subkey(&zero, SubkeyLabel::Mac).0.to_vec(),
        },
        Vector {
            name: "mac_zero",
            description: "mac(0^16, \"HORNET\")",
            bytes: mac(&zero, b"HORNET").to_vec(),
        },
        Vector {
            name: "prg2_zero_48",
            description: "prg(0^16, PRG2, 48)",
            bytes: prg(&zero, PrgVariant::Two, 48)?,
        },
        Vector {
            name: "prp32_zero",
            description: "prp_wide(0^16, 0^32, forward)",
            bytes: prp_wide(&zero, &[0; 32], Direction::Forward)?,
        },
        Vector {
            name: "fs_zero",
            description: "fs_create(sv=0^16, s=0^16, to_next(0, 0), EXP=0)",
            bytes: fs_create(
                &zero,
                &zero,
                &RoutingSegment::to_next(NodeId(0), 0),
                ExpiryTime(0),
            )
            .0
            .to_vec(),
        },
        Vector {
            name: "ahdr_3hop",
            description: "create_ahdr over 3 hops, seeded",
            bytes: ahdr.0.to_vec(),
        },
        Vector {
            name: "nested_ahdr_2hop",
            description: "create_nested_ahdr over 2 hops around ahdr_3hop, seeded",
            bytes: nested.0.to_vec(),
        },
        Vector {
            name: "onion_3hop",
            description: "wrap_forward of bytes 0..64 under the ahdr_3hop keys, IV 0x11^16",
            bytes: onion,
        },
        Vector {
            name: "setup_fwd_packet",
            description: "first setup packet of a seeded 7-hop session",
            bytes: Packet::Setup(fx.setup.clone()).encode(),
        },
        Vector {
            name: "data_fwd_packet",
            description: "first data packet of the same session",
            bytes: Packet::Data(fx.data.clone()).encode(),
        },
    ])
}

/// Writes every vector into `dir`, returning the paths written.
pub fn write_all(dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let vectors = golden_vectors().map_err(io::Error::other)?;
    let mut out = Vec::new();
    for v in vectors {
        let p = dir.join(v.file_name());
        std::fs::write(&p, v.render())?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct CheckReport {
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty()
    }
}

/// Compares the stored dumps in `dir` against freshly generated vectors.
pub fn check_all(dir: &Path) -> io::Result<CheckReport> {
    let vectors = golden_vectors().map_err(io::Error::other)?;
    let mut report = CheckReport::default();
    for v in vectors {
        let name = v.name.to_string();
        match std::fs::read_to_string(dir.join(v.file_name())) {
            Ok(text) => {
                if parse(&text)? == v.bytes {
                    report.matched.push(name);
                } else {
                    report.mismatched.push(name);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => report.missing.push(name),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        for v in golden_vectors().unwrap() {
            assert_eq!(parse(&v.render()).unwrap(), v.bytes, "{}", v.name);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(golden_vectors().unwrap(), golden_vectors().unwrap());
    }

    #[test]
    fn parse_rejects_odd_digits() {
        assert!(parse("# x\nabc\n").is_err());
        assert_eq!(parse("# x\n ab cd\n\nef").unwrap(), vec![0xab, 0xcd, 0xef]);
    }
}
