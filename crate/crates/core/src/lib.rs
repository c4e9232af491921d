//! HORNET: high-speed onion routing at the network layer.
//!
//! Per-session forwarding state is sealed by each node into a forwarding
//! segment (FS) and carried inside packet headers, so routers keep no
//! per-session memory. A session is set up with two Sphinx-style packets in a
//! single round trip; afterwards every data packet is processed with
//! symmetric cryptography only.
//!
//! Module map:
//!
//! * [`crypto`]: primitive family (MAC, PRG, PRP, stream cipher, DH group).
//! * [`fs`]: forwarding segments and the FS payload accumulator.
//! * [`ahdr`]: anonymous headers, including nested headers for rendezvous.
//! * [`onion`]: onion payload layering with IV mutation.
//! * [`sphinx`]: the setup-phase Sphinx header and payload.
//! * [`protocol`]: source, node, destination and rendezvous state machines.
//! * [`wire`]: bit-exact packet codecs.
//! * [`simnet`]: deterministic network simulator, anonymity-set analysis and
//!   micro-benchmarks.

pub mod ahdr;
pub mod crypto;
mod error;
pub mod fs;
pub mod onion;
pub mod protocol;
pub mod simnet;
pub mod sphinx;
pub mod vectors;
pub mod wire;

pub use error::{Error, Result};

pub use ahdr::{Ahdr, NestedAhdr};
pub use crypto::{GroupElement, Scalar, SymKey};
pub use fs::{ExpiryTime, ForwardingSegment, FsPayload, RoutingSegment};
pub use onion::Iv;
pub use protocol::{NodeState, Session};
pub use wire::{CommonHeader, DataPacket, Packet, PacketType, SetupPacket};

/// Security parameter in bytes: length of keys and MACs (k = 128 bits).
pub const K: usize = 16;
/// Length of a sealed forwarding segment (|FS| = 256 bits).
pub const FS_LEN: usize = 32;
/// Length of one header block, an FS plus a MAC (c = |FS| + k = 384 bits).
pub const C: usize = FS_LEN + K;
/// Maximum path length, destination included.
pub const R: usize = 7;
/// Length of an anonymous header and of an FS payload (r * c).
pub const AHDR_LEN: usize = R * C;
/// Length of an anonymous header that carries a nested header (2 * r * c).
pub const NESTED_AHDR_LEN: usize = 2 * R * C;
/// Default onion payload length of a data packet.
pub const DEFAULT_PAYLOAD_LEN: usize = 512;

/// Identifier of a network node (an AS in the simulator).
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "node#{}", self.0)
    }
}
