use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid length for {what}: expected {expected}, got {got}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("requested PRG output of {0} bytes is out of range")]
    PrgLength(usize),
    #[error("unsupported PRP block length {0}")]
    UnsupportedBlockLength(usize),
    #[error("invalid group element encoding")]
    InvalidElement,

    #[error("forwarding segment pad check failed")]
    PadCheckFailed,
    #[error("header MAC mismatch")]
    MacMismatch,
    #[error("FS payload MAC mismatch at layer {layer}")]
    FsMacMismatch { layer: usize },
    #[error("session expired")]
    SessionExpired,
    #[error("Sphinx payload tag mismatch")]
    TagMismatch,
    #[error("end-to-end MAC mismatch")]
    E2eMacMismatch,
    #[error("replayed sequence number {0}")]
    ReplayDetected(u64),

    #[error("path length {0} outside 1..=7")]
    PathLength(usize),
    #[error("key and FS lists differ in length ({keys} keys, {fses} FSes)")]
    KeyFsMismatch { keys: usize, fses: usize },
    #[error("expiry time is not on the allowed lifetime grid")]
    InvalidExpiry,
    #[error("payload of {len} bytes exceeds capacity {capacity}")]
    PayloadTooLarge { len: usize, capacity: usize },
    #[error("routing segment does not name a next hop known to this node")]
    InvalidRoute,
    #[error("unexpected packet type for this operation")]
    UnexpectedPacket,
    #[error("no backward header known for this session")]
    NoBackwardHeader,
    #[error("rendezvous record expired")]
    RecordExpired,

    #[error("truncated packet")]
    TruncatedPacket,
    #[error("unknown packet type {0:#04x}")]
    UnknownType(u8),
    #[error("packet length mismatch")]
    LengthMismatch,
}
