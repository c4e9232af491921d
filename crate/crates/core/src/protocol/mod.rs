//! Session setup and data transmission.
//!
//! Nodes are pure transforms of `(NodeState, packet)`. All per-session
//! memory lives at the end hosts: [`Session`] at the source, [`DestEndpoint`]
//! at the destination, and the rendezvous endpoint types.

mod block;
mod dest;
mod node;
mod rendezvous;
mod source;

pub use block::{
    open_block, seal_block, Announcement, OpenedBlock, ReplayWindow, BLOCK_OVERHEAD, REPLAY_WINDOW,
};
pub use dest::{dest_build_reply, dest_turnaround, DestEndpoint};
pub use node::{node_process_data, node_process_setup, DataStep, NodeState, SetupStep};
pub use rendezvous::{
    rendezvous_connect, rendezvous_publish, ClientHandle, RendezvousClient, RendezvousRecord,
    RendezvousService, RENDEZVOUS_OVERHEAD,
};
pub use source::{
    source_announce, source_begin_setup, source_complete_setup, source_receive_data,
    source_send_data, PathNode, PendingSession, Session, SetupInit,
};

use crate::{Error, ExpiryTime, Result};

/// Session lifetimes a source may request, in decaseconds.
pub const ALLOWED_LIFETIMES: [u32; 4] = [1, 3, 6, 60];

/// Direction byte mixed into end-to-end MACs.
pub const DIR_FORWARD: u8 = 0;
pub const DIR_BACKWARD: u8 = 1;

pub fn check_lifetime(now: ExpiryTime, exp: ExpiryTime) -> Result<()> {
    match exp.0.checked_sub(now.0) {
        Some(d) if ALLOWED_LIFETIMES.contains(&d) => Ok(()),
        _ => Err(Error::InvalidExpiry),
    }
}
