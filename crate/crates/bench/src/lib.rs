//! Shared fixtures for the benches.

use hornet_core::simnet::bench::Fixture;

pub const SEED: u64 = 0x5eed;

/// A 7-hop session seen from its first node.
pub fn fixture() -> Fixture {
    Fixture::new(SEED).expect("fixture")
}
