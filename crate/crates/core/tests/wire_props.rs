use hornet_core::onion::IV_LEN;
use hornet_core::protocol::{node_process_data, node_process_setup};
use hornet_core::simnet::bench::Fixture;
use hornet_core::wire::{CHDR_LEN, DATA_HEADER_LEN, SETUP_PACKET_LEN};
use hornet_core::{Packet, PacketType};
use proptest::prelude::*;

fn fixture() -> &'static Fixture {
    static FX: std::sync::OnceLock<Fixture> = std::sync::OnceLock::new();
    FX.get_or_init(|| Fixture::new(99).unwrap())
}

proptest! {
    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..1400)) {
        let _ = Packet::decode(&bytes);
    }

    #[test]
    fn decoded_packets_reencode_exactly(
        ty in any::<u8>(),
        len in 0usize..64,
        fill in any::<u8>(),
    ) {
        // A well-formed common header followed by arbitrary body bytes.
        let mut b = fixture().data.clone();
        b.payload = vec![fill; len * 16];
        let mut bytes = Packet::Data(b).encode();
        bytes[0] = ty;
        if let Ok(p) = Packet::decode(&bytes) {
            prop_assert_eq!(p.encode(), bytes);
        }
    }

    #[test]
    fn data_round_trip(payload in proptest::collection::vec(any::<u8>(), 1..64)) {
        let mut p = fixture().data.clone();
        let padded: Vec<u8> = payload.iter().copied().chain(std::iter::repeat(0)).take(payload.len().div_ceil(16) * 16).collect();
        p.chdr = hornet_core::CommonHeader::data(PacketType::DataFwd, padded.len());
        p.payload = padded;
        let pkt = Packet::Data(p);
        prop_assert_eq!(Packet::decode(&pkt.encode()).unwrap(), pkt);
    }

    #[test]
    fn corrupted_packets_never_panic_a_node(pos in 0usize..SETUP_PACKET_LEN, bit in 0u8..8, setup in any::<bool>()) {
        let fx = fixture();
        let mut bytes = if setup { Packet::Setup(fx.setup.clone()) } else { Packet::Data(fx.data.clone()) }.encode();
        let pos = pos % bytes.len();
        bytes[pos] ^= 1 << bit;
        match Packet::decode(&bytes) {
            Ok(Packet::Setup(p)) => { let _ = node_process_setup(&fx.node, &p, fx.now); }
            Ok(Packet::Data(p)) => {
                let r = node_process_data(&fx.node, &p, fx.now);
                // AHDR corruption always fails the per-hop MAC.
                if (CHDR_LEN + IV_LEN..DATA_HEADER_LEN).contains(&pos) {
                    prop_assert!(r.is_err());
                }
            }
            Err(_) => {}
        }
    }
}

#[test]
fn fixture_packets_have_fixed_sizes() {
    let fx = fixture();
    assert_eq!(
        Packet::Setup(fx.setup.clone()).encode().len(),
        SETUP_PACKET_LEN
    );
    assert_eq!(
        Packet::Data(fx.data.clone()).encode().len(),
        DATA_HEADER_LEN + fx.data.payload.len()
    );
}
