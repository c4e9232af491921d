//! Packet codecs.
//!
//! ```text
//! chdr   = type(1) | hops(1) | specific(6)
//! setup  = chdr | sphinx header(384) | sphinx payload(416) | FS payload(336)
//! data   = chdr | iv(16) | ahdr(336, or 672 when nested) | onion payload
//! ```
//!
//! Setup packets carry `EXP(4) | 00 00` in the specific field; data packets
//! carry `payload_len(2) | 00 00 00 00`. Integers are big-endian.

use crate::ahdr::{Ahdr, NestedAhdr};
use crate::fs::{ExpiryTime, FsPayload, FS_PAYLOAD_LEN};
use crate::onion::{Iv, IV_LEN};
use crate::sphinx::{SphinxHeader, SphinxPayload, SPHINX_HEADER_LEN, SPHINX_PAYLOAD_LEN};
use crate::{Error, Result, AHDR_LEN, NESTED_AHDR_LEN, R};

pub const CHDR_LEN: usize = 8;
pub const SETUP_PACKET_LEN: usize =
    CHDR_LEN + SPHINX_HEADER_LEN + SPHINX_PAYLOAD_LEN + FS_PAYLOAD_LEN;
/// Bytes preceding the onion payload of a standard data packet.
pub const DATA_HEADER_LEN: usize = CHDR_LEN + IV_LEN + AHDR_LEN;
pub const NESTED_DATA_HEADER_LEN: usize = CHDR_LEN + IV_LEN + NESTED_AHDR_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketType {
    SetupFwd,
    SetupBwd,
    DataFwd,
    DataBwd,
    DataFwdNested,
}

impl PacketType {
    pub fn to_byte(self) -> u8 {
        match self {
            PacketType::SetupFwd => 0x01,
            PacketType::SetupBwd => 0x02,
            PacketType::DataFwd => 0x03,
            PacketType::DataBwd => 0x04,
            PacketType::DataFwdNested => 0x83,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0x01 => PacketType::SetupFwd,
            0x02 => PacketType::SetupBwd,
            0x03 => PacketType::DataFwd,
            0x04 => PacketType::DataBwd,
            0x83 => PacketType::DataFwdNested,
            other => return Err(Error::UnknownType(other)),
        })
    }

    pub fn is_setup(self) -> bool {
        matches!(self, PacketType::SetupFwd | PacketType::SetupBwd)
    }

    pub fn name(self) -> &'static str {
        match self {
            PacketType::SetupFwd => "setup-fwd",
            PacketType::SetupBwd => "setup-bwd",
            PacketType::DataFwd => "data-fwd",
            PacketType::DataBwd => "data-bwd",
            PacketType::DataFwdNested => "data-fwd-nested",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommonHeader {
    pub packet_type: PacketType,
    pub hops: u8,
    pub specific: [u8; 6],
}

impl CommonHeader {
    pub fn setup(packet_type: PacketType, exp: ExpiryTime) -> Self {
        let mut specific = [0u8; 6];
        specific[..4].copy_from_slice(&exp.to_bytes());
        CommonHeader {
            packet_type,
            hops: R as u8,
            specific,
        }
    }

    pub fn data(packet_type: PacketType, payload_len: usize) -> Self {
        let mut specific = [0u8; 6];
        specific[..2].copy_from_slice(&(payload_len as u16).to_be_bytes());
        CommonHeader {
            packet_type,
            hops: R as u8,
            specific,
        }
    }

    pub fn exp(&self) -> ExpiryTime {
        ExpiryTime::from_bytes(self.specific[..4].try_into().unwrap())
    }

    pub fn payload_len(&self) -> usize {
        u16::from_be_bytes([self.specific[0], self.specific[1]]) as usize
    }

    pub fn to_bytes(&self) -> [u8; CHDR_LEN] {
        let mut out = [0u8; CHDR_LEN];
        out[0] = self.packet_type.to_byte();
        out[1] = self.hops;
        out[2..].copy_from_slice(&self.specific);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < CHDR_LEN {
            return Err(Error::TruncatedPacket);
        }
        let packet_type = PacketType::from_byte(b[0])?;
        if b[1] as usize != R {
            return Err(Error::LengthMismatch);
        }
        Ok(CommonHeader {
            packet_type,
            hops: b[1],
            specific: b[2..CHDR_LEN].try_into().unwrap(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetupPacket {
    pub chdr: CommonHeader,
    pub shdr: SphinxHeader,
    pub sp: SphinxPayload,
    pub fs_payload: FsPayload,
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataHeader {
    Standard(Ahdr),
    Nested(NestedAhdr),
}

impl DataHeader {
    pub fn as_bytes(&self) -> &[u8] {
        match self {
            DataHeader::Standard(a) => &a.0,
            DataHeader::Nested(a) => &a.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPacket {
    pub chdr: CommonHeader,
    pub iv: Iv,
    pub header: DataHeader,
    pub payload: Vec<u8>,
}

impl DataPacket {
    pub fn new(packet_type: PacketType, iv: Iv, header: DataHeader, payload: Vec<u8>) -> Self {
        DataPacket {
            chdr: CommonHeader::data(packet_type, payload.len()),
            iv,
            header,
            payload,
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Packet {
    Setup(SetupPacket),
    Data(DataPacket),
}

impl SetupPacket {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SETUP_PACKET_LEN);
        out.extend_from_slice(&self.chdr.to_bytes());
        out.extend_from_slice(&self.shdr.to_bytes());
        out.extend_from_slice(&self.sp.0);
        out.extend_from_slice(&self.fs_payload.0);
        out
    }
}

impl DataPacket {
    pub fn encode(&self) -> Vec<u8> {
        let hdr = self.header.as_bytes();
        let mut out = Vec::with_capacity(CHDR_LEN + IV_LEN + hdr.len() + self.payload.len());
        out.extend_from_slice(&self.chdr.to_bytes());
        out.extend_from_slice(&self.iv.0);
        out.extend_from_slice(hdr);
        out.extend_from_slice(&self.payload);
        out
    }
}

impl Packet {
    pub fn packet_type(&self) -> PacketType {
        match self {
            Packet::Setup(p) => p.chdr.packet_type,
            Packet::Data(p) => p.chdr.packet_type,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Packet::Setup(p) => p.encode(),
            Packet::Data(p) => p.encode(),
        }
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        let chdr = CommonHeader::from_bytes(b)?;
        if chdr.packet_type.is_setup() {
            if chdr.specific[4..] != [0, 0] {
                return Err(Error::LengthMismatch);
            }
            let body = exact(b, SETUP_PACKET_LEN)?;
            let mut at = CHDR_LEN;
            let shdr = SphinxHeader::from_bytes(&body[at..at + SPHINX_HEADER_LEN])?;
            at += SPHINX_HEADER_LEN;
            let sp = SphinxPayload::from_slice(&body[at..at + SPHINX_PAYLOAD_LEN])?;
            at += SPHINX_PAYLOAD_LEN;
            let fs_payload = FsPayload::from_slice(&body[at..])?;
            return Ok(Packet::Setup(SetupPacket {
                chdr,
                shdr,
                sp,
                fs_payload,
            }));
        }

        if chdr.specific[2..] != [0; 4] {
            return Err(Error::LengthMismatch);
        }
        let payload_len = chdr.payload_len();
        if payload_len == 0 || payload_len % 16 != 0 {
            return Err(Error::LengthMismatch);
        }
        let hdr_len = match chdr.packet_type {
            PacketType::DataFwdNested => NESTED_AHDR_LEN,
            _ => AHDR_LEN,
        };
        let body = exact(b, CHDR_LEN + IV_LEN + hdr_len + payload_len)?;
        let iv = Iv(body[CHDR_LEN..CHDR_LEN + IV_LEN].try_into().unwrap());
        let hdr_bytes = &body[CHDR_LEN + IV_LEN..CHDR_LEN + IV_LEN + hdr_len];
        let header = match chdr.packet_type {
            PacketType::DataFwdNested => DataHeader::Nested(NestedAhdr::from_slice(hdr_bytes)?),
            _ => DataHeader::Standard(Ahdr::from_slice(hdr_bytes)?),
        };
        Ok(Packet::Data(DataPacket {
            chdr,
            iv,
            header,
            payload: body[CHDR_LEN + IV_LEN + hdr_len..].to_vec(),
        }))
    }
}

fn exact(b: &[u8], len: usize) -> Result<&[u8]> {
    match b.len().cmp(&len) {
        std::cmp::Ordering::Less => Err(Error::TruncatedPacket),
        std::cmp::Ordering::Greater => Err(Error::LengthMismatch),
        std::cmp::Ordering::Equal => Ok(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_PAYLOAD_LEN;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_data(rng: &mut ChaCha20Rng, nested: bool) -> DataPacket {
        let mut iv = [0u8; 16];
        rng.fill_bytes(&mut iv);
        let mut payload = vec![0u8; DEFAULT_PAYLOAD_LEN];
        rng.fill_bytes(&mut payload);
        let (t, header) = if nested {
            let mut h = [0u8; NESTED_AHDR_LEN];
            rng.fill_bytes(&mut h);
            (PacketType::DataFwdNested, DataHeader::Nested(NestedAhdr(h)))
        } else {
            let mut h = [0u8; AHDR_LEN];
            rng.fill_bytes(&mut h);
            let t = if rng.gen() {
                PacketType::DataFwd
            } else {
                PacketType::DataBwd
            };
            (t, DataHeader::Standard(Ahdr(h)))
        };
        DataPacket::new(t, Iv(iv), header, payload)
    }

    fn random_setup(rng: &mut ChaCha20Rng) -> SetupPacket {
        let mut b = vec![0u8; SETUP_PACKET_LEN - CHDR_LEN];
        rng.fill_bytes(&mut b);
        SetupPacket {
            chdr: CommonHeader::setup(PacketType::SetupFwd, ExpiryTime(rng.gen())),
            shdr: SphinxHeader::from_bytes(&b[..SPHINX_HEADER_LEN]).unwrap(),
            sp: SphinxPayload::from_slice(
                &b[SPHINX_HEADER_LEN..SPHINX_HEADER_LEN + SPHINX_PAYLOAD_LEN],
            )
            .unwrap(),
            fs_payload: FsPayload::from_slice(&b[SPHINX_HEADER_LEN + SPHINX_PAYLOAD_LEN..])
                .unwrap(),
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(DATA_HEADER_LEN, 360);
        assert_eq!(DATA_HEADER_LEN - IV_LEN, 8 + 3 * R * 16);
        assert_eq!(NESTED_DATA_HEADER_LEN, 696);
        assert_eq!(SETUP_PACKET_LEN, 1144);
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for i in 0..50 {
            let d = Packet::Data(random_data(&mut rng, i % 3 == 0));
            assert_eq!(Packet::decode(&d.encode()).unwrap(), d);
            let s = Packet::Setup(random_setup(&mut rng));
            assert_eq!(s.encode().len(), SETUP_PACKET_LEN);
            assert_eq!(Packet::decode(&s.encode()).unwrap(), s);
        }
    }

    #[test]
    fn data_length_is_fixed() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert_eq!(
            random_data(&mut rng, false).encode().len(),
            360 + DEFAULT_PAYLOAD_LEN
        );
        assert_eq!(
            random_data(&mut rng, true).encode().len(),
            696 + DEFAULT_PAYLOAD_LEN
        );
    }

    #[test]
    fn every_prefix_is_truncated() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let packets = [
            Packet::Data(random_data(&mut rng, false)).encode(),
            Packet::Data(random_data(&mut rng, true)).encode(),
            Packet::Setup(random_setup(&mut rng)).encode(),
        ];
        for bytes in &packets {
            for n in 0..bytes.len() {
                assert_eq!(
                    Packet::decode(&bytes[..n]),
                    Err(Error::TruncatedPacket),
                    "prefix {n}"
                );
            }
        }
    }

    #[test]
    fn malformed_headers() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut b = Packet::Data(random_data(&mut rng, false)).encode();
        b[0] = 0x05;
        assert_eq!(Packet::decode(&b), Err(Error::UnknownType(0x05)));
        b[0] = 0x03;
        b[1] = 8;
        assert_eq!(Packet::decode(&b), Err(Error::LengthMismatch));
        b[1] = 7;
        b.push(0);
        assert_eq!(Packet::decode(&b), Err(Error::LengthMismatch));
    }

    #[test]
    fn random_bytes_never_panic() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..5000 {
            let n = rng.gen_range(0..1400);
            let mut b = vec![0u8; n];
            rng.fill_bytes(&mut b);
            if rng.gen() {
                if let Some(x) = b.first_mut() {
                    *x = [1, 2, 3, 4, 0x83][rng.gen_range(0..5)];
                }
                if b.len() > 1 {
                    b[1] = 7;
                }
            }
            let _ = Packet::decode(&b);
        }
    }
}
