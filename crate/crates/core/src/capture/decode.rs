//! Link, network and transport header decoding.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use pcap_parser::Linktype;

use super::{LengthMode, PacketRecord};

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;
const ETHERTYPE_QINQ_OLD: u16 = 0x9100;

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// Link layers the decoder understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkLayer {
    Ethernet,
    /// Bare IPv4 or IPv6, version taken from the first nibble.
    RawIp,
    Ipv4,
    Ipv6,
    /// Linux cooked capture v1.
    LinuxSll,
    /// Linux cooked capture v2.
    LinuxSll2,
}

impl LinkLayer {
    pub fn from_linktype(linktype: Linktype) -> Option<Self> {
        match linktype.0 {
            1 => Some(Self::Ethernet),
            12 | 14 | 101 => Some(Self::RawIp),
            113 => Some(Self::LinuxSll),
            228 => Some(Self::Ipv4),
            229 => Some(Self::Ipv6),
            276 => Some(Self::LinuxSll2),
            _ => None,
        }
    }
}

/// Outcome of decoding one captured frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoded {
    Ip(IpFields),
    NonIp,
    Malformed,
}

/// Everything in a [`PacketRecord`] except the timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpFields {
    pub payload_len: u32,
    pub src_addr: IpAddr,
    pub dst_addr: IpAddr,
    pub protocol: u8,
    pub src_port: u16,
    pub dst_port: u16,
}

impl IpFields {
    pub fn into_record(self, timestamp: f64) -> PacketRecord {
        PacketRecord {
            timestamp,
            payload_len: self.payload_len,
            src_addr: self.src_addr,
            dst_addr: self.dst_addr,
            protocol: self.protocol,
            src_port: self.src_port,
            dst_port: self.dst_port,
        }
    }
}

fn be16(data: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([data[at], data[at + 1]])
}

/// Decodes one frame captured on `link`.
pub fn decode_packet(link: LinkLayer, data: &[u8], mode: LengthMode) -> Decoded {
    match link {
        LinkLayer::Ethernet => {
            if data.len() < 14 {
                return Decoded::Malformed;
            }
            let mut ethertype = be16(data, 12);
            let mut offset = 14;
            // At most two stacked tags.
            for _ in 0..2 {
                if !matches!(ethertype, ETHERTYPE_VLAN | ETHERTYPE_QINQ | ETHERTYPE_QINQ_OLD) {
                    break;
                }
                if data.len() < offset + 4 {
                    return Decoded::Malformed;
                }
                ethertype = be16(data, offset + 2);
                offset += 4;
            }
            by_ethertype(ethertype, &data[offset..], mode)
        }
        LinkLayer::LinuxSll => {
            if data.len() < 16 {
                return Decoded::Malformed;
            }
            by_ethertype(be16(data, 14), &data[16..], mode)
        }
        LinkLayer::LinuxSll2 => {
            if data.len() < 20 {
                return Decoded::Malformed;
            }
            by_ethertype(be16(data, 0), &data[20..], mode)
        }
        LinkLayer::RawIp => match data.first().map(|b| b >> 4) {
            None => Decoded::Malformed,
            Some(4) => decode_ipv4(data, mode),
            Some(6) => decode_ipv6(data, mode),
            Some(_) => Decoded::NonIp,
        },
        LinkLayer::Ipv4 => decode_ipv4(data, mode),
        LinkLayer::Ipv6 => decode_ipv6(data, mode),
    }
}

fn by_ethertype(ethertype: u16, data: &[u8], mode: LengthMode) -> Decoded {
    match ethertype {
        ETHERTYPE_IPV4 => decode_ipv4(data, mode),
        ETHERTYPE_IPV6 => decode_ipv6(data, mode),
        _ => Decoded::NonIp,
    }
}

/// Transport header length and ports, or `None` if the header is not captured.
fn transport(protocol: u8, data: &[u8]) -> Option<(usize, u16, u16)> {
    match protocol {
        PROTO_TCP => {
            if data.len() < 20 {
                return None;
            }
            let header_len = usize::from(data[12] >> 4) * 4;
            if header_len < 20 {
                return None;
            }
            Some((header_len, be16(data, 0), be16(data, 2)))
        }
        PROTO_UDP => {
            if data.len() < 8 {
                return None;
            }
            Some((8, be16(data, 0), be16(data, 2)))
        }
        _ => Some((0, 0, 0)),
    }
}

struct Network<'a> {
    src: IpAddr,
    dst: IpAddr,
    protocol: u8,
    total_len: usize,
    header_len: usize,
    later_fragment: bool,
    rest: &'a [u8],
}

fn finish(net: Network<'_>, mode: LengthMode) -> Decoded {
    let ip_payload = net.total_len.saturating_sub(net.header_len);
    let (payload, src_port, dst_port) = if net.later_fragment {
        (ip_payload, 0, 0)
    } else {
        match transport(net.protocol, net.rest) {
            Some((hdr, sp, dp)) => (ip_payload.saturating_sub(hdr), sp, dp),
            None => return Decoded::Malformed,
        }
    };
    let payload_len = match mode {
        LengthMode::TransportPayload => payload,
        LengthMode::IpTotal => net.total_len,
    };
    Decoded::Ip(IpFields {
        payload_len: u32::try_from(payload_len).unwrap_or(u32::MAX),
        src_addr: net.src,
        dst_addr: net.dst,
        protocol: net.protocol,
        src_port,
        dst_port,
    })
}

fn decode_ipv4(data: &[u8], mode: LengthMode) -> Decoded {
    if data.len() < 20 || data[0] >> 4 != 4 {
        return Decoded::Malformed;
    }
    let header_len = usize::from(data[0] & 0x0f) * 4;
    if header_len < 20 || data.len() < header_len {
        return Decoded::Malformed;
    }
    let mut total_len = usize::from(be16(data, 2));
    if total_len == 0 {
        // Segmentation offload leaves the field zeroed; fall back to what was captured.
        total_len = data.len();
    }
    if total_len < header_len {
        return Decoded::Malformed;
    }
    let fragment_offset = be16(data, 6) & 0x1fff;
    let src = Ipv4Addr::new(data[12], data[13], data[14], data[15]);
    let dst = Ipv4Addr::new(data[16], data[17], data[18], data[19]);
    finish(
        Network {
            src: IpAddr::V4(src),
            dst: IpAddr::V4(dst),
            protocol: data[9],
            total_len,
            header_len,
            later_fragment: fragment_offset != 0,
            rest: &data[header_len..],
        },
        mode,
    )
}

fn decode_ipv6(data: &[u8], mode: LengthMode) -> Decoded {
    if data.len() < 40 || data[0] >> 4 != 6 {
        return Decoded::Malformed;
    }
    let payload_field = usize::from(be16(data, 4));
    let total_len = if payload_field == 0 {
        data.len()
    } else {
        40 + payload_field
    };
    let mut addr = [0u8; 16];
    addr.copy_from_slice(&data[8..24]);
    let src = Ipv6Addr::from(addr);
    addr.copy_from_slice(&data[24..40]);
    let dst = Ipv6Addr::from(addr);

    let mut next = data[6];
    let mut offset = 40;
    let mut later_fragment = false;
    loop {
        let ext_len = match next {
            0 | 43 | 60 => {
                if data.len() < offset + 2 {
                    return Decoded::Malformed;
                }
                (usize::from(data[offset + 1]) + 1) * 8
            }
            51 => {
                if data.len() < offset + 2 {
                    return Decoded::Malformed;
                }
                (usize::from(data[offset + 1]) + 2) * 4
            }
            44 => {
                if data.len() < offset + 8 {
                    return Decoded::Malformed;
                }
                later_fragment = be16(data, offset + 2) >> 3 != 0;
                8
            }
            _ => break,
        };
        if data.len() < offset + ext_len {
            return Decoded::Malformed;
        }
        next = data[offset];
        offset += ext_len;
    }
    finish(
        Network {
            src: IpAddr::V6(src),
            dst: IpAddr::V6(dst),
            protocol: next,
            total_len,
            header_len: offset,
            later_fragment,
            rest: &data[offset..],
        },
        mode,
    )
}
