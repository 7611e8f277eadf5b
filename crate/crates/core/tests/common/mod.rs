//! Shared fixtures: frame builders, capture writers, seeded generators and
//! naive reference implementations used as oracles.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod oracle;

use std::fs::File;
use std::io::BufWriter;
use std::net::{IpAddr, Ipv4Addr};
use std::path::Path;
use std::time::Duration;

use pcap_file::pcap::{PcapHeader, PcapPacket, PcapWriter};
use pcap_file::pcapng::blocks::enhanced_packet::EnhancedPacketBlock;
use pcap_file::pcapng::blocks::interface_description::{
    InterfaceDescriptionBlock, InterfaceDescriptionOption,
};
use pcap_file::pcapng::PcapNgWriter;
use pcap_file::{DataLink, TsResolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsflow_core::capture::PacketRecord;
use tsflow_core::flow::{Direction, FlowPacket, FlowRecord};
use tsflow_core::sfts::Sfts;

pub const TCP: u8 = 6;
pub const UDP: u8 = 17;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn v4(last: u8) -> Ipv4Addr {
    Ipv4Addr::new(10, 0, 0, last)
}

/// One packet to put on the wire.
#[derive(Debug, Clone, Copy)]
pub struct Spec {
    pub ts: f64,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub sport: u16,
    pub dport: u16,
    pub protocol: u8,
    pub payload: u16,
}

impl Spec {
    pub fn udp(ts: f64, src: u8, sport: u16, dst: u8, dport: u16, payload: u16) -> Self {
        Spec {
            ts,
            src: v4(src),
            dst: v4(dst),
            sport,
            dport,
            protocol: UDP,
            payload,
        }
    }

    pub fn tcp(ts: f64, src: u8, sport: u16, dst: u8, dport: u16, payload: u16) -> Self {
        Spec {
            protocol: TCP,
            ..Spec::udp(ts, src, sport, dst, dport, payload)
        }
    }

    pub fn record(&self) -> PacketRecord {
        PacketRecord {
            timestamp: self.ts,
            payload_len: u32::from(self.payload),
            src_addr: IpAddr::V4(self.src),
            dst_addr: IpAddr::V4(self.dst),
            protocol: self.protocol,
            src_port: self.sport,
            dst_port: self.dport,
        }
    }
}

/// Ethernet + IPv4 + TCP/UDP frame with a zero-filled payload.
pub fn frame(s: &Spec) -> Vec<u8> {
    let l4 = if s.protocol == TCP { 20 } else { 8 };
    let total = 20 + l4 + usize::from(s.payload);
    let mut f = Vec::with_capacity(14 + total);
    f.extend([0x02, 0, 0, 0, 0, 1, 0x02, 0, 0, 0, 0, 2, 0x08, 0x00]);
    f.extend([0x45, 0, (total >> 8) as u8, total as u8, 0, 0, 0x40, 0, 64, s.protocol, 0, 0]);
    f.extend(s.src.octets());
    f.extend(s.dst.octets());
    f.extend(s.sport.to_be_bytes());
    f.extend(s.dport.to_be_bytes());
    if s.protocol == TCP {
        f.extend([0, 0, 0, 1, 0, 0, 0, 0, 0x50, 0x10, 0xff, 0xff, 0, 0, 0, 0]);
    } else {
        f.extend((8 + s.payload).to_be_bytes());
        f.extend([0, 0]);
    }
    f.resize(14 + total, 0);
    f
}

pub fn arp_frame() -> Vec<u8> {
    let mut f = vec![0xff; 6];
    f.extend([0x02, 0, 0, 0, 0, 1, 0x08, 0x06]);
    f.extend([0, 1, 8, 0, 6, 4, 0, 1]);
    f.resize(42, 0);
    f
}

fn duration_of(ts: f64) -> Duration {
    let secs = ts.floor();
    let nanos = ((ts - secs) * 1e9).round() as u32;
    Duration::new(secs as u64, 0) + Duration::from_nanos(u64::from(nanos))
}

/// Writes a classic microsecond PCAP; frames longer than `snaplen` are cut.
pub fn write_pcap_frames(path: &Path, frames: &[(f64, Vec<u8>)], snaplen: u32) {
    let header = PcapHeader {
        snaplen,
        datalink: DataLink::ETHERNET,
        ts_resolution: TsResolution::MicroSecond,
        ..PcapHeader::default()
    };
    let file = BufWriter::new(File::create(path).unwrap());
    let mut w = PcapWriter::with_header(file, header).unwrap();
    for (ts, data) in frames {
        let cut = data.len().min(snaplen as usize);
        let pkt = PcapPacket::new(duration_of(*ts), data.len() as u32, &data[..cut]);
        w.write_packet(&pkt).unwrap();
    }
}

pub fn write_pcap(path: &Path, specs: &[Spec]) {
    let frames: Vec<(f64, Vec<u8>)> = specs.iter().map(|s| (s.ts, frame(s))).collect();
    write_pcap_frames(path, &frames, 65535);
}

pub fn write_pcapng(path: &Path, specs: &[Spec]) {
    let file = BufWriter::new(File::create(path).unwrap());
    let mut w = PcapNgWriter::new(file).unwrap();
    // The writer stores nanoseconds but only says so through if_tsresol.
    let mut idb = InterfaceDescriptionBlock::new(DataLink::ETHERNET, 65535);
    idb.options.push(InterfaceDescriptionOption::IfTsResol(9));
    w.write_pcapng_block(idb).unwrap();
    for s in specs {
        let data = frame(s);
        let block = EnhancedPacketBlock {
            interface_id: 0,
            timestamp: duration_of(s.ts),
            original_len: data.len() as u32,
            data: data.into(),
            options: vec![],
        };
        w.write_pcapng_block(block).unwrap();
    }
}

/// Ascending random times in `[0, span]` starting at zero.
pub fn sorted_times(r: &mut impl Rng, n: usize, span: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| r.gen::<f64>() * span).collect();
    t.sort_by(f64::total_cmp);
    if let Some(first) = t.first_mut() {
        *first = 0.0;
    }
    t
}

pub fn random_values(r: &mut impl Rng, n: usize, max: u32) -> Vec<u32> {
    (0..n).map(|_| r.gen_range(0..=max)).collect()
}

pub fn random_series(r: &mut impl Rng, n: usize, span: f64) -> Sfts {
    let values = random_values(r, n, 1500);
    let times = sorted_times(r, n, span);
    let dirs = (0..n)
        .map(|_| if r.gen_bool(0.5) { Direction::Forward } else { Direction::Reverse })
        .collect();
    Sfts::new(values, times, dirs).unwrap()
}

/// Flow record built directly from points, bypassing the table.
pub fn flow_from_points(points: &[(f64, u32, Direction)]) -> FlowRecord {
    let spec = Spec::udp(points[0].0, 1, 1000, 2, 53, 0);
    let rec = spec.record();
    let mut flow = FlowRecord {
        key: tsflow_core::flow::FlowKey::oriented(&rec),
        packets: Vec::new(),
        first_ts: points[0].0,
        last_ts: points[points.len() - 1].0,
        pkt_count_fwd: 0,
        pkt_count_rev: 0,
        byte_count_fwd: 0,
        byte_count_rev: 0,
        seq: 0,
    };
    for &(timestamp, payload_len, direction) in points {
        match direction {
            Direction::Forward => {
                flow.pkt_count_fwd += 1;
                flow.byte_count_fwd += u64::from(payload_len);
            }
            Direction::Reverse => {
                flow.pkt_count_rev += 1;
                flow.byte_count_rev += u64::from(payload_len);
            }
        }
        flow.packets.push(FlowPacket {
            timestamp,
            payload_len,
            direction,
        });
    }
    flow
}

/// `|a - b| <= tol * max(|a|, |b|, floor)`, with NaN only equal to NaN.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Ethernet + IPv4 frame carrying `body` bytes of protocol `protocol`.
pub fn ip_frame(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, body: usize) -> Vec<u8> {
    let total = 20 + body;
    let mut f = vec![0x02, 0, 0, 0, 0, 1, 0x02, 0, 0, 0, 0, 2, 0x08, 0x00];
    f.extend([0x45, 0, (total >> 8) as u8, total as u8, 0, 0, 0x40, 0, 64, protocol, 0, 0]);
    f.extend(src.octets());
    f.extend(dst.octets());
    f.resize(14 + total, 0);
    f
}
