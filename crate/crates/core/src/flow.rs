//! Bidirectional flow aggregation with active and inactive timeouts.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::net::IpAddr;

use crate::capture::PacketRecord;

pub const DEFAULT_ACTIVE_TIMEOUT: f64 = 300.0;
pub const DEFAULT_INACTIVE_TIMEOUT: f64 = 65.0;
pub const DEFAULT_CAPACITY: usize = 1 << 22;

/// Packets arriving this much earlier than the newest timestamp count as reordered.
pub const REORDER_TOLERANCE: f64 = 1e-3;

/// Capture-time interval between scans for idle flows of other keys.
const SWEEP_INTERVAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Reverse,
}

/// 5-tuple identifying a bidirectional flow.
///
/// In a [`FlowRecord`] the `a` endpoint is the source of the first packet.
/// [`flow_key`] returns the direction-insensitive lookup form instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub addr_a: IpAddr,
    pub port_a: u16,
    pub addr_b: IpAddr,
    pub port_b: u16,
    pub protocol: u8,
}

impl FlowKey {
    /// Key oriented from the packet's source to its destination.
    pub fn oriented(pkt: &PacketRecord) -> Self {
        FlowKey {
            addr_a: pkt.src_addr,
            port_a: pkt.src_port,
            addr_b: pkt.dst_addr,
            port_b: pkt.dst_port,
            protocol: pkt.protocol,
        }
    }

    pub fn reversed(&self) -> Self {
        FlowKey {
            addr_a: self.addr_b,
            port_a: self.port_b,
            addr_b: self.addr_a,
            port_b: self.port_a,
            protocol: self.protocol,
        }
    }

    /// Orientation-free form: the smaller endpoint comes first.
    pub fn canonical(&self) -> Self {
        if (self.addr_a, self.port_a) <= (self.addr_b, self.port_b) {
            *self
        } else {
            self.reversed()
        }
    }
}

impl std::fmt::Display for FlowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let endpoint = |addr: &IpAddr, port: u16| match addr {
            IpAddr::V4(a) => format!("{a}:{port}"),
            IpAddr::V6(a) => format!("[{a}]:{port}"),
        };
        write!(
            f,
            "{} <-> {} proto {}",
            endpoint(&self.addr_a, self.port_a),
            endpoint(&self.addr_b, self.port_b),
            self.protocol
        )
    }
}

/// Direction-insensitive table key for `pkt`.
pub fn flow_key(pkt: &PacketRecord) -> FlowKey {
    FlowKey::oriented(pkt).canonical()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPacket {
    pub timestamp: f64,
    pub payload_len: u32,
    pub direction: Direction,
}

/// A finished (or resident) flow: its packets in time order plus counters.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub packets: Vec<FlowPacket>,
    pub first_ts: f64,
    pub last_ts: f64,
    pub pkt_count_fwd: u64,
    pub pkt_count_rev: u64,
    pub byte_count_fwd: u64,
    pub byte_count_rev: u64,
    /// Creation order within the table; breaks `first_ts` ties.
    pub seq: u64,
}

impl FlowRecord {
    fn start(pkt: &PacketRecord, timestamp: f64, seq: u64) -> Self {
        let mut rec = FlowRecord {
            key: FlowKey::oriented(pkt),
            packets: Vec::new(),
            first_ts: timestamp,
            last_ts: timestamp,
            pkt_count_fwd: 0,
            pkt_count_rev: 0,
            byte_count_fwd: 0,
            byte_count_rev: 0,
            seq,
        };
        rec.push(pkt, timestamp);
        rec
    }

    fn push(&mut self, pkt: &PacketRecord, timestamp: f64) {
        let direction = if (pkt.src_addr, pkt.src_port) == (self.key.addr_a, self.key.port_a) {
            Direction::Forward
        } else {
            Direction::Reverse
        };
        let bytes = u64::from(pkt.payload_len);
        match direction {
            Direction::Forward => {
                self.pkt_count_fwd += 1;
                self.byte_count_fwd += bytes;
            }
            Direction::Reverse => {
                self.pkt_count_rev += 1;
                self.byte_count_rev += bytes;
            }
        }
        self.last_ts = timestamp;
        self.packets.push(FlowPacket {
            timestamp,
            payload_len: pkt.payload_len,
            direction,
        });
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.last_ts - self.first_ts
    }

    /// Emission order: `first_ts`, then creation order.
    pub fn emission_order(a: &FlowRecord, b: &FlowRecord) -> Ordering {
        a.first_ts.total_cmp(&b.first_ts).then(a.seq.cmp(&b.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timeouts {
    /// Maximum record lifespan, seconds.
    pub active: f64,
    /// Maximum idle gap, seconds.
    pub inactive: f64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts {
            active: DEFAULT_ACTIVE_TIMEOUT,
            inactive: DEFAULT_INACTIVE_TIMEOUT,
        }
    }
}

impl Timeouts {
    /// A record ends before a packet at `now` if it sat idle too long or has lived too long.
    fn expired(&self, rec: &FlowRecord, now: f64) -> bool {
        now - rec.last_ts > self.inactive || now - rec.first_ts >= self.active
    }
}

/// Single-writer flow table keyed by the direction-insensitive 5-tuple.
#[derive(Debug)]
pub struct FlowTable {
    flows: HashMap<FlowKey, FlowRecord>,
    timeouts: Timeouts,
    capacity: usize,
    newest_ts: Option<f64>,
    last_sweep: f64,
    next_seq: u64,
    reordered: u64,
    evicted: u64,
}

impl Default for FlowTable {
    fn default() -> Self {
        FlowTable::new(Timeouts::default())
    }
}

impl FlowTable {
    pub fn new(timeouts: Timeouts) -> Self {
        FlowTable::with_capacity(timeouts, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(timeouts: Timeouts, capacity: usize) -> Self {
        FlowTable {
            flows: HashMap::new(),
            timeouts,
            capacity: capacity.max(1),
            newest_ts: None,
            last_sweep: f64::NEG_INFINITY,
            next_seq: 0,
            reordered: 0,
            evicted: 0,
        }
    }

    pub fn timeouts(&self) -> Timeouts {
        self.timeouts
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Packets that arrived more than [`REORDER_TOLERANCE`] out of order.
    pub fn reordered(&self) -> u64 {
        self.reordered
    }

    /// Flows pushed out early because the table was full.
    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    /// Adds `pkt` and returns every record that finished as a result.
    ///
    /// Late packets are clamped to the newest timestamp seen so far, so
    /// records stay time ordered.
    pub fn ingest(&mut self, pkt: &PacketRecord) -> Vec<FlowRecord> {
        let mut ts = pkt.timestamp;
        if let Some(newest) = self.newest_ts {
            if ts < newest {
                if newest - ts > REORDER_TOLERANCE {
                    self.reordered += 1;
                }
                ts = newest;
            }
        }
        self.newest_ts = Some(ts);

        let mut expired = Vec::new();
        if ts - self.last_sweep >= SWEEP_INTERVAL {
            self.sweep(ts, &mut expired);
            self.last_sweep = ts;
        }

        let key = flow_key(pkt);
        if !self.flows.contains_key(&key) && self.flows.len() >= self.capacity {
            self.evict_oldest(&mut expired);
        }
        let seq = self.next_seq;
        match self.flows.entry(key) {
            Entry::Occupied(mut slot) => {
                if self.timeouts.expired(slot.get(), ts) {
                    let old = std::mem::replace(slot.get_mut(), FlowRecord::start(pkt, ts, seq));
                    self.next_seq += 1;
                    expired.push(old);
                } else {
                    slot.get_mut().push(pkt, ts);
                }
            }
            Entry::Vacant(slot) => {
                slot.insert(FlowRecord::start(pkt, ts, seq));
                self.next_seq += 1;
            }
        }
        expired.sort_by(FlowRecord::emission_order);
        expired
    }

    fn sweep(&mut self, now: f64, out: &mut Vec<FlowRecord>) {
        let timeouts = self.timeouts;
        let stale: Vec<FlowKey> = self
            .flows
            .iter()
            .filter(|(_, rec)| timeouts.expired(rec, now))
            .map(|(k, _)| *k)
            .collect();
        for key in stale {
            if let Some(rec) = self.flows.remove(&key) {
                out.push(rec);
            }
        }
    }

    /// Removes the least recently active flows, a sixty-fourth of capacity at a time.
    fn evict_oldest(&mut self, out: &mut Vec<FlowRecord>) {
        let batch = (self.capacity / 64).max(1);
        let mut by_age: Vec<(f64, u64, FlowKey)> = self
            .flows
            .iter()
            .map(|(k, r)| (r.last_ts, r.seq, *k))
            .collect();
        by_age.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, _, key) in by_age.into_iter().take(batch) {
            if let Some(rec) = self.flows.remove(&key) {
                self.evicted += 1;
                out.push(rec);
            }
        }
    }

    /// Empties the table, returning resident flows ordered by `first_ts`.
    pub fn flush(&mut self) -> Vec<FlowRecord> {
        let mut all: Vec<FlowRecord> = self.flows.drain().map(|(_, r)| r).collect();
        all.sort_by(FlowRecord::emission_order);
        all
    }
}
