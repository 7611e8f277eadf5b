//! Packet capture ingestion.
//!
//! A [`Capture`] wraps a classic PCAP or pcapng file and yields one
//! [`PacketRecord`] per IP packet, in file order. Framing is handled by
//! `pcap-parser`; link, network and transport headers are decoded here so the
//! payload-length rule stays under our control.

mod decode;

use std::fs::File;
use std::io::{self, BufReader};
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use pcap_parser::pcapng::Block;
use pcap_parser::traits::PcapReaderIterator;
use pcap_parser::{create_reader, Linktype, PcapBlockOwned, PcapError};
use thiserror::Error;

pub use decode::{decode_packet, Decoded, LinkLayer};

const READ_BUFFER: usize = 1 << 20;

/// One observed packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    /// Seconds since the epoch.
    pub timestamp: f64,
    /// Transport payload bytes, or IP total length in [`LengthMode::IpTotal`].
    pub payload_len: u32,
    pub src_addr: IpAddr,
    pub dst_addr: IpAddr,
    pub protocol: u8,
    /// Zero unless `protocol` is TCP or UDP.
    pub src_port: u16,
    pub dst_port: u16,
}

/// Which length goes into [`PacketRecord::payload_len`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LengthMode {
    /// IP total length minus IP and transport headers.
    #[default]
    TransportPayload,
    /// IP total length as carried in the header.
    IpTotal,
}

/// Per-capture packet accounting.
///
/// `emitted + non_ip + malformed == total` holds at every point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaptureStats {
    pub total: u64,
    pub emitted: u64,
    pub non_ip: u64,
    pub malformed: u64,
}

impl std::ops::AddAssign for CaptureStats {
    fn add_assign(&mut self, rhs: Self) {
        self.total += rhs.total;
        self.emitted += rhs.emitted;
        self.non_ip += rhs.non_ip;
        self.malformed += rhs.malformed;
    }
}

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("capture file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}: not a PCAP or pcapng file")]
    UnrecognizedFormat(PathBuf),
    #[error("{path}: unsupported link layer type {linktype}")]
    UnsupportedLinkType { path: PathBuf, linktype: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureFormat {
    Pcap,
    PcapNg,
}

#[derive(Debug, Clone, Copy)]
struct Interface {
    link: LinkLayer,
    /// Timestamp units per second.
    resolution: u64,
    offset: i64,
}

/// Decoder state kept apart from the reader so both can be borrowed at once.
struct State {
    path: PathBuf,
    format: CaptureFormat,
    length_mode: LengthMode,
    legacy_link: Option<LinkLayer>,
    legacy_unit: f64,
    interfaces: Vec<Interface>,
    stats: CaptureStats,
}

enum Step {
    Skip,
    Stop,
    Packet(PacketRecord),
}

/// An open capture file positioned before its first packet.
pub struct Capture {
    reader: Box<dyn PcapReaderIterator + Send>,
    state: State,
    done: bool,
    incomplete_streak: u32,
}

impl std::fmt::Debug for Capture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Capture")
            .field("path", &self.state.path)
            .field("format", &self.state.format)
            .field("stats", &self.state.stats)
            .finish()
    }
}

/// Opens `path` as a PCAP or pcapng capture.
pub fn open_capture(path: impl AsRef<Path>, length_mode: LengthMode) -> Result<Capture, CaptureError> {
    Capture::open(path, length_mode)
}

impl Capture {
    pub fn open(path: impl AsRef<Path>, length_mode: LengthMode) -> Result<Self, CaptureError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|source| {
            if source.kind() == io::ErrorKind::NotFound {
                CaptureError::NotFound(path.clone())
            } else {
                CaptureError::Io {
                    path: path.clone(),
                    source,
                }
            }
        })?;
        let reader = create_reader(READ_BUFFER, BufReader::new(file)).map_err(|e| match e {
            PcapError::ReadError => CaptureError::Io {
                path: path.clone(),
                source: io::Error::other("read failed"),
            },
            _ => CaptureError::UnrecognizedFormat(path.clone()),
        })?;
        let mut capture = Capture {
            reader,
            state: State {
                path,
                format: CaptureFormat::Pcap,
                length_mode,
                legacy_link: None,
                legacy_unit: 1e-6,
                interfaces: Vec::new(),
                stats: CaptureStats::default(),
            },
            done: false,
            incomplete_streak: 0,
        };
        capture.read_preamble()?;
        Ok(capture)
    }

    pub fn format(&self) -> CaptureFormat {
        self.state.format
    }

    pub fn path(&self) -> &Path {
        &self.state.path
    }

    /// Link layer of the file (classic PCAP) or of the first interface (pcapng).
    pub fn link_layer(&self) -> Option<LinkLayer> {
        self.state
            .legacy_link
            .or_else(|| self.state.interfaces.first().map(|i| i.link))
    }

    pub fn stats(&self) -> CaptureStats {
        self.state.stats
    }

    /// Consumes header blocks up to (not including) the first packet block.
    fn read_preamble(&mut self) -> Result<(), CaptureError> {
        loop {
            match self.reader.next() {
                Ok((offset, block)) => {
                    let is_packet = matches!(
                        block,
                        PcapBlockOwned::Legacy(_)
                            | PcapBlockOwned::NG(Block::EnhancedPacket(_))
                            | PcapBlockOwned::NG(Block::SimplePacket(_))
                    );
                    if is_packet {
                        return Ok(());
                    }
                    let legacy_header = matches!(block, PcapBlockOwned::LegacyHeader(_));
                    let step = self.state.handle(block);
                    self.reader.consume(offset);
                    step?;
                    if legacy_header {
                        return Ok(());
                    }
                }
                Err(PcapError::Eof) => {
                    self.done = true;
                    return Ok(());
                }
                Err(PcapError::Incomplete(_)) => {
                    if self.refill_or_stop() {
                        return Ok(());
                    }
                }
                Err(PcapError::ReadError) => {
                    return Err(self.state.read_error());
                }
                Err(_) => {
                    // Garbage right after a valid header: nothing decodable follows.
                    self.done = true;
                    return Ok(());
                }
            }
        }
    }

    /// Returns true when the input is exhausted mid-block.
    fn refill_or_stop(&mut self) -> bool {
        self.incomplete_streak += 1;
        if self.incomplete_streak > 2 || self.reader.refill().is_err() {
            self.state.stats.total += 1;
            self.state.stats.malformed += 1;
            self.done = true;
            return true;
        }
        false
    }

    /// Next IP packet, or `None` at end of stream.
    ///
    /// Non-IP frames and truncated or undecodable packets are counted in
    /// [`CaptureStats`] and skipped.
    pub fn next_packet(&mut self) -> Result<Option<PacketRecord>, CaptureError> {
        while !self.done {
            let step = match self.reader.next() {
                Ok((offset, block)) => {
                    let step = self.state.handle(block);
                    self.reader.consume(offset);
                    self.incomplete_streak = 0;
                    step?
                }
                Err(PcapError::Eof) => Step::Stop,
                Err(PcapError::Incomplete(_)) => {
                    self.refill_or_stop();
                    Step::Skip
                }
                Err(PcapError::ReadError) => return Err(self.state.read_error()),
                Err(_) => {
                    // Truncated tail or corrupt record header; no way to resync.
                    self.state.stats.total += 1;
                    self.state.stats.malformed += 1;
                    Step::Stop
                }
            };
            match step {
                Step::Skip => {}
                Step::Stop => self.done = true,
                Step::Packet(p) => return Ok(Some(p)),
            }
        }
        Ok(None)
    }
}

impl Iterator for Capture {
    type Item = Result<PacketRecord, CaptureError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

impl State {
    fn read_error(&self) -> CaptureError {
        CaptureError::Io {
            path: self.path.clone(),
            source: io::Error::other("read failed"),
        }
    }

    fn unsupported(&self, linktype: Linktype) -> CaptureError {
        CaptureError::UnsupportedLinkType {
            path: self.path.clone(),
            linktype: linktype.0,
        }
    }

    fn handle(&mut self, block: PcapBlockOwned<'_>) -> Result<Step, CaptureError> {
        match block {
            PcapBlockOwned::LegacyHeader(header) => {
                self.format = CaptureFormat::Pcap;
                let link = LinkLayer::from_linktype(header.network)
                    .ok_or_else(|| self.unsupported(header.network))?;
                self.legacy_link = Some(link);
                self.legacy_unit = if header.is_nanosecond_precision() {
                    1e-9
                } else {
                    1e-6
                };
                Ok(Step::Skip)
            }
            PcapBlockOwned::Legacy(frame) => {
                let Some(link) = self.legacy_link else {
                    return Ok(self.malformed());
                };
                let ts = frame.ts_sec as f64 + frame.ts_usec as f64 * self.legacy_unit;
                Ok(self.decode(link, ts, frame.data))
            }
            PcapBlockOwned::NG(Block::SectionHeader(_)) => {
                self.format = CaptureFormat::PcapNg;
                self.interfaces.clear();
                Ok(Step::Skip)
            }
            PcapBlockOwned::NG(Block::InterfaceDescription(idb)) => {
                let link =
                    LinkLayer::from_linktype(idb.linktype).ok_or_else(|| self.unsupported(idb.linktype))?;
                self.interfaces.push(Interface {
                    link,
                    resolution: idb.ts_resolution().unwrap_or(1_000_000),
                    offset: idb.ts_offset(),
                });
                Ok(Step::Skip)
            }
            PcapBlockOwned::NG(Block::EnhancedPacket(epb)) => {
                let Some(iface) = self.interfaces.get(epb.if_id as usize).copied() else {
                    return Ok(self.malformed());
                };
                let raw = (u64::from(epb.ts_high) << 32) | u64::from(epb.ts_low);
                let secs = (raw / iface.resolution) as f64 + iface.offset as f64;
                let frac = (raw % iface.resolution) as f64 / iface.resolution as f64;
                let caplen = (epb.caplen as usize).min(epb.data.len());
                Ok(self.decode(iface.link, (secs + frac).max(0.0), &epb.data[..caplen]))
            }
            PcapBlockOwned::NG(Block::SimplePacket(spb)) => {
                // Simple packet blocks carry no timestamp.
                let Some(iface) = self.interfaces.first().copied() else {
                    return Ok(self.malformed());
                };
                let caplen = (spb.origlen as usize).min(spb.data.len());
                Ok(self.decode(iface.link, 0.0, &spb.data[..caplen]))
            }
            PcapBlockOwned::NG(_) => Ok(Step::Skip),
        }
    }

    fn malformed(&mut self) -> Step {
        self.stats.total += 1;
        self.stats.malformed += 1;
        Step::Skip
    }

    fn decode(&mut self, link: LinkLayer, timestamp: f64, data: &[u8]) -> Step {
        self.stats.total += 1;
        match decode_packet(link, data, self.length_mode) {
            Decoded::Ip(fields) => {
                self.stats.emitted += 1;
                Step::Packet(fields.into_record(timestamp))
            }
            Decoded::NonIp => {
                self.stats.non_ip += 1;
                Step::Skip
            }
            Decoded::Malformed => {
                self.stats.malformed += 1;
                Step::Skip
            }
        }
    }
}
