//! Flow time series feature extraction.
//!
//! Packets from PCAP or pcapng files are grouped into bidirectional flows.
//! Each flow's payload sizes and timestamps form an unevenly spaced series,
//! from which 69 features in five families are computed and written as CSV
//! or JSON lines.
//!
//! ```no_run
//! use tsflow_core::pipeline::{run, Config};
//!
//! let cfg = Config {
//!     inputs: vec!["trace.pcap".into()],
//!     output: Some("features.csv".into()),
//!     ..Config::default()
//! };
//! let summary = run(&cfg).expect("extraction failed");
//! eprintln!("{summary}");
//! ```

// `!(x > 0.0)` is used on purpose so NaN takes the degenerate branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capture;
pub mod export;
#[macro_use]
pub mod features;
pub mod flow;
pub mod pipeline;
pub mod plot;
pub mod sfts;
pub(crate) mod stats;

pub use capture::{open_capture, Capture, CaptureError, LengthMode, PacketRecord};
pub use export::{sanitize, write_rows, FeatureVector, Format, Mode, ReducedVector};
pub use features::{compute_series, extract, FeatureConfig};
pub use flow::{flow_key, FlowKey, FlowRecord, FlowTable, Timeouts};
pub use sfts::{DerivedSequences, Sfts};
