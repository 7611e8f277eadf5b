//! Capture files to feature rows.
//!
//! One thread reads packets and drives the flow table. Finished flows go
//! over a bounded channel in batches; the calling thread computes their
//! features on a rayon pool and keeps them in arrival order. Rows are
//! written once, after the last flow, so output is the same for any pool size.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::capture::{open_capture, CaptureError, CaptureStats, LengthMode};
use crate::export::{sanitize, write_rows, FeatureVector, Format, Mode};
use crate::features::{extract, FeatureConfig};
use crate::flow::{FlowRecord, FlowTable, Timeouts, DEFAULT_CAPACITY};
use crate::sfts::SftsError;

const BATCH_SIZE: usize = 1024;
const CHANNEL_DEPTH: usize = 8;
const PROGRESS_EVERY: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct Config {
    pub inputs: Vec<PathBuf>,
    /// Standard output when `None`.
    pub output: Option<PathBuf>,
    pub format: Format,
    pub mode: Mode,
    pub timeouts: Timeouts,
    pub features: FeatureConfig,
    pub length_mode: LengthMode,
    /// Flows with fewer packets produce no row.
    pub min_packets: usize,
    /// Feature worker threads; 0 picks one per core.
    pub workers: usize,
    /// Start a fresh flow table for every input file.
    pub reset_per_file: bool,
    pub capacity: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            inputs: Vec::new(),
            output: None,
            format: Format::Csv,
            mode: Mode::Full,
            timeouts: Timeouts::default(),
            features: FeatureConfig::default(),
            length_mode: LengthMode::TransportPayload,
            min_packets: 1,
            workers: 0,
            reset_per_file: false,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("timeouts must satisfy 0 < inactive ({inactive}) <= active ({active})")]
    Timeouts { inactive: f64, active: f64 },
    #[error("oversample must be at least 1, got {0}")]
    Oversample(f64),
    #[error("min-packets must be at least 1")]
    MinPackets,
    #[error("flow table capacity must be at least 1")]
    Capacity,
    #[error("no input files")]
    NoInputs,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let Timeouts { active, inactive } = self.timeouts;
        if !(inactive > 0.0 && inactive <= active) {
            return Err(ConfigError::Timeouts { inactive, active });
        }
        if !(self.features.oversample >= 1.0) {
            return Err(ConfigError::Oversample(self.features.oversample));
        }
        if self.min_packets < 1 {
            return Err(ConfigError::MinPackets);
        }
        if self.capacity < 1 {
            return Err(ConfigError::Capacity);
        }
        if self.inputs.is_empty() {
            return Err(ConfigError::NoInputs);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error("invalid flow series: {0}")]
    Series(#[from] SftsError),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// What one run read and wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub flows_emitted: usize,
    /// Flows under `min_packets`, not written.
    pub flows_skipped: usize,
    pub packets: CaptureStats,
    pub reordered: u64,
    pub evicted: u64,
    pub elapsed: Duration,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "flows emitted: {}", self.flows_emitted)?;
        writeln!(f, "flows skipped: {}", self.flows_skipped)?;
        writeln!(f, "packets read: {}", self.packets.emitted)?;
        writeln!(f, "packets total: {}", self.packets.total)?;
        writeln!(f, "non-ip skipped: {}", self.packets.non_ip)?;
        writeln!(f, "malformed: {}", self.packets.malformed)?;
        writeln!(f, "reordered: {}", self.reordered)?;
        writeln!(f, "evicted: {}", self.evicted)?;
        write!(f, "elapsed: {:.3} s", self.elapsed.as_secs_f64())
    }
}

/// A failed run together with the rows that were still written.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: PipelineError,
    pub summary: Summary,
}

struct IngestReport {
    packets: CaptureStats,
    reordered: u64,
    evicted: u64,
    skipped: usize,
}

/// Reads every input in order and sends finished flows in batches.
fn ingest(
    cfg: &Config,
    tx: std::sync::mpsc::SyncSender<Vec<FlowRecord>>,
) -> (IngestReport, Result<(), CaptureError>) {
    let mut report = IngestReport {
        packets: CaptureStats::default(),
        reordered: 0,
        evicted: 0,
        skipped: 0,
    };
    let mut table = FlowTable::with_capacity(cfg.timeouts, cfg.capacity);
    let mut batch = Vec::with_capacity(BATCH_SIZE);
    let mut seen: u64 = 0;

    let min_packets = cfg.min_packets;
    let emit = |flows: Vec<FlowRecord>, batch: &mut Vec<FlowRecord>, skipped: &mut usize| -> bool {
        for f in flows {
            if f.len() >= min_packets {
                batch.push(f);
            } else {
                *skipped += 1;
            }
        }
        if batch.len() >= BATCH_SIZE {
            return tx.send(std::mem::take(batch)).is_ok();
        }
        true
    };

    let mut result = Ok(());
    'files: for path in &cfg.inputs {
        let mut capture = match open_capture(path, cfg.length_mode) {
            Ok(c) => c,
            Err(e) => {
                result = Err(e);
                break;
            }
        };
        log::info!("reading {}", path.display());
        loop {
            match capture.next_packet() {
                Ok(Some(pkt)) => {
                    seen += 1;
                    if seen.is_multiple_of(PROGRESS_EVERY) {
                        log::info!("{seen} packets, {} resident flows", table.len());
                    }
                    let done = table.ingest(&pkt);
                    if !done.is_empty() && !emit(done, &mut batch, &mut report.skipped) {
                        break 'files;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    report.packets += capture.stats();
                    result = Err(e);
                    break 'files;
                }
            }
        }
        report.packets += capture.stats();
        if cfg.reset_per_file {
            report.reordered += table.reordered();
            report.evicted += table.evicted();
            let done = table.flush();
            table = FlowTable::with_capacity(cfg.timeouts, cfg.capacity);
            if !emit(done, &mut batch, &mut report.skipped) {
                break;
            }
        }
    }
    // Resident flows never finished; a failed run leaves them out.
    if result.is_ok() {
        let done = table.flush();
        emit(done, &mut batch, &mut report.skipped);
    }
    report.reordered += table.reordered();
    report.evicted += table.evicted();
    if !batch.is_empty() {
        let _ = tx.send(batch);
    }
    (report, result)
}

fn compute(rx: Receiver<Vec<FlowRecord>>, cfg: &FeatureConfig) -> Result<Vec<FeatureVector>, SftsError> {
    let mut out = Vec::new();
    for batch in rx {
        let vectors: Result<Vec<FeatureVector>, SftsError> = batch
            .par_iter()
            .map(|flow| extract(flow, cfg).map(|fv| sanitize(&fv)))
            .collect();
        out.extend(vectors?);
    }
    Ok(out)
}

/// Vectors of every flow finished so far, plus the input error that stopped
/// ingestion, if any.
fn gather(cfg: &Config) -> Result<(Vec<FeatureVector>, Summary, Option<CaptureError>), RunFailure> {
    let start = Instant::now();
    cfg.validate().map_err(|e| RunFailure {
        error: e.into(),
        summary: Summary::default(),
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunFailure {
            error: PipelineError::Pool(e.to_string()),
            summary: Summary::default(),
        })?;

    let (tx, rx) = sync_channel(CHANNEL_DEPTH);
    let (report, ingest_result, computed) = thread::scope(|scope| {
        let reader = scope.spawn(|| ingest(cfg, tx));
        let computed = pool.install(|| compute(rx, &cfg.features));
        let (report, result) = reader.join().expect("ingest thread panicked");
        (report, result, computed)
    });

    let vectors = computed.map_err(|e| RunFailure {
        error: e.into(),
        summary: Summary::default(),
    })?;
    let summary = Summary {
        flows_emitted: vectors.len(),
        flows_skipped: report.skipped,
        packets: report.packets,
        reordered: report.reordered,
        evicted: report.evicted,
        elapsed: start.elapsed(),
    };
    Ok((vectors, summary, ingest_result.err()))
}

/// Sanitized feature vectors for every flow in the inputs, in emission order.
pub fn collect_features(cfg: &Config) -> Result<(Vec<FeatureVector>, Summary), RunFailure> {
    match gather(cfg)? {
        (vectors, summary, None) => Ok((vectors, summary)),
        (_, summary, Some(e)) => Err(RunFailure {
            error: e.into(),
            summary,
        }),
    }
}

/// Runs the pipeline and writes rows to `sink`.
///
/// When an input fails, the flows that finished before the failure are still
/// written and the error is returned with their summary.
pub fn run_to_writer<W: Write>(cfg: &Config, sink: W) -> Result<Summary, RunFailure> {
    let (vectors, summary, failure) = gather(cfg)?;
    write_rows(&vectors, cfg.format, cfg.mode, sink).map_err(|source| RunFailure {
        error: PipelineError::Output {
            path: output_name(cfg),
            source,
        },
        summary: summary.clone(),
    })?;
    match failure {
        Some(e) => Err(RunFailure {
            error: e.into(),
            summary,
        }),
        None => Ok(summary),
    }
}

fn output_name(cfg: &Config) -> String {
    cfg.output
        .as_ref()
        .map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string())
}

/// Runs the pipeline, writing to `cfg.output` or standard output.
pub fn run(cfg: &Config) -> Result<Summary, RunFailure> {
    match &cfg.output {
        Some(path) => {
            cfg.validate().map_err(|e| RunFailure {
                error: e.into(),
                summary: Summary::default(),
            })?;
            let file = File::create(path).map_err(|source| RunFailure {
                error: PipelineError::Output {
                    path: path.display().to_string(),
                    source,
                },
                summary: Summary::default(),
            })?;
            run_to_writer(cfg, BufWriter::new(file))
        }
        None => run_to_writer(cfg, io::stdout().lock()),
    }
}
