//! Feature vectors, NaN sanitation, the reduced set, and row serialization.
//!
//! Column layout, in order:
//!
//! * identity: `addr_a, port_a, addr_b, port_b, protocol, first_ts`. These
//!   join rows to labels and are not features.
//! * full mode: the 69 features as `stat_*`, `time_*`, `dist_*`, `freq_*`,
//!   `behavior_*`, then the `diag_periodic_length` diagnostic.
//! * reduced mode: the 10 selected features followed by five `flow_*` counters.
//!
//! The same table ships as `schema/columns.tsv`.

use std::io::{self, Write};

use serde_json::{Map, Number, Value};

use crate::features::{
    BehaviorFeatures, DistributionFeatures, FrequencyFeatures, StatisticalFeatures, TimeFeatures,
};
use crate::flow::{FlowKey, FlowRecord};

/// Row identity: the oriented flow key and its first timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowIdentity {
    pub key: FlowKey,
    pub first_ts: f64,
}

/// Classic per-flow counters attached to reduced rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCounters {
    pub duration: f64,
    pub packets_fwd: u64,
    pub bytes_fwd: u64,
    pub packets_rev: u64,
    pub bytes_rev: u64,
}

impl FlowCounters {
    pub fn from_flow(flow: &FlowRecord) -> Self {
        FlowCounters {
            duration: flow.duration(),
            packets_fwd: flow.pkt_count_fwd,
            bytes_fwd: flow.byte_count_fwd,
            packets_rev: flow.pkt_count_rev,
            bytes_rev: flow.byte_count_rev,
        }
    }
}

/// All features of one flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub identity: FlowIdentity,
    pub stat: StatisticalFeatures,
    pub time: TimeFeatures,
    pub dist: DistributionFeatures,
    pub freq: FrequencyFeatures,
    pub behavior: BehaviorFeatures,
    /// Packet length behind `behavior.periodicity`, 0 when none.
    pub periodic_length: f64,
    pub counters: FlowCounters,
}

/// Replacement for NaN in the distribution family.
pub const DIST_FILL: f64 = 0.5;
/// Replacement for NaN in the frequency family.
pub const FREQ_FILL: f64 = -1.0;
/// Replacement for NaN in every other family.
pub const OTHER_FILL: f64 = 0.0;

fn fill(value: f64, with: f64) -> f64 {
    if value.is_nan() {
        with
    } else {
        value
    }
}

impl FeatureVector {
    pub const FEATURE_COUNT: usize = StatisticalFeatures::NAMES.len()
        + TimeFeatures::NAMES.len()
        + DistributionFeatures::NAMES.len()
        + FrequencyFeatures::NAMES.len()
        + BehaviorFeatures::NAMES.len();

    /// The 69 feature values in column order.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::FEATURE_COUNT);
        out.extend(self.stat.to_vec());
        out.extend(self.time.to_vec());
        out.extend(self.dist.to_vec());
        out.extend(self.freq.to_vec());
        out.extend(self.behavior.to_vec());
        out
    }
}

/// Replaces NaN features: 0.5 for distribution, -1 for frequency, 0 elsewhere.
pub fn sanitize(fv: &FeatureVector) -> FeatureVector {
    let mut out = *fv;
    out.stat.map_values(|v| fill(v, OTHER_FILL));
    out.time.map_values(|v| fill(v, OTHER_FILL));
    out.dist.map_values(|v| fill(v, DIST_FILL));
    out.freq.map_values(|v| fill(v, FREQ_FILL));
    out.behavior.map_values(|v| fill(v, OTHER_FILL));
    out.periodic_length = fill(out.periodic_length, OTHER_FILL);
    out.counters.duration = fill(out.counters.duration, OTHER_FILL);
    out
}

/// The ten selected features and five classic counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedVector {
    pub identity: FlowIdentity,
    pub spectral_kurtosis: f64,
    pub periodicity: f64,
    pub q1: f64,
    pub benford: f64,
    pub spectral_energy: f64,
    pub dt_median: f64,
    pub min: f64,
    pub q3: f64,
    pub min_minus_max: f64,
    pub directions: f64,
    pub counters: FlowCounters,
}

impl ReducedVector {
    pub const FEATURE_NAMES: [&'static str; 10] = [
        "freq_spectral_kurtosis",
        "behavior_periodicity",
        "stat_q1",
        "dist_benford",
        "freq_spectral_energy",
        "time_dt_median",
        "stat_min",
        "stat_q3",
        "stat_min_minus_max",
        "behavior_directions",
    ];
    pub const COUNTER_NAMES: [&'static str; 5] = [
        "flow_duration",
        "flow_packets_fwd",
        "flow_bytes_fwd",
        "flow_packets_rev",
        "flow_bytes_rev",
    ];

    pub fn from_features(fv: &FeatureVector, counters: FlowCounters) -> Self {
        ReducedVector {
            identity: fv.identity,
            spectral_kurtosis: fv.freq.spectral_kurtosis,
            periodicity: fv.behavior.periodicity,
            q1: fv.stat.q1,
            benford: fv.dist.benford,
            spectral_energy: fv.freq.spectral_energy,
            dt_median: fv.time.dt_median,
            min: fv.stat.min,
            q3: fv.stat.q3,
            min_minus_max: fv.stat.min_minus_max,
            directions: fv.behavior.directions,
            counters,
        }
    }

    pub fn features(&self) -> [f64; 10] {
        [
            self.spectral_kurtosis,
            self.periodicity,
            self.q1,
            self.benford,
            self.spectral_energy,
            self.dt_median,
            self.min,
            self.q3,
            self.min_minus_max,
            self.directions,
        ]
    }
}

/// Projects a sanitized vector onto the reduced set, with counters taken from `flow`.
pub fn reduce(fv: &FeatureVector, flow: &FlowRecord) -> ReducedVector {
    ReducedVector::from_features(fv, FlowCounters::from_flow(flow))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Full,
    Reduced,
}

pub const IDENTITY_COLUMNS: [&str; 6] = ["addr_a", "port_a", "addr_b", "port_b", "protocol", "first_ts"];
pub const DIAGNOSTIC_COLUMNS: [&str; 1] = ["diag_periodic_length"];

fn family_columns(prefix: &str, names: &[&str], out: &mut Vec<String>) {
    out.extend(names.iter().map(|n| format!("{prefix}_{n}")));
}

/// The 69 feature column names, in order.
pub fn feature_columns() -> Vec<String> {
    let mut out = Vec::with_capacity(FeatureVector::FEATURE_COUNT);
    family_columns(StatisticalFeatures::PREFIX, StatisticalFeatures::NAMES, &mut out);
    family_columns(TimeFeatures::PREFIX, TimeFeatures::NAMES, &mut out);
    family_columns(DistributionFeatures::PREFIX, DistributionFeatures::NAMES, &mut out);
    family_columns(FrequencyFeatures::PREFIX, FrequencyFeatures::NAMES, &mut out);
    family_columns(BehaviorFeatures::PREFIX, BehaviorFeatures::NAMES, &mut out);
    out
}

/// Every output column of `mode`, identity first.
pub fn columns(mode: Mode) -> Vec<String> {
    let mut out: Vec<String> = IDENTITY_COLUMNS.iter().map(|s| s.to_string()).collect();
    match mode {
        Mode::Full => {
            out.extend(feature_columns());
            out.extend(DIAGNOSTIC_COLUMNS.iter().map(|s| s.to_string()));
        }
        Mode::Reduced => {
            out.extend(ReducedVector::FEATURE_NAMES.iter().map(|s| s.to_string()));
            out.extend(ReducedVector::COUNTER_NAMES.iter().map(|s| s.to_string()));
        }
    }
    out
}

/// Rounds to nine significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

/// Renders a real with nine significant digits in its shortest form.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let r = round_sig9(v);
    let a = r.abs();
    if a >= 1e16 || (a > 0.0 && a < 1e-6) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Text(String),
    Int(u64),
    /// Rounded to nine significant digits.
    Real(f64),
    /// Written at full precision; timestamps need more than nine digits.
    Exact(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Exact(v) => format!("{v}"),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Real(v) => Number::from_f64(round_sig9(*v)).map_or(Value::Null, Value::Number),
            Cell::Exact(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
        }
    }
}

fn row(fv: &FeatureVector, mode: Mode) -> Vec<Cell> {
    let key = &fv.identity.key;
    let mut cells = vec![
        Cell::Text(key.addr_a.to_string()),
        Cell::Int(u64::from(key.port_a)),
        Cell::Text(key.addr_b.to_string()),
        Cell::Int(u64::from(key.port_b)),
        Cell::Int(u64::from(key.protocol)),
        Cell::Exact(fv.identity.first_ts),
    ];
    match mode {
        Mode::Full => {
            cells.extend(fv.features().into_iter().map(Cell::Real));
            cells.push(Cell::Real(fv.periodic_length));
        }
        Mode::Reduced => {
            let r = ReducedVector::from_features(fv, fv.counters);
            cells.extend(r.features().into_iter().map(Cell::Real));
            let c = r.counters;
            cells.push(Cell::Real(c.duration));
            cells.extend([c.packets_fwd, c.bytes_fwd, c.packets_rev, c.bytes_rev].map(Cell::Int));
        }
    }
    cells
}

fn to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Writes one row per vector, stably ordered by `first_ts`.
///
/// CSV output always carries the header, even with no rows. Returns the
/// number of rows written.
pub fn write_rows<W: Write>(
    vectors: &[FeatureVector],
    format: Format,
    mode: Mode,
    sink: W,
) -> io::Result<usize> {
    let mut order: Vec<&FeatureVector> = vectors.iter().collect();
    order.sort_by(|a, b| a.identity.first_ts.total_cmp(&b.identity.first_ts));
    let names = columns(mode);

    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(sink);
            w.write_record(&names).map_err(to_io)?;
            for fv in &order {
                w.write_record(row(fv, mode).iter().map(Cell::render)).map_err(to_io)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut w = io::BufWriter::new(sink);
            for fv in &order {
                let object: Map<String, Value> = names
                    .iter()
                    .cloned()
                    .zip(row(fv, mode).iter().map(Cell::json))
                    .collect();
                serde_json::to_writer(&mut w, &Value::Object(object))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(order.len())
}

/// Machine-readable column table: name, modes, family, unit, NaN fill.
pub fn schema_table() -> String {
    let reduced: Vec<&str> = ReducedVector::FEATURE_NAMES.to_vec();
    let mut out = String::from("column\tmode\tfamily\tunit\tsanitation\n");
    let mut line = |name: &str, mode: &str, family: &str, unit: &str, fill: &str| {
        out.push_str(&format!("{name}\t{mode}\t{family}\t{unit}\t{fill}\n"));
    };
    let identity_units = ["address", "port", "address", "port", "number", "s"];
    for (name, unit) in IDENTITY_COLUMNS.iter().zip(identity_units) {
        line(name, "full,reduced", "identity", unit, "none");
    }
    let families: [(&str, &[&str], &[&str], &str); 5] = [
        (StatisticalFeatures::PREFIX, StatisticalFeatures::NAMES, StatisticalFeatures::UNITS, "0"),
        (TimeFeatures::PREFIX, TimeFeatures::NAMES, TimeFeatures::UNITS, "0"),
        (DistributionFeatures::PREFIX, DistributionFeatures::NAMES, DistributionFeatures::UNITS, "0.5"),
        (FrequencyFeatures::PREFIX, FrequencyFeatures::NAMES, FrequencyFeatures::UNITS, "-1"),
        (BehaviorFeatures::PREFIX, BehaviorFeatures::NAMES, BehaviorFeatures::UNITS, "0"),
    ];
    for (prefix, names, units, fill) in families {
        for (name, unit) in names.iter().zip(units) {
            let column = format!("{prefix}_{name}");
            let mode = if reduced.contains(&column.as_str()) {
                "full,reduced"
            } else {
                "full"
            };
            line(&column, mode, prefix, unit, fill);
        }
    }
    line(DIAGNOSTIC_COLUMNS[0], "full", "diag", "bytes", "0");
    let counter_units = ["s", "packets", "bytes", "packets", "bytes"];
    for (name, unit) in ReducedVector::COUNTER_NAMES.iter().zip(counter_units) {
        line(name, "reduced", "flow", unit, "none");
    }
    out
}
