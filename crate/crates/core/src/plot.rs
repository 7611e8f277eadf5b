//! Stem plots of one flow's payload sizes over time, for inspection.

use std::fmt::Write as _;
use std::fs;
use std::net::IpAddr;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::capture::{open_capture, CaptureError};
use crate::flow::{FlowRecord, FlowTable};
use crate::pipeline::Config;
use crate::sfts::{Sfts, SftsError};

/// Candidates listed in selector errors.
const MAX_CANDIDATES: usize = 50;
/// `first_ts` values within this many seconds match.
const TS_TOLERANCE: f64 = 1e-6;

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("bad flow selector {0:?}: expected comma separated addr=, port=, proto=, first_ts=")]
    Selector(String),
    #[error("no flow matches the selector; flows in the input:\n{}", .0.join("\n"))]
    NoMatch(Vec<String>),
    #[error("{} flows match the selector:\n{}", .0.len(), .0.join("\n"))]
    Ambiguous(Vec<String>),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Series(#[from] SftsError),
    #[error("cannot write plot: {0}")]
    Io(#[from] std::io::Error),
}

/// Picks flows by endpoint address, port, protocol and start time.
///
/// Address and port match either endpoint. Unset fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowSelector {
    pub addr: Option<IpAddr>,
    pub port: Option<u16>,
    pub protocol: Option<u8>,
    pub first_ts: Option<f64>,
}

impl FromStr for FlowSelector {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlotError::Selector(s.to_string());
        let mut sel = FlowSelector::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k.trim() {
                "addr" => sel.addr = Some(v.trim().parse().map_err(|_| bad())?),
                "port" => sel.port = Some(v.trim().parse().map_err(|_| bad())?),
                "proto" | "protocol" => sel.protocol = Some(v.trim().parse().map_err(|_| bad())?),
                "first_ts" => sel.first_ts = Some(v.trim().parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        Ok(sel)
    }
}

impl FlowSelector {
    pub fn matches(&self, flow: &FlowRecord) -> bool {
        let k = &flow.key;
        self.addr.is_none_or(|a| a == k.addr_a || a == k.addr_b)
            && self.port.is_none_or(|p| p == k.port_a || p == k.port_b)
            && self.protocol.is_none_or(|p| p == k.protocol)
            && self
                .first_ts
                .is_none_or(|t| (t - flow.first_ts).abs() <= TS_TOLERANCE)
    }
}

fn describe(flow: &FlowRecord) -> String {
    format!("  {} first_ts={} packets={}", flow.key, flow.first_ts, flow.len())
}

/// Replays the inputs through a flow table and returns the one flow `sel` picks.
pub fn select_flow(cfg: &Config, sel: &FlowSelector) -> Result<FlowRecord, PlotError> {
    let mut table = FlowTable::with_capacity(cfg.timeouts, cfg.capacity);
    let mut matched = Vec::new();
    let mut others = Vec::new();
    let mut take = |flows: Vec<FlowRecord>| {
        for f in flows {
            if sel.matches(&f) {
                matched.push(f);
            } else if others.len() < MAX_CANDIDATES {
                others.push(describe(&f));
            }
        }
    };
    for path in &cfg.inputs {
        let mut capture = open_capture(path, cfg.length_mode)?;
        while let Some(pkt) = capture.next_packet()? {
            take(table.ingest(&pkt));
        }
        if cfg.reset_per_file {
            take(table.flush());
        }
    }
    take(table.flush());

    match matched.len() {
        0 => Err(PlotError::NoMatch(others)),
        1 => Ok(matched.pop().unwrap()),
        _ => Err(PlotError::Ambiguous(matched.iter().map(describe).collect())),
    }
}

/// Top of the value axis: the largest payload, or 1 for an all-zero series.
pub fn y_axis_max(s: &Sfts) -> f64 {
    let max = s.values().iter().copied().max().unwrap_or(0);
    if max == 0 {
        1.0
    } else {
        f64::from(max)
    }
}

fn x_axis_max(s: &Sfts) -> f64 {
    let d = s.derive().duration;
    if d > 0.0 {
        d
    } else {
        1.0
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG stem plot: bytes against seconds since the first packet.
pub fn render_svg(s: &Sfts, title: &str) -> String {
    let y_max = y_axis_max(s);
    let x_max = x_axis_max(s);
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let base = MARGIN_TOP + plot_h;
    let px = |t: f64| MARGIN_LEFT + t / x_max * plot_w;
    let py = |v: f64| base - v / y_max * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" data-y-max="{y_max}" data-x-max="{x_max}" data-points="{}">"#,
        s.len()
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        SVG_WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<g stroke="black"><line x1="{MARGIN_LEFT}" y1="{base}" x2="{}" y2="{base}"/><line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base}"/></g>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    for k in 0..=4 {
        let frac = f64::from(k) / 4.0;
        let (v, t) = (y_max * frac, x_max * frac);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            py(v) + 4.0,
            trim_number(v)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            base + 16.0,
            trim_number(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">time [s]</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">payload [bytes]</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g stroke="#1f77b4" fill="#1f77b4">"##);
    for (&t, &v) in s.derive().rel_times.iter().zip(s.values()) {
        let (x, y) = (px(t), py(f64::from(v)));
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{y:.2}"/><circle cx="{x:.2}" cy="{y:.2}" r="2.5"/>"#
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Character-grid stem plot, `width` columns by `height` rows of plot area.
pub fn render_text(s: &Sfts, width: usize, height: usize) -> String {
    let (width, height) = (width.max(2), height.max(2));
    let y_max = y_axis_max(s);
    let x_max = x_axis_max(s);
    let mut top = vec![0u32; width];
    let mut hit = vec![false; width];
    for (&t, &v) in s.derive().rel_times.iter().zip(s.values()) {
        let col = ((t / x_max) * (width - 1) as f64).round() as usize;
        let col = col.min(width - 1);
        hit[col] = true;
        top[col] = top[col].max(v);
    }
    let label_w = trim_number(y_max).len();
    let mut out = String::new();
    for row in (1..=height).rev() {
        let label = if row == height { trim_number(y_max) } else { String::new() };
        let _ = write!(out, "{label:>label_w$} |");
        for col in 0..width {
            let h = f64::from(top[col]) / y_max * height as f64;
            let ch = if !hit[col] || h < row as f64 - 0.5 {
                ' '
            } else if h < row as f64 + 0.5 {
                'o'
            } else {
                '|'
            };
            out.push(ch);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{:>label_w$} +{}", "0", "-".repeat(width));
    let _ = writeln!(
        out,
        "{:>label_w$}  0 s{:>w$}",
        "",
        format!("{} s", trim_number(x_max)),
        w = width - 3
    );
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PlotFormat {
    #[default]
    Svg,
    Text,
}

/// Renders the selected flow to `out` and returns it.
pub fn plot_sfts(
    cfg: &Config,
    sel: &FlowSelector,
    out: &Path,
    format: PlotFormat,
) -> Result<FlowRecord, PlotError> {
    let flow = select_flow(cfg, sel)?;
    let s = Sfts::from_flow(&flow)?;
    let body = match format {
        PlotFormat::Svg => render_svg(&s, &format!("{} from {}", flow.key, flow.first_ts)),
        PlotFormat::Text => render_text(&s, 72, 20),
    };
    fs::write(out, body)?;
    Ok(flow)
}
