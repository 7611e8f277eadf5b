//! `tsflow`: per-flow time series features from packet captures.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsflow_core::capture::LengthMode;
use tsflow_core::export::{schema_table, Format, Mode};
use tsflow_core::features::{BurstinessSource, FeatureConfig};
use tsflow_core::flow::{Timeouts, DEFAULT_ACTIVE_TIMEOUT, DEFAULT_CAPACITY, DEFAULT_INACTIVE_TIMEOUT};
use tsflow_core::pipeline::{self, Config, PipelineError};
use tsflow_core::plot::{self, FlowSelector, PlotFormat};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "tsflow", version, about = "Flow time series features from PCAP and pcapng captures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract one feature row per flow.
    #[command(visible_alias = "run")]
    Extract(ExtractArgs),
    /// Draw one flow's payload sizes over time.
    #[command(visible_alias = "plot-sfts")]
    Plot(PlotArgs),
    /// Print the output column table.
    Schema,
}

#[derive(Args, Debug)]
struct Common {
    /// Capture files, read in order as one stream.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Active timeout in seconds.
    #[arg(long, env = "TSFLOW_ACTIVE", default_value_t = DEFAULT_ACTIVE_TIMEOUT)]
    active: f64,
    /// Inactive timeout in seconds.
    #[arg(long, env = "TSFLOW_INACTIVE", default_value_t = DEFAULT_INACTIVE_TIMEOUT)]
    inactive: f64,
    #[arg(long, env = "TSFLOW_LENGTH_MODE", value_enum, default_value_t = LengthArg::TransportPayload)]
    length_mode: LengthArg,
    /// Start a new flow table for each input file.
    #[arg(long, env = "TSFLOW_RESET_PER_FILE")]
    reset_per_file: bool,
    /// Maximum resident flows before the oldest are exported early.
    #[arg(long, env = "TSFLOW_CAPACITY", default_value_t = DEFAULT_CAPACITY)]
    capacity: usize,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    /// Output file; standard output when omitted.
    #[arg(short, long, env = "TSFLOW_OUTPUT")]
    output: Option<PathBuf>,
    #[arg(long, env = "TSFLOW_FORMAT", value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long, env = "TSFLOW_MODE", value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    /// Frequency grid oversampling factor.
    #[arg(long, env = "TSFLOW_OVERSAMPLE", default_value_t = 4.0)]
    oversample: f64,
    /// Cap on frequency grid points per flow.
    #[arg(long, env = "TSFLOW_MAX_FREQS")]
    max_freqs: Option<usize>,
    /// Sequence the burstiness index is computed over.
    #[arg(long, env = "TSFLOW_BURSTINESS", value_enum, default_value_t = BurstinessArg::Values)]
    burstiness: BurstinessArg,
    /// Flows with fewer packets are not written.
    #[arg(long, env = "TSFLOW_MIN_PACKETS", default_value_t = 1)]
    min_packets: usize,
    /// Feature worker threads; 0 uses every core.
    #[arg(long, env = "TSFLOW_WORKERS", default_value_t = 0)]
    workers: usize,
    #[arg(long, env = "TSFLOW_STATIONARITY_MEAN_TOL", default_value_t = 0.2)]
    stationarity_mean_tol: f64,
    #[arg(long, env = "TSFLOW_STATIONARITY_VAR_TOL", default_value_t = 0.5)]
    stationarity_var_tol: f64,
    /// Largest gap coefficient of variation still called periodic.
    #[arg(long, env = "TSFLOW_PERIODICITY_CV", default_value_t = 0.1)]
    periodicity_cv: f64,
    #[arg(long, env = "TSFLOW_PERIODICITY_MIN", default_value_t = 5)]
    periodicity_min: usize,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Flow to draw, e.g. `addr=10.0.0.1,port=443,proto=6,first_ts=1600000000.5`.
    #[arg(short, long)]
    select: String,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = PlotArg::Svg)]
    format: PlotArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Full,
    Reduced,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum LengthArg {
    TransportPayload,
    IpTotal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BurstinessArg {
    Values,
    Gaps,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlotArg {
    Svg,
    Text,
}

impl Common {
    fn config(&self) -> Config {
        Config {
            inputs: self.inputs.clone(),
            timeouts: Timeouts {
                active: self.active,
                inactive: self.inactive,
            },
            length_mode: match self.length_mode {
                LengthArg::TransportPayload => LengthMode::TransportPayload,
                LengthArg::IpTotal => LengthMode::IpTotal,
            },
            reset_per_file: self.reset_per_file,
            capacity: self.capacity,
            ..Config::default()
        }
    }
}

impl ExtractArgs {
    fn config(&self) -> Config {
        Config {
            output: self.output.clone(),
            format: match self.format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Jsonl => Format::Jsonl,
            },
            mode: match self.mode {
                ModeArg::Full => Mode::Full,
                ModeArg::Reduced => Mode::Reduced,
            },
            features: FeatureConfig {
                oversample: self.oversample,
                max_frequencies: self.max_freqs,
                burstiness: match self.burstiness {
                    BurstinessArg::Values => BurstinessSource::Values,
                    BurstinessArg::Gaps => BurstinessSource::Gaps,
                },
                stationarity_mean_tolerance: self.stationarity_mean_tol,
                stationarity_variance_tolerance: self.stationarity_var_tol,
                periodicity_max_cv: self.periodicity_cv,
                periodicity_min_occurrences: self.periodicity_min,
            },
            min_packets: self.min_packets,
            workers: self.workers,
            ..self.common.config()
        }
    }
}

fn extract(args: &ExtractArgs) -> ExitCode {
    let cfg = args.config();
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match pipeline::run(&cfg) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            if matches!(failure.error, PipelineError::Output { .. }) {
                eprintln!("warning: output may be incomplete");
            } else {
                eprintln!("{}", failure.summary);
            }
            eprintln!("error: {}", failure.error);
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn plot(args: &PlotArgs) -> ExitCode {
    let cfg = args.common.config();
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let selector: FlowSelector = match args.select.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let format = match args.format {
        PlotArg::Svg => PlotFormat::Svg,
        PlotArg::Text => PlotFormat::Text,
    };
    match plot::plot_sfts(&cfg, &selector, &args.output, format) {
        Ok(flow) => {
            eprintln!(
                "plotted {} ({} packets) to {}",
                flow.key,
                flow.len(),
                args.output.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match &cli.command {
        Command::Extract(args) => extract(args),
        Command::Plot(args) => plot(args),
        Command::Schema => {
            let mut out = std::io::stdout().lock();
            if out.write_all(schema_table().as_bytes()).is_err() {
                return ExitCode::from(EXIT_RUNTIME);
            }
            ExitCode::SUCCESS
        }
    }
}
