//! The five feature families computed over a single flow time series.
//!
//! | family       | count | input                          |
//! |--------------|-------|--------------------------------|
//! | statistical  | 26    | payload sizes                  |
//! | time         | 9     | relative times and gaps        |
//! | distribution | 7     | sizes, times                   |
//! | frequency    | 20    | Lomb-Scargle periodogram       |
//! | behavior     | 7     | sizes, times, directions       |
//!
//! Degenerate inputs produce NaN; [`crate::export::sanitize`] fills them.

/// Declares a family struct of named `f64` fields with their units.
macro_rules! feature_family {
    (
        $(#[$meta:meta])*
        pub struct $name:ident [$prefix:literal] {
            $( $(#[$fmeta:meta])* $field:ident : $unit:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name {
            $( $(#[$fmeta])* pub $field: f64, )+
        }

        impl $name {
            /// Column prefix used in exported rows.
            pub const PREFIX: &'static str = $prefix;
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),+];
            pub const UNITS: &'static [&'static str] = &[$($unit),+];

            pub fn nan() -> Self {
                $name { $($field: f64::NAN,)+ }
            }

            /// Field values in declaration order.
            pub fn to_vec(&self) -> Vec<f64> {
                vec![$(self.$field),+]
            }

            pub fn map_values(&mut self, mut f: impl FnMut(f64) -> f64) {
                $( self.$field = f(self.$field); )+
            }
        }
    };
}

pub mod behavior;
pub mod spectral;
pub mod statistical;
pub mod temporal;

pub use behavior::{compute_behavior, detect_periodicity, BehaviorFeatures, Periodicity};
pub use spectral::{
    compute_frequency_features, frequency_grid, lomb_scargle, spectral_rolloff, FrequencyFeatures,
    ROLLOFF_FRACTION,
    FrequencyGrid, Periodogram,
};
pub use statistical::{compute_statistical, StatisticalFeatures};
pub use temporal::{
    benford_probability, benford_similarity, compute_distribution, compute_time, hurst_exponent,
    DistributionFeatures,
    TimeFeatures,
};

use crate::export::{FeatureVector, FlowCounters, FlowIdentity};
use crate::flow::FlowRecord;
use crate::sfts::{Sfts, SftsError};

/// Which sequence the burstiness index is computed over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BurstinessSource {
    /// Payload sizes, grouped with the other value statistics.
    #[default]
    Values,
    /// Inter-packet gaps, the conventional definition.
    Gaps,
}

/// Tunables shared by every flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Frequency grid points per half the sample count.
    pub oversample: f64,
    /// Upper bound on grid size, for captures with very long flows.
    pub max_frequencies: Option<usize>,
    pub burstiness: BurstinessSource,
    /// Largest relative difference of segment means still called stationary.
    pub stationarity_mean_tolerance: f64,
    /// Largest relative difference of segment variances still called stationary.
    pub stationarity_variance_tolerance: f64,
    /// Coefficient of variation below which occurrence gaps count as periodic.
    pub periodicity_max_cv: f64,
    pub periodicity_min_occurrences: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            oversample: 4.0,
            max_frequencies: None,
            burstiness: BurstinessSource::Values,
            stationarity_mean_tolerance: 0.2,
            stationarity_variance_tolerance: 0.5,
            periodicity_max_cv: 0.1,
            periodicity_min_occurrences: 5,
        }
    }
}

/// All 69 features of one series, unsanitized, plus the periodic packet length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesFeatures {
    pub stat: StatisticalFeatures,
    pub time: TimeFeatures,
    pub dist: DistributionFeatures,
    pub freq: FrequencyFeatures,
    pub behavior: BehaviorFeatures,
    pub periodic_length: f64,
}

pub fn compute_series(series: &Sfts, cfg: &FeatureConfig) -> SeriesFeatures {
    let derived = series.derive();
    let mut stat = compute_statistical(series.values());
    if cfg.burstiness == BurstinessSource::Gaps {
        stat.burstiness = statistical::burstiness(&derived.time_diffs);
    }
    let time = compute_time(&derived);
    let dist = compute_distribution(series, &derived, cfg);
    let freq = match frequency_grid(&derived, series.len(), cfg.oversample, cfg.max_frequencies) {
        Some(grid) => compute_frequency_features(&lomb_scargle(series, &derived, &grid)),
        None => FrequencyFeatures::nan(),
    };
    let (behavior, periodicity) = compute_behavior(series, &derived, cfg);
    SeriesFeatures {
        stat,
        time,
        dist,
        freq,
        behavior,
        periodic_length: periodicity.length.map_or(0.0, f64::from),
    }
}

/// Features of one flow record, not yet sanitized.
pub fn extract(flow: &FlowRecord, cfg: &FeatureConfig) -> Result<FeatureVector, SftsError> {
    let series = Sfts::from_flow(flow)?;
    let f = compute_series(&series, cfg);
    Ok(FeatureVector {
        identity: FlowIdentity {
            key: flow.key,
            first_ts: flow.first_ts,
        },
        stat: f.stat,
        time: f.time,
        dist: f.dist,
        freq: f.freq,
        behavior: f.behavior,
        periodic_length: f.periodic_length,
        counters: FlowCounters::from_flow(flow),
    })
}
