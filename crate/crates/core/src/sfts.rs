//! Single flow time series: a flow viewed as an unevenly spaced series of
//! payload sizes.

use thiserror::Error;

use crate::flow::{Direction, FlowRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SftsError {
    #[error("a time series needs at least one point")]
    Empty,
    #[error("values, times and directions differ in length")]
    LengthMismatch,
    #[error("timestamps must be finite and non-decreasing (index {0})")]
    Unordered(usize),
}

/// Payload sizes `values[i]` observed at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sfts {
    values: Vec<u32>,
    times: Vec<f64>,
    directions: Vec<Direction>,
}

impl Sfts {
    pub fn new(values: Vec<u32>, times: Vec<f64>, directions: Vec<Direction>) -> Result<Self, SftsError> {
        if values.is_empty() {
            return Err(SftsError::Empty);
        }
        if values.len() != times.len() || values.len() != directions.len() {
            return Err(SftsError::LengthMismatch);
        }
        if let Some(bad) = times.iter().position(|t| !t.is_finite()) {
            return Err(SftsError::Unordered(bad));
        }
        if let Some(bad) = times.windows(2).position(|w| w[1] < w[0]) {
            return Err(SftsError::Unordered(bad + 1));
        }
        Ok(Sfts {
            values,
            times,
            directions,
        })
    }

    /// Series with every point in the forward direction.
    pub fn forward(values: Vec<u32>, times: Vec<f64>) -> Result<Self, SftsError> {
        let directions = vec![Direction::Forward; values.len()];
        Sfts::new(values, times, directions)
    }

    /// Copies a flow's packets in order.
    pub fn from_flow(flow: &FlowRecord) -> Result<Self, SftsError> {
        let values = flow.packets.iter().map(|p| p.payload_len).collect();
        let times = flow.packets.iter().map(|p| p.timestamp).collect();
        let directions = flow.packets.iter().map(|p| p.direction).collect();
        Sfts::new(values, times, directions)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Values as reals, the form most features consume.
    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn derive(&self) -> DerivedSequences {
        DerivedSequences::from_times(&self.times)
    }
}

/// Relative times, inter-packet gaps and duration of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSequences {
    /// `t_i - t_1`; starts at zero.
    pub rel_times: Vec<f64>,
    /// `t_{i+1} - t_i`; one shorter than `rel_times`.
    pub time_diffs: Vec<f64>,
    /// Last relative time.
    pub duration: f64,
}

impl DerivedSequences {
    fn from_times(times: &[f64]) -> Self {
        let start = times[0];
        let rel_times: Vec<f64> = times.iter().map(|t| t - start).collect();
        let time_diffs = times.windows(2).map(|w| w[1] - w[0]).collect();
        let duration = *rel_times.last().unwrap_or(&0.0);
        DerivedSequences {
            rel_times,
            time_diffs,
            duration,
        }
    }
}
