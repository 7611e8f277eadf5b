//! Behavior features: gaps, switching, bursts, one-second activity and
//! periodically repeating packets.

use std::collections::BTreeMap;

use super::FeatureConfig;
use crate::flow::Direction;
use crate::sfts::{DerivedSequences, Sfts};
use crate::stats::{mean, median_of, stdev};

feature_family! {
    pub struct BehaviorFeatures ["behavior"] {
        /// 1 when the largest gap stands out from all the others.
        significant_spaces: "flag",
        switching_ratio: "ratio",
        /// 1 when a one-second window holds a burst of large packets.
        transients: "flag",
        /// Share of one-second buckets without packets.
        count_of_zeros: "percent",
        /// Most payload bytes in one one-second bucket.
        biggest_interval: "bytes",
        /// Share of packets in the forward direction.
        directions: "percent",
        /// Period of a repeating packet length, 0 if none.
        periodicity: "s",
    }
}

/// Minimum series length for the gap outlier test.
pub const SIGNIFICANT_SPACES_MIN_LEN: usize = 4;
const TRANSIENT_MIN_PACKETS: usize = 3;

/// A detected repeating packet length and its period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periodicity {
    /// Median gap between occurrences, seconds; 0 when nothing repeats.
    pub period: f64,
    pub length: Option<u32>,
}

impl Periodicity {
    pub const NONE: Periodicity = Periodicity {
        period: 0.0,
        length: None,
    };
}

/// Whether the largest gap exceeds the mean plus three standard deviations
/// of the remaining gaps.
///
/// The largest gap is left out of the reference statistics; with it included
/// a single outlier inflates the deviation enough to mask itself.
fn significant_spaces(dt: &[f64], n: usize) -> f64 {
    if n < SIGNIFICANT_SPACES_MIN_LEN {
        return f64::NAN;
    }
    let mut imax = 0;
    for (i, &g) in dt.iter().enumerate() {
        if g > dt[imax] {
            imax = i;
        }
    }
    let rest: Vec<f64> = dt
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != imax)
        .map(|(_, &g)| g)
        .collect();
    let m = mean(&rest);
    if dt[imax] > m + 3.0 * stdev(&rest) {
        1.0
    } else {
        0.0
    }
}

fn switching_ratio(values: &[u32]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let changes = values.windows(2).filter(|w| w[0] != w[1]).count();
    changes as f64 / (values.len() - 1) as f64
}

/// Sliding one-second windows, one starting at each packet.
fn transients(values: &[f64], rel_times: &[f64]) -> f64 {
    let m = mean(values);
    let sd = stdev(values);
    if !(sd > 0.0) {
        return f64::NAN;
    }
    let threshold = m + 2.0 * sd;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut end = 0;
    for start in 0..values.len() {
        end = end.max(start);
        while end < values.len() && rel_times[end] < rel_times[start] + 1.0 {
            end += 1;
        }
        let count = end - start;
        if count >= TRANSIENT_MIN_PACKETS && (prefix[end] - prefix[start]) / count as f64 > threshold {
            return 1.0;
        }
    }
    0.0
}

/// Payload bytes per one-second bucket `[k, k + 1)` of relative time.
pub fn one_second_buckets(values: &[u32], d: &DerivedSequences) -> Vec<u64> {
    let count = d.duration.floor() as usize + 1;
    let mut buckets = vec![0u64; count];
    for (&rt, &v) in d.rel_times.iter().zip(values) {
        let k = (rt.floor() as usize).min(count - 1);
        buckets[k] += u64::from(v);
    }
    buckets
}

/// Finds the most frequent packet length whose occurrences are evenly spaced.
///
/// A length qualifies with at least `min_occurrences` occurrences and a gap
/// coefficient of variation below `max_cv`. Ties on occurrence count go to
/// the smaller length.
pub fn detect_periodicity(s: &Sfts, max_cv: f64, min_occurrences: usize) -> Periodicity {
    let min_occurrences = min_occurrences.max(2);
    if s.len() < min_occurrences {
        return Periodicity::NONE;
    }
    let mut occurrences: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (&v, &t) in s.values().iter().zip(s.times()) {
        occurrences.entry(v).or_default().push(t);
    }
    let mut best: Option<(usize, u32, f64)> = None;
    for (&length, times) in &occurrences {
        if times.len() < min_occurrences {
            continue;
        }
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let m = mean(&gaps);
        if !(m > 0.0) || stdev(&gaps) / m >= max_cv {
            continue;
        }
        if best.is_none_or(|(count, _, _)| times.len() > count) {
            best = Some((times.len(), length, median_of(&gaps)));
        }
    }
    match best {
        Some((_, length, period)) => Periodicity {
            period,
            length: Some(length),
        },
        None => Periodicity::NONE,
    }
}

pub fn compute_behavior(
    s: &Sfts,
    d: &DerivedSequences,
    cfg: &FeatureConfig,
) -> (BehaviorFeatures, Periodicity) {
    let values = s.values_f64();
    let n = s.len();
    let buckets = one_second_buckets(s.values(), d);
    // Zero-payload packets still mark a bucket as active.
    let active = {
        let mut seen = vec![false; buckets.len()];
        for &rt in &d.rel_times {
            seen[(rt.floor() as usize).min(buckets.len() - 1)] = true;
        }
        seen.iter().filter(|&&b| b).count()
    };
    let forward = s
        .directions()
        .iter()
        .filter(|&&dir| dir == Direction::Forward)
        .count();
    let periodicity = detect_periodicity(s, cfg.periodicity_max_cv, cfg.periodicity_min_occurrences);

    let features = BehaviorFeatures {
        significant_spaces: significant_spaces(&d.time_diffs, n),
        switching_ratio: switching_ratio(s.values()),
        transients: transients(&values, &d.rel_times),
        count_of_zeros: (buckets.len() - active) as f64 / buckets.len() as f64 * 100.0,
        biggest_interval: buckets.iter().copied().max().unwrap_or(0) as f64,
        directions: forward as f64 / n as f64 * 100.0,
        periodicity: periodicity.period,
    };
    (features, periodicity)
}
