//! Time-axis features and distribution features.

use std::collections::HashMap;

use super::FeatureConfig;
use crate::sfts::{DerivedSequences, Sfts};
use crate::stats::{mean, quantile_sorted, ratio, variance_about};

feature_family! {
    /// Statistics of relative times and inter-packet gaps.
    pub struct TimeFeatures ["time"] {
        rt_mean: "s",
        rt_median: "s",
        rt_q1: "s",
        rt_q3: "s",
        dt_mean: "s",
        dt_median: "s",
        dt_min: "s",
        dt_max: "s",
        duration: "s",
    }
}

feature_family! {
    /// How the points of a series are distributed in value and time.
    pub struct DistributionFeatures ["dist"] {
        /// Rescaled-range estimate.
        hurst: "index",
        /// 1 when the three segment means and variances agree, else 0.
        stationarity: "flag",
        benford: "probability",
        /// Jarque-Bera based normality score.
        normal_dist: "probability",
        count_distribution: "ratio",
        count_nonzero_distribution: "ratio",
        time_distribution: "ratio",
    }
}

/// Smallest series the rescaled-range estimate accepts.
pub const HURST_MIN_LEN: usize = 16;
const HURST_MIN_WINDOW: usize = 8;

pub fn compute_time(d: &DerivedSequences) -> TimeFeatures {
    // Relative times are already ascending.
    let rt = &d.rel_times;
    let (dt_mean, dt_median, dt_min, dt_max) = if d.time_diffs.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mut dt = d.time_diffs.clone();
        dt.sort_by(f64::total_cmp);
        (
            mean(&dt),
            quantile_sorted(&dt, 0.5),
            dt[0],
            dt[dt.len() - 1],
        )
    };
    TimeFeatures {
        rt_mean: mean(rt),
        rt_median: quantile_sorted(rt, 0.5),
        rt_q1: quantile_sorted(rt, 0.25),
        rt_q3: quantile_sorted(rt, 0.75),
        dt_mean,
        dt_median,
        dt_min,
        dt_max,
        duration: d.duration,
    }
}

/// Rescaled-range (R/S) Hurst exponent.
///
/// Window sizes are the powers of two from 8 up to half the series length.
/// R/S is averaged over the non-overlapping windows of each size (windows
/// with zero spread are skipped), and the exponent is the least-squares slope
/// of `log2(R/S)` against `log2(size)`.
pub fn hurst_exponent(values: &[f64]) -> f64 {
    let n = values.len();
    if n < HURST_MIN_LEN {
        return f64::NAN;
    }
    let mut log_sizes = Vec::new();
    let mut log_rs = Vec::new();
    let mut size = HURST_MIN_WINDOW;
    while size <= n / 2 {
        let mut total = 0.0;
        let mut used = 0usize;
        for window in values.chunks_exact(size) {
            let m = mean(window);
            let sd = variance_about(window, m).sqrt();
            if sd == 0.0 {
                continue;
            }
            let (mut cum, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
            for x in window {
                cum += x - m;
                lo = lo.min(cum);
                hi = hi.max(cum);
            }
            total += (hi - lo) / sd;
            used += 1;
        }
        if used > 0 {
            log_sizes.push((size as f64).log2());
            log_rs.push((total / used as f64).log2());
        }
        size *= 2;
    }
    if log_sizes.len() < 2 {
        return f64::NAN;
    }
    crate::stats::ols_slope(&log_sizes, &log_rs)
}

/// Benford probability of leading digit `d`.
pub fn benford_probability(d: u32) -> f64 {
    (1.0 + 1.0 / f64::from(d)).log10()
}

fn leading_digit(mut x: usize) -> u32 {
    while x >= 10 {
        x /= 10;
    }
    x as u32
}

/// Agreement between Benford's law and the leading digits of the occurrence
/// counts of the nine most frequent values.
///
/// Returns `1 - TV`, where TV is the total-variation distance between the
/// empirical leading-digit distribution and Benford's. Frequency ties are
/// broken toward the smaller value.
pub fn benford_similarity(values: &[u32]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut ranked: Vec<(u32, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(9);
    let mut digits = [0usize; 10];
    for &(_, c) in &ranked {
        digits[leading_digit(c) as usize] += 1;
    }
    let k = ranked.len() as f64;
    let distance: f64 = (1..=9)
        .map(|d| (digits[d as usize] as f64 / k - benford_probability(d)).abs())
        .sum();
    (1.0 - 0.5 * distance).clamp(0.0, 1.0)
}

fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Three-segment stationarity check; NaN below nine points.
pub fn stationarity(values: &[f64], mean_tolerance: f64, variance_tolerance: f64) -> f64 {
    let n = values.len();
    if n < 9 {
        return f64::NAN;
    }
    let segments: Vec<&[f64]> = (0..3).map(|k| &values[k * n / 3..(k + 1) * n / 3]).collect();
    let means: Vec<f64> = segments.iter().map(|s| mean(s)).collect();
    let vars: Vec<f64> = segments
        .iter()
        .zip(&means)
        .map(|(s, &m)| variance_about(s, m))
        .collect();
    let max_pairwise = |xs: &[f64]| {
        let mut worst = 0.0f64;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                worst = worst.max(relative_difference(xs[i], xs[j]));
            }
        }
        worst
    };
    if max_pairwise(&means) <= mean_tolerance && max_pairwise(&vars) <= variance_tolerance {
        1.0
    } else {
        0.0
    }
}

/// `exp(-JB / 2)`, the chi-square(2) survival of the Jarque-Bera statistic.
pub fn normality_score(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = mean(values);
    let m2 = variance_about(values, m);
    if !(m2 > 0.0) {
        return f64::NAN;
    }
    let m3 = values.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let excess = m4 / (m2 * m2) - 3.0;
    let jb = n / 6.0 * (skew * skew + excess * excess / 4.0);
    (-jb / 2.0).exp()
}

pub fn compute_distribution(s: &Sfts, d: &DerivedSequences, cfg: &FeatureConfig) -> DistributionFeatures {
    let values = s.values_f64();
    let duration = d.duration;

    let count_distribution = if duration > 0.0 {
        mean(&d.rel_times) / duration
    } else {
        f64::NAN
    };
    let nonzero_rt: Vec<f64> = d
        .rel_times
        .iter()
        .zip(s.values())
        .filter(|(_, &x)| x > 0)
        .map(|(&t, _)| t)
        .collect();
    let count_nonzero_distribution = if duration > 0.0 && !nonzero_rt.is_empty() {
        mean(&nonzero_rt) / duration
    } else {
        f64::NAN
    };
    let time_distribution = if s.len() >= 3 {
        let m = mean(&d.time_diffs);
        let sd = variance_about(&d.time_diffs, m).sqrt();
        ratio(sd, m + sd)
    } else {
        f64::NAN
    };
    // A lone packet carries no distribution to compare against.
    let benford = if s.len() >= 2 {
        benford_similarity(s.values())
    } else {
        f64::NAN
    };

    DistributionFeatures {
        hurst: hurst_exponent(&values),
        stationarity: stationarity(
            &values,
            cfg.stationarity_mean_tolerance,
            cfg.stationarity_variance_tolerance,
        ),
        benford,
        normal_dist: normality_score(&values),
        count_distribution,
        count_nonzero_distribution,
        time_distribution,
    }
}
