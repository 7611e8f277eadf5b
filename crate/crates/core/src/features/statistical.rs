//! Order-free statistics of the payload sizes.
//!
//! Values are sorted before any accumulation so the result does not depend
//! on packet order, bit for bit.

use crate::stats::{quantile_sorted, ratio};

feature_family! {
    /// The 26 value statistics.
    pub struct StatisticalFeatures ["stat"] {
        mean: "bytes",
        median: "bytes",
        stdev: "bytes",
        variance: "bytes^2",
        burstiness: "ratio",
        q1: "bytes",
        q3: "bytes",
        min: "bytes",
        max: "bytes",
        min_minus_max: "bytes",
        mode: "bytes",
        percent_deviation: "percent",
        average_dispersion: "bytes",
        root_mean_square: "bytes",
        percent_above_mean: "percent",
        percent_below_mean: "percent",
        coefficient_of_variation: "ratio",
        /// Adjusted Fisher-Pearson skewness G1.
        skew_fp_g1_adj: "ratio",
        /// Fisher-Pearson skewness g1.
        skew_fp_g1: "ratio",
        /// Third central moment.
        skew_fisher_mu3: "bytes^3",
        skew_pearson_sk1: "ratio",
        skew_pearson_sk2: "ratio",
        skew_galton: "ratio",
        /// Excess kurtosis.
        kurtosis: "ratio",
        entropy: "bits",
        scaled_entropy: "ratio",
    }
}

/// `(stdev - mean) / (stdev + mean)` of `xs`; NaN when both are zero.
pub fn burstiness(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    ratio(sd - mean, sd + mean)
}

/// Distinct values with their multiplicities, ascending.
fn runs(sorted: &[u32]) -> Vec<(u32, usize)> {
    let mut out: Vec<(u32, usize)> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Computes every value statistic.
///
/// # Panics
///
/// Panics on an empty slice; flows always hold at least one packet.
pub fn compute_statistical(values: &[u32]) -> StatisticalFeatures {
    assert!(!values.is_empty(), "statistics need at least one value");
    let mut sorted_int = values.to_vec();
    sorted_int.sort_unstable();
    let sorted: Vec<f64> = sorted_int.iter().map(|&v| f64::from(v)).collect();
    let n = sorted.len() as f64;

    let sum: u64 = sorted_int.iter().map(|&v| u64::from(v)).sum();
    let sum_sq: u128 = sorted_int.iter().map(|&v| u128::from(v) * u128::from(v)).sum();
    let mean = sum as f64 / n;

    let (mut m2, mut m3, mut m4, mut abs_dev) = (0.0, 0.0, 0.0, 0.0);
    for &x in &sorted {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        abs_dev += d.abs();
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    abs_dev /= n;
    let stdev = m2.sqrt();

    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);

    let groups = runs(&sorted_int);
    let mut mode = groups[0];
    for &g in &groups[1..] {
        if g.1 > mode.1 {
            mode = g;
        }
    }
    let mode = f64::from(mode.0);
    let entropy = 0.0
        - groups
            .iter()
            .map(|&(_, c)| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>();
    let scaled_entropy = if groups.len() > 1 {
        entropy / (groups.len() as f64).log2()
    } else {
        f64::NAN
    };

    let above = sorted.iter().filter(|&&x| x > mean).count() as f64;
    let below = sorted.iter().filter(|&&x| x < mean).count() as f64;

    let g1 = if m2 > 0.0 { m3 / m2.powf(1.5) } else { f64::NAN };
    let g1_adj = if sorted.len() > 2 {
        g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
    } else {
        f64::NAN
    };
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { f64::NAN };

    StatisticalFeatures {
        mean,
        median,
        stdev,
        variance: m2,
        burstiness: ratio(stdev - mean, stdev + mean),
        q1,
        q3,
        min,
        max,
        min_minus_max: min - max,
        mode,
        percent_deviation: ratio(abs_dev, mean) * 100.0,
        average_dispersion: abs_dev,
        root_mean_square: (sum_sq as f64 / n).sqrt(),
        percent_above_mean: above / n * 100.0,
        percent_below_mean: below / n * 100.0,
        coefficient_of_variation: ratio(stdev, mean),
        skew_fp_g1_adj: g1_adj,
        skew_fp_g1: g1,
        skew_fisher_mu3: m3,
        skew_pearson_sk1: ratio(mean - mode, stdev),
        skew_pearson_sk2: ratio(3.0 * (mean - median), stdev),
        skew_galton: ratio(q1 + q3 - 2.0 * median, q3 - q1),
        kurtosis,
        entropy,
        scaled_entropy,
    }
}
