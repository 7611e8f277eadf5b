//! Lomb-Scargle periodogram of a flow series and the spectral features
//! derived from it.
//!
//! The periodogram is the classic normalized form (divided by twice the
//! population variance), evaluated directly on a uniform frequency grid.
//! Trigonometric terms advance along the grid by rotation and are re-seeded
//! from exact values every [`RESEED_EVERY`] steps to bound drift.

use std::f64::consts::PI;

use crate::sfts::{DerivedSequences, Sfts};
use crate::stats::{mean, ols_slope, ratio};

/// Fraction of total power below the rolloff frequency.
pub const ROLLOFF_FRACTION: f64 = 0.85;

const POWER_MODE_BINS: usize = 64;
const RESEED_EVERY: usize = 128;

feature_family! {
    /// The 20 frequency-domain features.
    pub struct FrequencyFeatures ["freq"] {
        min_power: "power",
        max_power: "power",
        freq_min_power: "Hz",
        freq_max_power: "Hz",
        power_mode: "power",
        power_mean: "power",
        power_stdev: "power",
        /// Power-weighted standard deviation of frequency.
        spectral_bandwidth: "Hz",
        spectral_centroid: "Hz",
        spectral_energy: "power",
        spectral_entropy: "bits",
        spectral_flatness: "ratio",
        spectral_flux: "ratio",
        spectral_kurtosis: "ratio",
        /// One minus the false-alarm probability of the highest peak.
        spectral_periodicity: "probability",
        spectral_rolloff: "Hz",
        /// Extent of the bins above mean power.
        spectral_spread: "Hz",
        spectral_skewness: "ratio",
        spectral_slope: "power/Hz",
        spectral_zero_cross_rate: "ratio",
    }
}

/// Uniformly spaced evaluation frequencies, in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub freqs: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

impl FrequencyGrid {
    /// `count` frequencies from `f_min` to `f_max` inclusive.
    pub fn uniform(f_min: f64, f_max: f64, count: usize) -> Self {
        let count = count.max(1);
        let freqs: Vec<f64> = if count == 1 {
            vec![f_min]
        } else {
            let step = (f_max - f_min) / (count - 1) as f64;
            (0..count).map(|k| f_min + k as f64 * step).collect()
        };
        let f_max = *freqs.last().unwrap_or(&f_min);
        FrequencyGrid { freqs, f_min, f_max }
    }

    pub fn count(&self) -> usize {
        self.freqs.len()
    }

    pub fn step(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }
}

/// Grid from one cycle per flow duration up to the mean-rate pseudo-Nyquist
/// frequency `n / (2 * duration)`, with `ceil(oversample * n / 2)` points.
///
/// Returns `None` when the series has no spectrum (a single timestamp or a
/// single point). When the two ends coincide (`n = 2`) the grid collapses to
/// one frequency.
pub fn frequency_grid(
    d: &DerivedSequences,
    n: usize,
    oversample: f64,
    max_frequencies: Option<usize>,
) -> Option<FrequencyGrid> {
    if n < 2 || !(d.duration > 0.0) {
        return None;
    }
    let f_min = 1.0 / d.duration;
    let f_max = n as f64 / (2.0 * d.duration);
    let mut count = (oversample.max(1.0) * n as f64 / 2.0).ceil() as usize;
    if let Some(cap) = max_frequencies {
        count = count.min(cap.max(1));
    }
    if f_max <= f_min {
        count = 1;
    }
    Some(FrequencyGrid::uniform(f_min, f_max, count))
}

/// Power per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub grid: FrequencyGrid,
    pub power: Vec<f64>,
}

/// Normalized Lomb-Scargle periodogram of `s` on `grid`.
///
/// A constant series has zero variance and yields an all-zero spectrum.
pub fn lomb_scargle(s: &Sfts, d: &DerivedSequences, grid: &FrequencyGrid) -> Periodogram {
    let count = grid.count();
    let values = s.values_f64();
    let n = values.len() as f64;
    let m = mean(&values);
    let y: Vec<f64> = values.iter().map(|x| x - m).collect();
    let variance = y.iter().map(|v| v * v).sum::<f64>() / n;
    if !(variance > 0.0) {
        return Periodogram {
            grid: grid.clone(),
            power: vec![0.0; count],
        };
    }

    // Per frequency: sums of y*cos(wt), y*sin(wt), cos(2wt), sin(2wt).
    let mut yc = vec![0.0; count];
    let mut ys = vec![0.0; count];
    let mut c2 = vec![0.0; count];
    let mut s2 = vec![0.0; count];
    let w0 = 2.0 * PI * grid.f_min;
    let dw = 2.0 * PI * grid.step();

    for (&t, &yi) in d.rel_times.iter().zip(&y) {
        let (step_sin, step_cos) = (dw * t).sin_cos();
        let (mut sin, mut cos) = (0.0, 0.0);
        for j in 0..count {
            if j % RESEED_EVERY == 0 {
                (sin, cos) = ((w0 + j as f64 * dw) * t).sin_cos();
            }
            yc[j] += yi * cos;
            ys[j] += yi * sin;
            c2[j] += cos * cos - sin * sin;
            s2[j] += 2.0 * sin * cos;
            let next_cos = cos * step_cos - sin * step_sin;
            sin = sin * step_cos + cos * step_sin;
            cos = next_cos;
        }
    }

    let tiny = n * 1e-12;
    let power = (0..count)
        .map(|j| {
            // 2*w*tau = atan2(S2, C2); the shifted sums then follow in closed form.
            let (sin2, cos2) = s2[j].atan2(c2[j]).sin_cos();
            let half = (0.5 * (1.0 + cos2)).sqrt();
            let (ct, st) = if half > 0.0 {
                (half, sin2 / (2.0 * half))
            } else {
                (0.0, 1.0)
            };
            let yc_tau = ct * yc[j] + st * ys[j];
            let ys_tau = ct * ys[j] - st * yc[j];
            let r = c2[j].hypot(s2[j]);
            let cc_tau = 0.5 * (n + r);
            let ss_tau = 0.5 * (n - r);
            let mut p = 0.0;
            if cc_tau > tiny {
                p += yc_tau * yc_tau / cc_tau;
            }
            if ss_tau > tiny {
                p += ys_tau * ys_tau / ss_tau;
            }
            (p / (2.0 * variance)).max(0.0)
        })
        .collect();
    Periodogram {
        grid: grid.clone(),
        power,
    }
}

/// Smallest grid frequency at which cumulative power reaches `fraction` of the total.
pub fn spectral_rolloff(p: &Periodogram, fraction: f64) -> f64 {
    let total: f64 = p.power.iter().sum();
    if !(total > 0.0) {
        return f64::NAN;
    }
    let threshold = fraction * total;
    let mut cumulative = 0.0;
    for (f, power) in p.grid.freqs.iter().zip(&p.power) {
        cumulative += power;
        if cumulative >= threshold {
            return *f;
        }
    }
    p.grid.f_max
}

fn power_mode(power: &[f64], min: f64, max: f64) -> f64 {
    if !(max > min) {
        return min;
    }
    let width = (max - min) / POWER_MODE_BINS as f64;
    let mut bins = [0usize; POWER_MODE_BINS];
    for &p in power {
        let idx = (((p - min) / width) as usize).min(POWER_MODE_BINS - 1);
        bins[idx] += 1;
    }
    let mut best = 0;
    for (i, &c) in bins.iter().enumerate() {
        if c > bins[best] {
            best = i;
        }
    }
    min + (best as f64 + 0.5) * width
}

pub fn compute_frequency_features(p: &Periodogram) -> FrequencyFeatures {
    let power = &p.power;
    let freqs = &p.grid.freqs;
    let count = power.len();
    if count == 0 {
        return FrequencyFeatures::nan();
    }
    let k = count as f64;

    let (mut imin, mut imax) = (0, 0);
    for (i, &v) in power.iter().enumerate() {
        if v < power[imin] {
            imin = i;
        }
        if v > power[imax] {
            imax = i;
        }
    }
    let min_power = power[imin];
    let max_power = power[imax];
    let energy: f64 = power.iter().sum();
    let power_mean = energy / k;
    let power_stdev = (power.iter().map(|v| (v - power_mean).powi(2)).sum::<f64>() / k).sqrt();

    let centroid = ratio(freqs.iter().zip(power).map(|(f, v)| f * v).sum(), energy);
    let moment = |order: i32| {
        ratio(
            freqs
                .iter()
                .zip(power)
                .map(|(f, v)| v * (f - centroid).powi(order))
                .sum(),
            energy,
        )
    };
    let bandwidth = moment(2).sqrt();
    let skewness = if bandwidth > 0.0 {
        moment(3) / bandwidth.powi(3)
    } else {
        f64::NAN
    };
    let kurtosis = if bandwidth > 0.0 {
        moment(4) / bandwidth.powi(4)
    } else {
        f64::NAN
    };

    let (entropy, flux) = if energy > 0.0 {
        let normalized: Vec<f64> = power.iter().map(|v| v / energy).collect();
        let entropy = 0.0
            - normalized
                .iter()
                .filter(|&&q| q > 0.0)
                .map(|q| q * q.log2())
                .sum::<f64>();
        let flux = normalized.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        (entropy, flux)
    } else {
        (f64::NAN, f64::NAN)
    };

    let flatness = if !(energy > 0.0) {
        f64::NAN
    } else if power.iter().any(|&v| v <= 0.0) {
        0.0
    } else if power.iter().all(|&v| v == power[0]) {
        1.0
    } else {
        // Unequal powers sit strictly below 1; keep rounding from reaching it.
        let log_mean = power.iter().map(|v| v.ln()).sum::<f64>() / k;
        (log_mean.exp() / power_mean).min(1.0 - f64::EPSILON / 2.0)
    };

    let spread = if energy > 0.0 {
        let above: Vec<f64> = freqs
            .iter()
            .zip(power)
            .filter(|(_, &v)| v > power_mean)
            .map(|(&f, _)| f)
            .collect();
        match (above.first(), above.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    } else {
        f64::NAN
    };

    let zero_cross_rate = if count >= 2 {
        let above: Vec<bool> = power.iter().map(|&v| v > power_mean).collect();
        let crossings = above.windows(2).filter(|w| w[0] != w[1]).count();
        crossings as f64 / (k - 1.0)
    } else {
        f64::NAN
    };

    // (1 - e^-z)^M; computed in log space so large M does not underflow early.
    let periodicity = {
        let z = max_power.max(0.0);
        if z == 0.0 {
            0.0
        } else {
            (k * (-(-z).exp()).ln_1p()).exp()
        }
    };

    FrequencyFeatures {
        min_power,
        max_power,
        freq_min_power: freqs[imin],
        freq_max_power: freqs[imax],
        power_mode: power_mode(power, min_power, max_power),
        power_mean,
        power_stdev,
        spectral_bandwidth: bandwidth,
        spectral_centroid: centroid,
        spectral_energy: energy,
        spectral_entropy: entropy,
        spectral_flatness: flatness,
        spectral_flux: flux,
        spectral_kurtosis: kurtosis,
        spectral_periodicity: periodicity,
        spectral_rolloff: spectral_rolloff(p, ROLLOFF_FRACTION),
        spectral_spread: spread,
        spectral_skewness: skewness,
        spectral_slope: if count >= 2 { ols_slope(freqs, power) } else { f64::NAN },
        spectral_zero_cross_rate: zero_cross_rate,
    }
}
