//! Naive reference implementations.
//!
//! Each follows the textbook formula directly, in a different evaluation
//! order from the library, so agreement is evidence rather than tautology.

use std::collections::HashMap;
use std::f64::consts::PI;

fn mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn central_moment(xs: &[f64], k: i32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / xs.len() as f64
}

fn div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::NAN
    } else {
        a / b
    }
}

/// Linear-interpolated quantile at rank `(n - 1) p` of an unsorted slice.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor();
    let i = lo as usize;
    if i + 1 >= s.len() {
        return s[i];
    }
    s[i] + (h - lo) * (s[i + 1] - s[i])
}

/// The 26 value statistics, in schema order.
pub fn statistical(values: &[u32]) -> Vec<f64> {
    let xs: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
    let n = xs.len() as f64;
    let mean = mean(&xs);
    let m2 = central_moment(&xs, 2);
    let m3 = central_moment(&xs, 3);
    let m4 = central_moment(&xs, 4);
    let sd = m2.sqrt();
    let q1 = quantile(&xs, 0.25);
    let med = quantile(&xs, 0.5);
    let q3 = quantile(&xs, 0.75);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    let top = counts.values().copied().max().unwrap();
    let mode = f64::from(*counts.iter().filter(|(_, &c)| c == top).map(|(v, _)| v).min().unwrap());
    let mut entropy = 0.0;
    for &c in counts.values() {
        let p = c as f64 / n;
        entropy -= p * p.log2();
    }
    let entropy = entropy.abs();
    let scaled = if counts.len() > 1 {
        entropy / (counts.len() as f64).log2()
    } else {
        f64::NAN
    };
    let mad = xs.iter().map(|x| (x - mean).abs()).sum::<f64>() / n;
    let above = xs.iter().filter(|&&x| x > mean).count() as f64 / n * 100.0;
    let below = xs.iter().filter(|&&x| x < mean).count() as f64 / n * 100.0;
    let g1 = if m2 == 0.0 { f64::NAN } else { m3 / m2.powf(1.5) };
    let g1_adj = if xs.len() <= 2 {
        f64::NAN
    } else {
        g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
    };
    let kurt = if m2 == 0.0 { f64::NAN } else { m4 / (m2 * m2) - 3.0 };

    vec![
        mean,
        med,
        sd,
        m2,
        div(sd - mean, sd + mean),
        q1,
        q3,
        min,
        max,
        min - max,
        mode,
        div(mad, mean) * 100.0,
        mad,
        (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        above,
        below,
        div(sd, mean),
        g1_adj,
        g1,
        m3,
        div(mean - mode, sd),
        div(3.0 * (mean - med), sd),
        div(q1 + q3 - 2.0 * med, q3 - q1),
        kurt,
        entropy,
        scaled,
    ]
}

/// Natural magnitude of each statistical feature, used as a relative-error floor.
pub fn statistical_scales(values: &[u32]) -> Vec<f64> {
    let xs: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
    let big = xs.iter().cloned().fold(1.0, f64::max);
    let mut scales = vec![big; 26];
    // Dimensionless ratios and percents.
    for i in [4, 11, 14, 15, 16, 17, 18, 20, 21, 22, 23, 24, 25] {
        scales[i] = 1.0;
    }
    scales[3] = big * big;
    scales[19] = central_moment(&xs, 2).powf(1.5).max(1.0);
    scales
}

/// The nine time features from absolute timestamps.
pub fn temporal(times: &[f64]) -> Vec<f64> {
    let rt: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
    let dt: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let (dt_mean, dt_med, dt_min, dt_max) = if dt.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            mean(&dt),
            quantile(&dt, 0.5),
            dt.iter().cloned().fold(f64::INFINITY, f64::min),
            dt.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    vec![
        mean(&rt),
        quantile(&rt, 0.5),
        quantile(&rt, 0.25),
        quantile(&rt, 0.75),
        dt_mean,
        dt_med,
        dt_min,
        dt_max,
        rt[rt.len() - 1],
    ]
}

/// Textbook Lomb-Scargle with an explicit time offset per frequency.
pub fn lomb_scargle(times: &[f64], values: &[f64], freqs: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    let t0 = times[0];
    freqs
        .iter()
        .map(|&f| {
            if var == 0.0 {
                return 0.0;
            }
            let w = 2.0 * PI * f;
            let (mut s2, mut c2) = (0.0, 0.0);
            for &t in times {
                s2 += (2.0 * w * (t - t0)).sin();
                c2 += (2.0 * w * (t - t0)).cos();
            }
            let tau = s2.atan2(c2) / (2.0 * w);
            let (mut yc, mut ys, mut cc, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for (&t, &v) in times.iter().zip(values) {
                let arg = w * (t - t0 - tau);
                yc += (v - m) * arg.cos();
                ys += (v - m) * arg.sin();
                cc += arg.cos() * arg.cos();
                ss += arg.sin() * arg.sin();
            }
            let tiny = n * 1e-12;
            let mut p = 0.0;
            if cc > tiny {
                p += yc * yc / cc;
            }
            if ss > tiny {
                p += ys * ys / ss;
            }
            p / (2.0 * var)
        })
        .collect()
}

/// Squared magnitude of the direct Fourier sum of the centered series.
pub fn dft_power(times: &[f64], values: &[f64], freqs: &[f64]) -> Vec<f64> {
    let m = mean(values);
    freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            let (mut re, mut im) = (0.0, 0.0);
            for (&t, &v) in times.iter().zip(values) {
                re += (v - m) * (w * t).cos();
                im -= (v - m) * (w * t).sin();
            }
            re * re + im * im
        })
        .collect()
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Smallest frequency at which a from-scratch prefix sum reaches `fraction` of the total.
pub fn rolloff(freqs: &[f64], power: &[f64], fraction: f64) -> f64 {
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return f64::NAN;
    }
    for k in 0..power.len() {
        let prefix: f64 = power[..=k].iter().sum();
        if prefix >= fraction * total {
            return freqs[k];
        }
    }
    freqs[freqs.len() - 1]
}

/// The 20 frequency features of a spectrum, in schema order.
pub fn frequency(freqs: &[f64], p: &[f64]) -> Vec<f64> {
    let k = p.len() as f64;
    let mut imin = 0;
    let mut imax = 0;
    for i in 0..p.len() {
        if p[i] < p[imin] {
            imin = i;
        }
        if p[i] > p[imax] {
            imax = i;
        }
    }
    let energy: f64 = p.iter().sum();
    let pm = energy / k;
    let psd = (p.iter().map(|v| (v - pm).powi(2)).sum::<f64>() / k).sqrt();

    let (lo, hi) = (p[imin], p[imax]);
    let mode = if hi > lo {
        let width = (hi - lo) / 64.0;
        let mut bins = [0usize; 64];
        for &v in p {
            let b = ((v - lo) / width).floor() as usize;
            bins[b.min(63)] += 1;
        }
        let best = (0..64).fold(0, |b, i| if bins[i] > bins[b] { i } else { b });
        lo + (best as f64 + 0.5) * width
    } else {
        lo
    };

    let centroid = div(freqs.iter().zip(p).map(|(f, v)| f * v).sum(), energy);
    let mom = |e: i32| div(freqs.iter().zip(p).map(|(f, v)| v * (f - centroid).powi(e)).sum(), energy);
    let bw = mom(2).sqrt();
    let (skew, kurt) = if bw > 0.0 {
        (mom(3) / bw.powi(3), mom(4) / bw.powi(4))
    } else {
        (f64::NAN, f64::NAN)
    };
    let (entropy, flux) = if energy > 0.0 {
        let q: Vec<f64> = p.iter().map(|v| v / energy).collect();
        let mut e = 0.0;
        for &x in &q {
            if x > 0.0 {
                e -= x * x.log2();
            }
        }
        let mut fl = 0.0;
        for i in 1..q.len() {
            fl += (q[i] - q[i - 1]) * (q[i] - q[i - 1]);
        }
        (e.abs(), fl)
    } else {
        (f64::NAN, f64::NAN)
    };
    let flatness = if !(energy > 0.0) {
        f64::NAN
    } else if p.contains(&0.0) {
        0.0
    } else {
        (p.iter().map(|v| v.ln()).sum::<f64>() / k).exp() / pm
    };
    let periodicity = (1.0 - (-hi).exp()).powf(k);
    let spread = if energy > 0.0 {
        let above: Vec<f64> = freqs.iter().zip(p).filter(|(_, &v)| v > pm).map(|(&f, _)| f).collect();
        if above.is_empty() {
            0.0
        } else {
            above[above.len() - 1] - above[0]
        }
    } else {
        f64::NAN
    };
    let slope = if p.len() >= 2 {
        let mf = mean(freqs);
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for (f, v) in freqs.iter().zip(p) {
            sxy += (f - mf) * (v - pm);
            sxx += (f - mf) * (f - mf);
        }
        div(sxy, sxx)
    } else {
        f64::NAN
    };
    let zcr = if p.len() >= 2 {
        let mut c = 0;
        for i in 1..p.len() {
            if (p[i] > pm) != (p[i - 1] > pm) {
                c += 1;
            }
        }
        c as f64 / (k - 1.0)
    } else {
        f64::NAN
    };

    vec![
        lo,
        hi,
        freqs[imin],
        freqs[imax],
        mode,
        pm,
        psd,
        bw,
        centroid,
        energy,
        entropy,
        flatness,
        flux,
        kurt,
        periodicity,
        rolloff(freqs, p, 0.85),
        spread,
        skew,
        slope,
        zcr,
    ]
}

/// One-second bucket simulation: (count of buckets, empty buckets, largest byte sum).
pub fn buckets(times: &[f64], values: &[u32]) -> (usize, usize, u64) {
    let rt: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
    let duration = rt[rt.len() - 1];
    let mut count = 1;
    while (count as f64) <= duration {
        count += 1;
    }
    let mut empty = 0;
    let mut biggest = 0u64;
    for k in 0..count {
        let (lo, hi) = (k as f64, k as f64 + 1.0);
        let mut hit = false;
        let mut bytes = 0u64;
        for (&t, &v) in rt.iter().zip(values) {
            if t >= lo && t < hi {
                hit = true;
                bytes += u64::from(v);
            }
        }
        if !hit {
            empty += 1;
        }
        biggest = biggest.max(bytes);
    }
    (count, empty, biggest)
}
