//! Crisis cutoffs from the valley of a bimodal probability histogram, the
//! resulting binary labels, and the CMAX drawdown comparator.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{PriceSeries, DATE_FORMAT};
use crate::error::{Error, Result};

pub const FALLBACK_CUTOFF: f64 = 0.5;
const MIN_VALUES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoPeakConfig {
    pub bins: usize,
    pub smooth_window: usize,
}

impl Default for TwoPeakConfig {
    fn default() -> Self {
        Self {
            bins: 50,
            smooth_window: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub smoothed: Vec<f64>,
}

impl SmoothedHistogram {
    /// Uniform bins on `[0, 1]`; the value 1.0 lands in the last bin.
    pub fn build(values: &[f64], bins: usize, smooth_window: usize) -> Result<Self> {
        if bins == 0 || smooth_window == 0 {
            return Err(Error::validation("bins and smooth_window must be positive"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("probability {v} outside [0, 1]")));
        }
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = ((v * bins as f64) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Ok(Self::from_counts(counts, smooth_window))
    }

    pub fn from_counts(counts: Vec<u64>, smooth_window: usize) -> Self {
        let bins = counts.len();
        let bin_edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let smoothed = moving_average(&counts, smooth_window);
        Self {
            bin_edges,
            counts,
            smoothed,
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_center", "count", "smoothed"])?;
        for i in 0..self.counts.len() {
            w.write_record([
                self.center(i).to_string(),
                self.counts[i].to_string(),
                self.smoothed[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Centered moving average; the window is truncated at the edges.
fn moving_average(counts: &[u64], window: usize) -> Vec<f64> {
    let half_lo = (window - 1) / 2;
    let half_hi = window / 2;
    (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi).min(counts.len() - 1);
            let s: u64 = counts[lo..=hi].iter().sum();
            s as f64 / (hi - lo + 1) as f64
        })
        .collect()
}

/// Local maxima of `h`. A plateau counts once, at its middle bin, when both
/// flanking bins are strictly lower; the histogram edges count as lower.
pub fn local_maxima(h: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < h.len() {
        let mut j = i;
        while j + 1 < h.len() && h[j + 1] == h[i] {
            j += 1;
        }
        let left_lower = i == 0 || h[i - 1] < h[i];
        let right_lower = j + 1 == h.len() || h[j + 1] < h[i];
        if left_lower && right_lower && h[i] > 0.0 {
            peaks.push((i + j) / 2);
        }
        i = j + 1;
    }
    peaks
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffChoice {
    pub cutoff: f64,
    /// `(left, right)` peak bins, absent on fallback.
    pub peaks: Option<(usize, usize)>,
    pub valley_bin: Option<usize>,
    pub fallback: bool,
    pub histogram: SmoothedHistogram,
}

/// Cutoff at the lowest smoothed bin between the two dominant peaks.
///
/// Peaks are ranked by height; equal heights prefer the wider pair. Equal
/// valley bins resolve to the leftmost. Without two peaks the cutoff falls
/// back to [`FALLBACK_CUTOFF`].
pub fn two_peak_cutoff(values: &[f64], cfg: &TwoPeakConfig) -> Result<CutoffChoice> {
    if values.is_empty() {
        return Err(Error::validation("two-peak cutoff on empty input"));
    }
    if values.len() < MIN_VALUES {
        return Err(Error::InsufficientData {
            needed: MIN_VALUES,
            got: values.len(),
        });
    }
    if cfg.bins < 5 {
        return Err(Error::validation(format!("need at least 5 bins, got {}", cfg.bins)));
    }
    let histogram = SmoothedHistogram::build(values, cfg.bins, cfg.smooth_window)?;
    Ok(cutoff_from_histogram(histogram))
}

pub fn cutoff_from_histogram(histogram: SmoothedHistogram) -> CutoffChoice {
    let h = &histogram.smoothed;
    let peaks = local_maxima(h);
    let mut best: Option<(usize, usize)> = None;
    for (a, &i) in peaks.iter().enumerate() {
        for &j in &peaks[a + 1..] {
            let key = |(l, r): (usize, usize)| (h[l].max(h[r]), h[l].min(h[r]), r - l);
            let better = match best {
                None => true,
                Some(b) => {
                    let (k1, k2) = (key((i, j)), key(b));
                    (k1.0, k1.1) > (k2.0, k2.1) || ((k1.0, k1.1) == (k2.0, k2.1) && k1.2 > k2.2)
                }
            };
            if better {
                best = Some((i, j));
            }
        }
    }
    let valley = best.and_then(|(l, r)| {
        (l + 1..r).fold(None, |acc: Option<usize>, k| match acc {
            Some(m) if h[m] <= h[k] => Some(m),
            _ => Some(k),
        })
    });
    match (best, valley) {
        (Some(peaks), Some(v)) => CutoffChoice {
            cutoff: histogram.center(v),
            peaks: Some(peaks),
            valley_bin: Some(v),
            fallback: false,
            histogram,
        },
        _ => {
            log::debug!("two-peak cutoff: fewer than two peaks, using {FALLBACK_CUTOFF}");
            CutoffChoice {
                cutoff: FALLBACK_CUTOFF,
                peaks: None,
                valley_bin: None,
                fallback: true,
                histogram,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrisisSeries {
    pub dates: Vec<NaiveDate>,
    pub labels: Vec<u8>,
    pub cutoffs: Vec<f64>,
}

impl CrisisSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "label", "cutoff"])?;
        for i in 0..self.labels.len() {
            w.write_record([
                self.dates[i].format(DATE_FORMAT).to_string(),
                self.labels[i].to_string(),
                self.cutoffs[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<CrisisSeries> {
        let t = crate::data::read_dated_table(path, "date")?;
        let labels = t
            .column("label")
            .ok_or_else(|| Error::validation("crisis file lacks a `label` column"))?;
        let cutoffs = t
            .column("cutoff")
            .ok_or_else(|| Error::validation("crisis file lacks a `cutoff` column"))?;
        Ok(CrisisSeries {
            labels: labels.iter().map(|v| u8::from(*v >= 0.5)).collect(),
            cutoffs: cutoffs.to_vec(),
            dates: t.dates,
        })
    }
}

pub fn label_values(prob_high: &[f64], cutoff: f64) -> Vec<u8> {
    prob_high.iter().map(|p| u8::from(*p >= cutoff)).collect()
}

pub fn label_crises(dates: &[NaiveDate], prob_high: &[f64], cutoff: f64) -> Result<CrisisSeries> {
    if !(0.0..=1.0).contains(&cutoff) {
        return Err(Error::validation(format!("cutoff {cutoff} outside [0, 1]")));
    }
    if dates.len() != prob_high.len() {
        return Err(Error::Shape(format!(
            "{} dates vs {} probabilities",
            dates.len(),
            prob_high.len()
        )));
    }
    Ok(CrisisSeries {
        dates: dates.to_vec(),
        labels: label_values(prob_high, cutoff),
        cutoffs: vec![cutoff; prob_high.len()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSummary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub median: f64,
    pub mode: f64,
    pub range: f64,
}

/// Sample statistics of a cutoff series. The mode is taken over values
/// rounded to three decimals, ties to the smallest.
pub fn cutoff_statistics(cutoffs: &[f64]) -> Result<CutoffSummary> {
    if cutoffs.is_empty() {
        return Err(Error::validation("cutoff statistics on empty series"));
    }
    let n = cutoffs.len();
    let mean = cutoffs.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        (cutoffs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = cutoffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mut rounded: Vec<i64> = sorted.iter().map(|c| (c * 1000.0).round() as i64).collect();
    rounded.sort_unstable();
    let (mut mode, mut best, mut i) = (rounded[0], 0usize, 0usize);
    while i < rounded.len() {
        let j = rounded[i..].iter().take_while(|v| **v == rounded[i]).count();
        if j > best {
            best = j;
            mode = rounded[i];
        }
        i += j;
    }
    Ok(CutoffSummary {
        count: n,
        mean,
        std_dev,
        median,
        mode: mode as f64 / 1000.0,
        range: sorted[n - 1] - sorted[0],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaxSeries {
    pub cmax: Vec<f64>,
    pub crisis: CrisisSeries,
}

/// CMAX crash indicator: `close_t / max(close over the trailing window)`,
/// flagged when it drops below `mu_t - lambda * sigma_t` of its own
/// expanding history. Output starts at the first full window.
pub fn cmax_labels(prices: &PriceSeries, window: usize, lambda: f64) -> Result<CmaxSeries> {
    if window < 2 {
        return Err(Error::validation("CMAX window must be at least 2"));
    }
    if prices.len() <= window {
        return Err(Error::InsufficientData {
            needed: window + 1,
            got: prices.len(),
        });
    }
    let close = prices.close();
    let mut cmax = Vec::with_capacity(close.len() + 1 - window);
    let mut labels = Vec::with_capacity(cmax.capacity());
    let mut cutoffs = Vec::with_capacity(cmax.capacity());
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for t in window - 1..close.len() {
        let peak = close[t + 1 - window..=t].iter().copied().fold(f64::MIN, f64::max);
        let c = close[t] / peak;
        cmax.push(c);
        sum += c;
        sum_sq += c * c;
        let n = cmax.len() as f64;
        let mu = sum / n;
        let sigma = (sum_sq / n - mu * mu).max(0.0).sqrt();
        let bar = mu - lambda * sigma;
        labels.push(u8::from(c < bar));
        cutoffs.push(bar);
    }
    Ok(CmaxSeries {
        cmax,
        crisis: CrisisSeries {
            dates: prices.dates()[window - 1..].to_vec(),
            labels,
            cutoffs,
        },
    })
}
