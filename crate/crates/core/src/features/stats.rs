//! Window statistics for numeric and boolean descriptor channels.

use serde::{Deserialize, Serialize};

use crate::corpus::FRAME_RATE;
use crate::error::{Error, Result};

/// Below this population variance, shape statistics are reported as 0.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stat {
    Min,
    Max,
    Mean,
    Median,
    Q1,
    Q3,
    Skewness,
    Kurtosis,
    Sd,
    Iqr12,
    Iqr23,
    Iqr13,
    Slope,
    Intercept,
    Rms,
    Zcr,
}

impl Stat {
    pub fn name(self) -> &'static str {
        match self {
            Stat::Min => "min",
            Stat::Max => "max",
            Stat::Mean => "mean",
            Stat::Median => "median",
            Stat::Q1 => "q1",
            Stat::Q3 => "q3",
            Stat::Skewness => "skewness",
            Stat::Kurtosis => "kurtosis",
            Stat::Sd => "sd",
            Stat::Iqr12 => "iqr12",
            Stat::Iqr23 => "iqr23",
            Stat::Iqr13 => "iqr13",
            Stat::Slope => "slope",
            Stat::Intercept => "intercept",
            Stat::Rms => "rms",
            Stat::Zcr => "zcr",
        }
    }
}

/// The 14 statistics applied to gaze and pupil channels.
pub const CHANNEL_STATS: [Stat; 14] = [
    Stat::Min,
    Stat::Max,
    Stat::Mean,
    Stat::Median,
    Stat::Q1,
    Stat::Q3,
    Stat::Skewness,
    Stat::Kurtosis,
    Stat::Sd,
    Stat::Iqr12,
    Stat::Iqr23,
    Stat::Iqr13,
    Stat::Slope,
    Stat::Intercept,
];

/// The 9 statistics applied to blink intensity.
pub const BLINK_STATS: [Stat; 9] = [
    Stat::Max,
    Stat::Mean,
    Stat::Median,
    Stat::Q3,
    Stat::Sd,
    Stat::Iqr12,
    Stat::Iqr23,
    Stat::Slope,
    Stat::Intercept,
];

/// Every statistic for one window, computed from a single sort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub sd: f64,
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub zcr: f64,
}

/// Linear interpolation between order statistics at position `(n-1)p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl Summary {
    pub fn compute(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("empty window".into()));
        }
        let n = values.len();
        let nf = n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);

        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;

        let flat = m2 < VARIANCE_FLOOR;
        let skewness = if flat || n < 3 { 0.0 } else { m3 / m2.powf(1.5) };
        let kurtosis = if flat || n < 4 { 0.0 } else { m4 / (m2 * m2) };
        let zcr = if flat || n < 2 {
            0.0
        } else {
            let crossings = values
                .windows(2)
                .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
                .count();
            crossings as f64 / (n - 1) as f64
        };

        // least squares against t_i = i / 25 seconds
        let (slope, intercept) = if n < 2 {
            (0.0, mean)
        } else {
            let t_mean = (nf - 1.0) / 2.0 / FRAME_RATE;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (i, &v) in values.iter().enumerate() {
                let dt = i as f64 / FRAME_RATE - t_mean;
                sxy += dt * (v - mean);
                sxx += dt * dt;
            }
            let slope = sxy / sxx;
            (slope, mean - slope * t_mean)
        };

        let rms = (values.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();

        Ok(Summary {
            min: sorted[0],
            max: sorted[n - 1],
            mean,
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
            skewness,
            kurtosis,
            sd: m2.sqrt(),
            slope,
            intercept,
            rms,
            zcr,
        })
    }

    pub fn get(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Min => self.min,
            Stat::Max => self.max,
            Stat::Mean => self.mean,
            Stat::Median => self.median,
            Stat::Q1 => self.q1,
            Stat::Q3 => self.q3,
            Stat::Skewness => self.skewness,
            Stat::Kurtosis => self.kurtosis,
            Stat::Sd => self.sd,
            Stat::Iqr12 => self.median - self.q1,
            Stat::Iqr23 => self.q3 - self.median,
            Stat::Iqr13 => self.q3 - self.q1,
            Stat::Slope => self.slope,
            Stat::Intercept => self.intercept,
            Stat::Rms => self.rms,
            Stat::Zcr => self.zcr,
        }
    }
}

/// Named statistics of a numeric window.
pub fn descriptive_stats(values: &[f64], stat_set: &[Stat]) -> Result<Vec<(Stat, f64)>> {
    let summary = Summary::compute(values)?;
    Ok(stat_set.iter().map(|&s| (s, summary.get(s))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventStat {
    Ratio,
    Min,
    Median,
    Mean,
    Max,
    Total,
}

impl EventStat {
    pub fn name(self) -> &'static str {
        match self {
            EventStat::Ratio => "ratio",
            EventStat::Min => "dur_min",
            EventStat::Median => "dur_median",
            EventStat::Mean => "dur_mean",
            EventStat::Max => "dur_max",
            EventStat::Total => "dur_total",
        }
    }
}

/// Direct gaze, pupil dilation and pupil constriction.
pub const EVENT_STATS_SHORT: [EventStat; 4] = [EventStat::Ratio, EventStat::Mean, EventStat::Max, EventStat::Total];
/// Eyes fixated and eye closure.
pub const EVENT_STATS_LONG: [EventStat; 5] = [
    EventStat::Ratio,
    EventStat::Min,
    EventStat::Median,
    EventStat::Mean,
    EventStat::Max,
];
/// Gaze approach: no minimum duration.
pub const EVENT_STATS_APPROACH: [EventStat; 4] =
    [EventStat::Ratio, EventStat::Median, EventStat::Mean, EventStat::Max];

/// Lengths, in frames, of the maximal runs of `true`. Runs touching the
/// window edges count whole.
pub fn run_lengths(flags: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for &f in flags {
        if f {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

/// Named event statistics: true-ratio and run-duration summaries in
/// seconds. With no runs every duration statistic is 0.
pub fn event_stats(flags: &[bool], stat_set: &[EventStat]) -> Result<Vec<(EventStat, f64)>> {
    if flags.is_empty() {
        return Err(Error::Argument("empty window".into()));
    }
    let ratio = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
    let mut durations: Vec<f64> = run_lengths(flags).into_iter().map(|r| r as f64 / FRAME_RATE).collect();
    durations.sort_by(f64::total_cmp);
    let k = durations.len();
    let total: f64 = durations.iter().sum();
    let (min, median, mean, max) = if k == 0 {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let median = if k % 2 == 1 {
            durations[k / 2]
        } else {
            (durations[k / 2 - 1] + durations[k / 2]) / 2.0
        };
        (durations[0], median, total / k as f64, durations[k - 1])
    };
    Ok(stat_set
        .iter()
        .map(|&s| {
            let v = match s {
                EventStat::Ratio => ratio,
                EventStat::Min => min,
                EventStat::Median => median,
                EventStat::Mean => mean,
                EventStat::Max => max,
                EventStat::Total => total,
            };
            (s, v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL_STATS: [Stat; 16] = [
        Stat::Min,
        Stat::Max,
        Stat::Mean,
        Stat::Median,
        Stat::Q1,
        Stat::Q3,
        Stat::Skewness,
        Stat::Kurtosis,
        Stat::Sd,
        Stat::Iqr12,
        Stat::Iqr23,
        Stat::Iqr13,
        Stat::Slope,
        Stat::Intercept,
        Stat::Rms,
        Stat::Zcr,
    ];

    fn get(v: &[(Stat, f64)], s: Stat) -> f64 {
        v.iter().find(|(k, _)| *k == s).unwrap().1
    }

    #[test]
    fn constant_window() {
        let r = descriptive_stats(&[2.0; 200], &ALL_STATS).unwrap();
        assert_eq!(get(&r, Stat::Sd), 0.0);
        assert_eq!(get(&r, Stat::Slope), 0.0);
        assert_eq!(get(&r, Stat::Skewness), 0.0);
        assert_eq!(get(&r, Stat::Kurtosis), 0.0);
        assert_eq!(get(&r, Stat::Zcr), 0.0);
        assert!((get(&r, Stat::Rms) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_ramp() {
        let v: Vec<f64> = (0..200).map(|i| 2.0 * (i as f64 / 25.0)).collect();
        let r = descriptive_stats(&v, &[Stat::Slope, Stat::Intercept]).unwrap();
        assert!((r[0].1 - 2.0).abs() < 1e-12);
        assert!(r[1].1.abs() < 1e-12);
    }

    /// Type-7 quantile computed from the definition on an explicit sorted
    /// copy, independent of `quantile_sorted`.
    fn quantile_oracle(values: &[f64], p: f64) -> f64 {
        let mut s = values.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (s.len() as f64 - 1.0) * p;
        let below = h.floor();
        s[below as usize] + (h - below) * (s[h.ceil() as usize] - s[below as usize])
    }

    #[test]
    fn quartiles_of_small_window() {
        let w = [1.0, 5.0, 3.0, 7.0];
        let (median, q1, q3) = (
            quantile_oracle(&w, 0.5),
            quantile_oracle(&w, 0.25),
            quantile_oracle(&w, 0.75),
        );
        assert_eq!((median, q1, q3), (4.0, 2.5, 5.5));
        let r = descriptive_stats(&w, &[Stat::Median, Stat::Q1, Stat::Q3, Stat::Iqr13]).unwrap();
        assert_eq!(r[0].1, median);
        assert_eq!(r[1].1, q1);
        assert_eq!(r[2].1, q3);
        assert_eq!(r[3].1, 3.0);
    }

    #[test]
    fn moments_of_known_sample() {
        // population moments of [1, 2, 3, 10]: mean 4, m2 = 12.5, m3 = 45, m4 = 348.5
        let r = descriptive_stats(&[1.0, 2.0, 3.0, 10.0], &[Stat::Sd, Stat::Skewness, Stat::Kurtosis]).unwrap();
        assert!((r[0].1 - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((r[1].1 - 45.0 / 12.5f64.powf(1.5)).abs() < 1e-12);
        assert!((r[2].1 - 348.5 / 156.25).abs() < 1e-12);
    }

    #[test]
    fn zero_crossings_of_mean_removed_signal() {
        // mean 10; deviations -1, 1, -1, 1 give 3 crossings over 3 gaps
        let r = descriptive_stats(&[9.0, 11.0, 9.0, 11.0], &[Stat::Zcr]).unwrap();
        assert_eq!(r[0].1, 1.0);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert!(descriptive_stats(&[], &[Stat::Mean]).is_err());
        assert!(event_stats(&[], &[EventStat::Ratio]).is_err());
    }

    #[test]
    fn event_runs() {
        let flags: Vec<bool> = [0, 1, 1, 1, 0, 0, 1, 1, 0, 0].iter().map(|&v| v == 1).collect();
        // oracle: enumerate runs by scanning boundaries
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
            match (f, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push(i - s);
                    start = None;
                }
                _ => {}
            }
        }
        assert_eq!(runs, vec![3, 2]);
        assert_eq!(run_lengths(&flags), runs);

        let all = [
            EventStat::Ratio,
            EventStat::Min,
            EventStat::Median,
            EventStat::Mean,
            EventStat::Max,
            EventStat::Total,
        ];
        let r = event_stats(&flags, &all).unwrap();
        let expect = [0.5, 0.08, 0.1, 0.1, 0.12, 0.2];
        for ((_, got), want) in r.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn event_edge_cases() {
        let r = event_stats(&[false; 200], &EVENT_STATS_LONG).unwrap();
        assert!(r.iter().all(|(_, v)| *v == 0.0));
        let r = event_stats(&[true; 200], &EVENT_STATS_SHORT).unwrap();
        assert_eq!(r[0].1, 1.0);
        assert!((r[2].1 - 8.0).abs() < 1e-12);
        assert!((r[3].1 - 8.0).abs() < 1e-12);
    }
}
