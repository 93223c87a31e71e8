//! Report counts over time and spike detection.
//!
//! A bucket is flagged when its count exceeds the mean of the preceding
//! `window` buckets by more than `threshold` sample standard deviations of
//! those buckets. Only trailing data is used, so the detector also works on
//! an append-only corpus.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "year" => Ok(Granularity::Year),
            "month" => Ok(Granularity::Month),
            other => Err(Error::InvalidInput(format!(
                "unknown granularity {other:?}"
            ))),
        }
    }
}

/// A calendar year or month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    pub year: i32,
    /// 1-based; None for yearly periods.
    pub month: Option<u32>,
}

impl Period {
    pub fn of(date: NaiveDate, granularity: Granularity) -> Self {
        Period {
            year: date.year(),
            month: match granularity {
                Granularity::Year => None,
                Granularity::Month => Some(date.month()),
            },
        }
    }

    pub fn next(self) -> Self {
        match self.month {
            None => Period {
                year: self.year + 1,
                month: None,
            },
            Some(12) => Period {
                year: self.year + 1,
                month: Some(1),
            },
            Some(m) => Period {
                year: self.year,
                month: Some(m + 1),
            },
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.month {
            None => write!(f, "{}", self.year),
            Some(m) => write!(f, "{}-{m:02}", self.year),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let bad = || serde::de::Error::custom(format!("invalid period {text:?}"));
        match text.split_once('-') {
            None => Ok(Period {
                year: text.parse().map_err(|_| bad())?,
                month: None,
            }),
            Some((y, m)) => {
                let month: u32 = m.parse().map_err(|_| bad())?;
                if !(1..=12).contains(&month) {
                    return Err(bad());
                }
                Ok(Period {
                    year: y.parse().map_err(|_| bad())?,
                    month: Some(month),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub period: Period,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub topic_name: String,
    pub granularity: Granularity,
    pub buckets: Vec<Bucket>,
}

impl TrendSeries {
    pub fn total(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,count\n");
        for b in &self.buckets {
            out.push_str(&format!("{},{}\n", b.period, b.count));
        }
        out
    }
}

/// Counts dates per period over `[from, to]`, emitting every period in the
/// range (zero counts included). Dates outside the range are ignored.
pub fn bucket_counts(
    topic_name: &str,
    dates: impl IntoIterator<Item = NaiveDate>,
    granularity: Granularity,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<TrendSeries> {
    if from > to {
        return Err(Error::InvalidRange {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    let first = Period::of(from, granularity);
    let last = Period::of(to, granularity);
    let mut buckets = Vec::new();
    let mut p = first;
    while p <= last {
        buckets.push(Bucket {
            period: p,
            count: 0,
        });
        p = p.next();
    }
    for date in dates {
        if date < from || date > to {
            continue;
        }
        let period = Period::of(date, granularity);
        let idx = buckets
            .binary_search_by(|b| b.period.cmp(&period))
            .expect("period within range");
        buckets[idx].count += 1;
    }
    Ok(TrendSeries {
        topic_name: topic_name.to_owned(),
        granularity,
        buckets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikeConfig {
    pub window: usize,
    pub threshold: f64,
    pub sigma_floor: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        Self {
            window: 4,
            threshold: 2.0,
            sigma_floor: 1e-9,
        }
    }
}

impl SpikeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2
            || self.threshold.is_nan()
            || self.threshold <= 0.0
            || self.sigma_floor.is_nan()
            || self.sigma_floor <= 0.0
        {
            return Err(Error::InvalidConfig(format!(
                "spike window must be >= 2 and threshold, sigma_floor positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub period: Period,
    pub count: usize,
    pub z_score: f64,
}

/// z-score of every bucket from index `window` on: `(x_t − MA_t) / σ_t`.
pub fn z_scores(counts: &[f64], config: &SpikeConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let w = config.window;
    if counts.len() < w + 1 {
        return Err(Error::InsufficientData {
            len: counts.len(),
            needed: w + 1,
        });
    }
    Ok((w..counts.len())
        .map(|t| {
            let past = &counts[t - w..t];
            let mean = past.iter().sum::<f64>() / w as f64;
            let var = past.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w - 1) as f64;
            let sigma = var.sqrt().max(config.sigma_floor);
            (counts[t] - mean) / sigma
        })
        .collect())
}

/// Buckets whose z-score exceeds the threshold.
pub fn detect_spikes(series: &TrendSeries, config: &SpikeConfig) -> Result<Vec<Spike>> {
    let counts: Vec<f64> = series.buckets.iter().map(|b| b.count as f64).collect();
    let z = z_scores(&counts, config)?;
    Ok(z.into_iter()
        .enumerate()
        .filter(|(_, z)| *z > config.threshold)
        .map(|(i, z_score)| {
            let b = series.buckets[i + config.window];
            Spike {
                period: b.period,
                count: b.count,
                z_score,
            }
        })
        .collect())
}
