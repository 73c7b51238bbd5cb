//! Kolmogorov–Smirnov tests, histograms and the report record shared by all
//! verification checks.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One comparison: a statistic against a critical value. `verdict` is pass
/// exactly when `statistic <= critical_value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub test_name: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub n_samples: u64,
    pub verdict: Verdict,
    pub metadata: BTreeMap<String, Value>,
}

impl StatReport {
    pub fn new(test_name: impl Into<String>, statistic: f64, critical_value: f64, n_samples: u64) -> Self {
        let verdict = if statistic <= critical_value { Verdict::Pass } else { Verdict::Fail };
        let mut r = StatReport {
            test_name: test_name.into(),
            statistic,
            critical_value,
            n_samples,
            verdict,
            metadata: BTreeMap::new(),
        };
        r.refresh_digest();
        r
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.metadata.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self.refresh_digest();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn refresh_digest(&mut self) {
        self.metadata.remove("config_digest");
        let body = serde_json::to_string(&(&self.test_name, &self.metadata)).unwrap_or_default();
        self.metadata.insert("config_digest".into(), Value::String(hex::encode(&Sha256::digest(body.as_bytes())[..8])));
    }
}

/// `c(alpha) = sqrt(-ln(alpha/2)/2)`, the asymptotic KS quantile.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Per-test level for a family of `k` tests at overall level `alpha`.
pub fn bonferroni(alpha: f64, k: usize) -> f64 {
    alpha / k.max(1) as f64
}

pub const DEFAULT_ALPHA: f64 = 0.01;

/// One-sample KS distance of sorted samples from a continuous CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sorted.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("samples must be sorted".into()));
    }
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

pub fn ks_test(name: &str, sorted: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<StatReport> {
    if sorted.len() < 10 {
        return Err(Error::Domain(format!("KS needs at least 10 samples, got {}", sorted.len())));
    }
    let d = ks_statistic(sorted, cdf)?;
    let n = sorted.len();
    Ok(StatReport::new(name, d, ks_coefficient(alpha) / (n as f64).sqrt(), n as u64).with("alpha", alpha))
}

/// Two-sample KS distance between sorted samples.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    if a.windows(2).any(|w| w[1] < w[0]) || b.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("samples must be sorted".into()));
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(name: &str, a: &[f64], b: &[f64], alpha: f64) -> Result<StatReport> {
    if a.len() < 10 || b.len() < 10 {
        return Err(Error::Domain("KS needs at least 10 samples per side".into()));
    }
    let d = ks_two_sample_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let crit = ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt();
    Ok(StatReport::new(name, d, crit, (a.len() + b.len()) as u64).with("alpha", alpha))
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Binned counts with edges; values outside the edges are not counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn from_samples(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        let bins = bins.max(1);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let w = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * w }).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = (((v - lo) / w) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Histogram { edges, counts, total: values.len() as u64 })
    }

    /// Empirical CDF at the right edge of each bin.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0u64;
        self.counts
            .iter()
            .map(|c| {
                acc += c;
                acc as f64 / self.total as f64
            })
            .collect()
    }
}
