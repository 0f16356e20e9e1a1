//! Histogram entropies and the Gini index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_RENYI_ORDER: f64 = 2.0;

/// Equal-width bins over `[lo, hi]`. The last bin is closed on the right; a
/// zero-width range puts everything in the first bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    /// Range spanning every value of every slice.
    pub fn spanning(samples: &[&[f64]], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Domain("bin count must be at least 1".into()));
        }
        let mut values = samples.iter().flat_map(|s| s.iter().copied()).peekable();
        if values.peek().is_none() {
            return Err(Error::Domain("cannot bin an empty sample".into()));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite value {v}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Binning { lo, hi, bins })
    }

    pub fn index(&self, v: f64) -> usize {
        let width = self.hi - self.lo;
        if width <= 0.0 {
            return 0;
        }
        (((v - self.lo) / width * self.bins as f64) as usize).min(self.bins - 1)
    }

    pub fn counts(&self, values: &[f64]) -> Vec<usize> {
        let mut counts = vec![0; self.bins];
        values.iter().for_each(|&v| counts[self.index(v)] += 1);
        counts
    }

    pub fn edges(&self) -> Vec<f64> {
        let width = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins)
            .map(|i| if i == self.bins { self.hi } else { self.lo + width * i as f64 })
            .collect()
    }
}

fn probabilities(counts: &[usize]) -> impl Iterator<Item = f64> + '_ {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(move |&c| c as f64 / total as f64)
}

pub fn shannon_from_counts(counts: &[usize]) -> f64 {
    let h = -probabilities(counts).map(|p| p * p.ln()).sum::<f64>();
    h.max(0.0)
}

pub fn renyi_from_counts(counts: &[usize], alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let s: f64 = probabilities(counts).map(|p| p.powf(alpha)).sum();
    Ok((s.ln() / (1.0 - alpha)).max(0.0))
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha == 1.0 {
        return Err(Error::Domain(
            "Rényi order 1 is the Shannon limit; use shannon_entropy".into(),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("Rényi order must be positive, got {alpha}")));
    }
    Ok(())
}

/// Shannon entropy in nats of the `bins`-bin histogram over the sample's own range.
pub fn shannon_entropy(values: &[f64], bins: usize) -> Result<f64> {
    Ok(shannon_from_counts(&Binning::spanning(&[values], bins)?.counts(values)))
}

pub fn renyi_entropy(values: &[f64], bins: usize, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    renyi_from_counts(&Binning::spanning(&[values], bins)?.counts(values), alpha)
}

/// Mean absolute difference over twice the mean, via the sorted-rank form.
pub fn gini_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("Gini index of an empty sample".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("Gini index needs finite non-negative values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total == 0.0 {
        return Err(Error::Domain("Gini index undefined for an all-zero sample".into()));
    }
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i + 1) as f64 - n - 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionMetrics {
    pub shannon: f64,
    pub renyi: f64,
    pub gini: f64,
    pub bin_count: usize,
}

impl DistributionMetrics {
    pub fn compute(values: &[f64], binning: &Binning, alpha: f64) -> Result<Self> {
        let counts = binning.counts(values);
        Ok(DistributionMetrics {
            shannon: shannon_from_counts(&counts),
            renyi: renyi_from_counts(&counts, alpha)?,
            gini: gini_index(values)?,
            bin_count: binning.bins,
        })
    }
}
