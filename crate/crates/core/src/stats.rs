//! Small statistical summaries: ECDF, Kolmogorov-Smirnov distance, and
//! histogram binning for plotting data.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("ECDF needs at least one sample".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ECDF samples must be finite".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Sorted sample points (the jump locations).
    pub fn points(&self) -> &[f64] {
        &self.sorted
    }

    /// Supremum distance to a continuous reference CDF, evaluated at the
    /// jump points from both sides.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = cdf(x);
            d = d.max(((i + 1) as f64 / n - f).abs());
            d = d.max((f - i as f64 / n).abs());
        }
        d
    }
}

/// KS distance of a sample set to `N(mean, sd^2)`.
pub fn ks_to_gaussian(samples: &[f64], mean: f64, sd: f64) -> Result<f64> {
    let ecdf = Ecdf::new(samples)?;
    if !(sd > 0.0) {
        return Err(Error::InvalidArgument(format!("reference sd must be positive, got {sd}")));
    }
    let normal = Normal::new(mean, sd)
        .map_err(|e| Error::InvalidArgument(format!("reference Gaussian: {e}")))?;
    Ok(ecdf.ks_distance(|x| normal.cdf(x)))
}

/// One histogram bin `[lo, hi)` (the last bin is closed) with its count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over the sample range.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<Bin>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("histogram needs at least one sample".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("histogram samples must be finite".into()));
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<Bin> = (0..bins)
        .map(|i| Bin { lo: lo + i as f64 * width, hi: lo + (i + 1) as f64 * width, count: 0 })
        .collect();
    for &x in samples {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    Ok(out)
}

/// Sample mean and unbiased variance.
pub fn mean_var(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}
