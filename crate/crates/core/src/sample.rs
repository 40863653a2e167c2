use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a generated sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: String,
    pub seed: u64,
}

/// Finite observations kept in arrival order, with a sorted copy for
/// order-statistic queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample", into = "RawSample")]
pub struct Sample {
    values: Vec<f64>,
    sorted: Vec<f64>,
    meta: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct RawSample {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<Provenance>,
}

impl TryFrom<RawSample> for Sample {
    type Error = Error;

    fn try_from(raw: RawSample) -> Result<Self> {
        let mut s = Sample::new(raw.values)?;
        s.meta = raw.meta;
        Ok(s)
    }
}

impl From<Sample> for RawSample {
    fn from(s: Sample) -> Self {
        RawSample {
            values: s.values,
            meta: s.meta,
        }
    }
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "sample value at index {i} is not finite ({})",
                values[i]
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Sample {
            values,
            sorted,
            meta: None,
        })
    }

    pub fn with_provenance(mut self, meta: Provenance) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.meta.as_ref()
    }

    /// Values in arrival order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nondecreasing permutation of [`Sample::values`].
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.sorted.first().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.sorted.last().copied()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (n - 1 denominator); 0 for n < 2.
    pub fn sd(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    /// Linear-interpolation quantile of the sorted values (R type 7).
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        if n == 1 {
            return self.sorted[0];
        }
        let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as f64;
        self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo])
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    /// Robust spread `min(sd, IQR / 1.349)`, ignoring a zero IQR when the
    /// standard deviation is positive.
    pub fn robust_scale(&self) -> f64 {
        let sd = self.sd();
        let iqr = self.iqr() / 1.349;
        if iqr > 0.0 {
            sd.min(iqr)
        } else {
            sd
        }
    }

    /// Empirical distribution function, `#{X_i <= x} / n`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Copy of the sample without the observation at `index` (arrival order).
    pub fn without(&self, index: usize) -> Result<Sample> {
        if index >= self.values.len() {
            return Err(Error::domain(format!(
                "index {index} out of range for sample of size {}",
                self.values.len()
            )));
        }
        let mut values = self.values.clone();
        values.remove(index);
        Sample::new(values)
    }

    /// Distinct values in the sample.
    pub fn distinct_count(&self) -> usize {
        let mut count = 0;
        let mut prev: Option<f64> = None;
        for &v in &self.sorted {
            if prev != Some(v) {
                count += 1;
                prev = Some(v);
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn sorted_view_is_permutation() {
        let s = Sample::new(vec![3.0, -1.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.sorted(), &[-1.0, 2.0, 2.0, 3.0]);
        assert_eq!(s.values(), &[3.0, -1.0, 2.0, 2.0]);
        assert_eq!(s.distinct_count(), 3);
    }

    #[test]
    fn ecdf_counts_ties() {
        let s = Sample::new(vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.ecdf(0.5), 0.0);
        assert_eq!(s.ecdf(2.0), 0.75);
        assert_eq!(s.ecdf(4.0), 1.0);
    }

    #[test]
    fn without_drops_one() {
        let s = Sample::new(vec![0.0, 5.0, 7.0]).unwrap();
        assert_eq!(s.without(1).unwrap().values(), &[0.0, 7.0]);
        assert!(s.without(3).is_err());
    }
}
