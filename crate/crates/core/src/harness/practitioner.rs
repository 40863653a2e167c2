//! Fitting the estimators to external data and forecasting from the fit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{EstimatorKnobs, Method};
use crate::harness::estimate::{Diagnostics, Evaluator, FittedModel, Prepared};
use crate::sample::Sample;

pub const MIN_FIT_SIZE: usize = 8;

/// Parses newline-separated numbers. Blank lines are skipped; anything else
/// that is not a finite number is reported with its 1-based line number.
pub fn parse_data(text: &str) -> Result<Sample> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Input {
            line: i + 1,
            reason: format!("`{t}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Input {
                line: i + 1,
                reason: format!("`{t}` is not finite"),
            });
        }
        values.push(v);
    }
    Sample::new(values)
}

pub fn read_data(path: &Path) -> Result<Sample> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_data(&text)
}

/// A fitted estimator together with the data it needs for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n: usize,
    pub m: usize,
    pub model: FittedModel,
    pub diagnostics: Diagnostics,
    pub data: Vec<f64>,
}

/// Fits one estimator. The kernel defaults to Gaussian unless `knobs`
/// fixes one.
pub fn fit(
    sample: &Sample,
    m: usize,
    method: Method,
    knobs: &EstimatorKnobs,
) -> Result<FitSummary> {
    if m < 1 {
        return Err(Error::domain("m must be at least 1"));
    }
    if sample.len() < MIN_FIT_SIZE {
        return Err(Error::domain(format!(
            "need at least {MIN_FIT_SIZE} observations, got {}",
            sample.len()
        )));
    }
    knobs.validate()?;
    let kernel = knobs.kernel.resolve(None);
    let prep = Prepared::new(sample, m, kernel, knobs)?;
    let (model, diagnostics) = prep.fit(method)?;
    Ok(FitSummary {
        n: sample.len(),
        m,
        model,
        diagnostics,
        data: sample.values().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub prob: f64,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceForecast {
    pub threshold: f64,
    pub exceedance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub method: Method,
    pub m: usize,
    pub quantiles: Vec<QuantileForecast>,
    pub exceedances: Vec<ExceedanceForecast>,
}

const MAX_EXPANSIONS: usize = 200;
const X_TOLERANCE: f64 = 1e-8;

/// Bisection for `cdf(x) = prob` after widening `start` until it brackets.
fn invert_cdf(ev: &Evaluator<'_>, prob: f64, start: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = start;
    let mut width = (hi - lo).max(1.0);
    let mut tries = 0;
    while ev.cdf(lo) >= prob {
        lo -= width;
        width *= 2.0;
        tries += 1;
        if tries > MAX_EXPANSIONS || !lo.is_finite() {
            return Err(Error::estimation(format!(
                "no lower bracket for probability {prob}"
            )));
        }
    }
    width = (hi - lo).max(1.0);
    tries = 0;
    while ev.cdf(hi) < prob {
        hi += width;
        width *= 2.0;
        tries += 1;
        if tries > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::estimation(format!(
                "no upper bracket for probability {prob}"
            )));
        }
    }
    while hi - lo > X_TOLERANCE * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ev.cdf(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Predictive quantiles of the maximum of the next `m` observations and
/// exceedance probabilities `1 - Ǧ(t)`.
pub fn forecast(summary: &FitSummary, probs: &[f64], thresholds: &[f64]) -> Result<ForecastReport> {
    for &p in probs {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability {p} is outside (0, 1)")));
        }
    }
    if let Some(t) = thresholds.iter().find(|t| !t.is_finite()) {
        return Err(Error::domain(format!("threshold {t} is not finite")));
    }
    let sample = Sample::new(summary.data.clone())?;
    let ev = summary.model.evaluator(&sample)?;
    let start = match (sample.min(), sample.max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => (0.0, 1.0),
    };
    let quantiles = probs
        .iter()
        .map(|&prob| {
            Ok(QuantileForecast {
                prob,
                quantile: invert_cdf(&ev, prob, start)?,
            })
        })
        .collect::<Result<_>>()?;
    let exceedances = thresholds
        .iter()
        .map(|&threshold| ExceedanceForecast {
            threshold,
            exceedance: (1.0 - ev.cdf(threshold)).clamp(0.0, 1.0),
        })
        .collect();
    Ok(ForecastReport {
        method: summary.model.method(),
        m: summary.m,
        quantiles,
        exceedances,
    })
}
