//! Kernel distribution and density estimators.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    Gaussian,
    Epanechnikov,
}

// Beyond this many bandwidths the Gaussian kernel's integral is 0 or 1 to
// within the smallest subnormal.
const GAUSSIAN_REACH: f64 = 39.0;

impl KernelId {
    /// Kernel density `k(u)`.
    pub fn density(self, u: f64) -> f64 {
        match self {
            KernelId::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            KernelId::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// Integrated kernel `K(u) = ∫_{-∞}^u k`.
    pub fn integrated(self, u: f64) -> f64 {
        match self {
            KernelId::Gaussian => 0.5 * erfc(-u * FRAC_1_SQRT_2),
            KernelId::Epanechnikov => {
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    0.25 * (2.0 + 3.0 * u - u * u * u)
                }
            }
        }
    }

    /// Half-width (in bandwidths) outside which `K` is exactly 0 or 1.
    pub fn reach(self) -> f64 {
        match self {
            KernelId::Gaussian => GAUSSIAN_REACH,
            KernelId::Epanechnikov => 1.0,
        }
    }

    /// `2 ∫ u k(u) K(u) du`.
    pub fn psi(self) -> f64 {
        match self {
            KernelId::Gaussian => 1.0 / PI.sqrt(),
            KernelId::Epanechnikov => 9.0 / 35.0,
        }
    }

    /// Second moment `∫ u² k(u) du`.
    pub fn second_moment(self) -> f64 {
        match self {
            KernelId::Gaussian => 1.0,
            KernelId::Epanechnikov => 0.2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Gaussian => "gaussian",
            KernelId::Epanechnikov => "epanechnikov",
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelId::Gaussian),
            "epanechnikov" => Ok(KernelId::Epanechnikov),
            _ => Err(Error::parse(
                s,
                "unknown kernel (expected gaussian|epanechnikov)",
            )),
        }
    }
}

/// Positive, finite smoothing parameter in data units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 {
            Ok(Bandwidth(h))
        } else {
            Err(Error::domain(format!(
                "bandwidth must be positive and finite, got {h}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = Error;

    fn try_from(h: f64) -> Result<Self> {
        Bandwidth::new(h)
    }
}

impl From<Bandwidth> for f64 {
    fn from(h: Bandwidth) -> f64 {
        h.0
    }
}

/// Kernel estimator over a sorted sample; evaluation only visits the
/// observations within the kernel's reach of `x`.
#[derive(Debug, Clone, Copy)]
pub struct KernelEstimator<'a> {
    sorted: &'a [f64],
    h: f64,
    kernel: KernelId,
}

impl<'a> KernelEstimator<'a> {
    pub fn new(sample: &'a Sample, h: Bandwidth, kernel: KernelId) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::domain("kernel estimator needs a nonempty sample"));
        }
        Ok(KernelEstimator {
            sorted: sample.sorted(),
            h: h.get(),
            kernel,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> KernelId {
        self.kernel
    }

    fn window(&self, x: f64) -> (usize, usize) {
        let r = self.kernel.reach() * self.h;
        let lo = self.sorted.partition_point(|&v| v < x - r);
        let hi = self.sorted.partition_point(|&v| v <= x + r);
        (lo, hi.max(lo))
    }

    /// Unnormalized sum `Σ K((x - X_i)/h)`.
    pub fn cdf_sum(&self, x: f64) -> f64 {
        let (lo, hi) = self.window(x);
        let inner: f64 = self.sorted[lo..hi]
            .iter()
            .map(|&v| self.kernel.integrated((x - v) / self.h))
            .sum();
        lo as f64 + inner
    }

    /// `F̂(x) = n⁻¹ Σ K((x - X_i)/h)`.
    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf_sum(x) / self.sorted.len() as f64).clamp(0.0, 1.0)
    }

    /// `f̂(x) = (nh)⁻¹ Σ k((x - X_i)/h)`.
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.window(x);
        let s: f64 = self.sorted[lo..hi]
            .iter()
            .map(|&v| self.kernel.density((x - v) / self.h))
            .sum();
        s / (self.sorted.len() as f64 * self.h)
    }

    /// `F̂(x)^m`.
    pub fn dsm_cdf(&self, m: usize, x: f64) -> f64 {
        self.cdf(x).powf(m as f64)
    }

    /// `m F̂(x)^{m-1} f̂(x)`.
    pub fn dsm_pdf(&self, m: usize, x: f64) -> f64 {
        if m == 1 {
            return self.pdf(x);
        }
        let f = self.pdf(x);
        if f == 0.0 {
            return 0.0;
        }
        m as f64 * self.cdf(x).powf((m - 1) as f64) * f
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::domain("m must be at least 1"))
    } else {
        Ok(())
    }
}

pub fn kcdf(sample: &Sample, h: Bandwidth, kernel: KernelId, x: f64) -> Result<f64> {
    Ok(KernelEstimator::new(sample, h, kernel)?.cdf(x))
}

pub fn kpdf(sample: &Sample, h: Bandwidth, kernel: KernelId, x: f64) -> Result<f64> {
    Ok(KernelEstimator::new(sample, h, kernel)?.pdf(x))
}

/// Nonparametric estimate of the law of the maximum, `F̂(x)^m`.
pub fn np_dsm_cdf(
    sample: &Sample,
    h: Bandwidth,
    kernel: KernelId,
    m: usize,
    x: f64,
) -> Result<f64> {
    check_m(m)?;
    Ok(KernelEstimator::new(sample, h, kernel)?.dsm_cdf(m, x))
}

/// Derivative of [`np_dsm_cdf`] in `x`.
pub fn np_dsm_pdf(
    sample: &Sample,
    h: Bandwidth,
    kernel: KernelId,
    m: usize,
    x: f64,
) -> Result<f64> {
    check_m(m)?;
    Ok(KernelEstimator::new(sample, h, kernel)?.dsm_pdf(m, x))
}

/// Kernel distribution estimate with observation `drop_index` (arrival
/// order) removed.
pub fn loo_kcdf(
    sample: &Sample,
    drop_index: usize,
    h: Bandwidth,
    kernel: KernelId,
    x: f64,
) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::domain(
            "leave-one-out needs at least two observations",
        ));
    }
    if drop_index >= n {
        return Err(Error::domain(format!(
            "drop index {drop_index} out of range for sample of size {n}"
        )));
    }
    let est = KernelEstimator::new(sample, h, kernel)?;
    let dropped = kernel.integrated((x - sample.values()[drop_index]) / h.get());
    Ok(((est.cdf_sum(x) - dropped) / (n - 1) as f64).clamp(0.0, 1.0))
}

/// Normal-reference pilot bandwidth `1.06 σ̂ n^{-1/5}` with
/// `σ̂ = min(sd, IQR/1.349)`.
pub fn pilot_bandwidth(sample: &Sample) -> Result<f64> {
    let scale = sample.robust_scale();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::estimation("sample has zero spread"));
    }
    Ok(1.06 * scale * (sample.len() as f64).powf(-0.2))
}

/// `∫ (f̂'_λ)²` for a Gaussian kernel density estimate with bandwidth `λ`,
/// evaluated in closed form as a double sum over pairs.
pub fn density_derivative_roughness(sample: &Sample, lambda: f64) -> f64 {
    // ∫ φ'(u) φ'(u + d) du = e^{-d²/4} / (2√π) · (1/2 - d²/4)
    let pair = |d: f64| {
        let d2 = d * d;
        (-0.25 * d2).exp() * (0.5 - 0.25 * d2)
    };
    let xs = sample.sorted();
    let n = xs.len();
    // e^{-d²/4} underflows past d ≈ 55.
    let cutoff = 56.0 * lambda;
    let mut off_diag = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = xs[j] - xs[i];
            if diff > cutoff {
                break;
            }
            off_diag += pair(diff / lambda);
        }
    }
    let total = n as f64 * pair(0.0) + 2.0 * off_diag;
    total / (2.0 * PI.sqrt()) / ((n * n) as f64 * lambda.powi(3))
}

/// Plug-in bandwidth minimizing the asymptotic integrated squared error of
/// the kernel distribution estimator:
/// `h = [ψ(k) / (R₂(k)² Î)]^{1/3} n^{-1/3}`, with `Î` the roughness of a
/// Gaussian pilot density derivative.
pub fn plugin_bandwidth(sample: &Sample, kernel: KernelId) -> Result<Bandwidth> {
    plugin_bandwidth_with_pilot(sample, kernel, None)
}

/// As [`plugin_bandwidth`], with an optional explicit pilot bandwidth.
pub fn plugin_bandwidth_with_pilot(
    sample: &Sample,
    kernel: KernelId,
    pilot: Option<f64>,
) -> Result<Bandwidth> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::domain(
            "plug-in bandwidth needs at least four observations",
        ));
    }
    let lambda = match pilot {
        Some(l) => {
            Bandwidth::new(l)?;
            l
        }
        None => pilot_bandwidth(sample)?,
    };
    let roughness = density_derivative_roughness(sample, lambda);
    if !(roughness > 0.0 && roughness.is_finite()) {
        return Err(Error::estimation(format!(
            "pilot roughness estimate is not usable ({roughness})"
        )));
    }
    plugin_from_roughness(n, kernel, roughness)
}

/// Plug-in bandwidth for a given value of `∫(f')²`.
pub fn plugin_from_roughness(n: usize, kernel: KernelId, roughness: f64) -> Result<Bandwidth> {
    let r2 = kernel.second_moment();
    let h = (kernel.psi() / (r2 * r2 * roughness)).cbrt() * (n as f64).powf(-1.0 / 3.0);
    Bandwidth::new(h).map_err(|e| Error::estimation(e.to_string()))
}
