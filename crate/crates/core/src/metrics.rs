use serde::{Deserialize, Serialize};

use crate::dist_zoo::{dsm_cdf, dsm_quantile, DistributionSpec};
use crate::error::{Error, Result};

pub const DEFAULT_MISE_NODES: usize = 2049;

/// Normalized integrated squared error over `[Q_m(0.1), Q_m(0.9)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiseResult {
    pub value: f64,
    pub window: (f64, f64),
    pub nodes: usize,
}

impl MiseResult {
    /// Value on the ×100 scale used in result tables.
    pub fn scaled(&self) -> f64 {
        100.0 * self.value
    }

    pub fn length(&self) -> f64 {
        self.window.1 - self.window.0
    }
}

fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < 3 || nodes.is_multiple_of(2) {
        Err(Error::domain(format!(
            "Simpson's rule needs an odd node count of at least 3, got {nodes}"
        )))
    } else {
        Ok(())
    }
}

/// Composite Simpson's rule on `nodes` equally spaced points.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, nodes: usize) -> Result<f64> {
    check_nodes(nodes)?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::domain(format!(
            "quadrature bounds out of order: [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let step = (hi - lo) / (nodes - 1) as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..nodes - 1 {
        let v = f(lo + i as f64 * step);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(step / 3.0 * (f(lo) + f(hi) + 4.0 * odd + 2.0 * even))
}

/// Probability levels bounding the MISE window.
pub const WINDOW_LEVELS: (f64, f64) = (0.1, 0.9);

/// Upper limit on the number of Simpson panels in a [`MiseGrid`].
pub const MAX_PANELS: usize = 64;

/// Quadrature nodes for [`mise`] on one distribution and horizon.
///
/// The window is split into panels at quantiles of `F^m` for equally spaced
/// probability levels, and each panel gets composite Simpson with the same
/// number of intervals. Windows spanning several orders of magnitude (heavy
/// tails) are then resolved as well as short ones, while the integrand stays
/// smooth inside each panel. Building the grid evaluates `F^m` at every
/// node; reuse it across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct MiseGrid {
    xs: Vec<f64>,
    truth: Vec<f64>,
    weights: Vec<f64>,
    window: (f64, f64),
    nodes: usize,
}

impl MiseGrid {
    /// `nodes` is the total node count, shared panel edges counted once.
    pub fn new(spec: &DistributionSpec, m: usize, nodes: usize) -> Result<Self> {
        check_nodes(nodes)?;
        let (u_lo, u_hi) = WINDOW_LEVELS;
        let lo = dsm_quantile(spec, m, u_lo)?;
        let hi = dsm_quantile(spec, m, u_hi)?;
        let length = hi - lo;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::estimation(format!(
                "degenerate quantile window [{lo}, {hi}]"
            )));
        }
        let pairs = (nodes - 1) / 2;
        let panels = pairs.min(MAX_PANELS);
        let mut edges = Vec::with_capacity(panels + 1);
        edges.push(lo);
        for k in 1..panels {
            let u = u_lo + (u_hi - u_lo) * k as f64 / panels as f64;
            edges.push(dsm_quantile(spec, m, u)?);
        }
        edges.push(hi);

        let mut xs = Vec::with_capacity(nodes);
        let mut weights = Vec::with_capacity(nodes);
        xs.push(lo);
        weights.push(0.0);
        for (k, w) in edges.windows(2).enumerate() {
            // Spread the Simpson pairs as evenly as possible.
            let pk = pairs / panels + usize::from(k < pairs % panels);
            let intervals = 2 * pk;
            let step = (w[1] - w[0]) / intervals as f64;
            let base = step / 3.0 / length;
            *weights.last_mut().expect("nonempty") += base;
            for i in 1..=intervals {
                let x = if i == intervals {
                    w[1]
                } else {
                    w[0] + i as f64 * step
                };
                let c = if i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                xs.push(x);
                weights.push(c * base);
            }
        }
        let truth = xs
            .iter()
            .map(|&x| dsm_cdf(spec, m, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(MiseGrid {
            xs,
            truth,
            weights,
            window: (lo, hi),
            nodes,
        })
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// `L_m⁻¹ ∫ (Ǧ - F^m)²` over the window.
    pub fn evaluate<G: Fn(f64) -> f64>(&self, estimator_cdf: G) -> MiseResult {
        let mut value = 0.0;
        for ((&x, &t), &w) in self.xs.iter().zip(&self.truth).zip(&self.weights) {
            let d = estimator_cdf(x) - t;
            value += w * d * d;
        }
        MiseResult {
            value,
            window: self.window,
            nodes: self.nodes,
        }
    }
}

/// `L_m⁻¹ ∫_{Q_m(0.1)}^{Q_m(0.9)} (Ǧ(x) - F^m(x))² dx`, with `L_m` the
/// window length and `Q_m` the exact quantiles of `F^m`.
pub fn mise<G: Fn(f64) -> f64>(
    estimator_cdf: G,
    spec: &DistributionSpec,
    m: usize,
    nodes: usize,
) -> Result<MiseResult> {
    Ok(MiseGrid::new(spec, m, nodes)?.evaluate(estimator_cdf))
}
