//! Semiparametric estimators of the distribution of the sample maximum.
//!
//! Both mix the extrapolated GEV fit `G` with the kernel plug-in `F̂^m`:
//!
//! * the pseudolikelihood mixture `p G + (1-p) F̂^m(·; ĥ)`, where `ĥ` is the
//!   plug-in bandwidth and `p` maximizes `Σ log g̃(X_i; p, ĥ)`;
//! * the cross-validated mixture `q G + (1-q) F̂^m(·; h)` with
//!   `q = h/(1+h)`, where `h` minimizes
//!   `∫ Ĝ²(x; h) dx - (2/n) Σ Ĝ^{(-i)}(X_i; h)`.
//!
//! In the leave-one-out term only the kernel part drops `X_i`; the GEV part
//! stays fixed unless per-observation GEV values are supplied via
//! [`CvOptions::loo_gev`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev_fit::GevParams;
use crate::kernel_est::{Bandwidth, KernelEstimator, KernelId};
use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlMixFit {
    pub p: f64,
    pub h: Bandwidth,
    pub gev: GevParams,
    pub kernel: KernelId,
    pub m: usize,
    pub loglik_at_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvMixFit {
    pub h: Bandwidth,
    /// Mixing weight `h/(1+h)`.
    pub q: f64,
    pub gev: GevParams,
    pub kernel: KernelId,
    pub m: usize,
    pub cv_value: f64,
}

/// Integration range of the CV criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::domain(format!("invalid window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    /// `[min - c σ̂, max + c σ̂]` with `σ̂ = min(sd, IQR/1.349)`.
    pub fn around(sample: &Sample, padding_factor: f64) -> Result<Self> {
        let (lo, hi) = match (sample.min(), sample.max()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(Error::domain("window needs a nonempty sample")),
        };
        let pad = padding_factor * sample.robust_scale();
        Window::new(lo - pad, hi + pad)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// `w G(x) + (1 - w) F̂^m(x)` for a fixed weight and bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct Mixture<'a> {
    pub weight: f64,
    pub gev: GevParams,
    pub kernel: KernelEstimator<'a>,
    pub m: usize,
}

impl<'a> Mixture<'a> {
    pub fn cdf(&self, x: f64) -> f64 {
        let w = self.weight;
        let par = if w > 0.0 { self.gev.cdf(x) } else { 0.0 };
        let np = if w < 1.0 {
            self.kernel.dsm_cdf(self.m, x)
        } else {
            0.0
        };
        (w * par + (1.0 - w) * np).clamp(0.0, 1.0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let w = self.weight;
        let par = if w > 0.0 { self.gev.pdf(x) } else { 0.0 };
        let np = if w < 1.0 {
            self.kernel.dsm_pdf(self.m, x)
        } else {
            0.0
        };
        w * par + (1.0 - w) * np
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::domain("m must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_weight(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "mixing weight must lie in [0, 1], got {p}"
        )))
    }
}

impl MlMixFit {
    pub fn mixture<'a>(&self, sample: &'a Sample) -> Result<Mixture<'a>> {
        check_weight(self.p)?;
        check_m(self.m)?;
        Ok(Mixture {
            weight: self.p,
            gev: self.gev,
            kernel: KernelEstimator::new(sample, self.h, self.kernel)?,
            m: self.m,
        })
    }
}

impl CvMixFit {
    pub fn new(h: Bandwidth, gev: GevParams, kernel: KernelId, m: usize, cv_value: f64) -> Self {
        CvMixFit {
            h,
            q: mixing_weight(h),
            gev,
            kernel,
            m,
            cv_value,
        }
    }

    pub fn mixture<'a>(&self, sample: &'a Sample) -> Result<Mixture<'a>> {
        check_m(self.m)?;
        Ok(Mixture {
            weight: mixing_weight(self.h),
            gev: self.gev,
            kernel: KernelEstimator::new(sample, self.h, self.kernel)?,
            m: self.m,
        })
    }
}

/// `h/(1+h)`.
pub fn mixing_weight(h: Bandwidth) -> f64 {
    let h = h.get();
    h / (1.0 + h)
}

pub fn ml_mix_cdf(fit: &MlMixFit, sample: &Sample, x: f64) -> Result<f64> {
    Ok(fit.mixture(sample)?.cdf(x))
}

pub fn ml_mix_pdf(fit: &MlMixFit, sample: &Sample, x: f64) -> Result<f64> {
    Ok(fit.mixture(sample)?.pdf(x))
}

/// Log-densities of both mixture components at each observation; the
/// pseudolikelihood is a function of the weight alone once these are known.
#[derive(Debug, Clone)]
pub struct PseudoLikelihood {
    ln_par: Vec<f64>,
    ln_np: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl PseudoLikelihood {
    pub fn new(
        sample: &Sample,
        h: Bandwidth,
        gev: &GevParams,
        kernel: KernelId,
        m: usize,
    ) -> Result<Self> {
        check_m(m)?;
        let est = KernelEstimator::new(sample, h, kernel)?;
        let mut ln_par = Vec::with_capacity(sample.len());
        let mut ln_np = Vec::with_capacity(sample.len());
        for &x in sample.values() {
            ln_par.push(gev.ln_pdf(x));
            let f = est.pdf(x);
            let big_f = est.cdf(x);
            let v = if f > 0.0 && (m == 1 || big_f > 0.0) {
                (m as f64).ln() + (m - 1) as f64 * big_f.ln() + f.ln()
            } else {
                f64::NEG_INFINITY
            };
            ln_np.push(v);
        }
        Ok(PseudoLikelihood { ln_par, ln_np })
    }

    /// From log-densities of the parametric and nonparametric components at
    /// each observation (`-∞` where a component vanishes).
    pub fn from_log_densities(ln_par: Vec<f64>, ln_np: Vec<f64>) -> Result<Self> {
        if ln_par.len() != ln_np.len() || ln_par.is_empty() {
            return Err(Error::domain(
                "component log-densities must be nonempty and of equal length",
            ));
        }
        if ln_par
            .iter()
            .chain(&ln_np)
            .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(Error::domain("log-densities must be finite or -inf"));
        }
        Ok(PseudoLikelihood { ln_par, ln_np })
    }

    /// Maximizing weight and the value there; ties go to the smaller weight.
    pub fn maximize(&self, tolerance: f64) -> (f64, f64) {
        maximize_unit(|p| self.eval(p), tolerance)
    }

    /// `Σ log(p g(X_i) + (1 - p) f̂_m(X_i))`; `-∞` when any term vanishes.
    pub fn eval(&self, p: f64) -> f64 {
        let lp = p.ln();
        let lq = (-p).ln_1p();
        let mut total = 0.0;
        for (&a, &b) in self.ln_par.iter().zip(&self.ln_np) {
            let t = log_add(lp + a, lq + b);
            if t == f64::NEG_INFINITY || t.is_nan() {
                return f64::NEG_INFINITY;
            }
            total += t;
        }
        total
    }
}

/// Pseudo-log-likelihood of the mixture at the observations.
pub fn pseudo_loglik(
    sample: &Sample,
    p: f64,
    h: Bandwidth,
    gev: &GevParams,
    kernel: KernelId,
    m: usize,
) -> Result<f64> {
    check_weight(p)?;
    Ok(PseudoLikelihood::new(sample, h, gev, kernel, m)?.eval(p))
}

pub const DEFAULT_P_TOLERANCE: f64 = 1e-6;

/// Golden-section maximization of a function on `[0, 1]`, then comparison
/// with both endpoints. Ties go to the smaller argument.
fn maximize_unit<F: Fn(f64) -> f64>(f: F, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // 0.618^100 < 1e-20; the cap only matters for tolerances below rounding.
    let mut steps = 0;
    while b - a > tol && steps < 100 {
        steps += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [(0.0, f(0.0)), (mid, f(mid)), (1.0, f(1.0))];
    let mut best = candidates[0];
    for &(x, v) in &candidates[1..] {
        // Strictly better, beyond rounding noise.
        let slack = 1e-12 * best.1.abs().max(1.0);
        if v > best.1 + slack || (best.1 == f64::NEG_INFINITY && v > best.1) {
            best = (x, v);
        }
    }
    best
}

/// Mixing weight maximizing the pseudolikelihood on `[0, 1]`.
pub fn fit_p(
    sample: &Sample,
    h: Bandwidth,
    gev: &GevParams,
    kernel: KernelId,
    m: usize,
) -> Result<MlMixFit> {
    fit_p_with(sample, h, gev, kernel, m, DEFAULT_P_TOLERANCE)
}

pub fn fit_p_with(
    sample: &Sample,
    h: Bandwidth,
    gev: &GevParams,
    kernel: KernelId,
    m: usize,
    tolerance: f64,
) -> Result<MlMixFit> {
    if sample.len() < 2 {
        return Err(Error::domain(
            "mixing weight needs at least two observations",
        ));
    }
    let pl = PseudoLikelihood::new(sample, h, gev, kernel, m)?;
    let (p, value) = pl.maximize(tolerance);
    if value == f64::NEG_INFINITY {
        return Err(Error::estimation(
            "pseudolikelihood is -inf for every mixing weight in [0, 1]",
        ));
    }
    Ok(MlMixFit {
        p,
        h,
        gev: *gev,
        kernel,
        m,
        loglik_at_p: value,
    })
}

pub fn cv_mix_cdf(
    sample: &Sample,
    h: Bandwidth,
    gev: &GevParams,
    kernel: KernelId,
    m: usize,
    x: f64,
) -> Result<f64> {
    check_m(m)?;
    let mix = Mixture {
        weight: mixing_weight(h),
        gev: *gev,
        kernel: KernelEstimator::new(sample, h, kernel)?,
        m,
    };
    Ok(mix.cdf(x))
}

/// Log-spaced bandwidth grid, relative to the sample's robust scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HGrid {
    pub min_factor: f64,
    pub max_factor: f64,
    pub points: usize,
}

impl Default for HGrid {
    fn default() -> Self {
        HGrid {
            min_factor: 1e-4,
            max_factor: 1e4,
            points: 129,
        }
    }
}

impl HGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_factor > 0.0
            && self.max_factor >= self.min_factor
            && self.max_factor.is_finite())
        {
            return Err(Error::domain(
                "bandwidth grid factors must satisfy 0 < min <= max",
            ));
        }
        if self.points < 2 && self.min_factor != self.max_factor {
            return Err(Error::domain("bandwidth grid needs at least two points"));
        }
        if self.points == 0 {
            return Err(Error::domain("bandwidth grid needs at least one point"));
        }
        Ok(())
    }

    pub fn bandwidths(&self, scale: f64) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min_factor * scale];
        }
        let lo = (self.min_factor * scale).ln();
        let hi = (self.max_factor * scale).ln();
        (0..self.points)
            .map(|i| (lo + (hi - lo) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

pub const DEFAULT_CV_NODES: usize = 513;

/// The piecewise CV rule breaks at the GEV quantiles `k / GEV_BREAKS`.
const GEV_BREAKS: usize = 32;

/// Positive nodes and weights of the 8-point Gauss-Legendre rule on [-1, 1].
const GAUSS_LEGENDRE_8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_78, 0.362_683_783_378_361_77),
    (0.525_532_409_916_329, 0.313_706_645_877_887_05),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_34),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_69),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub grid: HGrid,
    /// Simpson nodes for `∫ Ĝ²` over the window. With the Epanechnikov
    /// kernel this is the evaluation budget of the piecewise rule.
    pub nodes: usize,
    /// GEV distribution function at each `X_i` (arrival order) when the
    /// parametric part is refitted without `X_i`; `None` keeps it fixed.
    pub loo_gev: Option<Vec<f64>>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            grid: HGrid::default(),
            nodes: DEFAULT_CV_NODES,
            loo_gev: None,
        }
    }
}

/// Pieces of the CV criterion that do not depend on `h`.
pub struct CvProblem<'a> {
    sample: &'a Sample,
    m: usize,
    kernel: KernelId,
    window: Window,
    node_count: usize,
    // Uniform rule, used when the kernel has unbounded support.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    gev_nodes: Vec<f64>,
    // Quantiles of the GEV inside the window, fixed breakpoints of the
    // piecewise rule so a steep parametric part is resolved for every h.
    gev_breaks: Vec<f64>,
    gev_obs: Vec<f64>,
    gev: GevParams,
}

impl<'a> CvProblem<'a> {
    pub fn new(
        sample: &'a Sample,
        m: usize,
        gev: &GevParams,
        kernel: KernelId,
        window: Window,
        opts: &CvOptions,
    ) -> Result<Self> {
        let n = sample.len();
        if n < 2 {
            return Err(Error::domain(
                "cross-validation needs at least two observations",
            ));
        }
        check_m(m)?;
        let count = opts.nodes;
        if count < 3 || count.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "Simpson's rule needs an odd node count of at least 3, got {count}"
            )));
        }
        let (nodes, weights) = if window.lo == window.hi || kernel == KernelId::Epanechnikov {
            (Vec::new(), Vec::new())
        } else {
            let step = (window.hi - window.lo) / (count - 1) as f64;
            let nodes: Vec<f64> = (0..count).map(|i| window.lo + i as f64 * step).collect();
            let weights = (0..count)
                .map(|i| {
                    let w = if i == 0 || i == count - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * step / 3.0
                })
                .collect();
            (nodes, weights)
        };
        let gev_nodes = nodes.iter().map(|&x| gev.cdf(x)).collect();
        let gev_breaks = if kernel == KernelId::Epanechnikov {
            (1..GEV_BREAKS)
                .filter_map(|k| gev.quantile(k as f64 / GEV_BREAKS as f64).ok())
                .filter(|&x| x > window.lo && x < window.hi)
                .collect()
        } else {
            Vec::new()
        };
        let gev_obs = match &opts.loo_gev {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::domain(format!(
                        "expected {n} leave-one-out GEV values, got {}",
                        v.len()
                    )));
                }
                v.clone()
            }
            None => sample.values().iter().map(|&x| gev.cdf(x)).collect(),
        };
        Ok(CvProblem {
            sample,
            m,
            kernel,
            window,
            node_count: count,
            nodes,
            weights,
            gev_nodes,
            gev_breaks,
            gev_obs,
            gev: *gev,
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// `∫_W Ĝ²(x; h) dx - (2/n) Σ Ĝ^{(-i)}(X_i; h)`.
    pub fn objective(&self, h: Bandwidth) -> f64 {
        let q = mixing_weight(h);
        let est =
            KernelEstimator::new(self.sample, h, self.kernel).expect("sample checked nonempty");
        let m = self.m as f64;
        let integral = if self.kernel == KernelId::Epanechnikov {
            self.piecewise_integral(&est, q, h.get())
        } else {
            let mut acc = 0.0;
            for ((&x, &w), &g) in self.nodes.iter().zip(&self.weights).zip(&self.gev_nodes) {
                let v = q * g + (1.0 - q) * est.cdf(x).powf(m);
                acc += w * v * v;
            }
            acc
        };
        let n = self.sample.len();
        let k0 = self.kernel.integrated(0.0);
        let mut loo = 0.0;
        for (&x, &g) in self.sample.values().iter().zip(&self.gev_obs) {
            let f = ((est.cdf_sum(x) - k0) / (n - 1) as f64).clamp(0.0, 1.0);
            loo += q * g + (1.0 - q) * f.powf(m);
        }
        integral - 2.0 * loo / n as f64
    }

    /// `∫_W Ĝ²` for a compactly supported kernel: Ĝ is only piecewise smooth,
    /// with kinks at `X_i ± h`, so the rule breaks there (and at fixed GEV
    /// quantiles) and applies 8-point Gauss-Legendre on equal subdivisions
    /// of each piece, spending about `node_count` evaluations in total.
    fn piecewise_integral(&self, est: &KernelEstimator, q: f64, h: f64) -> f64 {
        let Window { lo, hi } = self.window;
        if lo == hi {
            return 0.0;
        }
        let mut breaks = vec![lo, hi];
        breaks.extend_from_slice(&self.gev_breaks);
        for &x in self.sample.values() {
            for b in [x - h, x + h] {
                if b > lo && b < hi {
                    breaks.push(b);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let panels = self.node_count / GAUSS_LEGENDRE_8.len();
        let pieces = breaks.len() - 1;
        let m = self.m as f64;
        let g2 = |x: f64| {
            let v = q * self.gev.cdf(x) + (1.0 - q) * est.cdf(x).powf(m);
            v * v
        };
        let mut total = 0.0;
        for (k, w) in breaks.windows(2).enumerate() {
            let parts = (panels / pieces + usize::from(k < panels % pieces)).max(1);
            let width = (w[1] - w[0]) / parts as f64;
            for j in 0..parts {
                let mid = w[0] + (j as f64 + 0.5) * width;
                let half = 0.5 * width;
                let mut acc = 0.0;
                for &(t, wt) in &GAUSS_LEGENDRE_8 {
                    acc += wt * (g2(mid - half * t) + g2(mid + half * t));
                }
                total += acc * half;
            }
        }
        total
    }

    /// Evaluates the grid and returns the minimizer (smallest `h` on ties).
    pub fn select(&self, grid: &HGrid) -> Result<CvMixFit> {
        grid.validate()?;
        let scale = self.sample.robust_scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::estimation("sample has zero spread"));
        }
        let values: Vec<(f64, f64)> = grid
            .bandwidths(scale)
            .into_iter()
            .map(|h| {
                (
                    h,
                    self.objective(Bandwidth::new(h).expect("grid is positive")),
                )
            })
            .collect();
        select_min(&values)
            .map(|(h, v)| {
                CvMixFit::new(Bandwidth::new(h).unwrap(), self.gev, self.kernel, self.m, v)
            })
            .ok_or_else(|| Error::estimation("CV criterion is not finite anywhere on the grid"))
    }
}

/// Smallest value; ties resolve to the earlier (smaller-h) entry.
pub(crate) fn select_min(values: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &(h, v) in values {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some((_, bv)) if v >= bv => {}
            _ => best = Some((h, v)),
        }
    }
    best
}

pub fn cv_objective(
    sample: &Sample,
    m: usize,
    gev: &GevParams,
    kernel: KernelId,
    h: Bandwidth,
    window: Window,
) -> Result<f64> {
    Ok(CvProblem::new(sample, m, gev, kernel, window, &CvOptions::default())?.objective(h))
}

/// Bandwidth (and hence mixing weight) minimizing the CV criterion over a
/// log-spaced grid.
pub fn fit_h_cv(
    sample: &Sample,
    m: usize,
    gev: &GevParams,
    kernel: KernelId,
    grid: &HGrid,
    window: Window,
) -> Result<CvMixFit> {
    let opts = CvOptions {
        grid: *grid,
        ..CvOptions::default()
    };
    fit_h_cv_with(sample, m, gev, kernel, window, &opts)
}

pub fn fit_h_cv_with(
    sample: &Sample,
    m: usize,
    gev: &GevParams,
    kernel: KernelId,
    window: Window,
    opts: &CvOptions,
) -> Result<CvMixFit> {
    CvProblem::new(sample, m, gev, kernel, window, opts)?.select(&opts.grid)
}
