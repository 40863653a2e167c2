//! Generalized extreme value distribution: evaluation, block-maxima
//! maximum likelihood, and extrapolation between block levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::sample::Sample;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Shape `gamma`, scale `a > 0` and location `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

/// Result of a block-maxima fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevFit {
    /// Parameters at the requested level (after extrapolation, if any).
    pub params: GevParams,
    /// Log-likelihood of the block maxima at the fitted block-level parameters.
    pub loglik: f64,
    pub n_blocks: usize,
    pub converged: bool,
    pub iterations: usize,
    pub block_size: usize,
}

// log1p(t)/t, continuous through t = 0.
fn log1p_ratio(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * (0.5 - t * (1.0 / 3.0 - t * 0.25))
    } else {
        t.ln_1p() / t
    }
}

// expm1(s)/s, continuous through s = 0.
fn expm1_ratio(s: f64) -> f64 {
    if s.abs() < 1e-5 {
        1.0 + s * (0.5 + s / 6.0)
    } else {
        s.exp_m1() / s
    }
}

impl GevParams {
    pub fn new(gamma: f64, a: f64, b: f64) -> Result<Self> {
        let p = GevParams { gamma, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.b.is_finite()) {
            return Err(Error::domain("GEV shape and location must be finite"));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::domain(format!(
                "GEV scale must be positive, got {}",
                self.a
            )));
        }
        Ok(())
    }

    /// Reduced variate `y` with `G(x) = exp(-e^{-y})`, or `None` outside the
    /// support. `y = log(1 + γz)/γ`, `z = (x - b)/a`.
    pub fn reduced(&self, x: f64) -> Option<f64> {
        let z = (x - self.b) / self.a;
        let t = self.gamma * z;
        if t <= -1.0 {
            return None;
        }
        Some(z * log1p_ratio(t))
    }

    /// Support endpoints `(lower, upper)`.
    pub fn support(&self) -> (f64, f64) {
        if self.gamma > 0.0 {
            (self.b - self.a / self.gamma, f64::INFINITY)
        } else if self.gamma < 0.0 {
            (f64::NEG_INFINITY, self.b - self.a / self.gamma)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.reduced(x) {
            Some(y) => (-(-y).exp()).exp(),
            None if self.gamma > 0.0 => 0.0,
            None => 1.0,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.reduced(x) {
            Some(y) => {
                let v = -self.a.ln() - (1.0 + self.gamma) * y - (-y).exp();
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }
            None => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!(
                "probability must lie in (0, 1), got {q}"
            )));
        }
        let l = -(-q.ln()).ln();
        Ok(self.b + self.a * l * expm1_ratio(self.gamma * l))
    }

    /// Parameters of the maximum of `r` independent copies (max-stability):
    /// `a_r = a r^γ`, `b_r = b + a (r^γ - 1)/γ`.
    pub fn power(&self, r: f64) -> GevParams {
        let ln_r = r.ln();
        let s = self.gamma * ln_r;
        GevParams {
            gamma: self.gamma,
            a: self.a * s.exp(),
            b: self.b + self.a * ln_r * expm1_ratio(s),
        }
    }

    pub fn loglik(&self, data: &[f64]) -> f64 {
        let mut total = 0.0;
        for &x in data {
            let v = self.ln_pdf(x);
            if v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += v;
        }
        total
    }
}

impl fmt::Display for GevParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma={} a={} b={}", self.gamma, self.a, self.b)
    }
}

pub fn gev_cdf(params: &GevParams, x: f64) -> f64 {
    params.cdf(x)
}

pub fn gev_pdf(params: &GevParams, x: f64) -> f64 {
    params.pdf(x)
}

pub fn gev_quantile(params: &GevParams, q: f64) -> Result<f64> {
    params.quantile(q)
}

/// Maxima of consecutive blocks of size `k` in arrival order; a trailing
/// partial block is dropped.
pub fn block_maxima(sample: &Sample, k: usize) -> Result<Sample> {
    let n = sample.len();
    if k < 1 || k > n {
        return Err(Error::domain(format!(
            "block size must lie in [1, {n}], got {k}"
        )));
    }
    let maxima = sample
        .values()
        .chunks_exact(k)
        .map(|block| block.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Sample::new(maxima)
}

/// Probability-weighted-moment starting values (Hosking's approximation).
pub fn pwm_init(maxima: &Sample) -> Result<GevParams> {
    if maxima.distinct_count() < 3 {
        return Err(Error::estimation(
            "PWM initialisation needs at least three distinct maxima",
        ));
    }
    let xs = maxima.sorted();
    let n = xs.len() as f64;
    let mut b0 = 0.0;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let i = i as f64;
        b0 += x;
        b1 += i / (n - 1.0) * x;
        b2 += i * (i - 1.0) / ((n - 1.0) * (n - 2.0)) * x;
    }
    b0 /= n;
    b1 /= n;
    b2 /= n;
    let denom = 3.0 * b2 - b0;
    let l2 = 2.0 * b1 - b0;
    if !(denom.abs() > 0.0 && l2 > 0.0) {
        return Err(Error::estimation("degenerate probability-weighted moments"));
    }
    let c = l2 / denom - 2f64.ln() / 3f64.ln();
    // Hosking's k is the negated shape.
    let k = (7.8590 * c + 2.9554 * c * c).clamp(-0.95, 0.99);
    let (a, b) = if k.abs() < 1e-6 {
        let a = l2 / 2f64.ln();
        (a, b0 - EULER_GAMMA * a)
    } else {
        let g = gamma_fn(1.0 + k);
        let a = l2 * k / (g * (1.0 - (-k * 2f64.ln()).exp()));
        (a, b0 + a * (g - 1.0) / k)
    };
    let a = if a > 0.0 && a.is_finite() {
        a
    } else {
        maxima.sd() * 6f64.sqrt() / std::f64::consts::PI
    };
    GevParams::new(-k, a, b).map_err(|e| Error::estimation(e.to_string()))
}

/// Tuning for [`mle_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Open interval the shape is confined to.
    pub gamma_bounds: (f64, f64),
    /// Iteration cap per simplex run.
    pub max_iter: usize,
    /// Convergence tolerance on the log-likelihood spread of the simplex.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            gamma_bounds: (-0.99, 5.0),
            max_iter: 500,
            tolerance: 1e-9,
        }
    }
}

struct SimplexRun {
    best: [f64; 3],
    value: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead<F>(f: &F, start: [f64; 3], steps: [f64; 3], max_iter: usize, tol: f64) -> SimplexRun
where
    F: Fn(&[f64; 3]) -> f64,
{
    let mut pts = [start; 4];
    for i in 0..3 {
        pts[i + 1][i] += steps[i];
    }
    let mut vals = pts.map(|p| f(&p));
    let mut iterations = 0;
    let mut converged = false;
    let centroid = |pts: &[[f64; 3]; 4], order: &[usize; 4]| {
        let mut c = [0.0; 3];
        for &idx in &order[..3] {
            for d in 0..3 {
                c[d] += pts[idx][d] / 3.0;
            }
        }
        c
    };
    let along = |c: &[f64; 3], p: &[f64; 3], t: f64| {
        let mut out = [0.0; 3];
        for d in 0..3 {
            out[d] = c[d] + t * (p[d] - c[d]);
        }
        out
    };
    while iterations < max_iter {
        let mut order = [0, 1, 2, 3];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let (best, worst, second) = (order[0], order[3], order[2]);
        let spread = vals[worst] - vals[best];
        if vals[best].is_finite() && spread <= tol * vals[best].abs().max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let c = centroid(&pts, &order);
        let reflected = along(&c, &pts[worst], -1.0);
        let fr = f(&reflected);
        if fr < vals[best] {
            let expanded = along(&c, &pts[worst], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = reflected;
            vals[worst] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[worst] {
            let p = along(&c, &pts[worst], -0.5);
            let v = f(&p);
            (p, v)
        } else {
            let p = along(&c, &pts[worst], 0.5);
            let v = f(&p);
            (p, v)
        };
        if fc < vals[worst].min(fr) {
            pts[worst] = contracted;
            vals[worst] = fc;
            continue;
        }
        let anchor = pts[best];
        for &idx in &order[1..] {
            pts[idx] = along(&anchor, &pts[idx], 0.5);
            vals[idx] = f(&pts[idx]);
        }
    }
    let best = (0..4).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    SimplexRun {
        best: pts[best],
        value: vals[best],
        iterations,
        converged,
    }
}

/// Maximum-likelihood GEV fit to block maxima by a simplex search over
/// `(γ, ln a, b)`, followed by one restart from the best vertex.
///
/// Never returns parameters with a lower log-likelihood than `init`.
pub fn mle_fit(maxima: &Sample, init: GevParams, opts: &MleOptions) -> Result<GevFit> {
    init.validate()?;
    if maxima.distinct_count() < 3 {
        return Err(Error::estimation(
            "MLE needs at least three distinct maxima",
        ));
    }
    let data = maxima.values();
    let (g_lo, g_hi) = opts.gamma_bounds;
    let objective = |theta: &[f64; 3]| {
        let gamma = theta[0];
        if !(gamma > g_lo && gamma < g_hi) {
            return f64::INFINITY;
        }
        let p = GevParams {
            gamma,
            a: theta[1].exp(),
            b: theta[2],
        };
        let ll = p.loglik(data);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };

    let init_ll = init.loglik(data);
    let mut start = init;
    start.gamma = start.gamma.clamp(g_lo + 1e-3, g_hi - 1e-3);
    if start.loglik(data) == f64::NEG_INFINITY {
        // Gumbel has unbounded support on both sides.
        start.gamma = 0.0;
    }
    let theta0 = [start.gamma, start.a.ln(), start.b];
    let steps = [0.1, 0.1, 0.1 * start.a];
    let first = nelder_mead(&objective, theta0, steps, opts.max_iter, opts.tolerance);
    let a1 = first.best[1].exp();
    let second = nelder_mead(
        &objective,
        first.best,
        [0.05, 0.05, 0.05 * a1],
        opts.max_iter,
        opts.tolerance,
    );
    let run = if second.value <= first.value {
        &second
    } else {
        &first
    };
    let fitted = GevParams {
        gamma: run.best[0],
        a: run.best[1].exp(),
        b: run.best[2],
    };
    let fitted_ll = -run.value;
    let (params, loglik) = if fitted_ll >= init_ll || init_ll.is_nan() {
        (fitted, fitted_ll)
    } else {
        (init, init_ll)
    };
    if !loglik.is_finite() {
        return Err(Error::estimation(
            "no GEV parameters with finite likelihood found",
        ));
    }
    Ok(GevFit {
        params,
        loglik,
        n_blocks: data.len(),
        converged: second.converged,
        iterations: first.iterations + second.iterations,
        block_size: 1,
    })
}

/// Moves parameters fitted to maxima of blocks of size `k` to maxima of
/// `m` observations.
pub fn extrapolate(params: &GevParams, k: usize, m: usize) -> Result<GevParams> {
    if k == 0 || m == 0 {
        return Err(Error::domain("block size and horizon must be at least 1"));
    }
    if k == m {
        return Ok(*params);
    }
    Ok(params.power(m as f64 / k as f64))
}

/// How the block size for the GEV fit is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockSize {
    /// `min(m, ⌊n/20⌋)`, at least 2.
    #[default]
    Auto,
    Fixed(usize),
}

impl BlockSize {
    pub fn resolve(self, n: usize, m: usize) -> usize {
        match self {
            BlockSize::Auto => m.min(n / 20).max(2),
            BlockSize::Fixed(k) => k,
        }
    }
}

impl fmt::Display for BlockSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockSize::Auto => f.write_str("auto"),
            BlockSize::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for BlockSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(BlockSize::Auto);
        }
        match t.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(BlockSize::Fixed(k)),
            _ => Err(Error::parse(
                t,
                "block size must be `auto` or a positive integer",
            )),
        }
    }
}

/// Block maxima → PWM start → MLE → extrapolation from level `k` to `m`.
pub fn fit_dsm_gev(sample: &Sample, m: usize, k: usize) -> Result<GevFit> {
    fit_dsm_gev_with(sample, m, k, &MleOptions::default())
}

pub fn fit_dsm_gev_with(sample: &Sample, m: usize, k: usize, opts: &MleOptions) -> Result<GevFit> {
    if m == 0 || k == 0 {
        return Err(Error::domain("block size and horizon must be at least 1"));
    }
    if sample.len() / k < 3 {
        return Err(Error::domain(format!(
            "block size {k} leaves fewer than 3 blocks from {} observations",
            sample.len()
        )));
    }
    let maxima = block_maxima(sample, k)?;
    let init = pwm_init(&maxima)?;
    let mut fit = mle_fit(&maxima, init, opts)?;
    fit.params = extrapolate(&fit.params, k, m)?;
    fit.block_size = k;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(g: f64, a: f64, b: f64) -> GevParams {
        GevParams::new(g, a, b).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let e1 = (-1.0f64).exp();
        assert_abs_diff_eq!(p(0.0, 1.0, 0.0).cdf(0.0), e1, epsilon = 1e-15);
        assert_abs_diff_eq!(p(1.0, 1.0, 0.0).cdf(0.0), e1, epsilon = 1e-15);
        assert_eq!(p(-1.0, 1.0, 0.0).cdf(1.5), 1.0);
        assert_eq!(p(1.0, 1.0, 0.0).cdf(-2.0), 0.0);
    }

    #[test]
    fn pdf_examples() {
        assert_abs_diff_eq!(p(0.0, 1.0, 0.0).pdf(0.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(p(1.0, 1.0, 0.0).pdf(-2.0), 0.0);
        assert_eq!(p(-0.5, 1.0, 0.0).pdf(3.0), 0.0);
    }

    #[test]
    fn quantile_examples() {
        let q = p(0.3, 2.0, 1.5);
        assert_abs_diff_eq!(q.quantile((-1.0f64).exp()).unwrap(), 1.5, epsilon = 1e-14);
        let gumbel = p(0.0, 1.0, 0.0);
        let target = (-(-1.0f64).exp()).exp();
        assert_abs_diff_eq!(gumbel.quantile(target).unwrap(), 1.0, epsilon = 1e-12);
        assert!(gumbel.quantile(0.0).is_err());
        assert!(gumbel.quantile(1.0).is_err());
    }

    #[test]
    fn gamma_continuity() {
        let g0 = p(0.0, 1.3, 0.2);
        let g1 = p(1e-9, 1.3, 0.2);
        for i in 0..=1000 {
            let x = 0.2 - 5.0 * 1.3 + 10.0 * 1.3 * i as f64 / 1000.0;
            assert!((g0.cdf(x) - g1.cdf(x)).abs() <= 1e-7);
        }
    }

    #[test]
    fn block_maxima_examples() {
        let s = Sample::new(vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(block_maxima(&s, 1).unwrap().values(), s.values());
        assert_eq!(block_maxima(&s, 4).unwrap().values(), &[5.0]);
        assert_eq!(block_maxima(&s, 2).unwrap().values(), &[3.0, 5.0]);
        let s5 = Sample::new(vec![1.0, 3.0, 2.0, 5.0, 9.0]).unwrap();
        assert_eq!(block_maxima(&s5, 2).unwrap().values(), &[3.0, 5.0]);
        assert!(block_maxima(&s, 0).is_err());
        assert!(block_maxima(&s, 5).is_err());
    }

    #[test]
    fn pwm_rejects_constant() {
        let s = Sample::new(vec![2.0; 20]).unwrap();
        assert!(matches!(pwm_init(&s), Err(Error::Estimation(_))));
    }

    #[test]
    fn extrapolate_examples() {
        let base = p(0.7, 1.5, -0.3);
        assert_eq!(extrapolate(&base, 8, 8).unwrap(), base);
        let e = extrapolate(&p(1.0, 1.0, 0.0), 1, 2).unwrap();
        assert_abs_diff_eq!(e.a, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.b, 1.0, epsilon = 1e-14);
        let g = p(0.0, 1.0, 0.0).power(std::f64::consts::E);
        assert_abs_diff_eq!(g.a, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.b, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn block_size_policy() {
        assert_eq!(BlockSize::Auto.resolve(256, 4), 4);
        assert_eq!(BlockSize::Auto.resolve(256, 64), 12);
        assert_eq!(BlockSize::Auto.resolve(256, 1), 2);
        assert_eq!(BlockSize::Auto.resolve(4096, 512), 204);
        assert_eq!("auto".parse::<BlockSize>().unwrap(), BlockSize::Auto);
        assert_eq!("16".parse::<BlockSize>().unwrap(), BlockSize::Fixed(16));
        assert!("0".parse::<BlockSize>().is_err());
    }

    #[test]
    fn fit_requires_three_blocks() {
        let s = Sample::new((0..10).map(f64::from).collect()).unwrap();
        assert!(fit_dsm_gev(&s, 4, 4).is_err());
    }
}
