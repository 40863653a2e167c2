//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use evmix::dist_zoo::sample;
use evmix::gev_fit::{fit_dsm_gev, BlockSize};
use evmix::harness::config::standard_zoo;
use evmix::kernel_est::plugin_bandwidth;
use evmix::{Bandwidth, GevParams, KernelId, Sample, Window};
use statrs::function::erf::erf;

/// A zoo sample with the estimator inputs the harness would use.
pub struct Instance {
    pub sample: Sample,
    pub h: Bandwidth,
    pub gev: GevParams,
    pub kernel: KernelId,
    pub m: usize,
}

pub fn instance(spec_index: usize, n: usize, m: usize, seed: u64) -> Option<Instance> {
    let zoo = standard_zoo();
    let spec = zoo[spec_index % zoo.len()];
    let kernel = if matches!(spec, evmix::DistributionSpec::ReversedBurr { .. }) {
        KernelId::Epanechnikov
    } else {
        KernelId::Gaussian
    };
    let sample = sample(&spec, n, seed).ok()?;
    let h = plugin_bandwidth(&sample, kernel).ok()?;
    let k = BlockSize::Auto.resolve(n, m);
    let gev = fit_dsm_gev(&sample, m, k).ok()?.params;
    Some(Instance {
        sample,
        h,
        gev,
        kernel,
        m,
    })
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} m={} h={} gev={} kernel={}",
            self.sample.len(),
            self.m,
            self.h.get(),
            self.gev,
            self.kernel
        )
    }
}

// Independent oracle for the CV criterion on a toy sample: the leave-one-out
// estimates are recomputed from the remaining points and the integral of
// Ĝ² is taken piecewise between kernel breakpoints with many nodes.
pub fn integrated_kernel(kernel: KernelId, u: f64) -> f64 {
    match kernel {
        KernelId::Gaussian => 0.5 * (1.0 + erf(u / std::f64::consts::SQRT_2)),
        KernelId::Epanechnikov => {
            let u = u.clamp(-1.0, 1.0);
            0.75 * (u - u * u * u / 3.0) + 0.5
        }
    }
}

pub fn brute_force_cv(
    xs: &[f64],
    m: usize,
    gev: &GevParams,
    kernel: KernelId,
    h: f64,
    window: Window,
) -> f64 {
    let n = xs.len();
    let q = h / (1.0 + h);
    let f_hat = |x: f64, skip: Option<usize>| {
        let mut acc = 0.0;
        let mut count = 0;
        for (j, &v) in xs.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            acc += integrated_kernel(kernel, (x - v) / h);
            count += 1;
        }
        acc / count as f64
    };
    let g_hat = |x: f64| q * gev.cdf(x) + (1.0 - q) * f_hat(x, None).powi(m as i32);
    let mut breaks = vec![window.lo, window.hi];
    if kernel == KernelId::Epanechnikov {
        for &v in xs {
            for b in [v - h, v + h] {
                if b > window.lo && b < window.hi {
                    breaks.push(b);
                }
            }
        }
    }
    let (glo, ghi) = gev.support();
    for b in [glo, ghi] {
        if b > window.lo && b < window.hi {
            breaks.push(b);
        }
    }
    breaks.sort_by(f64::total_cmp);
    let mut integral = 0.0;
    for w in breaks.windows(2) {
        let nodes = 20001;
        let step = (w[1] - w[0]) / (nodes - 1) as f64;
        let mut acc = 0.0;
        for i in 0..nodes {
            let x = w[0] + i as f64 * step;
            let wt = if i == 0 || i == nodes - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let g = g_hat(x);
            acc += wt * g * g;
        }
        integral += acc * step / 3.0;
    }
    let loo: f64 = (0..n)
        .map(|i| q * gev.cdf(xs[i]) + (1.0 - q) * f_hat(xs[i], Some(i)).powi(m as i32))
        .sum();
    integral - 2.0 * loo / n as f64
}
