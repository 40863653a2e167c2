//! One sample in, one fitted estimator of the law of the maximum out.

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev_fit::{fit_dsm_gev_with, GevFit, GevParams};
use crate::harness::config::{EstimatorKnobs, Method};
use crate::kernel_est::{plugin_bandwidth, Bandwidth, KernelEstimator, KernelId};
use crate::sample::Sample;
use crate::semiparam::{fit_h_cv_with, fit_p_with, CvMixFit, CvOptions, Mixture, MlMixFit, Window};

/// A fitted estimator; the kernel-based ones need the sample to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FittedModel {
    Parametric {
        gev: GevParams,
        m: usize,
    },
    Nonparametric {
        h: Bandwidth,
        kernel: KernelId,
        m: usize,
    },
    MlMix(MlMixFit),
    CvMix(CvMixFit),
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Parametric { .. } => Method::Parametric,
            FittedModel::Nonparametric { .. } => Method::Nonparametric,
            FittedModel::MlMix(_) => Method::MlMix,
            FittedModel::CvMix(_) => Method::CvMix,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            FittedModel::Parametric { m, .. } | FittedModel::Nonparametric { m, .. } => *m,
            FittedModel::MlMix(f) => f.m,
            FittedModel::CvMix(f) => f.m,
        }
    }

    /// `p̂` or `q̂` for the mixtures.
    pub fn mixing_ratio(&self) -> Option<f64> {
        match self {
            FittedModel::MlMix(f) => Some(f.p),
            FittedModel::CvMix(f) => Some(f.q),
            _ => None,
        }
    }

    pub fn bandwidth(&self) -> Option<Bandwidth> {
        match self {
            FittedModel::Parametric { .. } => None,
            FittedModel::Nonparametric { h, .. } => Some(*h),
            FittedModel::MlMix(f) => Some(f.h),
            FittedModel::CvMix(f) => Some(f.h),
        }
    }

    pub fn gev(&self) -> Option<GevParams> {
        match self {
            FittedModel::Parametric { gev, .. } => Some(*gev),
            FittedModel::Nonparametric { .. } => None,
            FittedModel::MlMix(f) => Some(f.gev),
            FittedModel::CvMix(f) => Some(f.gev),
        }
    }

    pub fn evaluator<'a>(&self, sample: &'a Sample) -> Result<Evaluator<'a>> {
        match self {
            FittedModel::Parametric { gev, .. } => Ok(Evaluator::Gev(*gev)),
            FittedModel::Nonparametric { h, kernel, m } => Ok(Evaluator::Kernel {
                est: KernelEstimator::new(sample, *h, *kernel)?,
                m: *m,
            }),
            FittedModel::MlMix(f) => Ok(Evaluator::Mix(f.mixture(sample)?)),
            FittedModel::CvMix(f) => Ok(Evaluator::Mix(f.mixture(sample)?)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Evaluator<'a> {
    Gev(GevParams),
    Kernel { est: KernelEstimator<'a>, m: usize },
    Mix(Mixture<'a>),
}

impl Evaluator<'_> {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Evaluator::Gev(g) => g.cdf(x),
            Evaluator::Kernel { est, m } => est.dsm_cdf(*m, x),
            Evaluator::Mix(mix) => mix.cdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Evaluator::Gev(g) => g.pdf(x),
            Evaluator::Kernel { est, m } => est.dsm_pdf(*m, x),
            Evaluator::Mix(mix) => mix.pdf(x),
        }
    }
}

/// Fit-time facts reported alongside a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub kernel: Option<KernelId>,
    pub plugin_bandwidth: Option<f64>,
    pub block_size: Option<usize>,
    pub n_blocks: Option<usize>,
    pub gev_loglik: Option<f64>,
    pub gev_converged: Option<bool>,
    pub gev_iterations: Option<usize>,
    pub pseudo_loglik: Option<f64>,
    pub cv_value: Option<f64>,
}

/// Lazily shares the plug-in bandwidth and the GEV fit between methods run
/// on the same sample.
pub struct Prepared<'a> {
    sample: &'a Sample,
    m: usize,
    kernel: KernelId,
    knobs: &'a EstimatorKnobs,
    plugin: OnceCell<Result<Bandwidth>>,
    gev: OnceCell<Result<GevFit>>,
}

impl<'a> Prepared<'a> {
    pub fn new(
        sample: &'a Sample,
        m: usize,
        kernel: KernelId,
        knobs: &'a EstimatorKnobs,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("m must be at least 1"));
        }
        Ok(Prepared {
            sample,
            m,
            kernel,
            knobs,
            plugin: OnceCell::new(),
            gev: OnceCell::new(),
        })
    }

    fn block_size(&self) -> usize {
        self.knobs.block_size.resolve(self.sample.len(), self.m)
    }

    pub fn plugin(&self) -> Result<Bandwidth> {
        self.plugin
            .get_or_init(|| plugin_bandwidth(self.sample, self.kernel))
            .clone()
    }

    pub fn gev(&self) -> Result<GevFit> {
        self.gev
            .get_or_init(|| {
                fit_dsm_gev_with(self.sample, self.m, self.block_size(), &self.knobs.mle)
            })
            .clone()
    }

    fn gev_diagnostics(&self, d: &mut Diagnostics, fit: &GevFit) {
        d.block_size = Some(fit.block_size);
        d.n_blocks = Some(fit.n_blocks);
        d.gev_loglik = Some(fit.loglik);
        d.gev_converged = Some(fit.converged);
        d.gev_iterations = Some(fit.iterations);
    }

    /// `G_{-i}(X_i)` with the GEV refitted on the sample without `X_i`.
    fn loo_gev_values(&self) -> Result<Vec<f64>> {
        let k = self.block_size();
        (0..self.sample.len())
            .map(|i| {
                let rest = self.sample.without(i)?;
                let fit = fit_dsm_gev_with(&rest, self.m, k, &self.knobs.mle)?;
                Ok(fit.params.cdf(self.sample.values()[i]))
            })
            .collect()
    }

    pub fn fit(&self, method: Method) -> Result<(FittedModel, Diagnostics)> {
        let mut d = Diagnostics::default();
        let model = match method {
            Method::Parametric => {
                let g = self.gev()?;
                self.gev_diagnostics(&mut d, &g);
                FittedModel::Parametric {
                    gev: g.params,
                    m: self.m,
                }
            }
            Method::Nonparametric => {
                let h = self.plugin()?;
                d.kernel = Some(self.kernel);
                d.plugin_bandwidth = Some(h.get());
                FittedModel::Nonparametric {
                    h,
                    kernel: self.kernel,
                    m: self.m,
                }
            }
            Method::MlMix => {
                let h = self.plugin()?;
                let g = self.gev()?;
                d.kernel = Some(self.kernel);
                d.plugin_bandwidth = Some(h.get());
                self.gev_diagnostics(&mut d, &g);
                let fit = fit_p_with(
                    self.sample,
                    h,
                    &g.params,
                    self.kernel,
                    self.m,
                    self.knobs.p_tolerance,
                )?;
                d.pseudo_loglik = Some(fit.loglik_at_p);
                FittedModel::MlMix(fit)
            }
            Method::CvMix => {
                let g = self.gev()?;
                d.kernel = Some(self.kernel);
                self.gev_diagnostics(&mut d, &g);
                let window = Window::around(self.sample, self.knobs.window_padding_factor)?;
                let opts = CvOptions {
                    grid: self.knobs.h_grid,
                    nodes: self.knobs.cv_nodes,
                    loo_gev: if self.knobs.loo_refit_gev {
                        Some(self.loo_gev_values()?)
                    } else {
                        None
                    },
                };
                let fit =
                    fit_h_cv_with(self.sample, self.m, &g.params, self.kernel, window, &opts)?;
                d.cv_value = Some(fit.cv_value);
                FittedModel::CvMix(fit)
            }
        };
        Ok((model, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_zoo::{sample, DistributionSpec};

    #[test]
    fn every_method_fits_and_evaluates() {
        let spec: DistributionSpec = "frechet:g=0.5".parse().unwrap();
        let s = sample(&spec, 200, 3).unwrap();
        let knobs = EstimatorKnobs::default();
        let prep = Prepared::new(&s, 8, KernelId::Gaussian, &knobs).unwrap();
        for method in Method::ALL {
            let (model, _) = prep.fit(method).unwrap();
            assert_eq!(model.method(), method);
            assert_eq!(model.m(), 8);
            let ev = model.evaluator(&s).unwrap();
            let mut last = 0.0;
            for i in 0..50 {
                let v = ev.cdf(i as f64 * 0.5);
                assert!((0.0..=1.0).contains(&v) && v >= last);
                last = v;
            }
            assert_eq!(model.mixing_ratio().is_some(), method.is_mixture());
        }
    }

    #[test]
    fn loo_refit_runs() {
        let spec: DistributionSpec = "weibull:k=3".parse().unwrap();
        let s = sample(&spec, 60, 9).unwrap();
        let knobs = EstimatorKnobs {
            loo_refit_gev: true,
            h_grid: crate::semiparam::HGrid {
                points: 9,
                ..Default::default()
            },
            ..Default::default()
        };
        let prep = Prepared::new(&s, 4, KernelId::Gaussian, &knobs).unwrap();
        let (model, d) = prep.fit(Method::CvMix).unwrap();
        let q = model.mixing_ratio().unwrap();
        assert!(q > 0.0 && q < 1.0);
        assert!(d.cv_value.unwrap().is_finite());
    }
}
