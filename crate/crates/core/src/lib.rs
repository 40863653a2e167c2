//! Semiparametric estimation of the distribution of the sample maximum.
//!
//! The crate estimates `F^m`, the law of the largest of the next `m`
//! observations, from `n` i.i.d. observations. Four estimators are provided:
//!
//! * a parametric GEV fit to block maxima, extrapolated to level `m`
//!   ([`gev_fit`]);
//! * the kernel plug-in estimator `F̂^m` ([`kernel_est`]);
//! * a pseudolikelihood mixture `p·G + (1-p)·F̂^m` ([`semiparam::fit_p`]);
//! * a cross-validated mixture whose bandwidth `h` also sets the mixing
//!   weight `h/(1+h)` ([`semiparam::fit_h_cv`]).
//!
//! [`harness`] runs Monte Carlo comparisons of these estimators against the
//! exact distributions in [`dist_zoo`], scored by [`metrics::mise`].

pub mod dist_zoo;
pub mod error;
pub mod gev_fit;
pub mod harness;
pub mod kernel_est;
pub mod metrics;
pub mod rng;
pub mod sample;
pub mod semiparam;

pub use dist_zoo::DistributionSpec;
pub use error::{Error, Result};
pub use gev_fit::{GevFit, GevParams};
pub use kernel_est::{Bandwidth, KernelId};
pub use sample::Sample;
pub use semiparam::{CvMixFit, MlMixFit, Window};
