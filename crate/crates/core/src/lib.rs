//! Bootstrap omnibus specification tests for GARCH conditional-variance
//! models.
//!
//! The tests are Kolmogorov-Smirnov and Cramer-von Mises functionals of the
//! process `U_n(y) = n^{-1/2} sum_i (y_i^2 / h_i - 1) 1(y_{i-1} <= y)` built
//! from a Gaussian QMLE fit. Critical values come from a residual bootstrap;
//! the shrinkage variant stays valid when some ARCH/GARCH coefficients are
//! zero.
//!
//! - [`model`]: parameterization, variance recursion and its derivatives
//! - [`dgp`]: simulation designs and the bootstrap data generator
//! - [`qmle`]: estimation and residual standardization
//! - [`stats`]: marked process, KS, CvM, Ljung-Box, autocorrelations
//! - [`bootstrap`]: standard and shrinkage bootstrap tests
//! - [`mc`]: Monte Carlo rejection-rate studies

pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod mc;
pub mod model;
mod optim;
pub mod qmle;
pub mod rng;
pub mod stats;

pub use bootstrap::{
    bootstrap_test, pvalue, shrink, warp_speed_collect, BootstrapConfig, BootstrapOutcome,
    ShrinkageRule, StatKind,
};
pub use dgp::{simulate_dgp, simulate_garch, DgpId, InnovationSource, SimPath};
pub use error::{Error, Result};
pub use mc::{power_monotonicity_check, run_experiment, Experiment, McMode, RejectionTable};
pub use model::{
    stationarity_report, variance_gradient, variance_path, GarchOrder, InitPolicy, ParamBox,
    ParamVector, VariancePath,
};
pub use qmle::{qmle_fit, qmle_loss, standardize_residuals, FitConfig, FittedModel};
pub use stats::{
    cvm_statistic, ks_statistic, ljung_box, marked_process, sample_acf, FirstLag,
    MarkedProcessEval, TestKind, TestStatistic,
};
