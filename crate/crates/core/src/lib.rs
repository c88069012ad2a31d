//! Bivariate extended skew-normal (ESN₂) distribution: log-likelihood, analytic score,
//! observed and expected Fisher information, plus the numerical oracles used to check them.

pub mod cubature;
pub mod error;
pub mod expectations;
pub mod expected_info;
pub mod likelihood;
pub mod model;
pub mod special;
pub mod validation;

pub use cubature::{integrate_1d, integrate_2d, integrate_2d_grid, CubatureControls, CubatureResult};
pub use error::{Esn2Error, Result};
pub use expectations::{
    a_terms, expectation_set, expectation_set_from, expected_zeta1, u_distribution, ATerms, ExpectationSet,
    UDistribution,
};
pub use expected_info::{
    block_structure_check, conditional_independence, det_scan, expected_info, expected_info_from, reparam_scalar_info,
    standard_errors, BlockCheck, ExpectedInfo, SweepParam, SweepRow, SweepSpec,
};
pub use likelihood::{
    fit_mle, loglik, observed_info, score, FitControls, FitOutcome, InfoKind, InfoMatrix, ScoreVector, SpectralSummary,
};
pub use model::{
    cgf_esn2, density_esn1, density_esn2, moments_esn2, standardize, validate, Dataset, DeltaVector, DpParams, Moments,
    StandardizedState,
};
pub use special::{std_normal_cdf, std_normal_pdf, zeta, ZetaOrder};
pub use validation::{
    compare_to_mc, fd_gradient, fd_hessian, histogram_chi_square, mc_observed_info, mc_score, mc_sn2_hessian,
    random_dp, run_validation_suite, sample_esn2, CheckOutcome, ExpectedInfoFn, FdControls, MatrixMc, McComparison,
    RngSeed, SuiteConfig, SuiteLevel, ValidationReport, FD_HESSIAN_ERROR,
};
