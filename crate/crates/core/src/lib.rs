//! Non-parametric confidence intervals from a single run of a permutation
//! test, their joint (family-wise) coverage under arbitrary dependence, and
//! adjustment of the marginal level to a joint target.
//!
//! The pipeline is:
//!
//! 1. draw a [`PermutationPlan`] (or enumerate all of `S_N` for tiny `N`);
//! 2. reduce each permutation to a crossing interval with a [`Model`];
//! 3. read intervals at any level off the [`EndpointVectors`];
//! 4. for several coordinates sharing the plan, evaluate the joint level
//!    with [`joint_alpha_multiple`] and adjust it with [`adjust_alpha`].

pub mod bootstrap;
pub mod error;
pub mod multivariate;
pub mod perm;
pub mod rng;
pub mod simulate;
pub mod statistic;
pub mod univariate;

pub use bootstrap::{bootstrap_endpoints, BootstrapResult};
pub use error::{Error, Result};
pub use multivariate::{
    adjust_alpha, adjusted_intervals, joint_alpha_multiple, AdjustmentResult, JointCoverageResult,
    JointEndpoints, ReferenceLevels,
};
pub use perm::{Permutation, PermutationPlan};
pub use statistic::{
    AffineCoefficients, CrossingInterval, Model, RegressionDesign, TwoSampleLayout,
};
pub use univariate::{
    compute_endpoints, confidence_interval, permutation_test_fraction, quantile, CiResult,
    EndpointVectors,
};
