//! Monte-Carlo uncertainty of interval limits caused by sampling the
//! permutations, estimated by resampling the endpoint pairs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multivariate::{joint_alpha_multiple, JointEndpoints};
use crate::rng::{derive_seed, rng_from_seed};
use crate::univariate::{quantile, EndpointVectors};

pub const MIN_REPLICATES: usize = 100;
pub const DEFAULT_BOOTSTRAP_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Point estimates from the original endpoints.
    pub lower: f64,
    pub upper: f64,
    /// Percentile interval for the lower limit.
    pub lower_interval: (f64, f64),
    /// Percentile interval for the upper limit.
    pub upper_interval: (f64, f64),
    pub alpha: f64,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub replicate_lower: Vec<f64>,
    pub replicate_upper: Vec<f64>,
}

impl BootstrapResult {
    /// Combined width of the two percentile intervals; infinite when either
    /// limit can be unbounded.
    pub fn width(&self) -> f64 {
        (self.lower_interval.1 - self.lower_interval.0)
            + (self.upper_interval.1 - self.upper_interval.0)
    }
}

fn check_args(replicates: usize, level: f64) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(Error::invalid(format!(
            "need at least {MIN_REPLICATES} bootstrap replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "bootstrap level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Row indices for replicate `r`: `M` uniform draws with replacement.
fn resample_rows(m: usize, seed: u64, r: usize) -> Vec<usize> {
    let mut rng = rng_from_seed(derive_seed(seed, r as u64));
    (0..m).map(|_| rng.random_range(0..m)).collect()
}

fn percentile_interval(values: &[f64], level: f64, point: f64) -> Result<(f64, f64)> {
    let tail = (1.0 - level) / 2.0;
    let lo = quantile(values, tail)?;
    let hi = quantile(values, 1.0 - tail)?;
    // the reported interval always covers the point estimate
    Ok((lo.min(point), hi.max(point)))
}

/// Percentile bootstrap of the limits `L` and `U` at level `1 - alpha`.
///
/// Each replicate draws `M` rows with replacement and keeps each
/// `(l_m, u_m)` pair together. Replicate `r` uses its own generator seeded
/// from `(seed, r)`, so results do not depend on scheduling.
pub fn bootstrap_endpoints(
    ep: &EndpointVectors,
    alpha: f64,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    check_args(replicates, level)?;
    let ci = ep.confidence_interval(alpha)?;
    let m = ep.len();
    let draws: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rows = resample_rows(m, seed, r);
            let l = rows.iter().map(|&i| ep.l()[i]).collect();
            let u = rows.iter().map(|&i| ep.u()[i]).collect();
            let resampled = EndpointVectors::new(l, u, ep.theta_hat(), ep.seed())?;
            Ok((resampled.lower(alpha), resampled.upper(alpha)))
        })
        .collect::<Result<_>>()?;
    let (replicate_lower, replicate_upper): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    Ok(BootstrapResult {
        lower: ci.lower,
        upper: ci.upper,
        lower_interval: percentile_interval(&replicate_lower, level, ci.lower)?,
        upper_interval: percentile_interval(&replicate_upper, level, ci.upper)?,
        alpha,
        replicates,
        level,
        seed,
        replicate_lower,
        replicate_upper,
    })
}

/// Percentile bootstrap of the joint level, resampling whole rows across
/// coordinates. Diagnostic only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointBootstrapResult {
    pub alpha_multiple: f64,
    pub interval: (f64, f64),
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

pub fn bootstrap_alpha_multiple(
    je: &JointEndpoints,
    alpha: f64,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<JointBootstrapResult> {
    check_args(replicates, level)?;
    let point = joint_alpha_multiple(je, alpha)?.alpha_multiple;
    let m = je.m();
    let levels: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rows = resample_rows(m, seed, r);
            let coords = je
                .coordinates()
                .iter()
                .map(|c| {
                    let l = rows.iter().map(|&i| c.l()[i]).collect();
                    let u = rows.iter().map(|&i| c.u()[i]).collect();
                    EndpointVectors::new(l, u, c.theta_hat(), c.seed())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(joint_alpha_multiple(&JointEndpoints::new(coords)?, alpha)?.alpha_multiple)
        })
        .collect::<Result<_>>()?;
    Ok(JointBootstrapResult {
        alpha_multiple: point,
        interval: percentile_interval(&levels, level, point)?,
        replicates,
        level,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::PermutationPlan;
    use crate::statistic::Model;
    use crate::univariate::compute_endpoints;

    #[test]
    fn identical_pairs_give_zero_width() {
        let ep = EndpointVectors::new(vec![-1.0; 200], vec![2.0; 200], 0.5, 0).unwrap();
        let res = bootstrap_endpoints(&ep, 0.05, 200, 0.95, 1).unwrap();
        assert_eq!(res.lower_interval, (-1.0, -1.0));
        assert_eq!(res.upper_interval, (2.0, 2.0));
        assert_eq!(res.width(), 0.0);
    }

    #[test]
    fn deterministic_and_brackets_point() {
        let model = Model::two_sample(8, 7).unwrap();
        let data: Vec<f64> = (0..15)
            .map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0)
            .collect();
        let plan = PermutationPlan::sample(15, 800, 3).unwrap();
        let ep = compute_endpoints(&data, &model, &plan).unwrap();
        let a = bootstrap_endpoints(&ep, 0.05, 300, 0.9, 42).unwrap();
        let b = bootstrap_endpoints(&ep, 0.05, 300, 0.9, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.lower_interval.0 <= a.lower && a.lower <= a.lower_interval.1);
        assert!(a.upper_interval.0 <= a.upper && a.upper <= a.upper_interval.1);
        for (l, u) in a.replicate_lower.iter().zip(&a.replicate_upper) {
            assert!(*l <= ep.theta_hat() && ep.theta_hat() <= *u);
        }
        let c = bootstrap_endpoints(&ep, 0.05, 300, 0.9, 43).unwrap();
        assert_ne!(a.replicate_lower, c.replicate_lower);
    }

    #[test]
    fn rejects_bad_arguments() {
        let ep = EndpointVectors::new(vec![0.0; 10], vec![1.0; 10], 0.5, 0).unwrap();
        assert!(bootstrap_endpoints(&ep, 0.05, 99, 0.95, 0).is_err());
        assert!(bootstrap_endpoints(&ep, 0.05, 100, 1.0, 0).is_err());
        assert!(bootstrap_endpoints(&ep, 0.0, 100, 0.95, 0).is_err());
    }

    #[test]
    fn joint_bootstrap_brackets_point() {
        let model = Model::two_sample(6, 6).unwrap();
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                (0..12)
                    .map(|i| (((i + 3 * k) * 29) % 13) as f64 * 0.2)
                    .collect()
            })
            .collect();
        let plan = PermutationPlan::sample(12, 500, 9).unwrap();
        let je = JointEndpoints::compute(&cols, &model, &plan).unwrap();
        let res = bootstrap_alpha_multiple(&je, 0.05, 150, 0.95, 5).unwrap();
        assert!(res.interval.0 <= res.alpha_multiple && res.alpha_multiple <= res.interval.1);
    }
}
