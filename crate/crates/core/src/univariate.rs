//! Confidence intervals from one run of a permutation test.
//!
//! Every permutation contributes a crossing interval `(l_m, u_m)` around the
//! estimate. The interval at level `1 - alpha` takes its lower limit from the
//! low tail of the `l_m` and its upper limit from the high tail of the `u_m`,
//! so one set of endpoints yields the whole nested family of intervals.
//!
//! Order-statistic conventions, with `M` endpoints and `j = floor(M * alpha)`:
//!
//! * `U` is the `ceil(M * (1 - alpha))`-th smallest `u_m`, i.e. the
//!   `(j + 1)`-th largest.
//! * `L` is the `(j + 1)`-th smallest `l_m`.
//!
//! Both limits leave at most `j` endpoints strictly outside, which makes
//! `theta not in [L, U]` equivalent to rejection by the direct permutation
//! test at level `alpha` (see [`permutation_test_fraction`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::PermutationPlan;
use crate::statistic::{solve_crossing, CrossingInterval, Model, DEFAULT_NEGLIGIBLE_REL_TOL};

/// Snaps `x` to the nearest integer when it is within floating-point noise of
/// it, so that `M * (i / M)` counts as exactly `i`.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

fn check_level(gamma: f64, what: &str) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} must lie in (0, 1), got {gamma}"
        )))
    }
}

/// One-based rank `ceil(m * gamma)`, clamped to `1..=m`.
pub fn quantile_rank(m: usize, gamma: f64) -> usize {
    (snap(m as f64 * gamma).ceil() as usize).clamp(1, m)
}

/// Number of endpoints allowed strictly outside the interval at level
/// `alpha`: `floor(m * alpha)`, clamped to `0..m`.
pub fn tail_count(m: usize, alpha: f64) -> usize {
    (snap(m as f64 * alpha).floor() as usize).min(m.saturating_sub(1))
}

/// Order statistic at rank `ceil(M * gamma)` of `v`. Infinite entries sort
/// to the ends.
pub fn quantile(v: &[f64], gamma: f64) -> Result<f64> {
    check_level(gamma, "quantile level")?;
    if v.is_empty() {
        return Err(Error::invalid("quantile of an empty vector"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric("quantile input contains NaN".into()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(v.len(), gamma) - 1])
}

/// Per-permutation crossing endpoints, with sorted copies cached so that
/// intervals at any level are `O(1)` lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointVectors {
    l: Vec<f64>,
    u: Vec<f64>,
    theta_hat: f64,
    seed: u64,
    negligible_count: usize,
    degenerate_count: usize,
    sorted_l: Vec<f64>,
    sorted_u: Vec<f64>,
}

impl EndpointVectors {
    /// Builds endpoint vectors from raw limits, checking
    /// `l_m <= theta_hat <= u_m`.
    pub fn new(l: Vec<f64>, u: Vec<f64>, theta_hat: f64, seed: u64) -> Result<Self> {
        if l.len() != u.len() {
            return Err(Error::invalid(
                "lower and upper endpoint vectors differ in length",
            ));
        }
        if l.is_empty() {
            return Err(Error::invalid("no endpoints"));
        }
        if !theta_hat.is_finite() {
            return Err(Error::Numeric(format!(
                "estimate is not finite: {theta_hat}"
            )));
        }
        for (m, (&lo, &hi)) in l.iter().zip(&u).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > theta_hat || hi < theta_hat {
                return Err(Error::invalid(format!(
                    "endpoint pair {m} = ({lo}, {hi}) does not bracket {theta_hat}"
                )));
            }
        }
        let negligible_count = l.iter().filter(|v| **v == f64::NEG_INFINITY).count();
        let degenerate_count = l.iter().zip(&u).filter(|(a, b)| a == b).count();
        let mut sorted_l = l.clone();
        sorted_l.sort_by(f64::total_cmp);
        let mut sorted_u = u.clone();
        sorted_u.sort_by(f64::total_cmp);
        Ok(EndpointVectors {
            l,
            u,
            theta_hat,
            seed,
            negligible_count,
            degenerate_count,
            sorted_l,
            sorted_u,
        })
    }

    pub(crate) fn from_crossings(
        crossings: &[CrossingInterval],
        theta_hat: f64,
        seed: u64,
    ) -> Result<Self> {
        let (l, u) = crossings.iter().map(|c| (c.l, c.u)).unzip();
        Self::new(l, u, theta_hat, seed)
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn sorted_l(&self) -> &[f64] {
        &self.sorted_l
    }

    pub fn sorted_u(&self) -> &[f64] {
        &self.sorted_u
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn negligible_count(&self) -> usize {
        self.negligible_count
    }

    /// Point intervals `l_m = u_m = theta_hat` (ties in the data).
    pub fn degenerate_count(&self) -> usize {
        self.degenerate_count
    }

    /// Every permutation was negligible; every interval is the whole line.
    pub fn all_negligible(&self) -> bool {
        self.negligible_count == self.len()
    }

    /// Lower limit at level `1 - alpha`.
    pub fn lower(&self, alpha: f64) -> f64 {
        self.sorted_l[tail_count(self.len(), alpha)]
    }

    /// Upper limit at level `1 - alpha`.
    pub fn upper(&self, alpha: f64) -> f64 {
        self.sorted_u[self.len() - 1 - tail_count(self.len(), alpha)]
    }

    pub fn confidence_interval(&self, alpha: f64) -> Result<CiResult> {
        check_level(alpha, "alpha")?;
        Ok(CiResult {
            lower: self.lower(alpha),
            upper: self.upper(alpha),
            alpha,
            theta_hat: self.theta_hat,
            m: self.len(),
            seed: self.seed,
        })
    }
}

/// A `1 - alpha` interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub theta_hat: f64,
    pub m: usize,
    pub seed: u64,
}

impl CiResult {
    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }

    pub fn contains_interval(&self, other: &CiResult) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// Crossing endpoints for every permutation in `plan`, in plan order.
///
/// Per-permutation work runs on the rayon pool; results are collected in
/// plan order, so the output does not depend on the number of threads.
pub fn compute_endpoints(
    data: &[f64],
    model: &Model,
    plan: &PermutationPlan,
) -> Result<EndpointVectors> {
    model.check_data(data)?;
    if plan.n() != model.len() {
        return Err(Error::invalid(format!(
            "plan permutes {} elements, model has {}",
            plan.n(),
            model.len()
        )));
    }
    let obs = model.observed_coefficients(data)?;
    let theta_hat = model.theta_hat(data)?;
    let crossings = plan
        .permutations()
        .par_iter()
        .map(|p| solve_crossing(&obs, &model.coefficients(data, p)?))
        .collect::<Result<Vec<_>>>()?;
    EndpointVectors::from_crossings(&crossings, theta_hat, plan.seed())
}

pub fn confidence_interval(ep: &EndpointVectors, alpha: f64) -> Result<CiResult> {
    ep.confidence_interval(alpha)
}

fn exceedance_count(
    data: &[f64],
    model: &Model,
    plan: &PermutationPlan,
    theta0: f64,
    negligible_exceed: bool,
) -> Result<usize> {
    model.check_data(data)?;
    if plan.n() != model.len() {
        return Err(Error::invalid("plan and model sizes differ"));
    }
    let residuals = model.residuals(data, theta0)?;
    let t_obs = model.statistic(&residuals)?;
    let mut count = 0;
    for p in plan {
        if negligible_exceed && model.is_negligible_permutation(p, DEFAULT_NEGLIGIBLE_REL_TOL)? {
            count += 1;
            continue;
        }
        if model.statistic(&p.apply(&residuals)?)? > t_obs {
            count += 1;
        }
    }
    Ok(count)
}

/// Fraction of permutations whose statistic at `theta0` strictly exceeds the
/// unpermuted one, evaluated directly on permuted residuals.
///
/// Negligible permutations count as exceeding, consistent with their
/// unbounded endpoints. With that convention, for any `gamma`,
/// `theta0` lies outside the `1 - gamma` interval exactly when this fraction
/// is at most `gamma` (up to exact ties at an endpoint).
pub fn permutation_test_fraction(
    data: &[f64],
    model: &Model,
    plan: &PermutationPlan,
    theta0: f64,
) -> Result<f64> {
    Ok(exceedance_count(data, model, plan, theta0, true)? as f64 / plan.len() as f64)
}

/// Literal `#{m : T_m > T_obs} / M` over all permutations, negligible ones
/// included.
pub fn raw_permutation_test_fraction(
    data: &[f64],
    model: &Model,
    plan: &PermutationPlan,
    theta0: f64,
) -> Result<f64> {
    Ok(exceedance_count(data, model, plan, theta0, false)? as f64 / plan.len() as f64)
}

/// Convenience: endpoints for `data` under a fresh sampled plan.
pub fn sampled_endpoints(
    data: &[f64],
    model: &Model,
    m: usize,
    seed: u64,
) -> Result<EndpointVectors> {
    let plan = PermutationPlan::sample(model.len(), m, seed)?;
    compute_endpoints(data, model, &plan)
}
