//! Joint coverage of several marginal intervals that share one permutation
//! plan, and adjustment of the marginal level to hit a joint target.
//!
//! For a box `[L_1, U_1] x .. x [L_K, U_K]` each of its `2^K` corners picks
//! one side per coordinate. Permutation `m` fails at a corner when, for some
//! coordinate, its endpoint on the chosen side lies outside the box
//! (`l_mk < L_k` on a lower side, `u_mk > U_k` on an upper side). Infinite
//! endpoints fail on their side at every corner. The joint level is the
//! worst corner's failure fraction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::PermutationPlan;
use crate::statistic::{solve_crossing, CrossingInterval, Model};
use crate::univariate::{tail_count, CiResult, EndpointVectors};

/// Coordinates allowed before the `2^K` corner sweep is refused.
pub const DEFAULT_MAX_COORDINATES: usize = 20;

/// Hard ceiling; corner masks are `u32`.
const MASK_BITS: usize = 30;

/// Default tolerance on the joint level when adjusting.
pub const DEFAULT_ADJUST_THRESHOLD: f64 = 1.0 / 640.0;

/// `K` endpoint vectors computed from the same permutation plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEndpoints {
    coords: Vec<EndpointVectors>,
}

impl JointEndpoints {
    pub fn new(coords: Vec<EndpointVectors>) -> Result<Self> {
        let first = coords
            .first()
            .ok_or_else(|| Error::invalid("joint endpoints need at least one coordinate"))?;
        if coords
            .iter()
            .any(|c| c.len() != first.len() || c.seed() != first.seed())
        {
            return Err(Error::invalid(
                "all coordinates must come from the same permutation plan",
            ));
        }
        Ok(JointEndpoints { coords })
    }

    /// Endpoints for every column of `columns` under one plan. The model is
    /// shared: one group layout or one regressor for all coordinates.
    pub fn compute(columns: &[Vec<f64>], model: &Model, plan: &PermutationPlan) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("no response columns"));
        }
        for col in columns {
            model.check_data(col)?;
        }
        if plan.n() != model.len() {
            return Err(Error::invalid(format!(
                "plan permutes {} elements, model has {}",
                plan.n(),
                model.len()
            )));
        }
        let observed = columns
            .iter()
            .map(|c| model.observed_coefficients(c))
            .collect::<Result<Vec<_>>>()?;
        let per_perm: Vec<Vec<CrossingInterval>> = plan
            .permutations()
            .par_iter()
            .map(|p| {
                // the slope and its negligibility depend on the design only
                let template = model.coefficients(&columns[0], p)?;
                columns
                    .iter()
                    .zip(&observed)
                    .map(|(col, obs)| {
                        let coeffs = crate::statistic::AffineCoefficients {
                            a: model.intercept(col, p)?,
                            ..template
                        };
                        solve_crossing(obs, &coeffs)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let coords = (0..columns.len())
            .map(|k| {
                let crossings: Vec<CrossingInterval> = per_perm.iter().map(|row| row[k]).collect();
                EndpointVectors::from_crossings(
                    &crossings,
                    model.theta_hat(&columns[k])?,
                    plan.seed(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coords)
    }

    pub fn k(&self) -> usize {
        self.coords.len()
    }

    pub fn m(&self) -> usize {
        self.coords[0].len()
    }

    pub fn seed(&self) -> u64 {
        self.coords[0].seed()
    }

    pub fn coordinates(&self) -> &[EndpointVectors] {
        &self.coords
    }

    pub fn coordinate(&self, k: usize) -> &EndpointVectors {
        &self.coords[k]
    }

    pub fn theta_hat(&self) -> Vec<f64> {
        self.coords.iter().map(EndpointVectors::theta_hat).collect()
    }

    pub fn l(&self, m: usize, k: usize) -> f64 {
        self.coords[k].l()[m]
    }

    pub fn u(&self, m: usize, k: usize) -> f64 {
        self.coords[k].u()[m]
    }

    /// Marginal intervals at level `1 - alpha`.
    pub fn marginal_intervals(&self, alpha: f64) -> Result<Vec<CiResult>> {
        self.coords
            .iter()
            .map(|c| c.confidence_interval(alpha))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// Sides of corner `corner`: bit `k` set means coordinate `k` uses its upper
/// limit.
pub fn corner_sides(corner: usize, k: usize) -> Vec<Side> {
    (0..k)
        .map(|i| {
            if corner >> i & 1 == 1 {
                Side::Upper
            } else {
                Side::Lower
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCoverageResult {
    pub alpha: f64,
    pub alpha_multiple: f64,
    /// `R_c` indexed by corner bitmask (see [`corner_sides`]).
    pub corner_counts: Vec<usize>,
    pub worst_corner: usize,
    /// Per coordinate: permutations failing the lower side, and the upper.
    pub side_failures: Vec<(usize, usize)>,
    pub m: usize,
}

impl JointCoverageResult {
    pub fn joint_coverage(&self) -> f64 {
        1.0 - self.alpha_multiple
    }
}

fn check_cap(k: usize, cap: usize) -> Result<()> {
    if k > cap.min(MASK_BITS) {
        return Err(Error::ResourceLimit(format!(
            "{k} coordinates exceed the corner-enumeration cap of {}",
            cap.min(MASK_BITS)
        )));
    }
    Ok(())
}

/// Joint level of the marginal `1 - alpha` intervals.
pub fn joint_alpha_multiple(je: &JointEndpoints, alpha: f64) -> Result<JointCoverageResult> {
    joint_alpha_multiple_capped(je, alpha, DEFAULT_MAX_COORDINATES)
}

pub fn joint_alpha_multiple_capped(
    je: &JointEndpoints,
    alpha: f64,
    cap: usize,
) -> Result<JointCoverageResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    check_cap(je.k(), cap)?;
    let mut result = corner_counts_at_tail(je, tail_count(je.m(), alpha));
    result.alpha = alpha;
    Ok(result)
}

/// Corner sweep with every coordinate's limits taken `tail` ranks in from
/// the extremes.
fn corner_counts_at_tail(je: &JointEndpoints, tail: usize) -> JointCoverageResult {
    let (m, k) = (je.m(), je.k());
    let limits: Vec<(f64, f64)> = je
        .coordinates()
        .iter()
        .map(|c| (c.sorted_l()[tail], c.sorted_u()[m - 1 - tail]))
        .collect();

    // Failure patterns: (lower-failure mask, upper-failure mask) -> count.
    let mut patterns: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut side_failures = vec![(0usize, 0usize); k];
    for row in 0..m {
        let (mut lower_mask, mut upper_mask) = (0u32, 0u32);
        for (i, &(lo, hi)) in limits.iter().enumerate() {
            let l = je.l(row, i);
            let u = je.u(row, i);
            if l < lo || l == f64::NEG_INFINITY {
                lower_mask |= 1 << i;
                side_failures[i].0 += 1;
            }
            if u > hi || u == f64::INFINITY {
                upper_mask |= 1 << i;
                side_failures[i].1 += 1;
            }
        }
        if lower_mask | upper_mask != 0 {
            *patterns.entry((lower_mask, upper_mask)).or_default() += 1;
        }
    }
    let patterns: Vec<((u32, u32), usize)> = patterns.into_iter().collect();
    let corners = 1usize << k;
    let count_corner = |corner: usize| -> usize {
        let c = corner as u32;
        patterns
            .iter()
            .filter(|((lower, upper), _)| (lower & !c) | (upper & c) != 0)
            .map(|(_, n)| n)
            .sum()
    };
    let corner_counts: Vec<usize> = if corners * patterns.len() > 1 << 16 {
        (0..corners).into_par_iter().map(count_corner).collect()
    } else {
        (0..corners).map(count_corner).collect()
    };
    // first corner attaining the maximum
    let (worst_corner, worst) =
        corner_counts.iter().enumerate().fold(
            (0, 0),
            |best, (c, &n)| if n > best.1 { (c, n) } else { best },
        );
    JointCoverageResult {
        alpha: tail as f64 / m as f64,
        alpha_multiple: worst as f64 / m as f64,
        corner_counts,
        worst_corner,
        side_failures,
        m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentResult {
    pub alpha_star: f64,
    pub achieved_alpha_multiple: f64,
    pub target: f64,
    pub threshold: f64,
    /// Number of joint-level evaluations.
    pub iterations: usize,
    /// `|achieved - target| <= threshold`. When false the step function has
    /// no value that close to the target and the search stopped at the
    /// `1/M` resolution.
    pub within_threshold: bool,
}

/// Marginal level `alpha*` whose joint level is closest to `target` from
/// below, allowing an overshoot of at most `threshold` when nothing below is
/// within `threshold`.
///
/// The joint level is a nondecreasing step function of `alpha*` that only
/// changes at multiples of `1/M`, so the search bisects over
/// `alpha* = j / M` for `j` in `1..=floor(M * target)`.
pub fn adjust_alpha(je: &JointEndpoints, target: f64, threshold: f64) -> Result<AdjustmentResult> {
    adjust_alpha_capped(je, target, threshold, DEFAULT_MAX_COORDINATES)
}

pub fn adjust_alpha_capped(
    je: &JointEndpoints,
    target: f64,
    threshold: f64,
    cap: usize,
) -> Result<AdjustmentResult> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!(
            "target must lie in (0, 1), got {target}"
        )));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::invalid(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    check_cap(je.k(), cap)?;
    let m = je.m();
    let j_max = tail_count(m, target);
    if j_max < 1 {
        return Err(Error::invalid(format!(
            "target {target} is below the resolution 1/M = {}",
            1.0 / m as f64
        )));
    }
    let mut iterations = 0;
    let mut level = |j: usize| {
        iterations += 1;
        corner_counts_at_tail(je, j).alpha_multiple
    };

    let at_min = level(1);
    if at_min > target + threshold {
        return Err(Error::InfeasibleAdjustment {
            min_alpha: 1.0 / m as f64,
            achieved: at_min,
            target,
            threshold,
        });
    }
    let (best, best_level) = if at_min > target {
        (1, at_min)
    } else {
        // invariant: level(lo) <= target < level(hi), hi = j_max + 1 virtual
        let (mut lo, mut lo_level) = (1, at_min);
        let mut hi = j_max + 1;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let v = level(mid);
            if v <= target {
                lo = mid;
                lo_level = v;
            } else {
                hi = mid;
            }
        }
        if target - lo_level > threshold && lo < j_max {
            let next = level(lo + 1);
            if next <= target + threshold {
                (lo + 1, next)
            } else {
                (lo, lo_level)
            }
        } else {
            (lo, lo_level)
        }
    };
    Ok(AdjustmentResult {
        alpha_star: best as f64 / m as f64,
        achieved_alpha_multiple: best_level,
        target,
        threshold,
        iterations,
        within_threshold: (best_level - target).abs() <= threshold,
    })
}

/// Marginal intervals at the adjusted level.
pub fn adjusted_intervals(je: &JointEndpoints, ar: &AdjustmentResult) -> Result<Vec<CiResult>> {
    je.marginal_intervals(ar.alpha_star)
}

/// Classical joint levels for `k` intervals each at level `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLevels {
    /// `1 - (1 - alpha)^k`, exact under independence.
    pub sidak: f64,
    /// `min(k * alpha, 1)`, the union bound.
    pub bonferroni: f64,
}

impl ReferenceLevels {
    pub fn new(alpha: f64, k: usize) -> Self {
        ReferenceLevels {
            sidak: 1.0 - (1.0 - alpha).powi(k as i32),
            bonferroni: (k as f64 * alpha).min(1.0),
        }
    }

    pub fn sidak_coverage(&self) -> f64 {
        1.0 - self.sidak
    }

    pub fn bonferroni_coverage(&self) -> f64 {
        1.0 - self.bonferroni
    }
}
