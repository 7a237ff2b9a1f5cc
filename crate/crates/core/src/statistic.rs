//! Test statistics for the two supported models and the per-permutation
//! crossing intervals derived from them.
//!
//! Both statistics are absolute values of functions that are affine in the
//! parameter, so for a fixed permutation `s` the permuted statistic is
//! `T_s(theta) = |a_s - b_s * theta|`. The unpermuted statistic has slope
//! `b_e`; whenever `|b_s| < |b_e|` the two curves cross exactly twice and the
//! crossing points have a closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;

/// Default relative tolerance for deciding `|b_s| = |b_e|`.
pub const DEFAULT_NEGLIGIBLE_REL_TOL: f64 = 1e-9;

/// Unpaired two-sample shift model. The first `n1` observations form group
/// Y and the parameter is `mean(Y) - mean(Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoSampleLayout {
    n1: usize,
    n2: usize,
}

impl TwoSampleLayout {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid(format!(
                "both groups need at least one observation (n1 = {n1}, n2 = {n2})"
            )));
        }
        Ok(TwoSampleLayout { n1, n2 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Number of group-Y positions `i < n1` with `p(i) < n1`.
    fn retained(&self, p: &Permutation) -> usize {
        p.as_slice()[..self.n1]
            .iter()
            .filter(|&&j| j < self.n1)
            .count()
    }
}

/// Simple linear regression `Y_i = alpha + beta * x_i + e_i`; the parameter
/// is the slope `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDesign {
    x: Vec<f64>,
    x_centered: Vec<f64>,
    sxx: f64,
}

impl RegressionDesign {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::invalid("regression needs at least two observations"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "regressor contains non-finite values".into(),
            ));
        }
        if x.iter().all(|&v| v == x[0]) {
            return Err(Error::invalid("regressor is constant"));
        }
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let x_centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let sxx = x_centered.iter().map(|c| c * c).sum();
        Ok(RegressionDesign { x, x_centered, sxx })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn x_centered(&self) -> &[f64] {
        &self.x_centered
    }

    /// Sum of squared centered regressor values.
    pub fn sxx(&self) -> f64 {
        self.sxx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    TwoSample(TwoSampleLayout),
    LinReg(RegressionDesign),
}

/// `T_s(theta) = |a - b * theta|` for one permutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficients {
    pub a: f64,
    pub b: f64,
    pub negligible: bool,
}

impl AffineCoefficients {
    pub fn eval(&self, theta: f64) -> f64 {
        (self.a - self.b * theta).abs()
    }
}

/// Parameter values where the unpermuted statistic is not above the
/// permuted one. `l = -inf, u = +inf` marks a negligible permutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingInterval {
    pub l: f64,
    pub u: f64,
    /// The permuted statistic vanishes at the estimate; the interval
    /// collapses to the single point `{theta_hat}`.
    pub degenerate: bool,
}

impl CrossingInterval {
    pub const UNBOUNDED: CrossingInterval = CrossingInterval {
        l: f64::NEG_INFINITY,
        u: f64::INFINITY,
        degenerate: false,
    };

    pub fn is_unbounded(&self) -> bool {
        self.l == f64::NEG_INFINITY
    }
}

/// `|b_s| >= |b_e| * (1 - rel_tol)`: the permuted statistic grows at least
/// as fast as the unpermuted one, so the crossing interval is unbounded.
pub fn is_negligible(b_s: f64, b_e: f64, rel_tol: f64) -> bool {
    b_s.abs() >= b_e.abs() * (1.0 - rel_tol)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl Model {
    pub fn two_sample(n1: usize, n2: usize) -> Result<Self> {
        Ok(Model::TwoSample(TwoSampleLayout::new(n1, n2)?))
    }

    pub fn linreg(x: Vec<f64>) -> Result<Self> {
        Ok(Model::LinReg(RegressionDesign::new(x)?))
    }

    /// Number of observations the model expects.
    pub fn len(&self) -> usize {
        match self {
            Model::TwoSample(l) => l.n1 + l.n2,
            Model::LinReg(d) => d.x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_data(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.len() {
            return Err(Error::invalid(format!(
                "model expects {} observations, data has {}",
                self.len(),
                data.len()
            )));
        }
        Ok(())
    }

    fn check_perm(&self, p: &Permutation) -> Result<()> {
        if p.len() != self.len() {
            return Err(Error::invalid(format!(
                "permutation of length {} for a model of {} observations",
                p.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Group mean difference, or the least-squares slope.
    pub fn theta_hat(&self, data: &[f64]) -> Result<f64> {
        self.check_data(data)?;
        Ok(match self {
            Model::TwoSample(l) => mean(&data[..l.n1]) - mean(&data[l.n1..]),
            Model::LinReg(d) => {
                let y_mean = mean(data);
                let sxy: f64 = d
                    .x_centered
                    .iter()
                    .zip(data)
                    .map(|(c, y)| c * (y - y_mean))
                    .sum();
                sxy / d.sxx
            }
        })
    }

    /// Slope `b_s` of the permuted statistic. Depends on the design only.
    pub fn slope(&self, p: &Permutation) -> Result<f64> {
        self.check_perm(p)?;
        Ok(match self {
            Model::TwoSample(l) => {
                let k = l.retained(p) as f64;
                k / l.n1 as f64 - (l.n1 as f64 - k) / l.n2 as f64
            }
            Model::LinReg(d) => d
                .x_centered
                .iter()
                .zip(p.as_slice())
                .map(|(c, &j)| c * d.x[j])
                .sum(),
        })
    }

    /// Slope of the unpermuted statistic.
    pub fn observed_slope(&self) -> f64 {
        match self {
            Model::TwoSample(_) => 1.0,
            Model::LinReg(d) => d.sxx,
        }
    }

    /// Intercept `a_s` of the permuted statistic for `data`.
    pub fn intercept(&self, data: &[f64], p: &Permutation) -> Result<f64> {
        self.check_data(data)?;
        self.check_perm(p)?;
        let idx = p.as_slice();
        Ok(match self {
            Model::TwoSample(l) => {
                let first: f64 = idx[..l.n1].iter().map(|&j| data[j]).sum();
                let second: f64 = idx[l.n1..].iter().map(|&j| data[j]).sum();
                first / l.n1 as f64 - second / l.n2 as f64
            }
            Model::LinReg(d) => d
                .x_centered
                .iter()
                .zip(idx)
                .map(|(c, &j)| c * data[j])
                .sum(),
        })
    }

    /// `(a_s, b_s)` for permutation `p`, flagged negligible against the
    /// identity's slope with relative tolerance `rel_tol`.
    pub fn coefficients_with_tol(
        &self,
        data: &[f64],
        p: &Permutation,
        rel_tol: f64,
    ) -> Result<AffineCoefficients> {
        let a = self.intercept(data, p)?;
        let b = self.slope(p)?;
        Ok(AffineCoefficients {
            a,
            b,
            negligible: is_negligible(b, self.observed_slope(), rel_tol),
        })
    }

    pub fn coefficients(&self, data: &[f64], p: &Permutation) -> Result<AffineCoefficients> {
        self.coefficients_with_tol(data, p, DEFAULT_NEGLIGIBLE_REL_TOL)
    }

    /// Coefficients of the unpermuted statistic.
    pub fn observed_coefficients(&self, data: &[f64]) -> Result<AffineCoefficients> {
        self.coefficients(data, &Permutation::identity(self.len()))
    }

    pub fn is_negligible_permutation(&self, p: &Permutation, rel_tol: f64) -> Result<bool> {
        Ok(is_negligible(
            self.slope(p)?,
            self.observed_slope(),
            rel_tol,
        ))
    }

    /// Residuals `X_i - phi_i(theta)`.
    pub fn residuals(&self, data: &[f64], theta: f64) -> Result<Vec<f64>> {
        self.check_data(data)?;
        Ok(match self {
            Model::TwoSample(l) => data
                .iter()
                .enumerate()
                .map(|(i, v)| if i < l.n1 { v - theta } else { *v })
                .collect(),
            Model::LinReg(d) => data.iter().zip(&d.x).map(|(y, x)| y - theta * x).collect(),
        })
    }

    /// The test statistic applied to a residual vector.
    pub fn statistic(&self, residuals: &[f64]) -> Result<f64> {
        self.check_data(residuals)?;
        Ok(match self {
            Model::TwoSample(l) => (mean(&residuals[..l.n1]) - mean(&residuals[l.n1..])).abs(),
            Model::LinReg(d) => {
                let r_mean = mean(residuals);
                d.x_centered
                    .iter()
                    .zip(residuals)
                    .map(|(c, r)| c * (r - r_mean))
                    .sum::<f64>()
                    .abs()
            }
        })
    }

    /// `t(s(X - phi(theta)))` evaluated directly from the data, without the
    /// affine reduction.
    pub fn permuted_statistic(&self, data: &[f64], p: &Permutation, theta: f64) -> Result<f64> {
        let r = self.residuals(data, theta)?;
        self.statistic(&p.apply(&r)?)
    }
}

/// Closed-form crossing interval of a permutation's statistic against the
/// unpermuted one.
///
/// `obs` must hold the identity's coefficients. Outside `[l, u]` the
/// unpermuted statistic strictly exceeds the permuted one; inside `(l, u)`
/// it is strictly below.
pub fn solve_crossing(
    obs: &AffineCoefficients,
    perm: &AffineCoefficients,
) -> Result<CrossingInterval> {
    if ![obs.a, obs.b, perm.a, perm.b].iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite statistic coefficients: obs ({}, {}), perm ({}, {})",
            obs.a, obs.b, perm.a, perm.b
        )));
    }
    if obs.b == 0.0 {
        return Err(Error::Numeric("unpermuted statistic has zero slope".into()));
    }
    if perm.negligible {
        return Ok(CrossingInterval::UNBOUNDED);
    }
    let theta_hat = obs.a / obs.b;
    // a_s / b_s == a_e / b_e, cross-multiplied so b_s = 0 is handled.
    if perm.a * obs.b == obs.a * perm.b {
        return Ok(CrossingInterval {
            l: theta_hat,
            u: theta_hat,
            degenerate: true,
        });
    }
    let r1 = (obs.a - perm.a) / (obs.b - perm.b);
    let r2 = (obs.a + perm.a) / (obs.b + perm.b);
    Ok(CrossingInterval {
        l: r1.min(r2).min(theta_hat),
        u: r1.max(r2).max(theta_hat),
        degenerate: false,
    })
}

/// Crossing interval for an arbitrary statistic satisfying minimality at
/// `theta_hat`, monotonicity of the difference, and eventual significance.
///
/// Walks outward from `theta_hat` in doubling steps starting at `scale` until
/// the difference `t_obs - t_perm` turns positive, then bisects to absolute
/// width `tol`. If no sign change appears within 1024 doublings on a side the
/// permutation is reported as negligible.
pub fn solve_crossing_numeric<F, G>(
    t_obs: F,
    t_perm: G,
    theta_hat: f64,
    scale: f64,
    tol: f64,
) -> Result<CrossingInterval>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(scale > 0.0 && scale.is_finite()) || tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("scale and tol must be positive"));
    }
    let diff = |theta: f64| t_obs(theta) - t_perm(theta);
    let search = |direction: f64| -> Option<f64> {
        let mut inner = theta_hat;
        let mut step = scale;
        for _ in 0..1024 {
            let outer = theta_hat + direction * step;
            if !outer.is_finite() {
                return None;
            }
            if diff(outer) > 0.0 {
                let (mut lo, mut hi) = (inner, outer);
                while (hi - lo).abs() > tol {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if diff(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            inner = outer;
            step *= 2.0;
        }
        None
    };
    match (search(-1.0), search(1.0)) {
        // minimality fails at the estimate itself
        (Some(_), Some(_)) if diff(theta_hat) >= 0.0 => Ok(CrossingInterval {
            l: theta_hat,
            u: theta_hat,
            degenerate: true,
        }),
        (Some(l), Some(u)) => Ok(CrossingInterval {
            l,
            u,
            degenerate: false,
        }),
        _ => Ok(CrossingInterval::UNBOUNDED),
    }
}
