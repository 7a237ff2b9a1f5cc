//! Data generators and Monte-Carlo harnesses: the equicorrelated multivariate
//! regression study and coverage experiments under the null.
//!
//! All randomness flows from a master seed. Replicate `r` derives its own
//! seeds from `(seed, r)`, replicates run in parallel, and results are
//! gathered in replicate order, so every summary is reproducible bit for bit
//! regardless of thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multivariate::{
    adjust_alpha, joint_alpha_multiple, JointEndpoints, DEFAULT_ADJUST_THRESHOLD,
};
use crate::perm::PermutationPlan;
use crate::rng::{derive_seed, rng_from_seed, standard_normal, uniform_open01};
use crate::statistic::Model;
use crate::univariate::quantile;

/// Seed of the fixed regressor draw used by [`run_study`].
pub const DEFAULT_X_SEED: u64 = 20_200_640;

/// Correlations studied in the regression experiment.
pub const STUDY_RHOS: [f64; 3] = [0.90, 0.95, 0.99];

/// Unit-variance equicorrelation structure: 1 on the diagonal, `rho` off it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquicorrelatedSpec {
    k: usize,
    rho: f64,
}

impl EquicorrelatedSpec {
    /// Requires `-1/(k-1) < rho < 1`, the positive-definite range.
    pub fn new(k: usize, rho: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let lower = if k == 1 {
            -1.0
        } else {
            -1.0 / (k as f64 - 1.0)
        };
        if !(rho > lower && rho < 1.0) {
            return Err(Error::invalid(format!(
                "rho = {rho} outside the positive-definite range ({lower}, 1) for k = {k}"
            )));
        }
        Ok(EquicorrelatedSpec { k, rho })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| if i == j { 1.0 } else { self.rho })
    }
}

/// Lower-triangular `F` with `F * F^T = D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn k(&self) -> usize {
        self.lower.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    /// `s * F`; `s = 0` gives noiseless data.
    pub fn scaled(&self, s: f64) -> Self {
        CholeskyFactor {
            lower: &self.lower * s,
        }
    }

    /// `F * z`.
    pub fn correlate(&self, z: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|i| (0..=i).map(|j| self.lower[(i, j)] * z[j]).sum())
            .collect()
    }
}

pub fn cholesky_equicorrelated(spec: &EquicorrelatedSpec) -> Result<CholeskyFactor> {
    let chol = spec.matrix().cholesky().ok_or_else(|| {
        Error::Numeric(format!(
            "equicorrelation matrix not positive definite: {spec:?}"
        ))
    })?;
    Ok(CholeskyFactor { lower: chol.l() })
}

/// `n` regressor values drawn uniformly from `(-1, 1)`.
pub fn uniform_regressor(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| 2.0 * uniform_open01(&mut rng) - 1.0)
        .collect()
}

/// `n` rows of correlated standard-normal noise, returned as `k` columns.
pub fn correlated_noise(factor: &CholeskyFactor, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let k = factor.k();
    let mut rng = rng_from_seed(seed);
    let mut columns = vec![Vec::with_capacity(n); k];
    let mut z = vec![0.0; k];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = standard_normal(&mut rng);
        }
        for (col, e) in columns.iter_mut().zip(factor.correlate(&z)) {
            col.push(e);
        }
    }
    columns
}

/// Responses `Y_i = x_i * 1 + F z_i` (intercepts 0, slopes 1), returned
/// column-wise: `result[k][i]` is coordinate `k` of observation `i`.
pub fn generate_regression_dataset(
    factor: &CholeskyFactor,
    x: &[f64],
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if x.is_empty() {
        return Err(Error::invalid("empty regressor"));
    }
    let mut columns = correlated_noise(factor, x.len(), seed);
    for col in &mut columns {
        for (y, xi) in col.iter_mut().zip(x) {
            *y += xi;
        }
    }
    Ok(columns)
}

/// Regression study configuration. Defaults: N=20, K=8, M=1000, 100 runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub runs: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub seed: u64,
    pub x_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 20,
            k: 8,
            m: 1000,
            runs: 100,
            alpha: 0.05,
            threshold: DEFAULT_ADJUST_THRESHOLD,
            seed: 0,
            x_seed: DEFAULT_X_SEED,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.k == 0 || self.m == 0 || self.runs == 0 {
            return Err(Error::invalid(format!(
                "n >= 3 and positive k, m, runs required: {self:?}"
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::invalid("threshold must be positive"));
        }
        Ok(())
    }

    pub fn regressor(&self) -> Vec<f64> {
        uniform_regressor(self.n, self.x_seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub rho: f64,
    pub run: usize,
    pub alpha_multiple: f64,
    pub alpha_star: f64,
    pub achieved_alpha_multiple: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub rho: f64,
    pub mean_alpha_multiple: f64,
    pub iqr_alpha_multiple: f64,
    pub mean_alpha_star: f64,
    pub iqr_alpha_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub x: Vec<f64>,
    pub rows: Vec<StudyRow>,
    pub replicates: Vec<ReplicateRow>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `Q(0.75) - Q(0.25)` with the `ceil(M * gamma)` order-statistic rule.
pub fn iqr(v: &[f64]) -> Result<f64> {
    Ok(quantile(v, 0.75)? - quantile(v, 0.25)?)
}

/// Seeds of run `run`: (data, plan). Shared across correlation levels so
/// the levels are compared on common random numbers.
pub fn run_seeds(master: u64, run: usize) -> (u64, u64) {
    let base = derive_seed(master, run as u64);
    (derive_seed(base, 0), derive_seed(base, 1))
}

/// Joint level at `alpha` and adjusted level for each run of the
/// equicorrelated regression study, summarised per correlation.
pub fn run_study(config: &SimConfig, rhos: &[f64]) -> Result<StudyTable> {
    config.validate()?;
    let x = config.regressor();
    let model = Model::linreg(x.clone())?;
    let mut rows = Vec::with_capacity(rhos.len());
    let mut replicates = Vec::with_capacity(rhos.len() * config.runs);
    for &rho in rhos {
        let factor = cholesky_equicorrelated(&EquicorrelatedSpec::new(config.k, rho)?)?;
        let runs: Vec<ReplicateRow> = (0..config.runs)
            .into_par_iter()
            .map(|run| {
                let (data_seed, plan_seed) = run_seeds(config.seed, run);
                let columns = generate_regression_dataset(&factor, &x, data_seed)?;
                let plan = PermutationPlan::sample(config.n, config.m, plan_seed)?;
                let je = JointEndpoints::compute(&columns, &model, &plan)?;
                let joint = joint_alpha_multiple(&je, config.alpha)?;
                let adj = adjust_alpha(&je, config.alpha, config.threshold)?;
                Ok(ReplicateRow {
                    rho,
                    run,
                    alpha_multiple: joint.alpha_multiple,
                    alpha_star: adj.alpha_star,
                    achieved_alpha_multiple: adj.achieved_alpha_multiple,
                    iterations: adj.iterations,
                })
            })
            .collect::<Result<_>>()?;
        let am: Vec<f64> = runs.iter().map(|r| r.alpha_multiple).collect();
        let star: Vec<f64> = runs.iter().map(|r| r.alpha_star).collect();
        rows.push(StudyRow {
            rho,
            mean_alpha_multiple: mean(&am),
            iqr_alpha_multiple: iqr(&am)?,
            mean_alpha_star: mean(&star),
            iqr_alpha_star: iqr(&star)?,
        });
        replicates.extend(runs);
    }
    Ok(StudyTable {
        x,
        rows,
        replicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoverageModel {
    TwoSample { n1: usize, n2: usize },
    LinReg { x: Vec<f64> },
}

/// Null-hypothesis coverage experiment. Every coordinate has true parameter
/// `true_theta`; errors are equicorrelated standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub model: CoverageModel,
    pub k: usize,
    pub rho: f64,
    pub m: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub true_theta: f64,
    /// Also evaluate intervals at the adjusted level.
    pub adjust: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub replicates: usize,
    pub k: usize,
    pub alpha: f64,
    /// Share of (replicate, coordinate) pairs whose interval misses the truth.
    pub marginal_rate: f64,
    pub per_coordinate_rates: Vec<f64>,
    /// Share of replicates where any coordinate misses.
    pub joint_rate: f64,
    pub adjusted_joint_rate: Option<f64>,
    pub mean_alpha_star: Option<f64>,
    /// Replicates whose adjustment was infeasible; they fall back to
    /// `alpha* = 1/M`.
    pub infeasible_adjustments: usize,
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn standard_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

struct ReplicateOutcome {
    misses: Vec<bool>,
    adjusted_miss: Option<bool>,
    alpha_star: Option<f64>,
    infeasible: bool,
}

pub fn coverage_experiment(config: &CoverageConfig) -> Result<CoverageReport> {
    if config.replicates == 0 || config.k == 0 {
        return Err(Error::invalid("replicates and k must be positive"));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {}",
            config.alpha
        )));
    }
    let factor = cholesky_equicorrelated(&EquicorrelatedSpec::new(config.k, config.rho)?)?;
    let (model, shift): (Model, Vec<f64>) = match &config.model {
        CoverageModel::TwoSample { n1, n2 } => (
            Model::two_sample(*n1, *n2)?,
            (0..n1 + n2)
                .map(|i| if i < *n1 { 1.0 } else { 0.0 })
                .collect(),
        ),
        CoverageModel::LinReg { x } => (Model::linreg(x.clone())?, x.clone()),
    };
    let n = model.len();
    let outcomes: Vec<ReplicateOutcome> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let (data_seed, plan_seed) = run_seeds(config.seed, r);
            let mut columns = correlated_noise(&factor, n, data_seed);
            for col in &mut columns {
                for (y, s) in col.iter_mut().zip(&shift) {
                    *y += config.true_theta * s;
                }
            }
            let plan = PermutationPlan::sample(n, config.m, plan_seed)?;
            let je = JointEndpoints::compute(&columns, &model, &plan)?;
            let misses = je
                .marginal_intervals(config.alpha)?
                .iter()
                .map(|ci| !ci.contains(config.true_theta))
                .collect();
            let (adjusted_miss, alpha_star, infeasible) = if config.adjust {
                let (alpha_star, infeasible) =
                    match adjust_alpha(&je, config.alpha, config.threshold) {
                        Ok(ar) => (ar.alpha_star, false),
                        Err(Error::InfeasibleAdjustment { min_alpha, .. }) => (min_alpha, true),
                        Err(e) => return Err(e),
                    };
                let miss = je
                    .marginal_intervals(alpha_star)?
                    .iter()
                    .any(|ci| !ci.contains(config.true_theta));
                (Some(miss), Some(alpha_star), infeasible)
            } else {
                (None, None, false)
            };
            Ok(ReplicateOutcome {
                misses,
                adjusted_miss,
                alpha_star,
                infeasible,
            })
        })
        .collect::<Result<_>>()?;

    let reps = config.replicates as f64;
    let per_coordinate_rates: Vec<f64> = (0..config.k)
        .map(|k| outcomes.iter().filter(|o| o.misses[k]).count() as f64 / reps)
        .collect();
    let joint_rate = outcomes
        .iter()
        .filter(|o| o.misses.iter().any(|&m| m))
        .count() as f64
        / reps;
    let (adjusted_joint_rate, mean_alpha_star) = if config.adjust {
        let misses = outcomes
            .iter()
            .filter(|o| o.adjusted_miss == Some(true))
            .count();
        let stars: Vec<f64> = outcomes.iter().filter_map(|o| o.alpha_star).collect();
        (Some(misses as f64 / reps), Some(mean(&stars)))
    } else {
        (None, None)
    };
    Ok(CoverageReport {
        replicates: config.replicates,
        k: config.k,
        alpha: config.alpha,
        marginal_rate: mean(&per_coordinate_rates),
        per_coordinate_rates,
        joint_rate,
        adjusted_joint_rate,
        mean_alpha_star,
        infeasible_adjustments: outcomes.iter().filter(|o| o.infeasible).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(EquicorrelatedSpec::new(8, 0.99).is_ok());
        assert!(EquicorrelatedSpec::new(8, 1.0).is_err());
        assert!(EquicorrelatedSpec::new(8, -1.0 / 7.0).is_err());
        assert!(EquicorrelatedSpec::new(8, -0.14).is_ok());
        assert!(EquicorrelatedSpec::new(0, 0.5).is_err());
    }

    #[test]
    fn cholesky_zero_rho_is_identity() {
        let f = cholesky_equicorrelated(&EquicorrelatedSpec::new(5, 0.0).unwrap()).unwrap();
        assert_eq!(f.matrix(), &DMatrix::identity(5, 5));
    }

    #[test]
    fn cholesky_two_by_two() {
        let f = cholesky_equicorrelated(&EquicorrelatedSpec::new(2, 0.5).unwrap()).unwrap();
        assert_eq!(f.get(0, 0), 1.0);
        assert_eq!(f.get(0, 1), 0.0);
        assert!((f.get(1, 0) - 0.5).abs() < 1e-15);
        assert!((f.get(1, 1) - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_reconstructs() {
        for rho in [0.9, 0.95, 0.99, -0.1] {
            let spec = EquicorrelatedSpec::new(8, rho).unwrap();
            let f = cholesky_equicorrelated(&spec).unwrap();
            let diff = f.reconstruct() - spec.matrix();
            assert!(diff.amax() < 1e-12, "rho {rho}: {}", diff.amax());
        }
    }

    #[test]
    fn regressor_in_range_and_fixed() {
        let x = uniform_regressor(20, DEFAULT_X_SEED);
        assert_eq!(x, uniform_regressor(20, DEFAULT_X_SEED));
        assert!(x.iter().all(|v| *v > -1.0 && *v < 1.0));
    }

    #[test]
    fn noiseless_data_recovers_unit_slopes() {
        let f = cholesky_equicorrelated(&EquicorrelatedSpec::new(4, 0.9).unwrap()).unwrap();
        let x = uniform_regressor(20, 1);
        let cols = generate_regression_dataset(&f.scaled(0.0), &x, 3).unwrap();
        let model = Model::linreg(x).unwrap();
        for col in &cols {
            assert!((model.theta_hat(col).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_correlation_matches_rho() {
        let rho = 0.6;
        let f = cholesky_equicorrelated(&EquicorrelatedSpec::new(3, rho).unwrap()).unwrap();
        let cols = correlated_noise(&f, 20_000, 8);
        let n = 20_000.0;
        for a in 0..3 {
            for b in (a + 1)..3 {
                let (ma, mb) = (mean(&cols[a]), mean(&cols[b]));
                let cov: f64 = cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(x, y)| (x - ma) * (y - mb))
                    .sum::<f64>()
                    / n;
                let va: f64 = cols[a].iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
                let vb: f64 = cols[b].iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
                let r = cov / (va * vb).sqrt();
                assert!((r - rho).abs() < 0.02, "{r}");
            }
        }
    }

    #[test]
    fn slope_estimates_have_textbook_moments() {
        let f = cholesky_equicorrelated(&EquicorrelatedSpec::new(2, 0.0).unwrap()).unwrap();
        let x = uniform_regressor(20, DEFAULT_X_SEED);
        let model = Model::linreg(x.clone()).unwrap();
        let sxx = match &model {
            Model::LinReg(d) => d.sxx(),
            _ => unreachable!(),
        };
        let est: Vec<f64> = (0..1000)
            .map(|s| {
                let cols = generate_regression_dataset(&f, &x, s).unwrap();
                model.theta_hat(&cols[0]).unwrap()
            })
            .collect();
        let m = mean(&est);
        let var = est.iter().map(|b| (b - m).powi(2)).sum::<f64>() / 999.0;
        let sd_mean = (1.0 / sxx / 1000.0).sqrt();
        assert!((m - 1.0).abs() < 4.0 * sd_mean, "mean {m}");
        // variance of a sample variance over 1000 normals: ~ 2 sigma^4 / 999
        let target = 1.0 / sxx;
        assert!(
            (var - target).abs() < 4.0 * target * (2.0f64 / 999.0).sqrt(),
            "var {var} vs {target}"
        );
    }

    #[test]
    fn iqr_uses_ceil_rule() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        // Q(0.75) = v[6th] = 6, Q(0.25) = v[2nd] = 2
        assert_eq!(iqr(&v).unwrap(), 4.0);
    }

    #[test]
    fn study_small_is_deterministic() {
        let config = SimConfig {
            runs: 6,
            m: 300,
            ..SimConfig::default()
        };
        let a = run_study(&config, &[0.9, 0.99]).unwrap();
        let b = run_study(&config, &[0.9, 0.99]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.replicates.len(), 12);
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            alpha: 1.5,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(run_study(&bad, &STUDY_RHOS).is_err());
    }
}
