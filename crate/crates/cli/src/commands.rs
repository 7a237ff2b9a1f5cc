//! Subcommand bodies. Each writes its result files into the output
//! directory and returns the text summary printed on stdout.

use std::fmt::Write as _;
use std::path::Path;

use permci::multivariate::DEFAULT_MAX_COORDINATES;
use permci::rng::derive_seed;
use permci::simulate::run_study;
use permci::{
    adjust_alpha, bootstrap_endpoints, joint_alpha_multiple, AdjustmentResult, CiResult,
    JointEndpoints, PermutationPlan, ReferenceLevels,
};
use serde::Serialize;

use crate::dataset::{ingest_csv, Dataset};
use crate::error::CliError;
use crate::manifest::{sha256_file, AnalysisConfig, RunConfig, RunManifest, SimulateConfig};
use crate::output::{cell, flag, write_csv, write_json, Format, Limit, SCHEMA_VERSION};

pub const MIN_PERMUTATIONS: usize = 100;
pub const RECOMMENDED_PERMUTATIONS: usize = 1000;
const BOOTSTRAP_STREAM: u64 = 0xB007;

/// Runs `config`, writing results and `manifest.json` into `out`.
pub fn execute(config: &RunConfig, out: &Path, threads: Option<usize>) -> Result<String, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let digest = config.input().map(sha256_file).transpose()?;
    let manifest = RunManifest::new(config.clone(), digest, threads);
    write_json(&out.join("manifest.json"), &manifest)?;

    pool.install(|| match config {
        RunConfig::Ci(a) => run_ci(a, out),
        RunConfig::Joint(a) => run_joint(a, out),
        RunConfig::Bootstrap(a) => run_bootstrap(a, out),
        RunConfig::Simulate(s) => run_simulate(s, out),
    })
}

/// Replays a manifest into `out`, optionally with a different thread count.
pub fn replay(
    manifest_path: &Path,
    out: &Path,
    threads: Option<usize>,
) -> Result<String, CliError> {
    let manifest = RunManifest::read(manifest_path)?;
    manifest.verify()?;
    execute(&manifest.config, out, threads.or(manifest.threads))
}

pub fn check_analysis(a: &AnalysisConfig) -> Result<(), CliError> {
    if a.permutations < MIN_PERMUTATIONS {
        return Err(CliError::Usage(format!(
            "--permutations must be at least {MIN_PERMUTATIONS}, got {}",
            a.permutations
        )));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must lie in (0, 1), got {}",
            a.alpha
        )));
    }
    Ok(())
}

struct Prepared {
    dataset: Dataset,
    je: JointEndpoints,
}

fn prepare(a: &AnalysisConfig, out: &Path) -> Result<Prepared, CliError> {
    check_analysis(a)?;
    let dataset = ingest_csv(&a.input, &a.ingest)?;
    let model = dataset.model()?;
    let plan = PermutationPlan::sample(dataset.n(), a.permutations, a.seed)?;
    if a.export_plan {
        let path = out.join("plan.txt");
        let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        plan.write_text(std::io::BufWriter::new(file))
            .map_err(|e| CliError::io(&path, e))?;
    }
    let je = JointEndpoints::compute(&dataset.columns, &model, &plan)?;
    Ok(Prepared { dataset, je })
}

fn describe(ds: &Dataset) -> String {
    match &ds.group_labels {
        Some([a, b]) => format!("two-sample, {a} (n={}) minus {b} (n={})", ds.n1, ds.n2),
        None => format!("regression slope, n={}", ds.n()),
    }
}

fn fmt_limit(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Serialize)]
struct IntervalRecord {
    coordinate: String,
    theta_hat: f64,
    lower: Limit,
    upper: Limit,
    negligible: usize,
    degenerate: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjusted_lower: Option<Limit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjusted_upper: Option<Limit>,
}

fn interval_records(
    p: &Prepared,
    cis: &[CiResult],
    adjusted: Option<&[CiResult]>,
) -> Vec<IntervalRecord> {
    cis.iter()
        .enumerate()
        .map(|(k, ci)| {
            let ep = p.je.coordinate(k);
            IntervalRecord {
                coordinate: p.dataset.column_names[k].clone(),
                theta_hat: ci.theta_hat,
                lower: Limit(ci.lower),
                upper: Limit(ci.upper),
                negligible: ep.negligible_count(),
                degenerate: ep.degenerate_count(),
                adjusted_lower: adjusted.map(|a| Limit(a[k].lower)),
                adjusted_upper: adjusted.map(|a| Limit(a[k].upper)),
            }
        })
        .collect()
}

fn interval_rows(
    records: &[IntervalRecord],
    with_adjusted: bool,
) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let mut header = vec![
        "coordinate",
        "theta_hat",
        "lower",
        "lower_infinite",
        "upper",
        "upper_infinite",
        "negligible",
        "degenerate",
    ];
    if with_adjusted {
        header.extend([
            "adjusted_lower",
            "adjusted_lower_infinite",
            "adjusted_upper",
            "adjusted_upper_infinite",
        ]);
    }
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.coordinate.clone(),
                cell(r.theta_hat),
                cell(r.lower.0),
                flag(r.lower.0).into(),
                cell(r.upper.0),
                flag(r.upper.0).into(),
                r.negligible.to_string(),
                r.degenerate.to_string(),
            ];
            if with_adjusted {
                for v in [r.adjusted_lower, r.adjusted_upper] {
                    match v {
                        Some(Limit(x)) => row.extend([cell(x), flag(x).into()]),
                        None => row.extend([String::new(), String::new()]),
                    }
                }
            }
            row
        })
        .collect();
    (header, rows)
}

#[derive(Serialize)]
struct IntervalsDoc<'a> {
    schema_version: u32,
    command: &'a str,
    alpha: f64,
    permutations: usize,
    seed: u64,
    intervals: &'a [IntervalRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    joint: Option<&'a JointSummary>,
}

fn run_ci(a: &AnalysisConfig, out: &Path) -> Result<String, CliError> {
    let p = prepare(a, out)?;
    let cis = p.je.marginal_intervals(a.alpha)?;
    let records = interval_records(&p, &cis, None);
    write_intervals(a, out, "ci", &records, None)?;

    let mut s = String::new();
    writeln!(
        s,
        "ci: {}, K={}, M={}, seed={}",
        describe(&p.dataset),
        p.je.k(),
        a.permutations,
        a.seed
    )
    .unwrap();
    writeln!(s, "{:.1}% marginal intervals", 100.0 * (1.0 - a.alpha)).unwrap();
    for r in &records {
        writeln!(
            s,
            "  {}: estimate {:.6}, [{}, {}]",
            r.coordinate,
            r.theta_hat,
            fmt_limit(r.lower.0),
            fmt_limit(r.upper.0)
        )
        .unwrap();
    }
    Ok(s)
}

fn write_intervals(
    a: &AnalysisConfig,
    out: &Path,
    command: &str,
    records: &[IntervalRecord],
    joint: Option<&JointSummary>,
) -> Result<(), CliError> {
    match a.format {
        Format::Csv => {
            let (header, rows) = interval_rows(records, joint.is_some());
            write_csv(&out.join("results.csv"), &header, &rows)
        }
        Format::Json => write_json(
            &out.join("results.json"),
            &IntervalsDoc {
                schema_version: SCHEMA_VERSION,
                command,
                alpha: a.alpha,
                permutations: a.permutations,
                seed: a.seed,
                intervals: records,
                joint,
            },
        ),
    }
}

#[derive(Serialize)]
struct JointSummary {
    k: usize,
    alpha: f64,
    alpha_multiple: f64,
    joint_coverage: f64,
    worst_corner: usize,
    sidak_alpha: f64,
    sidak_coverage: f64,
    bonferroni_alpha: f64,
    bonferroni_coverage: f64,
    target: f64,
    threshold: f64,
    adjustment: Option<AdjustmentResult>,
    adjustment_infeasible: bool,
}

impl JointSummary {
    fn rows(&self) -> Vec<Vec<String>> {
        let adj = self.adjustment.as_ref();
        let opt = |v: Option<f64>| v.map(cell).unwrap_or_default();
        [
            ("k", self.k.to_string()),
            ("alpha", cell(self.alpha)),
            ("alpha_multiple", cell(self.alpha_multiple)),
            ("joint_coverage", cell(self.joint_coverage)),
            ("worst_corner", self.worst_corner.to_string()),
            ("sidak_alpha", cell(self.sidak_alpha)),
            ("sidak_coverage", cell(self.sidak_coverage)),
            ("bonferroni_alpha", cell(self.bonferroni_alpha)),
            ("bonferroni_coverage", cell(self.bonferroni_coverage)),
            ("target", cell(self.target)),
            ("threshold", cell(self.threshold)),
            ("alpha_star", opt(adj.map(|a| a.alpha_star))),
            (
                "achieved_alpha_multiple",
                opt(adj.map(|a| a.achieved_alpha_multiple)),
            ),
            (
                "within_threshold",
                adj.map(|a| a.within_threshold.to_string())
                    .unwrap_or_default(),
            ),
            (
                "adjustment_infeasible",
                self.adjustment_infeasible.to_string(),
            ),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v])
        .collect()
    }
}

fn run_joint(a: &AnalysisConfig, out: &Path) -> Result<String, CliError> {
    let p = prepare(a, out)?;
    let k = p.je.k();
    if k > DEFAULT_MAX_COORDINATES {
        return Err(permci::Error::ResourceLimit(format!(
            "{k} coordinates exceed the limit of {DEFAULT_MAX_COORDINATES} for joint evaluation"
        ))
        .into());
    }
    let joint = joint_alpha_multiple(&p.je, a.alpha)?;
    let (adjustment, infeasible) = match adjust_alpha(&p.je, a.alpha, a.threshold) {
        Ok(ar) => (Some(ar), None),
        Err(e @ permci::Error::InfeasibleAdjustment { .. }) => (None, Some(e)),
        Err(e) => return Err(e.into()),
    };
    let refs = ReferenceLevels::new(a.alpha, k);
    let summary = JointSummary {
        k,
        alpha: a.alpha,
        alpha_multiple: joint.alpha_multiple,
        joint_coverage: joint.joint_coverage(),
        worst_corner: joint.worst_corner,
        sidak_alpha: refs.sidak,
        sidak_coverage: refs.sidak_coverage(),
        bonferroni_alpha: refs.bonferroni,
        bonferroni_coverage: refs.bonferroni_coverage(),
        target: a.alpha,
        threshold: a.threshold,
        adjustment,
        adjustment_infeasible: infeasible.is_some(),
    };
    let cis = p.je.marginal_intervals(a.alpha)?;
    let adjusted = match &adjustment {
        Some(ar) => Some(p.je.marginal_intervals(ar.alpha_star)?),
        None => None,
    };
    let records = interval_records(&p, &cis, adjusted.as_deref());
    write_intervals(a, out, "joint", &records, Some(&summary))?;
    if a.format == Format::Csv {
        write_csv(&out.join("summary.csv"), &["key", "value"], &summary.rows())?;
    }

    let pct = |v: f64| format!("{:.1}%", 100.0 * v);
    let mut s = String::new();
    writeln!(
        s,
        "joint: {}, K={k}, M={}, seed={}",
        describe(&p.dataset),
        a.permutations,
        a.seed
    )
    .unwrap();
    writeln!(
        s,
        "marginal level {}: joint coverage {} (alpha multiple {:.4})",
        pct(1.0 - a.alpha),
        pct(summary.joint_coverage),
        summary.alpha_multiple
    )
    .unwrap();
    writeln!(
        s,
        "reference: Sidak {}, Bonferroni {}",
        pct(summary.sidak_coverage),
        pct(summary.bonferroni_coverage)
    )
    .unwrap();
    match &adjustment {
        Some(ar) => writeln!(
            s,
            "adjusted marginal alpha {:.4} gives joint coverage {}",
            ar.alpha_star,
            pct(1.0 - ar.achieved_alpha_multiple)
        )
        .unwrap(),
        None => writeln!(s, "adjustment infeasible at M={}", a.permutations).unwrap(),
    }
    for r in &records {
        writeln!(
            s,
            "  {}: estimate {:.6}, [{}, {}]",
            r.coordinate,
            r.theta_hat,
            fmt_limit(r.lower.0),
            fmt_limit(r.upper.0)
        )
        .unwrap();
    }
    match infeasible {
        // outputs are written; the exit status still reports the failure
        Some(e) => {
            print!("{s}");
            Err(e.into())
        }
        None => Ok(s),
    }
}

#[derive(Serialize)]
struct BootstrapRecord {
    coordinate: String,
    lower: Limit,
    upper: Limit,
    lower_interval: (Limit, Limit),
    upper_interval: (Limit, Limit),
    width: Limit,
}

#[derive(Serialize)]
struct BootstrapDoc<'a> {
    schema_version: u32,
    alpha: f64,
    permutations: usize,
    seed: u64,
    replicates: usize,
    level: f64,
    limits: &'a [BootstrapRecord],
}

fn run_bootstrap(a: &AnalysisConfig, out: &Path) -> Result<String, CliError> {
    let p = prepare(a, out)?;
    let records: Vec<BootstrapRecord> =
        p.je.coordinates()
            .iter()
            .enumerate()
            .map(|(k, ep)| {
                let seed = derive_seed(derive_seed(a.seed, BOOTSTRAP_STREAM), k as u64);
                let b = bootstrap_endpoints(ep, a.alpha, a.bootstrap, a.bootstrap_level, seed)?;
                Ok(BootstrapRecord {
                    coordinate: p.dataset.column_names[k].clone(),
                    lower: Limit(b.lower),
                    upper: Limit(b.upper),
                    lower_interval: (Limit(b.lower_interval.0), Limit(b.lower_interval.1)),
                    upper_interval: (Limit(b.upper_interval.0), Limit(b.upper_interval.1)),
                    width: Limit(b.width()),
                })
            })
            .collect::<Result<_, permci::Error>>()?;
    match a.format {
        Format::Csv => {
            let header = [
                "coordinate",
                "lower",
                "lower_infinite",
                "lower_ci_low",
                "lower_ci_high",
                "upper",
                "upper_infinite",
                "upper_ci_low",
                "upper_ci_high",
                "width",
            ];
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.coordinate.clone(),
                        cell(r.lower.0),
                        flag(r.lower.0).into(),
                        cell(r.lower_interval.0 .0),
                        cell(r.lower_interval.1 .0),
                        cell(r.upper.0),
                        flag(r.upper.0).into(),
                        cell(r.upper_interval.0 .0),
                        cell(r.upper_interval.1 .0),
                        cell(r.width.0),
                    ]
                })
                .collect();
            write_csv(&out.join("results.csv"), &header, &rows)?;
        }
        Format::Json => write_json(
            &out.join("results.json"),
            &BootstrapDoc {
                schema_version: SCHEMA_VERSION,
                alpha: a.alpha,
                permutations: a.permutations,
                seed: a.seed,
                replicates: a.bootstrap,
                level: a.bootstrap_level,
                limits: &records,
            },
        )?,
    }

    let mut s = String::new();
    writeln!(
        s,
        "bootstrap: {}, K={}, M={}, B={}, seed={}",
        describe(&p.dataset),
        p.je.k(),
        a.permutations,
        a.bootstrap,
        a.seed
    )
    .unwrap();
    for r in &records {
        writeln!(
            s,
            "  {}: L {} in [{}, {}], U {} in [{}, {}]",
            r.coordinate,
            fmt_limit(r.lower.0),
            fmt_limit(r.lower_interval.0 .0),
            fmt_limit(r.lower_interval.1 .0),
            fmt_limit(r.upper.0),
            fmt_limit(r.upper_interval.0 .0),
            fmt_limit(r.upper_interval.1 .0)
        )
        .unwrap();
    }
    Ok(s)
}

#[derive(Serialize)]
struct SimulateDoc<'a> {
    schema_version: u32,
    config: &'a SimulateConfig,
    table: &'a permci::simulate::StudyTable,
}

fn run_simulate(c: &SimulateConfig, out: &Path) -> Result<String, CliError> {
    if c.rhos.is_empty() {
        return Err(CliError::Usage(
            "at least one correlation is required".into(),
        ));
    }
    let table = run_study(&c.sim, &c.rhos)?;
    match c.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        cell(r.rho),
                        cell(r.mean_alpha_multiple),
                        cell(r.iqr_alpha_multiple),
                        cell(r.mean_alpha_star),
                        cell(r.iqr_alpha_star),
                    ]
                })
                .collect();
            write_csv(
                &out.join("results.csv"),
                &[
                    "rho",
                    "mean_alpha_multiple",
                    "iqr_alpha_multiple",
                    "mean_alpha_star",
                    "iqr_alpha_star",
                ],
                &rows,
            )?;
            let reps: Vec<Vec<String>> = table
                .replicates
                .iter()
                .map(|r| {
                    vec![
                        cell(r.rho),
                        r.run.to_string(),
                        cell(r.alpha_multiple),
                        cell(r.alpha_star),
                        cell(r.achieved_alpha_multiple),
                        r.iterations.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("replicates.csv"),
                &[
                    "rho",
                    "run",
                    "alpha_multiple",
                    "alpha_star",
                    "achieved_alpha_multiple",
                    "iterations",
                ],
                &reps,
            )?;
            let xs: Vec<Vec<String>> = table
                .x
                .iter()
                .enumerate()
                .map(|(i, x)| vec![i.to_string(), cell(*x)])
                .collect();
            write_csv(&out.join("regressor.csv"), &["index", "x"], &xs)?;
        }
        Format::Json => write_json(
            &out.join("results.json"),
            &SimulateDoc {
                schema_version: SCHEMA_VERSION,
                config: c,
                table: &table,
            },
        )?,
    }

    let sim = &c.sim;
    let mut s = String::new();
    writeln!(
        s,
        "simulate: N={}, K={}, M={}, runs={}, alpha={}, seed={}",
        sim.n, sim.k, sim.m, sim.runs, sim.alpha, sim.seed
    )
    .unwrap();
    writeln!(
        s,
        "  rho    mean(alpha_multiple)  IQR     mean(alpha*)  IQR"
    )
    .unwrap();
    for r in &table.rows {
        writeln!(
            s,
            "  {:<5}  {:<20.4}  {:<6.4}  {:<12.4}  {:.4}",
            r.rho, r.mean_alpha_multiple, r.iqr_alpha_multiple, r.mean_alpha_star, r.iqr_alpha_star
        )
        .unwrap();
    }
    Ok(s)
}
