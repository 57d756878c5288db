//! Command implementations. Each returns the text printed on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use trialoffer::analysis::download_quality_scatter;
use trialoffer::{optimize_with, reduce_market, Objective, OptimizerMethod, PolicyKind, SocialState};

use crate::config::{load_market, save_market, write_text, ExperimentSpec, SweepCell};
use crate::error::{CliError, Result};
use crate::experiment::{cell_label, run_experiment, ExperimentOutcome};
use crate::store::{cell_dir, load_cell, write_store};
use crate::verify::{run_default, VerifyConfig, VerifyReport};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TRIALOFFER_OUT";
pub const FALLBACK_OUT_DIR: &str = "results";

/// Explicit flag, then `TRIALOFFER_OUT`, then `results`.
pub fn default_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "market".into())
}

/// Writes the reduced market and returns the per-product table.
pub fn reduce(input: &Path, output: &Path) -> Result<String> {
    let m = load_market(input)?;
    let reduced = reduce_market(&m);
    save_market(&reduced, output)?;
    let c = m.continuation_probs();
    let mut out = format!("{:>8} {:>15} {:>15} {:>15} {:>15}\n", "product", "q", "c", "q_bar", "a_bar");
    for i in 0..m.n() {
        let _ = writeln!(
            out,
            "{:>8} {:>15.12} {:>15.12} {:>15.12} {:>15.12}",
            i + 1,
            m.quality()[i],
            c[i],
            reduced.quality()[i],
            reduced.appeal()[i]
        );
    }
    let _ = writeln!(out, "reduced market written to {}", output.display());
    Ok(out)
}

pub fn reduced_path(input: &Path, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("{}.reduced.toml", stem(input)))
}

#[derive(Debug, Serialize)]
struct OptimizeRecord {
    ranking: Vec<usize>,
    objective_kind: &'static str,
    objective: f64,
    method: &'static str,
    iterations: usize,
}

pub fn parse_objective(s: &str) -> Result<Objective> {
    match s {
        "lambda" => Ok(Objective::Lambda),
        "lambda-bar" => Ok(Objective::LambdaBar),
        other => Err(CliError::config("objective", format!("expected lambda or lambda-bar, got `{other}`"))),
    }
}

pub fn parse_method(s: &str) -> Result<OptimizerMethod> {
    match s {
        "parametric" => Ok(OptimizerMethod::Parametric),
        "brute" => Ok(OptimizerMethod::BruteForce),
        other => Err(CliError::config("method", format!("expected parametric or brute, got `{other}`"))),
    }
}

/// Optimal list for the market at zero purchases; writes a JSON record.
pub fn optimize(input: &Path, objective: Objective, method: OptimizerMethod, output: &Path) -> Result<String> {
    let m = load_market(input)?;
    let report = optimize_with(&m, &SocialState::new(m.n()), objective, method)?;
    let record = OptimizeRecord {
        ranking: report.ranking.list_one_based(),
        objective_kind: match objective {
            Objective::Lambda => "lambda",
            Objective::LambdaBar => "lambda-bar",
        },
        objective: report.objective,
        method: match method {
            OptimizerMethod::Parametric => "parametric",
            OptimizerMethod::BruteForce => "brute",
        },
        iterations: report.iterations,
    };
    let mut json = serde_json::to_string_pretty(&record).expect("record serializes");
    json.push('\n');
    write_text(output, &json)?;
    Ok(format!(
        "ranking: {}\n{}: {:.12}\niterations: {}\nmethod: {}\n",
        report.ranking, record.objective_kind, report.objective, report.iterations, record.method
    ))
}

pub fn optimize_path(input: &Path, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("{}.optimize.json", stem(input)))
}

/// Runs an experiment and writes its store under `out`.
pub fn simulate(
    spec: &ExperimentSpec,
    out: &Path,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<(ExperimentOutcome, String)> {
    let outcome = run_experiment(spec, progress)?;
    write_store(out, &outcome)?;
    let mut text = outcome.efficiency_matrix();
    text.push('\n');
    text += &outcome.improvement_matrix();
    let truncated: u64 = outcome.cells.iter().map(|c| c.result.truncated_sessions).sum();
    let _ = writeln!(text, "\ntruncated sessions: {truncated}");
    let _ = writeln!(text, "results written to {}", out.display());
    Ok((outcome, text))
}

/// Store location for a spec: explicit flag, then the spec's `output`, then the default.
pub fn simulate_out_dir(flag: Option<&Path>, spec: &ExperimentSpec) -> PathBuf {
    match (flag, &spec.output) {
        (Some(f), _) => f.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => default_out_dir(None),
    }
}

#[derive(Debug, Serialize)]
struct MeanTrajectoryRow {
    step: u64,
    mean_cumulative_downloads: f64,
}

#[derive(Debug, Serialize)]
struct ScatterCsvRow {
    product_id: usize,
    quality: f64,
    quality_rank: usize,
    replication: u32,
    downloads: u64,
}

#[derive(Debug, Serialize)]
struct TrajectoryCsvRow {
    replication: u32,
    step: u64,
    cumulative_downloads: u64,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Emits `scatter.csv`, `trajectories.csv` and `mean_trajectory.csv` for one cell.
///
/// Trajectories keep every `stride`-th sample plus the final one.
pub fn plot_data(
    store: &Path,
    policy: PolicyKind,
    continuation: Option<SweepCell>,
    out: Option<&Path>,
    stride: usize,
) -> Result<String> {
    if stride == 0 {
        return Err(CliError::config("stride", "must be at least 1"));
    }
    let (market, result) = load_cell(store, policy, continuation)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| {
        store
            .join("plots")
            .join(format!("{}_{}", policy.name(), cell_label(continuation)))
    });
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    let scatter = download_quality_scatter(&result, &market)?;
    let rows = scatter.len();
    write_rows(
        &out.join("scatter.csv"),
        scatter.into_iter().map(|r| ScatterCsvRow {
            product_id: r.product_id,
            quality: r.quality,
            quality_rank: r.quality_rank,
            replication: r.replication,
            downloads: r.downloads,
        }),
    )?;

    let keep = |k: usize, len: usize| k.is_multiple_of(stride) || k + 1 == len;
    write_rows(
        &out.join("trajectories.csv"),
        result.per_replication.iter().flat_map(|r| {
            let len = r.trajectory.len();
            r.trajectory
                .iter()
                .enumerate()
                .filter(move |(k, _)| keep(*k, len))
                .map(move |(_, &(step, total))| TrajectoryCsvRow {
                    replication: r.replication,
                    step,
                    cumulative_downloads: total,
                })
        }),
    )?;
    let mean = result.mean_trajectory();
    let len = mean.len();
    write_rows(
        &out.join("mean_trajectory.csv"),
        mean.into_iter()
            .enumerate()
            .filter(|(k, _)| keep(*k, len))
            .map(|(_, (step, m))| MeanTrajectoryRow {
                step,
                mean_cumulative_downloads: m,
            }),
    )?;
    Ok(format!(
        "{} scatter rows from {} written to {}\n",
        rows,
        cell_dir(store, policy, continuation).display(),
        out.display()
    ))
}

/// Runs the property suite; a failed check becomes a verification error.
pub fn verify(cfg: &VerifyConfig) -> (VerifyReport, Result<String>) {
    let report = run_default(cfg);
    let text = report.render();
    let outcome = if report.passed() {
        Ok(text)
    } else {
        let names: Vec<&str> = report.failed().map(|c| c.name).collect();
        Err(CliError::Verification(format!("{text}failed checks: {}", names.join(", "))))
    };
    (report, outcome)
}
