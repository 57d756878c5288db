//! On-disk result store.
//!
//! ```text
//! <root>/spec.toml, market.toml, manifest.json
//! <root>/efficiency.csv, improvement.csv
//! <root>/cells/<policy>/<baseline | rho<rho>_r<r>>/
//!     config.toml, market.toml, manifest.json
//!     replications.csv, downloads.csv, trajectory.csv, aggregate.csv
//! ```
//!
//! CSV files depend only on the spec; wall-clock time appears only in the
//! manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use trialoffer::sim::{instance_fingerprint, ReplicationResult};
use trialoffer::{Market, PolicyKind, SimResult};

use crate::config::{load_market, read_text, save_market, write_text, SweepCell};
use crate::error::{CliError, Result};
use crate::experiment::{cell_label, CellKey, CellRun, ExperimentOutcome};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::csv(path, e)))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    write_text(path, &text)
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: u32,
    pub seed: u64,
    pub total_downloads: u64,
    pub tries: u64,
    pub truncated_sessions: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DownloadRow {
    pub replication: u32,
    pub product_id: usize,
    pub downloads: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub replication: u32,
    pub step: u64,
    pub cumulative_downloads: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AggregateRow {
    pub product_id: usize,
    pub quality: f64,
    pub appeal: f64,
    pub continuation: f64,
    pub mean_downloads: f64,
    pub downloads_variance: f64,
    pub total_downloads: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub policy: String,
    pub rho: Option<f64>,
    pub r: Option<f64>,
    pub mean_efficiency: f64,
    pub std_error: f64,
    pub replications: usize,
    pub steps: u64,
    pub tries_total: u64,
    pub truncated_sessions: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImprovementCsvRow {
    pub policy: String,
    pub rho: f64,
    pub r: f64,
    pub efficiency_with: f64,
    pub efficiency_without: f64,
    pub improvement_pct: f64,
}

/// Snapshot of the settings a cell was simulated with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub steps: u64,
    pub rerank_period: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub max_session_tries: u32,
    pub social_influence: bool,
    pub trajectory_interval: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CellManifest {
    version: String,
    created_unix: u64,
    policy: String,
    rho: Option<f64>,
    r: Option<f64>,
    base_seed: u64,
    rerank_period: u64,
    replication_seeds: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreManifest {
    version: String,
    created_unix: u64,
    base_seed: u64,
    steps: u64,
    rerank_period: u64,
    replications: u32,
    cells: Vec<String>,
}

/// Writes an experiment outcome under `root`.
pub fn write_store(root: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let spec = &outcome.spec;
    write_text(&root.join("spec.toml"), &spec.to_toml())?;
    save_market(&outcome.market, &root.join("market.toml"))?;

    for cell in &outcome.cells {
        write_cell(&root.join(cell.key.dir_name()), cell)?;
    }

    write_csv(
        &root.join("efficiency.csv"),
        outcome.cells.iter().map(|c| EfficiencyRow {
            policy: c.key.policy.name().into(),
            rho: c.key.continuation.map(|x| x.rho),
            r: c.key.continuation.map(|x| x.r),
            mean_efficiency: c.result.mean_efficiency(),
            std_error: c.result.efficiency_std_error(),
            replications: c.result.replications(),
            steps: c.result.steps,
            tries_total: c.result.tries_total,
            truncated_sessions: c.result.truncated_sessions,
        }),
    )?;
    write_csv(
        &root.join("improvement.csv"),
        outcome.improvements.iter().map(|r| ImprovementCsvRow {
            policy: r.policy.name().into(),
            rho: r.rho,
            r: r.r,
            efficiency_with: r.efficiency_with,
            efficiency_without: r.efficiency_without,
            improvement_pct: r.improvement_pct,
        }),
    )?;
    write_json(
        &root.join("manifest.json"),
        &StoreManifest {
            version: VERSION.into(),
            created_unix: unix_time(),
            base_seed: spec.base_seed,
            steps: spec.steps,
            rerank_period: spec.rerank_period,
            replications: spec.replications,
            cells: outcome.cells.iter().map(|c| c.key.dir_name()).collect(),
        },
    )
}

fn write_cell(dir: &Path, cell: &CellRun) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let cfg = &cell.config;
    let res = &cell.result;
    let m = &cfg.market;
    let snapshot = CellConfig {
        policy: cfg.policy.name().into(),
        rho: cell.key.continuation.map(|c| c.rho),
        r: cell.key.continuation.map(|c| c.r),
        steps: cfg.steps,
        rerank_period: cfg.rerank_period,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
        max_session_tries: cfg.max_session_tries,
        social_influence: cfg.social_influence,
        trajectory_interval: cfg.trajectory_interval(),
    };
    write_text(&dir.join("config.toml"), &toml::to_string(&snapshot).expect("config serializes"))?;
    save_market(m, &dir.join("market.toml"))?;

    let reps = &res.per_replication;
    write_csv(
        &dir.join("replications.csv"),
        reps.iter().map(|r| ReplicationRow {
            replication: r.replication,
            seed: r.seed,
            total_downloads: r.total_downloads(),
            tries: r.tries_total,
            truncated_sessions: r.truncated_sessions,
        }),
    )?;
    write_csv(
        &dir.join("downloads.csv"),
        reps.iter().flat_map(|r| {
            r.downloads.iter().enumerate().map(move |(i, &d)| DownloadRow {
                replication: r.replication,
                product_id: i + 1,
                downloads: d,
            })
        }),
    )?;
    write_csv(
        &dir.join("trajectory.csv"),
        reps.iter().flat_map(|r| {
            r.trajectory.iter().map(move |&(step, total)| TrajectoryRow {
                replication: r.replication,
                step,
                cumulative_downloads: total,
            })
        }),
    )?;
    let means = res.mean_downloads();
    write_csv(
        &dir.join("aggregate.csv"),
        (0..m.n()).map(|i| AggregateRow {
            product_id: i + 1,
            quality: m.quality()[i],
            appeal: m.appeal()[i],
            continuation: m.continuation_probs()[i],
            mean_downloads: means[i],
            downloads_variance: res.downloads_variance(i),
            total_downloads: res.downloads_final[i],
        }),
    )?;
    write_json(
        &dir.join("manifest.json"),
        &CellManifest {
            version: VERSION.into(),
            created_unix: unix_time(),
            policy: cfg.policy.name().into(),
            rho: snapshot.rho,
            r: snapshot.r,
            base_seed: cfg.base_seed,
            rerank_period: cfg.rerank_period,
            replication_seeds: reps.iter().map(|r| r.seed).collect(),
        },
    )
}

/// Directory of a cell inside a store.
pub fn cell_dir(root: &Path, policy: PolicyKind, continuation: Option<SweepCell>) -> PathBuf {
    root.join(CellKey { policy, continuation }.dir_name())
}

/// Reloads a cell's market and per-replication results.
pub fn load_cell(root: &Path, policy: PolicyKind, continuation: Option<SweepCell>) -> Result<(Market, SimResult)> {
    let dir = cell_dir(root, policy, continuation);
    if !dir.is_dir() {
        return Err(CliError::io(
            &dir,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no cell {} for policy {}", cell_label(continuation), policy.name()),
            ),
        ));
    }
    let cfg_path = dir.join("config.toml");
    let cfg: CellConfig =
        toml::from_str(&read_text(&cfg_path)?).map_err(|e| CliError::parse(&cfg_path, e.to_string()))?;
    let market = load_market(&dir.join("market.toml"))?;
    let n = market.n();

    let reps: Vec<ReplicationRow> = read_csv(&dir.join("replications.csv"))?;
    let downloads_path = dir.join("downloads.csv");
    let downloads: Vec<DownloadRow> = read_csv(&downloads_path)?;
    let trajectory: Vec<TrajectoryRow> = read_csv(&dir.join("trajectory.csv"))?;

    let index_of = |rep: u32, path: &Path| {
        reps.iter()
            .position(|r| r.replication == rep)
            .ok_or_else(|| CliError::parse(path, format!("unknown replication {rep}")))
    };
    let mut per: Vec<ReplicationResult> = reps
        .iter()
        .map(|r| ReplicationResult {
            replication: r.replication,
            seed: r.seed,
            downloads: vec![0; n],
            trajectory: Vec::new(),
            tries_total: r.tries,
            truncated_sessions: r.truncated_sessions,
        })
        .collect();
    for row in &downloads {
        let k = index_of(row.replication, &downloads_path)?;
        if row.product_id == 0 || row.product_id > n {
            return Err(CliError::parse(&downloads_path, format!("product_id {} out of range", row.product_id)));
        }
        per[k].downloads[row.product_id - 1] = row.downloads;
    }
    for row in &trajectory {
        let k = index_of(row.replication, &dir.join("trajectory.csv"))?;
        per[k].trajectory.push((row.step, row.cumulative_downloads));
    }

    let mut downloads_final = vec![0; n];
    for r in &per {
        for (acc, d) in downloads_final.iter_mut().zip(&r.downloads) {
            *acc += d;
        }
    }
    let policy_kind: PolicyKind = cfg.policy.parse()?;
    let result = SimResult {
        policy: policy_kind,
        steps: cfg.steps,
        rerank_period: cfg.rerank_period,
        social_influence: cfg.social_influence,
        base_seed: cfg.base_seed,
        instance: instance_fingerprint(&market),
        tries_total: per.iter().map(|r| r.tries_total).sum(),
        truncated_sessions: per.iter().map(|r| r.truncated_sessions).sum(),
        per_replication: per,
        downloads_final,
    };
    Ok((market, result))
}
