//! Runs an experiment grid: every policy on the baseline market and on
//! each continuation setting of the sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use trialoffer::analysis::{improvement_table, ImprovementRow, PairedResult};
use trialoffer::{run_replications, ContinuationSpec, Market, PolicyKind, SimConfig, SimResult};

use crate::config::{ExperimentSpec, SweepCell};
use crate::error::Result;

/// Identifies one simulated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub policy: PolicyKind,
    /// `None` is the run without continuation.
    pub continuation: Option<SweepCell>,
}

impl CellKey {
    /// Directory of the cell relative to the store root.
    pub fn dir_name(&self) -> String {
        format!("cells/{}/{}", self.policy.name(), cell_label(self.continuation))
    }
}

/// `baseline` or `rho<rho>_r<r>`.
pub fn cell_label(c: Option<SweepCell>) -> String {
    match c {
        None => "baseline".into(),
        Some(c) => format!("rho{}_r{}", c.rho, c.r),
    }
}

#[derive(Debug, Clone)]
pub struct CellRun {
    pub key: CellKey,
    pub config: SimConfig,
    pub result: SimResult,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    /// Instance without continuation.
    pub market: Market,
    pub policies: Vec<PolicyKind>,
    /// Baseline cells first, then sweep cells in spec order; policies in
    /// spec order within each.
    pub cells: Vec<CellRun>,
    pub improvements: Vec<ImprovementRow>,
}

impl ExperimentOutcome {
    pub fn cell(&self, policy: PolicyKind, continuation: Option<SweepCell>) -> Option<&CellRun> {
        self.cells
            .iter()
            .find(|c| c.key.policy == policy && c.key.continuation == continuation)
    }

    fn row_labels(&self) -> Vec<Option<SweepCell>> {
        std::iter::once(None)
            .chain(self.spec.sweep.iter().copied().map(Some))
            .collect()
    }

    /// Mean total purchases per replication, one row per continuation setting.
    pub fn efficiency_matrix(&self) -> String {
        let mut out = format!(
            "mean purchases per replication ({} replications of {} participants)\n",
            self.spec.replications, self.spec.steps
        );
        out += &self.header();
        for c in self.row_labels() {
            let _ = write!(out, "{:<20}", row_name(c));
            for &p in &self.policies {
                let e = self.cell(p, c).map(|r| r.result.mean_efficiency()).unwrap_or(f64::NAN);
                let _ = write!(out, "{e:>12.1}");
            }
            out.push('\n');
        }
        out
    }

    /// Percentage change of each policy's efficiency due to continuation.
    pub fn improvement_matrix(&self) -> String {
        let mut out = String::from("improvement over no continuation (%)\n");
        out += &self.header();
        for c in &self.spec.sweep {
            let _ = write!(out, "{:<20}", row_name(Some(*c)));
            for &p in &self.policies {
                let v = self
                    .improvement(p, *c)
                    .map(|r| r.improvement_pct)
                    .unwrap_or(f64::NAN);
                let _ = write!(out, "{v:>11.1}%");
            }
            out.push('\n');
        }
        out
    }

    pub fn improvement(&self, policy: PolicyKind, c: SweepCell) -> Option<&ImprovementRow> {
        self.improvements
            .iter()
            .find(|r| r.policy == policy && r.rho == c.rho && r.r == c.r)
    }

    fn header(&self) -> String {
        let mut h = format!("{:<20}", "continuation");
        for p in &self.policies {
            let _ = write!(h, "{:>12}", p.tag());
        }
        h.push('\n');
        h
    }
}

fn row_name(c: Option<SweepCell>) -> String {
    match c {
        None => "none".into(),
        Some(c) => format!("rho={}, r={}", c.rho, c.r),
    }
}

fn sim_config(spec: &ExperimentSpec, market: Market, policy: PolicyKind) -> SimConfig {
    SimConfig {
        market,
        policy,
        steps: spec.steps,
        rerank_period: spec.rerank_period,
        replications: spec.replications,
        base_seed: spec.base_seed,
        max_session_tries: spec.max_session_tries,
        social_influence: spec.social_influence,
        trajectory_interval: spec.trajectory_interval,
    }
}

/// Runs the whole grid. `progress` receives one line per finished cell.
pub fn run_experiment(
    spec: &ExperimentSpec,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let market = spec.build_market()?;
    let policies = spec.policy_kinds()?;

    let mut keys = Vec::new();
    for c in std::iter::once(None).chain(spec.sweep.iter().copied().map(Some)) {
        for &policy in &policies {
            keys.push(CellKey { policy, continuation: c });
        }
    }
    let total = keys.len();
    let done = std::sync::atomic::AtomicUsize::new(0);

    let cells = keys
        .par_iter()
        .map(|key| {
            let m = match key.continuation {
                None => market.clone(),
                Some(c) => market.with_continuation(ContinuationSpec::Polynomial { rho: c.rho, r: c.r })?,
            };
            let config = sim_config(spec, m, key.policy);
            let result = run_replications(&config)?;
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(&format!(
                "[{k}/{total}] {} {}: mean {:.1}",
                key.policy.tag(),
                row_name(key.continuation),
                result.mean_efficiency()
            ));
            Ok(CellRun {
                key: *key,
                config,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for c in &spec.sweep {
        for &p in &policies {
            let find = |cont| {
                cells
                    .iter()
                    .find(|x| x.key.policy == p && x.key.continuation == cont)
                    .expect("every grid cell was run")
            };
            pairs.push(PairedResult {
                rho: c.rho,
                r: c.r,
                with: &find(Some(*c)).result,
                without: &find(None).result,
            });
        }
    }
    let improvements = improvement_table(&pairs)?;

    Ok(ExperimentOutcome {
        spec: spec.clone(),
        market,
        policies,
        cells,
        improvements,
    })
}
