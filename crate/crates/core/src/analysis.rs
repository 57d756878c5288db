//! Efficiency bounds, position-bias and social-influence gains, and the
//! summaries built from simulation results.

use crate::error::{Error, Result};
use crate::market::{ContinuationSpec, Market, SocialState};
use crate::model::{expected_purchases, expected_purchases_with_continuation, reduce_market};
use crate::ranking::{
    brute_force_ranking, performance_ranking, performance_ranking_with_continuation,
    quality_ranking, Objective, OptimizerMethod, PolicyKind,
};
use crate::sim::SimResult;

/// Slack applied to every "must be non-negative" check.
pub const GAIN_SLACK: f64 = 1e-12;
/// Slack applied to the bound certificate comparisons.
pub const BOUND_SLACK: f64 = 1e-9;

/// Optimal efficiencies with and without continuation and the two-sided
/// bound relating them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCertificate {
    /// Best single-trial efficiency, `lambda(pi*)`.
    pub lambda_opt: f64,
    /// Best efficiency with continuation, `lambda_bar(pi*_c)`.
    pub lambda_bar_opt: f64,
    /// `1 / (1 - max_i c_i)`.
    pub upper_factor: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl BoundCertificate {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Checks `lambda(pi*) <= lambda_bar(pi*_c) <= lambda(pi*) / (1 - max c)`.
pub fn efficiency_bounds(m: &Market, method: OptimizerMethod) -> Result<BoundCertificate> {
    let s = SocialState::new(m.n());
    let plain = m.without_continuation();
    let (opt, opt_c) = match method {
        OptimizerMethod::BruteForce => (
            brute_force_ranking(&plain, &s, Objective::Lambda)?,
            brute_force_ranking(m, &s, Objective::LambdaBar)?,
        ),
        OptimizerMethod::Parametric => (
            performance_ranking(&plain, &s),
            performance_ranking_with_continuation(m, &s),
        ),
    };
    let lambda_opt = expected_purchases(&plain, &opt.ranking, &s);
    let lambda_bar_opt = expected_purchases_with_continuation(m, &opt_c.ranking, &s)?;
    let upper_factor = 1.0 / (1.0 - m.max_continuation());
    Ok(BoundCertificate {
        lambda_opt,
        lambda_bar_opt,
        upper_factor,
        lower_ok: lambda_bar_opt >= lambda_opt - BOUND_SLACK,
        upper_ok: lambda_bar_opt <= lambda_opt * upper_factor + BOUND_SLACK,
    })
}

/// Upper factor for the polynomial family, `1 / (1 - rho r^r / (r+1)^(r+1))`,
/// using `max_x x^r (1 - x) = r^r / (r+1)^(r+1)` at `x = r / (r+1)`.
pub fn polynomial_bound_factor(rho: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho {rho} outside [0, 1]")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("exponent r {r} must be finite and >= 0")));
    }
    let rr = if r == 0.0 { 1.0 } else { r.powf(r) };
    let peak = rr / (r + 1.0).powf(r + 1.0);
    let denom = 1.0 - rho * peak;
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "no finite bound for rho = {rho}, r = {r}"
        )));
    }
    Ok(1.0 / denom)
}

/// Efficiency gained from position bias under the quality ranking:
/// `lambda_bar` with the market's visibilities minus `lambda_bar` with equal
/// visibilities.
///
/// Products are ordered by continuation quality `q_i / (1 - c_i)`, which is
/// the quality order itself whenever the continuation preserves it.
pub fn position_bias_gain(m: &Market) -> Result<f64> {
    if m.visibility().windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Domain("visibilities must be non-increasing".into()));
    }
    let s = SocialState::new(m.n());
    let rk = quality_ranking(&reduce_market(m));
    let biased = expected_purchases_with_continuation(m, &rk, &s)?;
    let flat = m.with_visibility(vec![1.0; m.n()])?;
    let unbiased = expected_purchases_with_continuation(&flat, &rk, &s)?;
    Ok(biased - unbiased)
}

/// Expected change in per-participant purchases from one more participant,
/// under the quality ranking and social influence.
///
/// With `S = sum_i v_i abar_i` and `lambda_bar = sum_i v_i abar_i qbar_i / S`,
/// a purchase of `j` (probability `v_j abar_j qbar_j / S`) raises `abar_j`
/// by `1 - c_j`, so
///
/// `E[D_{t+1}] = sum_j (v_j abar_j qbar_j / S)
///     (S lambda_bar + v_j (1 - c_j) qbar_j) / (S + v_j (1 - c_j))
///   + (1 - lambda_bar) lambda_bar`
///
/// and the returned gain is `E[D_{t+1}] - lambda_bar`.
pub fn si_one_step_gain(m: &Market, s: &SocialState) -> Result<f64> {
    assert_eq!(s.n(), m.n(), "social state size does not match market");
    let rk = quality_ranking(m);
    let c = m.continuation_probs();
    let n = m.n();
    let v: Vec<f64> = (0..n).map(|i| m.visibility()[rk.position(i)]).collect();
    let abar: Vec<f64> = (0..n).map(|i| m.effective_appeal(s, i) * (1.0 - c[i])).collect();
    let qbar: Vec<f64> = (0..n).map(|i| m.quality()[i] / (1.0 - c[i])).collect();

    let total: f64 = (0..n).map(|i| v[i] * abar[i]).sum();
    let mass: f64 = (0..n).map(|i| v[i] * abar[i] * qbar[i]).sum();
    let lambda = mass / total;

    let after: f64 = (0..n)
        .map(|j| {
            let buy = v[j] * abar[j] * qbar[j] / total;
            let bump = v[j] * (1.0 - c[j]);
            buy * (mass + bump * qbar[j]) / (total + bump)
        })
        .sum::<f64>()
        + (1.0 - lambda) * lambda;
    Ok(after - lambda)
}

/// One cell of the continuation improvement table.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub rho: f64,
    pub r: f64,
    pub policy: PolicyKind,
    /// Mean total purchases per replication with continuation.
    pub efficiency_with: f64,
    /// Mean total purchases per replication without continuation.
    pub efficiency_without: f64,
    pub improvement_pct: f64,
}

/// Results of the same policy and instance with and without continuation.
#[derive(Debug, Clone, Copy)]
pub struct PairedResult<'a> {
    pub rho: f64,
    pub r: f64,
    pub with: &'a SimResult,
    pub without: &'a SimResult,
}

pub fn improvement_table(pairs: &[PairedResult<'_>]) -> Result<Vec<ImprovementRow>> {
    pairs
        .iter()
        .map(|p| {
            let (w, wo) = (p.with, p.without);
            if w.policy != wo.policy {
                return Err(Error::config("policy", format!("{} paired with {}", w.policy, wo.policy)));
            }
            if w.steps != wo.steps {
                return Err(Error::config("steps", format!("{} paired with {}", w.steps, wo.steps)));
            }
            if w.replications() != wo.replications() {
                return Err(Error::config(
                    "replications",
                    format!("{} paired with {}", w.replications(), wo.replications()),
                ));
            }
            if w.instance != wo.instance {
                return Err(Error::config("market", "results come from different instances"));
            }
            let with = w.mean_efficiency();
            let without = wo.mean_efficiency();
            Ok(ImprovementRow {
                rho: p.rho,
                r: p.r,
                policy: w.policy,
                efficiency_with: with,
                efficiency_without: without,
                improvement_pct: 100.0 * (with - without) / without,
            })
        })
        .collect()
}

/// One point of the downloads-versus-quality scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    /// One-based product number.
    pub product_id: usize,
    pub quality: f64,
    /// One-based rank by increasing quality (ties by product number).
    pub quality_rank: usize,
    pub replication: u32,
    pub downloads: u64,
}

/// Long-format table of per-replication purchases ordered by increasing
/// quality, one row per product and replication.
pub fn download_quality_scatter(result: &SimResult, m: &Market) -> Result<Vec<ScatterRow>> {
    if result.per_replication.is_empty() {
        return Err(Error::config("per_replication", "no replication detail"));
    }
    if result.downloads_final.len() != m.n() {
        return Err(Error::config("market", "result and market sizes differ"));
    }
    let q = m.quality();
    let mut order: Vec<usize> = (0..m.n()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
    let mut rows = Vec::with_capacity(m.n() * result.replications());
    for (rank, &i) in order.iter().enumerate() {
        for rep in &result.per_replication {
            rows.push(ScatterRow {
                product_id: i + 1,
                quality: q[i],
                quality_rank: rank + 1,
                replication: rep.replication,
                downloads: rep.downloads[i],
            });
        }
    }
    Ok(rows)
}

/// Whether a market satisfies the hypotheses of the order-preservation result.
pub fn preserves_quality_order(m: &Market) -> bool {
    matches!(m.continuation(), ContinuationSpec::Polynomial { rho, .. } if *rho > 0.0 && *rho < 1.0)
}
