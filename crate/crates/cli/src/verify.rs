//! Property suite behind the `verify` command.
//!
//! Every check runs over `instances` random markets drawn from per-instance
//! streams, so a report depends only on the seed. The reduction is passed
//! in as a function, which lets tests substitute a faulty one.

use std::fmt::Write as _;

use rayon::prelude::*;
use trialoffer::analysis::{
    efficiency_bounds, polynomial_bound_factor, position_bias_gain, preserves_quality_order,
    si_one_step_gain, BOUND_SLACK, GAIN_SLACK,
};
use trialoffer::instances::{random_market, random_social_state, RandomMarketSpec};
use trialoffer::sim::{first_purchase_frequencies, mix64, replication_seed, rng_from_seed};
use trialoffer::{
    brute_force_ranking, effective_sample_probabilities, expected_purchases,
    expected_purchases_with_continuation, lambda_fixed_point, next_purchase_distribution,
    performance_ranking, performance_ranking_with_continuation, quality_ranking, random_ranking,
    reduce_market, try_probabilities, ContinuationSpec, Market, Objective, OptimizerMethod,
    SocialState,
};

/// Unwraps a result inside a check, reporting an error as a failure.
macro_rules! ok {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return Some(e.to_string()),
        }
    };
}

pub type Reducer = dyn Fn(&Market) -> Market + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
    /// First purchases sampled per Monte Carlo check.
    pub monte_carlo_samples: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            instances: 500,
            seed: 0,
            monte_carlo_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            if c.passed() {
                let _ = writeln!(out, "PASS  {:<34} {} cases", c.name, c.cases);
            } else {
                let _ = writeln!(
                    out,
                    "FAIL  {:<34} {}/{} cases failed; first: {}",
                    c.name,
                    c.failures,
                    c.cases,
                    c.first_failure.as_deref().unwrap_or("")
                );
            }
        }
        let failed = self.failed().count();
        let _ = writeln!(
            out,
            "{} of {} checks passed",
            self.checks.len() - failed,
            self.checks.len()
        );
        out
    }
}

/// Runs `case` on instances `0..count`, each with its own stream.
fn sweep<F>(name: &'static str, cfg: &VerifyConfig, count: usize, case: F) -> CheckResult
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Option<String> + Sync,
{
    let salt = mix64(name.bytes().fold(0u64, |h, b| mix64(h ^ b as u64)));
    let outcomes: Vec<Option<String>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(replication_seed(cfg.seed ^ salt, k as u64));
            case(&mut rng).map(|msg| format!("instance {k}: {msg}"))
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_some()).count();
    CheckResult {
        name,
        cases: count,
        failures,
        first_failure: outcomes.into_iter().flatten().next(),
    }
}

fn single(name: &'static str, outcome: Option<String>) -> CheckResult {
    CheckResult {
        name,
        cases: 1,
        failures: outcome.is_some() as usize,
        first_failure: outcome,
    }
}

/// The three-product instance used for the fixed-instance checks.
pub fn three_product_market() -> Market {
    Market::new(
        vec![0.9, 0.2, 0.6],
        vec![0.9, 0.1, 0.3],
        vec![0.8, 0.5, 0.1],
        ContinuationSpec::None,
    )
    .expect("valid market")
}

pub fn run_default(cfg: &VerifyConfig) -> VerifyReport {
    run_suite(cfg, &reduce_market)
}

pub fn run_suite(cfg: &VerifyConfig, reducer: &Reducer) -> VerifyReport {
    let k = cfg.instances;
    let general = RandomMarketSpec::default();
    let mut checks = Vec::new();

    checks.push(sweep("reduction identity", cfg, k, |rng| {
        let m = random_market(rng, &general);
        let rk = random_ranking(m.n(), rng);
        let s = random_social_state(rng, m.n(), 5);
        let reduced = reducer(&m.with_social_appeal(&s));
        let lhs = expected_purchases(&reduced, &rk, &SocialState::new(m.n()));
        let rhs = ok!(expected_purchases_with_continuation(&m, &rk, &s));
        ((lhs - rhs).abs() > 1e-12)
            .then(|| format!("lambda(reduced) = {lhs} but lambda_bar(original) = {rhs}"))
    }));

    checks.push(sweep("fixed-point oracle", cfg, k, |rng| {
        let m = random_market(rng, &general);
        let rk = random_ranking(m.n(), rng);
        let s = random_social_state(rng, m.n(), 5);
        let closed = ok!(expected_purchases_with_continuation(&m, &rk, &s));
        match lambda_fixed_point(&m, &rk, &s, 1e-13) {
            Ok(fixed) if (closed - fixed).abs() <= 1e-9 => None,
            Ok(fixed) => Some(format!("closed form {closed} vs iteration {fixed}")),
            Err(e) => Some(e.to_string()),
        }
    }));

    checks.push(sweep("trial probabilities", cfg, k, |rng| {
        let m = random_market(rng, &general);
        let rk = random_ranking(m.n(), rng);
        let s = random_social_state(rng, m.n(), 5);
        let p = try_probabilities(&m, &rk, &s);
        let sum: f64 = p.iter().sum();
        if p.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Some(format!("probabilities sum to {sum}"));
        }
        let pbar = ok!(effective_sample_probabilities(&m, &rk, &s));
        let via: f64 = pbar.iter().zip(m.quality()).map(|(a, b)| a * b).sum();
        let lb = ok!(expected_purchases_with_continuation(&m, &rk, &s));
        ((via - lb).abs() > 1e-12).then(|| format!("effective samples give {via}, closed form {lb}"))
    }));

    checks.push(sweep("optimizer vs brute force", cfg, k, |rng| {
        let m = random_market(rng, &RandomMarketSpec::sizes(1, 8));
        let s = random_social_state(rng, m.n(), 4);
        let p = performance_ranking(&m, &s);
        let b = ok!(brute_force_ranking(&m, &s, Objective::Lambda));
        if p.objective != b.objective {
            return Some(format!("lambda: parametric {} vs exhaustive {}", p.objective, b.objective));
        }
        let pc = performance_ranking_with_continuation(&m, &s);
        let bc = ok!(brute_force_ranking(&m, &s, Objective::LambdaBar));
        (pc.objective != bc.objective).then(|| {
            format!("lambda_bar: parametric {} vs exhaustive {}", pc.objective, bc.objective)
        })
    }));

    checks.push(sweep("performance beats quality ranking", cfg, k, |rng| {
        let m = random_market(rng, &general);
        let s = random_social_state(rng, m.n(), 5);
        let perf = performance_ranking_with_continuation(&m, &s).objective;
        let qual = ok!(expected_purchases_with_continuation(&m, &quality_ranking(&m), &s));
        (perf < qual - 1e-12).then(|| format!("performance {perf} < quality {qual}"))
    }));

    checks.push(sweep("efficiency bounds", cfg, k, |rng| {
        let m = random_market(rng, &RandomMarketSpec::sizes(1, 6));
        let cert = match efficiency_bounds(&m, OptimizerMethod::BruteForce) {
            Ok(c) => c,
            Err(e) => return Some(e.to_string()),
        };
        if !cert.holds() {
            return Some(format!("{cert:?}"));
        }
        if let ContinuationSpec::Polynomial { rho, r } = m.continuation() {
            if let Ok(f) = polynomial_bound_factor(*rho, *r) {
                if cert.upper_factor > f + BOUND_SLACK {
                    return Some(format!("instance factor {} exceeds family factor {f}", cert.upper_factor));
                }
            }
        }
        None
    }));

    let interior = RandomMarketSpec {
        rho: (1e-6, 1.0 - 1e-6),
        ..Default::default()
    };
    checks.push(sweep("order preservation", cfg, k, |rng| {
        let m = random_market(rng, &interior);
        if !preserves_quality_order(&m) {
            return None;
        }
        let before = quality_ranking(&m);
        let after = quality_ranking(&reducer(&m));
        (before != after).then(|| format!("quality order {before} becomes {after} after reduction"))
    }));

    checks.push(sweep("position bias gain", cfg, k, |rng| {
        let m = random_market(rng, &general);
        match position_bias_gain(&m) {
            Ok(g) if g >= -GAIN_SLACK => None,
            Ok(g) => Some(format!("gain {g}")),
            Err(e) => Some(e.to_string()),
        }
    }));

    checks.push(sweep("social influence gain", cfg, k, |rng| {
        let m = random_market(rng, &general);
        let s = random_social_state(rng, m.n(), 50);
        match si_one_step_gain(&m, &s) {
            Ok(g) if g >= -GAIN_SLACK => None,
            Ok(g) => Some(format!("gain {g}")),
            Err(e) => Some(e.to_string()),
        }
    }));

    checks.push(sweep("next-purchase law", cfg, k, |rng| {
        let m = random_market(rng, &general);
        if m.quality().iter().all(|&q| q == 0.0) {
            return None;
        }
        let rk = random_ranking(m.n(), rng);
        let s = random_social_state(rng, m.n(), 5);
        let with = ok!(next_purchase_distribution(&m, &rk, &s));
        let without = ok!(next_purchase_distribution(&m.without_continuation(), &rk, &s));
        (with != without).then(|| "law changes with continuation".to_string())
    }));

    checks.push(single("fixed instance optima", fixed_instance_optima()));
    checks.push(single(
        "next-purchase Monte Carlo",
        next_purchase_monte_carlo(cfg.seed, cfg.monte_carlo_samples),
    ));

    VerifyReport { checks }
}

fn fixed_instance_optima() -> Option<String> {
    let m = three_product_market();
    let s = SocialState::new(3);
    let cases = [
        (m.clone(), Objective::Lambda, vec![1, 2, 3]),
        (
            ok!(m.with_continuation(ContinuationSpec::Polynomial { rho: 0.8, r: 0.7 })),
            Objective::LambdaBar,
            vec![1, 3, 2],
        ),
    ];
    for (market, objective, want) in cases {
        for method in [OptimizerMethod::Parametric, OptimizerMethod::BruteForce] {
            let got = ok!(trialoffer::optimize_with(&market, &s, objective, method));
            if got.ranking.list_one_based() != want {
                return Some(format!(
                    "{objective:?} by {method:?}: list {} instead of {want:?}",
                    got.ranking
                ));
            }
        }
    }
    None
}

fn next_purchase_monte_carlo(seed: u64, samples: u64) -> Option<String> {
    let base = three_product_market();
    let s = SocialState::new(3);
    let law = ok!(next_purchase_distribution(&base, &quality_ranking(&base), &s));
    let cont = ok!(base.with_continuation(ContinuationSpec::Polynomial { rho: 0.8, r: 0.7 }));
    for (k, m) in [base, cont].iter().enumerate() {
        let mc = match first_purchase_frequencies(m, &s, samples, mix64(seed ^ k as u64)) {
            Ok(mc) => mc,
            Err(e) => return Some(e.to_string()),
        };
        for (i, (&f, &p)) in mc.frequencies.iter().zip(&law).enumerate() {
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            if (f - p).abs() > 3.0 * se {
                return Some(format!(
                    "product {} bought first with frequency {f}, expected {p} (continuation {})",
                    i + 1,
                    if k == 0 { "off" } else { "on" }
                ));
            }
        }
    }
    None
}
