//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use trialoffer::analysis::{
    efficiency_bounds, polynomial_bound_factor, position_bias_gain, si_one_step_gain, GAIN_SLACK,
};
use trialoffer::instances::{random_market, random_social_state, RandomMarketSpec};
use trialoffer::sim::{first_purchase_frequencies, rng_from_seed};
use trialoffer::{
    brute_force_ranking, expected_purchases, expected_purchases_with_continuation,
    lambda_fixed_point, next_purchase_distribution, optimize_with, performance_ranking,
    performance_ranking_with_continuation, quality_ranking, random_ranking, reduce_market,
    ContinuationSpec, Market, Objective, OptimizerMethod, PolicyKind, SocialState,
};
use trialoffer_cli::commands;
use trialoffer_cli::config::{ExperimentSpec, SweepCell};
use trialoffer_cli::experiment::ExperimentOutcome;

type Outcome = Result<String, String>;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn three_products() -> Market {
    Market::new(
        vec![0.9, 0.2, 0.6],
        vec![0.9, 0.1, 0.3],
        vec![0.8, 0.5, 0.1],
        ContinuationSpec::None,
    )
    .unwrap()
}

fn within(limit: Duration, elapsed: Duration, what: &str) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:.2?}, limit {limit:?}"))
    }
}

/// The 500 instances shared by the first two criteria.
fn reduction_instances() -> Vec<(Market, trialoffer::Ranking, SocialState)> {
    let mut rng = rng_from_seed(20_001);
    (0..500)
        .map(|_| {
            let m = random_market(&mut rng, &RandomMarketSpec::default());
            let rk = random_ranking(m.n(), &mut rng);
            let s = random_social_state(&mut rng, m.n(), 5);
            (m, rk, s)
        })
        .collect()
}

fn reduction_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (m, rk, s) in reduction_instances() {
        let reduced = reduce_market(&m.with_social_appeal(&s));
        let lhs = expected_purchases(&reduced, &rk, &SocialState::new(m.n()));
        let rhs = expected_purchases_with_continuation(&m, &rk, &s).map_err(|e| e.to_string())?;
        worst = worst.max((lhs - rhs).abs());
    }
    let elapsed = start.elapsed();
    if worst > 1e-12 {
        return Err(format!("max |lambda(reduced) - lambda_bar| = {worst:e}"));
    }
    within(Duration::from_secs(1), elapsed, "500 instances")?;
    Ok(format!("max error {worst:.1e} over 500 instances in {elapsed:.2?}"))
}

fn fixed_point_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for (m, rk, s) in reduction_instances() {
        let closed = expected_purchases_with_continuation(&m, &rk, &s).map_err(|e| e.to_string())?;
        let fixed = lambda_fixed_point(&m, &rk, &s, 1e-13).map_err(|e| e.to_string())?;
        worst = worst.max((closed - fixed).abs());
    }
    if worst > 1e-9 {
        return Err(format!("max |closed form - iteration| = {worst:e}"));
    }
    Ok(format!("max error {worst:.1e} over 500 instances"))
}

fn three_product_optima() -> Outcome {
    let m = three_products();
    let mc = m
        .with_continuation(ContinuationSpec::Polynomial { rho: 0.8, r: 0.7 })
        .unwrap();
    let s = SocialState::new(3);
    let mut found = Vec::new();
    for (market, objective, want) in [(&m, Objective::Lambda, [1, 2, 3]), (&mc, Objective::LambdaBar, [1, 3, 2])] {
        for method in [OptimizerMethod::Parametric, OptimizerMethod::BruteForce] {
            let got = optimize_with(market, &s, objective, method).map_err(|e| e.to_string())?;
            if got.ranking.list_one_based() != want {
                return Err(format!("{objective:?}/{method:?} gave {}", got.ranking));
            }
            found.push(format!("{objective:?}/{method:?} {}", got.ranking));
        }
    }
    Ok(found.join(", "))
}

fn optimizer_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(20_004);
    for k in 0..200 {
        let m = random_market(&mut rng, &RandomMarketSpec::sizes(1, 8));
        let s = random_social_state(&mut rng, m.n(), 4);
        let p = performance_ranking(&m, &s).objective;
        let b = brute_force_ranking(&m, &s, Objective::Lambda).map_err(|e| e.to_string())?.objective;
        if p != b {
            return Err(format!("instance {k}: lambda parametric {p} vs exhaustive {b}"));
        }
        let pc = performance_ranking_with_continuation(&m, &s).objective;
        let bc = brute_force_ranking(&m, &s, Objective::LambdaBar).map_err(|e| e.to_string())?.objective;
        if pc != bc {
            return Err(format!("instance {k}: lambda_bar parametric {pc} vs exhaustive {bc}"));
        }
    }
    let elapsed = start.elapsed();
    within(Duration::from_secs(30), elapsed, "200 instances")?;
    Ok(format!("200 exact ties for both objectives in {elapsed:.2?}"))
}

fn bounds() -> Outcome {
    let mut rng = rng_from_seed(20_005);
    let mut tightest = f64::INFINITY;
    for k in 0..500 {
        let m = random_market(&mut rng, &RandomMarketSpec::sizes(1, 6));
        let cert = efficiency_bounds(&m, OptimizerMethod::BruteForce).map_err(|e| e.to_string())?;
        if !cert.holds() {
            return Err(format!("instance {k}: {cert:?}"));
        }
        tightest = tightest.min(cert.lambda_opt * cert.upper_factor - cert.lambda_bar_opt);
    }
    let f = polynomial_bound_factor(1.0, 1.0).map_err(|e| e.to_string())?;
    if f != 4.0 / 3.0 {
        return Err(format!("factor at rho = 1, r = 1 is {f}"));
    }
    Ok(format!("500 certificates hold (min upper slack {tightest:.2e}); factor(1, 1) = 4/3"))
}

fn order_preservation() -> Outcome {
    let mut rng = rng_from_seed(20_006);
    let spec = RandomMarketSpec {
        rho: (1e-9, 1.0 - 1e-9),
        ..Default::default()
    };
    for k in 0..500 {
        let m = random_market(&mut rng, &spec);
        let (before, after) = (quality_ranking(&m), quality_ranking(&reduce_market(&m)));
        if before != after {
            return Err(format!("instance {k}: {before} became {after}"));
        }
    }
    Ok("500 instances keep their quality order".into())
}

fn next_purchase_law() -> Outcome {
    const SAMPLES: u64 = 100_000;
    let base = three_products();
    let s = SocialState::new(3);
    let law = next_purchase_distribution(&base, &quality_ranking(&base), &s).map_err(|e| e.to_string())?;
    let cont = base
        .with_continuation(ContinuationSpec::Polynomial { rho: 0.8, r: 0.7 })
        .unwrap();
    let mut worst: f64 = 0.0;
    let mut freqs = Vec::new();
    for (m, seed) in [(&base, 70_001), (&cont, 70_002)] {
        let mc = first_purchase_frequencies(m, &s, SAMPLES, seed).map_err(|e| e.to_string())?;
        for i in 0..3 {
            let se = (law[i] * (1.0 - law[i]) / SAMPLES as f64).sqrt();
            worst = worst.max((mc.frequencies[i] - law[i]).abs() / se);
        }
        freqs.push(mc.frequencies);
    }
    for i in 0..3 {
        let se = (law[i] * (1.0 - law[i]) / SAMPLES as f64).sqrt();
        if (freqs[0][i] - freqs[1][i]).abs() > 3.0 * se {
            return Err(format!("product {} moves from {} to {} with continuation", i + 1, freqs[0][i], freqs[1][i]));
        }
    }
    if worst > 3.0 {
        return Err(format!("largest deviation {worst:.2} standard errors"));
    }
    Ok(format!("law {law:.4?}; largest deviation {worst:.2} standard errors"))
}

fn gains() -> Outcome {
    let mut rng = rng_from_seed(20_008);
    let (mut pb_min, mut si_min) = (f64::INFINITY, f64::INFINITY);
    for k in 0..500 {
        let m = random_market(&mut rng, &RandomMarketSpec::default());
        let g = position_bias_gain(&m).map_err(|e| e.to_string())?;
        if g < -GAIN_SLACK {
            return Err(format!("instance {k}: position bias gain {g}"));
        }
        pb_min = pb_min.min(g);
    }
    for k in 0..500 {
        let m = random_market(&mut rng, &RandomMarketSpec::default());
        let s = random_social_state(&mut rng, m.n(), 50);
        let g = si_one_step_gain(&m, &s).map_err(|e| e.to_string())?;
        if g < -GAIN_SLACK {
            return Err(format!("instance {k}: social influence gain {g}"));
        }
        si_min = si_min.min(g);
    }
    Ok(format!("minimum gains {pb_min:.2e} (position bias), {si_min:.2e} (social influence)"))
}

fn trends(out: &ExperimentOutcome, elapsed: Duration) -> Outcome {
    use PolicyKind::*;
    let imp = |p, rho, r| out.improvement(p, SweepCell { rho, r }).unwrap().improvement_pct;
    let (ra, da, pa) = (imp(Random, 0.9, 0.0), imp(Popularity, 0.9, 0.0), imp(Performance, 0.9, 0.0));
    if !(ra > da && da > pa) {
        return Err(format!("rho=0.9, r=0: R {ra:.1}%, D {da:.1}%, P {pa:.1}% not decreasing"));
    }
    let (rb, pb) = (imp(Random, 0.9, 2.0), imp(Performance, 0.9, 2.0));
    if !(rb < pb) {
        return Err(format!("rho=0.9, r=2: R {rb:.1}% not below P {pb:.1}%"));
    }
    let cells = std::iter::once(None).chain(out.spec.sweep.iter().copied().map(Some));
    for c in cells {
        let e = |p| out.cell(p, c).unwrap().result.mean_efficiency();
        let (p, d, r) = (e(Performance), e(Popularity), e(Random));
        if !(p >= d && d >= r) {
            return Err(format!("cell {c:?}: P {p:.1}, D {d:.1}, R {r:.1} not ordered"));
        }
    }
    within(Duration::from_secs(600), elapsed, "desk-scale grid")?;
    Ok(format!(
        "r=0: R {ra:.1}% > D {da:.1}% > P {pa:.1}%; r=2: R {rb:.1}% < P {pb:.1}%; P >= D >= R in all 13 cells; {elapsed:.1?}"
    ))
}

fn csv_bodies(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(spec: &ExperimentSpec, first: &Path, scratch: &Path) -> Outcome {
    let second = scratch.join("second");
    commands::simulate(spec, &second, &|_| {}).map_err(|e| e.to_string())?;
    let (a, b) = (csv_bodies(first), csv_bodies(&second));
    if a.keys().ne(b.keys()) {
        return Err("the two stores hold different CSV files".into());
    }
    for (path, body) in &a {
        if &b[path] != body {
            return Err(format!("{} differs between runs", path.display()));
        }
    }
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!("{} CSV files ({bytes} bytes) identical", a.len()))
}

/// `(quality_rank, replication, downloads)` rows of a scatter file.
fn read_scatter(path: &Path) -> Result<Vec<(usize, u32, f64)>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some("product_id,quality,quality_rank,replication,downloads") {
        return Err("unexpected scatter header".into());
    }
    lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            Ok((
                c[2].parse().map_err(|_| l.to_string())?,
                c[3].parse().map_err(|_| l.to_string())?,
                c[4].parse().map_err(|_| l.to_string())?,
            ))
        })
        .collect()
}

fn downloads_by_rank(rows: &[(usize, u32, f64)], rank: usize) -> Vec<f64> {
    rows.iter().filter(|r| r.0 == rank).map(|r| r.2).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn download_distribution(store: &Path, scratch: &Path) -> Outcome {
    let cell = SweepCell { rho: 0.9, r: 1.0 };
    let mut scatter = BTreeMap::new();
    for policy in [PolicyKind::Quality, PolicyKind::Popularity] {
        let dir = scratch.join(policy.name());
        commands::plot_data(store, policy, Some(cell), Some(&dir), 1).map_err(|e| e.to_string())?;
        scatter.insert(policy, read_scatter(&dir.join("scatter.csv"))?);
    }
    let q = &scatter[&PolicyKind::Quality];
    let d = &scatter[&PolicyKind::Popularity];
    let n = q.iter().map(|r| r.0).max().unwrap_or(0);
    if q.len() != n * 100 {
        return Err(format!("{} scatter rows for {n} products", q.len()));
    }
    let top: Vec<f64> = (n - 4..=n).map(|k| mean(&downloads_by_rank(q, k))).collect();
    if !top.windows(2).all(|w| w[0] <= w[1]) {
        return Err(format!("quality ranking mean downloads of the top five {top:.1?} decrease"));
    }
    let (vq, vd) = (variance(&downloads_by_rank(q, n)), variance(&downloads_by_rank(d, n)));
    if !(vd > vq) {
        return Err(format!("best product variance: popularity {vd:.1} vs quality {vq:.1}"));
    }
    Ok(format!(
        "top-five means {top:.0?}; best-product variance {vd:.0} (popularity) > {vq:.0} (quality)"
    ))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, outcome: Outcome| {
        let tag = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &outcome {
            Ok(s) | Err(s) => s.clone(),
        };
        println!("criterion {id:>2} {tag}  {name}: {detail}");
        results.push((id, name, outcome));
    };

    report(1, "reduction identity", reduction_identity());
    report(2, "fixed-point oracle", fixed_point_oracle());
    report(3, "three-product optimal lists", three_product_optima());
    report(4, "optimizer exactness", optimizer_exactness());
    report(5, "efficiency bounds", bounds());
    report(6, "order preservation", order_preservation());
    report(7, "next-purchase law", next_purchase_law());
    report(8, "position bias and social influence gains", gains());

    let scratch = tempfile::tempdir().expect("temporary directory");
    let store = scratch.path().join("desk");
    let spec = ExperimentSpec::load(&data("desk_scale.toml"));
    let start = Instant::now();
    let run = spec
        .as_ref()
        .map_err(|e| e.to_string())
        .and_then(|spec| commands::simulate(spec, &store, &|_| {}).map_err(|e| e.to_string()));
    let elapsed = start.elapsed();
    match (&spec, run) {
        (Ok(spec), Ok((outcome, _))) => {
            report(9, "continuation improvement trends", trends(&outcome, elapsed));
            report(10, "determinism", determinism(spec, &store, scratch.path()));
            report(11, "downloads versus quality", download_distribution(&store, scratch.path()));
        }
        (_, Err(e)) => {
            for (id, name) in [(9, "continuation improvement trends"), (10, "determinism"), (11, "downloads versus quality")] {
                report(id, name, Err(format!("desk-scale run failed: {e}")));
            }
        }
        (Err(_), Ok(_)) => unreachable!(),
    }

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
