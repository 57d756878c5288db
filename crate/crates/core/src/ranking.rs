//! Ranking policies: quality, popularity, random and performance rankings,
//! the parametric optimizer behind the latter and its exhaustive oracle.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::market::{Market, Ranking, SocialState};
use crate::model::{
    efficiency_parts, expected_purchases, expected_purchases_with_continuation, reduce_market,
    social_appeals,
};

/// Largest instance [`brute_force_ranking`] accepts.
pub const BRUTE_FORCE_MAX_N: usize = 10;

/// The four ranking policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// P-rank: maximize expected purchases at the current state.
    Performance,
    /// Q-rank: order by quality.
    Quality,
    /// D-rank: order by purchase counts.
    Popularity,
    /// R-rank: uniformly random order.
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Performance,
        PolicyKind::Quality,
        PolicyKind::Popularity,
        PolicyKind::Random,
    ];

    /// Short tag used in tables and directory names.
    pub fn tag(self) -> &'static str {
        match self {
            PolicyKind::Performance => "P-rank",
            PolicyKind::Quality => "Q-rank",
            PolicyKind::Popularity => "D-rank",
            PolicyKind::Random => "R-rank",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Performance => "performance",
            PolicyKind::Quality => "quality",
            PolicyKind::Popularity => "popularity",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "performance" | "p-rank" | "prank" | "p" => Ok(PolicyKind::Performance),
            "quality" | "q-rank" | "qrank" | "q" => Ok(PolicyKind::Quality),
            "popularity" | "d-rank" | "drank" | "d" => Ok(PolicyKind::Popularity),
            "random" | "r-rank" | "rrank" | "r" => Ok(PolicyKind::Random),
            other => Err(Error::config("policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// Efficiency measure being maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// One trial per participant, `lambda`.
    Lambda,
    /// Trials continue with probability `c_i`, `lambda_bar`.
    LambdaBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerMethod {
    Parametric,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub ranking: Ranking,
    /// Objective of `ranking`, recomputed with the public efficiency formulas.
    pub objective: f64,
    /// Parametric steps taken, or rankings enumerated.
    pub iterations: usize,
    pub method: OptimizerMethod,
}

/// Positions ordered by visibility, most visible first; ties by index.
fn positions_by_visibility(m: &Market) -> Vec<usize> {
    let v = m.visibility();
    let mut pos: Vec<usize> = (0..m.n()).collect();
    if m.flags().unsorted_visibility {
        pos.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    }
    pos
}

/// Places `products` (best first) onto positions in decreasing visibility.
fn assign(m: &Market, products: &[usize]) -> Ranking {
    let positions = positions_by_visibility(m);
    let mut sigma = vec![0; m.n()];
    for (&product, &position) in products.iter().zip(&positions) {
        sigma[product] = position;
    }
    Ranking::from_positions(sigma).expect("assignment is a bijection")
}

/// Highest quality on the most visible position; ties by product index.
pub fn quality_ranking(m: &Market) -> Ranking {
    let q = m.quality();
    let mut order: Vec<usize> = (0..m.n()).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    assign(m, &order)
}

/// Most purchased product first; ties by appeal (descending), then index.
pub fn popularity_ranking(m: &Market, s: &SocialState) -> Ranking {
    assert_eq!(s.n(), m.n(), "social state size does not match market");
    let d = s.downloads();
    let a = m.appeal();
    let mut order: Vec<usize> = (0..m.n()).collect();
    order.sort_by(|&x, &y| {
        d[y].cmp(&d[x])
            .then_with(|| a[y].total_cmp(&a[x]))
            .then(x.cmp(&y))
    });
    assign(m, &order)
}

/// Uniformly random ranking drawn from `rng` (Fisher-Yates).
pub fn random_ranking<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Ranking {
    let mut list: Vec<usize> = (0..n).collect();
    list.shuffle(rng);
    Ranking::from_list(list).expect("shuffle preserves the permutation")
}

/// Parametric ascent on `sum v a q / sum v a` for a market without continuation.
///
/// For a fixed `lambda`, maximizing `sum_i v_{sigma_i} a_i (q_i - lambda)` is a
/// rearrangement problem: products sorted by `a_i (q_i - lambda)` go to
/// positions sorted by visibility. The new ranking's ratio becomes the next
/// `lambda`; the loop stops when the ratio no longer increases.
fn parametric_ascent(m: &Market, appeal: &[f64], start: Ranking) -> (Ranking, usize) {
    let v = m.visibility();
    let q = m.quality();
    let ratio = |rk: &Ranking| efficiency_parts(v, appeal, q, None, rk.positions()).0;

    let mut best = start;
    let mut lambda = ratio(&best);
    let mut order: Vec<usize> = (0..m.n()).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let key: Vec<f64> = (0..m.n()).map(|i| appeal[i] * (q[i] - lambda)).collect();
        order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
        let candidate = assign(m, &order);
        let next = ratio(&candidate);
        if next > lambda {
            lambda = next;
            best = candidate;
        } else {
            return (best, iterations);
        }
    }
}

/// Ranking maximizing `lambda`, the single-trial expected purchases, at the
/// given social state. Continuation parameters of `m` are ignored.
///
/// The ascent starts from the quality ranking, so the result is never worse
/// than it.
pub fn performance_ranking(m: &Market, s: &SocialState) -> OptimizerReport {
    let appeal = social_appeals(m, s);
    let (ranking, iterations) = parametric_ascent(m, &appeal, quality_ranking(m));
    let objective = expected_purchases(m, &ranking, s);
    OptimizerReport {
        ranking,
        objective,
        iterations,
        method: OptimizerMethod::Parametric,
    }
}

/// Ranking maximizing `lambda_bar`, obtained by optimizing the reduced market.
///
/// The social signal is folded into the appeals before reducing. The reported
/// objective is `lambda_bar` of the original market.
pub fn performance_ranking_with_continuation(m: &Market, s: &SocialState) -> OptimizerReport {
    if m.continuation().is_none() {
        return performance_ranking(m, s);
    }
    let reduced = reduce_market(&m.with_social_appeal(s));
    let (ranking, iterations) =
        parametric_ascent(&reduced, reduced.appeal(), quality_ranking(&reduced));
    let objective = expected_purchases_with_continuation(m, &ranking, s)
        .expect("valid continuation keeps the aggregate below 1");
    OptimizerReport {
        ranking,
        objective,
        iterations,
        method: OptimizerMethod::Parametric,
    }
}

/// Performance ranking for the chosen objective.
pub fn optimize(m: &Market, s: &SocialState, objective: Objective) -> OptimizerReport {
    match objective {
        Objective::Lambda => performance_ranking(m, s),
        Objective::LambdaBar => performance_ranking_with_continuation(m, s),
    }
}

/// [`optimize`] or [`brute_force_ranking`], as selected by `method`.
pub fn optimize_with(
    m: &Market,
    s: &SocialState,
    objective: Objective,
    method: OptimizerMethod,
) -> Result<OptimizerReport> {
    match method {
        OptimizerMethod::Parametric => Ok(optimize(m, s, objective)),
        OptimizerMethod::BruteForce => brute_force_ranking(m, s, objective),
    }
}

/// Exhaustive search over all `n!` rankings.
///
/// Ties are resolved in favour of the lexicographically smallest position
/// vector.
pub fn brute_force_ranking(
    m: &Market,
    s: &SocialState,
    objective: Objective,
) -> Result<OptimizerReport> {
    let n = m.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    assert_eq!(s.n(), n, "social state size does not match market");
    let appeal = social_appeals(m, s);
    let cont = match objective {
        Objective::Lambda => None,
        Objective::LambdaBar => Some(m.continuation_probs()),
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut count = 0;
    // permutations of 0..n come out in lexicographic order
    for sigma in (0..n).permutations(n) {
        count += 1;
        let (num, leak) = efficiency_parts(m.visibility(), &appeal, m.quality(), cont, &sigma);
        let value = num / (1.0 - leak);
        let better = match &best {
            None => true,
            Some((b, _)) => value.partial_cmp(b) == Some(Ordering::Greater),
        };
        if better {
            best = Some((value, sigma));
        }
    }
    let (_, sigma) = best.expect("at least one permutation");
    let ranking = Ranking::from_positions(sigma)?;
    let objective = match objective {
        Objective::Lambda => expected_purchases(m, &ranking, s),
        Objective::LambdaBar => expected_purchases_with_continuation(m, &ranking, s)?,
    };
    Ok(OptimizerReport {
        ranking,
        objective,
        iterations: count,
        method: OptimizerMethod::BruteForce,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::ContinuationSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn market(q: Vec<f64>, a: Vec<f64>, v: Vec<f64>) -> Market {
        Market::new(q, a, v, ContinuationSpec::None).unwrap()
    }

    fn three_products(cont: ContinuationSpec) -> Market {
        Market::new(vec![0.9, 0.2, 0.6], vec![0.9, 0.1, 0.3], vec![0.8, 0.5, 0.1], cont).unwrap()
    }

    #[test]
    fn quality_ranking_examples() {
        let m = market(vec![0.9, 0.6, 0.2], vec![1.0; 3], vec![1.0, 0.5, 0.2]);
        assert_eq!(quality_ranking(&m), Ranking::identity(3));

        let m = market(vec![0.2, 0.9, 0.6], vec![1.0; 3], vec![1.0, 0.5, 0.2]);
        assert_eq!(quality_ranking(&m).list_one_based(), vec![2, 3, 1]);

        let m = market(vec![0.4; 4], vec![1.0; 4], vec![1.0; 4]);
        assert_eq!(quality_ranking(&m), Ranking::identity(4));
    }

    #[test]
    fn quality_ranking_follows_unsorted_visibility() {
        let flags = crate::market::MarketFlags {
            unsorted_visibility: true,
            ..Default::default()
        };
        let m = Market::with_flags(
            vec![0.9, 0.5, 0.1],
            vec![1.0; 3],
            vec![0.2, 1.0, 0.5],
            ContinuationSpec::None,
            flags,
        )
        .unwrap();
        let rk = quality_ranking(&m);
        // best product on the most visible slot (position 2 of 3)
        assert_eq!(rk.positions(), &[1, 2, 0]);
    }

    #[test]
    fn popularity_ranking_examples() {
        let m = market(vec![0.5; 3], vec![1.0; 3], vec![1.0, 0.5, 0.2]);
        assert_eq!(popularity_ranking(&m, &SocialState::new(3)), Ranking::identity(3));

        let s = SocialState::from_downloads(vec![5, 9, 1], 20).unwrap();
        assert_eq!(popularity_ranking(&m, &s).list_one_based(), vec![2, 1, 3]);

        let m = market(vec![0.5; 3], vec![0.1, 0.9, 0.5], vec![1.0, 0.5, 0.2]);
        let s = SocialState::from_downloads(vec![3, 3, 0], 6).unwrap();
        assert_eq!(popularity_ranking(&m, &s).list_one_based(), vec![2, 1, 3]);
    }

    #[test]
    fn random_ranking_is_deterministic_per_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            assert_eq!(random_ranking(9, &mut a), random_ranking(9, &mut b));
        }
        assert_eq!(random_ranking(1, &mut a), Ranking::identity(1));
    }

    #[test]
    fn random_ranking_is_uniform_over_s3() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(random_ranking(3, &mut rng).list().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for &c in counts.values() {
            let expected = draws as f64 * p;
            assert!((c as f64 - expected).abs() < 3.0 * sd, "count {c}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 99.9% quantile of chi-square with 5 degrees of freedom
        assert!(chi2 < 20.52, "chi2 {chi2}");
    }

    #[test]
    fn performance_single_product() {
        let m = market(vec![0.3], vec![2.0], vec![1.0]);
        let rep = performance_ranking(&m, &SocialState::new(1));
        assert_eq!(rep.ranking, Ranking::identity(1));
        assert!((rep.objective - 0.3).abs() < 1e-15);
    }

    #[test]
    fn example_one_lists() {
        let s = SocialState::new(3);
        let plain = three_products(ContinuationSpec::None);
        assert_eq!(performance_ranking(&plain, &s).ranking.list_one_based(), vec![1, 2, 3]);
        assert_eq!(
            brute_force_ranking(&plain, &s, Objective::Lambda).unwrap().ranking.list_one_based(),
            vec![1, 2, 3]
        );

        let cont = three_products(ContinuationSpec::Polynomial { rho: 0.8, r: 0.7 });
        let rep = performance_ranking_with_continuation(&cont, &s);
        assert_eq!(rep.ranking.list_one_based(), vec![1, 3, 2]);
        let brute = brute_force_ranking(&cont, &s, Objective::LambdaBar).unwrap();
        assert_eq!(brute.ranking.list_one_based(), vec![1, 3, 2]);
        assert_eq!(rep.objective, brute.objective);
    }

    #[test]
    fn continuation_none_delegates() {
        let s = SocialState::new(3);
        let plain = three_products(ContinuationSpec::None);
        assert_eq!(performance_ranking_with_continuation(&plain, &s), performance_ranking(&plain, &s));
    }

    #[test]
    fn brute_force_examples() {
        let m = market(vec![0.9, 0.1], vec![1.0, 1.0], vec![1.0, 0.5]);
        let rep = brute_force_ranking(&m, &SocialState::new(2), Objective::Lambda).unwrap();
        assert_eq!(rep.ranking.position(0), 0);
        assert_eq!(rep.iterations, 2);

        let one = market(vec![0.5], vec![1.0], vec![1.0]);
        let rep = brute_force_ranking(&one, &SocialState::new(1), Objective::LambdaBar).unwrap();
        assert_eq!(rep.ranking, Ranking::identity(1));
    }

    #[test]
    fn brute_force_tie_break_is_lexicographic() {
        // all products identical: every ranking ties, identity is smallest
        let m = market(vec![0.5; 4], vec![1.0; 4], vec![1.0, 0.7, 0.3, 0.1]);
        let rep = brute_force_ranking(&m, &SocialState::new(4), Objective::Lambda).unwrap();
        assert_eq!(rep.ranking, Ranking::identity(4));
    }

    #[test]
    fn brute_force_size_guard() {
        let m = market(vec![0.5; 11], vec![1.0; 11], vec![1.0; 11]);
        assert_eq!(
            brute_force_ranking(&m, &SocialState::new(11), Objective::Lambda),
            Err(Error::TooLarge { n: 11, max: 10 })
        );
    }

    #[test]
    fn policy_names_parse() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
            assert_eq!(p.tag().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("best".parse::<PolicyKind>().is_err());
    }
}
