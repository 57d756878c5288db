//! Agent-based simulation of a dynamic trial-offer market.
//!
//! Each participant is presented the current list, tries products drawn
//! from the trial probabilities and, after each trial, buys it with
//! probability `q_i`, keeps shopping with probability `c_i` (re-drawing from
//! the full list), or leaves. A purchase ends the session and, under social
//! influence, increments the product's download count. The list is
//! recomputed by the configured policy every `rerank_period` participants.
//!
//! Replication `k` draws from its own ChaCha8 stream seeded with
//! [`replication_seed`]`(base_seed, k)`, so results do not depend on how
//! replications are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{Market, Ranking, SocialState};
use crate::ranking::{
    performance_ranking_with_continuation, popularity_ranking, quality_ranking, random_ranking,
    PolicyKind,
};
use crate::sampler::CategoricalSampler;

pub const DEFAULT_MAX_SESSION_TRIES: u32 = 10_000;
pub const DEFAULT_RERANK_PERIOD: u64 = 50;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` derived from the experiment seed.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed ^ index)
}

/// Hash of qualities, appeals and visibilities, ignoring continuation.
pub fn instance_fingerprint(m: &Market) -> u64 {
    m.quality()
        .iter()
        .chain(m.appeal())
        .chain(m.visibility())
        .fold(mix64(m.n() as u64), |h, x| mix64(h ^ x.to_bits()))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOutcome {
    pub purchased: Option<usize>,
    pub tries: u32,
    /// The session was cut at the trial cap while still shopping.
    pub truncated: bool,
}

/// Draws a session with trial weights held in `sampler`.
#[inline]
fn session<R: Rng + ?Sized>(
    sampler: &CategoricalSampler,
    quality: &[f64],
    cont: &[f64],
    rng: &mut R,
    max_tries: u32,
) -> SessionOutcome {
    let mut tries = 0;
    loop {
        let i = sampler.sample_with(rng.random::<f64>());
        tries += 1;
        let u: f64 = rng.random();
        if u < quality[i] {
            return SessionOutcome {
                purchased: Some(i),
                tries,
                truncated: false,
            };
        }
        if u >= quality[i] + cont[i] {
            return SessionOutcome {
                purchased: None,
                tries,
                truncated: false,
            };
        }
        if tries >= max_tries {
            return SessionOutcome {
                purchased: None,
                tries,
                truncated: true,
            };
        }
    }
}

/// Simulates one participant's session under a frozen ranking and social state.
pub fn run_session<R: Rng + ?Sized>(
    m: &Market,
    rk: &Ranking,
    s: &SocialState,
    rng: &mut R,
    max_tries: u32,
) -> SessionOutcome {
    let sampler = CategoricalSampler::new(&crate::model::trial_weights(m, rk, s));
    session(&sampler, m.quality(), m.continuation_probs(), rng, max_tries.max(1))
}

/// Full description of a simulation experiment on one market.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub market: Market,
    pub policy: PolicyKind,
    /// Number of participants.
    pub steps: u64,
    /// Participants between ranking recomputations.
    pub rerank_period: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub max_session_tries: u32,
    /// When off, purchases are counted but never raise appeals.
    pub social_influence: bool,
    /// Participants between trajectory samples; `None` means `steps / 200`.
    pub trajectory_interval: Option<u64>,
}

impl SimConfig {
    pub fn new(market: Market, policy: PolicyKind) -> Self {
        SimConfig {
            market,
            policy,
            steps: 20_000,
            rerank_period: DEFAULT_RERANK_PERIOD,
            replications: 100,
            base_seed: 0,
            max_session_tries: DEFAULT_MAX_SESSION_TRIES,
            social_influence: true,
            trajectory_interval: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if self.rerank_period < 1 {
            return Err(Error::config("rerank_period", "must be at least 1"));
        }
        if self.replications < 1 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.max_session_tries < 1 {
            return Err(Error::config("max_session_tries", "must be at least 1"));
        }
        if self.trajectory_interval == Some(0) {
            return Err(Error::config("trajectory_interval", "must be at least 1"));
        }
        Ok(())
    }

    pub fn trajectory_interval(&self) -> u64 {
        self.trajectory_interval.unwrap_or((self.steps / 200).max(1))
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: u32,
    pub seed: u64,
    /// Purchases per product.
    pub downloads: Vec<u64>,
    /// `(participants so far, cumulative purchases)` every trajectory interval.
    pub trajectory: Vec<(u64, u64)>,
    pub tries_total: u64,
    pub truncated_sessions: u64,
}

impl ReplicationResult {
    /// Total purchases, the market efficiency of this run.
    pub fn total_downloads(&self) -> u64 {
        self.downloads.iter().sum()
    }
}

/// Replications of one configuration and their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: PolicyKind,
    pub steps: u64,
    pub rerank_period: u64,
    pub social_influence: bool,
    pub base_seed: u64,
    /// [`instance_fingerprint`] of the simulated market.
    pub instance: u64,
    pub per_replication: Vec<ReplicationResult>,
    /// Purchases per product summed over replications.
    pub downloads_final: Vec<u64>,
    pub tries_total: u64,
    pub truncated_sessions: u64,
}

impl SimResult {
    fn aggregate(cfg: &SimConfig, per_replication: Vec<ReplicationResult>) -> Self {
        let n = cfg.market.n();
        let mut downloads_final = vec![0; n];
        let mut tries_total = 0;
        let mut truncated_sessions = 0;
        for r in &per_replication {
            for (acc, d) in downloads_final.iter_mut().zip(&r.downloads) {
                *acc += d;
            }
            tries_total += r.tries_total;
            truncated_sessions += r.truncated_sessions;
        }
        SimResult {
            policy: cfg.policy,
            steps: cfg.steps,
            rerank_period: cfg.rerank_period,
            social_influence: cfg.social_influence,
            base_seed: cfg.base_seed,
            instance: instance_fingerprint(&cfg.market),
            per_replication,
            downloads_final,
            tries_total,
            truncated_sessions,
        }
    }

    pub fn replications(&self) -> usize {
        self.per_replication.len()
    }

    /// Total purchases of each replication.
    pub fn efficiencies(&self) -> Vec<f64> {
        self.per_replication
            .iter()
            .map(|r| r.total_downloads() as f64)
            .collect()
    }

    pub fn mean_efficiency(&self) -> f64 {
        mean(&self.efficiencies())
    }

    /// Standard error of [`SimResult::mean_efficiency`].
    pub fn efficiency_std_error(&self) -> f64 {
        let e = self.efficiencies();
        if e.len() < 2 {
            return 0.0;
        }
        (sample_variance(&e) / e.len() as f64).sqrt()
    }

    /// Mean purchases per product across replications.
    pub fn mean_downloads(&self) -> Vec<f64> {
        let w = self.replications() as f64;
        self.downloads_final.iter().map(|&d| d as f64 / w).collect()
    }

    /// Across-replication sample variance of one product's purchases.
    pub fn downloads_variance(&self, product: usize) -> f64 {
        let x: Vec<f64> = self
            .per_replication
            .iter()
            .map(|r| r.downloads[product] as f64)
            .collect();
        sample_variance(&x)
    }

    /// Cumulative purchases averaged over replications at each sample point.
    pub fn mean_trajectory(&self) -> Vec<(u64, f64)> {
        let Some(first) = self.per_replication.first() else {
            return Vec::new();
        };
        let w = self.replications() as f64;
        (0..first.trajectory.len())
            .map(|k| {
                let total: u64 = self.per_replication.iter().map(|r| r.trajectory[k].1).sum();
                (first.trajectory[k].0, total as f64 / w)
            })
            .collect()
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn choose_ranking<R: Rng + ?Sized>(
    cfg: &SimConfig,
    signal: &SocialState,
    purchases: &SocialState,
    rng: &mut R,
) -> Ranking {
    let m = &cfg.market;
    match cfg.policy {
        PolicyKind::Performance => performance_ranking_with_continuation(m, signal).ranking,
        PolicyKind::Quality => quality_ranking(m),
        PolicyKind::Popularity => popularity_ranking(m, purchases),
        PolicyKind::Random => random_ranking(m.n(), rng),
    }
}

/// Runs replication `replication` of `cfg`.
pub fn run_simulation(cfg: &SimConfig, replication: u32) -> Result<ReplicationResult> {
    cfg.validate()?;
    let m = &cfg.market;
    let n = m.n();
    let seed = replication_seed(cfg.base_seed, replication as u64);
    let mut rng = rng_from_seed(seed);
    let interval = cfg.trajectory_interval();

    let mut purchases = SocialState::new(n);
    // what participants see; stays at zero in the independent condition
    let frozen = SocialState::new(n);
    let mut ranking = Ranking::identity(n);
    let mut sampler = CategoricalSampler::new(&vec![1.0; n]);
    let mut trajectory = Vec::with_capacity((cfg.steps / interval) as usize + 1);
    let mut tries_total = 0;
    let mut truncated_sessions = 0;

    for t in 0..cfg.steps {
        if t % cfg.rerank_period == 0 {
            let signal = if cfg.social_influence { &purchases } else { &frozen };
            ranking = choose_ranking(cfg, signal, &purchases, &mut rng);
            sampler.rebuild(&crate::model::trial_weights(m, &ranking, signal));
        }
        let out = session(
            &sampler,
            m.quality(),
            m.continuation_probs(),
            &mut rng,
            cfg.max_session_tries,
        );
        tries_total += out.tries as u64;
        truncated_sessions += out.truncated as u64;
        if let Some(i) = out.purchased {
            if cfg.social_influence {
                sampler.add(i, m.visibility()[ranking.position(i)]);
            }
        }
        purchases.advance(out.purchased);
        let done = t + 1;
        if done % interval == 0 || done == cfg.steps {
            trajectory.push((done, purchases.total_downloads()));
        }
    }

    Ok(ReplicationResult {
        replication,
        seed,
        downloads: purchases.downloads().to_vec(),
        trajectory,
        tries_total,
        truncated_sessions,
    })
}

/// Runs every replication of `cfg` in parallel and aggregates them in
/// replication order.
pub fn run_replications(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let per = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_simulation(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimResult::aggregate(cfg, per))
}

/// Monte Carlo estimate of which product is bought first.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstPurchaseSample {
    /// Share of samples whose first purchase was each product.
    pub frequencies: Vec<f64>,
    /// Number of first purchases observed.
    pub samples: u64,
    /// Sessions simulated, including those that ended without a purchase.
    pub sessions: u64,
}

/// Simulates sessions under the quality ranking and a frozen social state
/// until `samples` purchases have been observed, tallying the product bought
/// each time.
pub fn first_purchase_frequencies(
    m: &Market,
    s: &SocialState,
    samples: u64,
    seed: u64,
) -> Result<FirstPurchaseSample> {
    if samples == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    if m.quality().iter().all(|&q| q <= 0.0) {
        return Err(Error::Domain("no product can ever be purchased".into()));
    }
    let rk = quality_ranking(m);
    let sampler = CategoricalSampler::new(&crate::model::trial_weights(m, &rk, s));
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; m.n()];
    let mut sessions = 0;
    for _ in 0..samples {
        loop {
            sessions += 1;
            let out = session(
                &sampler,
                m.quality(),
                m.continuation_probs(),
                &mut rng,
                DEFAULT_MAX_SESSION_TRIES,
            );
            if let Some(i) = out.purchased {
                counts[i] += 1;
                break;
            }
        }
    }
    Ok(FirstPurchaseSample {
        frequencies: counts.iter().map(|&c| c as f64 / samples as f64).collect(),
        samples,
        sessions,
    })
}
