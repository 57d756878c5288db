//! Trial-offer markets with continuation.
//!
//! Participants try products drawn from a position-biased multinomial logit
//! model, buy with probability equal to the product's quality, and may keep
//! shopping after declining. This crate provides the closed-form efficiency
//! of such markets, their reduction to an equivalent single-trial market,
//! the Q/D/P/R ranking policies with an exact performance-ranking optimizer,
//! the bound and monotonicity checks built on them, and an agent-based
//! simulator of the dynamic market under social influence.

pub mod analysis;
pub mod error;
pub mod instances;
pub mod market;
pub mod model;
pub mod ranking;
pub mod sampler;
pub mod sim;

pub use error::{Error, Result};
pub use market::{continuation_probability, ContinuationSpec, Market, MarketFlags, Ranking, SocialState};
pub use model::{
    effective_sample_probabilities, expected_purchases, expected_purchases_with_continuation,
    lambda_fixed_point, next_purchase_distribution, reduce_market, try_probabilities,
};
pub use ranking::{
    brute_force_ranking, optimize, optimize_with, performance_ranking, performance_ranking_with_continuation,
    popularity_ranking, quality_ranking, random_ranking, Objective, OptimizerMethod,
    OptimizerReport, PolicyKind,
};
pub use sim::{run_replications, run_session, run_simulation, SimConfig, SimResult};
