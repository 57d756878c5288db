//! Problem-instance types: markets, continuation specifications, rankings
//! and the social influence state.

use std::fmt;

use crate::error::{Error, Result};

/// Continuation probability of the polynomial family, `rho * q^r * (1 - q)`.
///
/// `q^0` is taken to be 1 even at `q = 0`, so `r = 0` yields the
/// quality-independent family `rho * (1 - q)`.
pub fn continuation_probability(q: f64, rho: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quality {q} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho {rho} outside [0, 1]")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("exponent r {r} must be finite and >= 0")));
    }
    let qr = if r == 0.0 { 1.0 } else { q.powf(r) };
    Ok(rho * qr * (1.0 - q))
}

/// How a participant keeps shopping after declining a product.
#[derive(Debug, Clone, PartialEq)]
pub enum ContinuationSpec {
    /// Every participant tries exactly one product.
    None,
    /// `c_i = rho * q_i^r * (1 - q_i)`.
    Polynomial { rho: f64, r: f64 },
    /// One continuation probability per product.
    Explicit(Vec<f64>),
}

impl ContinuationSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, ContinuationSpec::None)
    }
}

/// Construction flags for [`Market`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MarketFlags {
    /// Accept visibilities that are not non-increasing in position.
    pub unsorted_visibility: bool,
    /// The market is the output of a reduction; qualities may exceed 1.
    pub reduced: bool,
}

/// A static trial-offer market instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    quality: Vec<f64>,
    appeal: Vec<f64>,
    visibility: Vec<f64>,
    continuation: ContinuationSpec,
    cont_probs: Vec<f64>,
    flags: MarketFlags,
}

impl Market {
    /// Builds a market with non-increasing visibilities and qualities in `[0, 1]`.
    pub fn new(
        quality: Vec<f64>,
        appeal: Vec<f64>,
        visibility: Vec<f64>,
        continuation: ContinuationSpec,
    ) -> Result<Self> {
        Self::with_flags(quality, appeal, visibility, continuation, MarketFlags::default())
    }

    pub fn with_flags(
        quality: Vec<f64>,
        appeal: Vec<f64>,
        visibility: Vec<f64>,
        continuation: ContinuationSpec,
        flags: MarketFlags,
    ) -> Result<Self> {
        let n = quality.len();
        if n == 0 {
            return Err(Error::InvalidMarket("market has no products".into()));
        }
        if appeal.len() != n || visibility.len() != n {
            return Err(Error::InvalidMarket(format!(
                "length mismatch: {} qualities, {} appeals, {} visibilities",
                n,
                appeal.len(),
                visibility.len()
            )));
        }
        for (i, &q) in quality.iter().enumerate() {
            let ok = if flags.reduced {
                q >= 0.0 && q.is_finite()
            } else {
                (0.0..=1.0).contains(&q)
            };
            if !ok {
                return Err(Error::InvalidMarket(format!("quality[{i}] = {q} out of range")));
            }
        }
        if let Some((i, a)) = appeal.iter().enumerate().find(|(_, a)| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidMarket(format!("appeal[{i}] = {a} must be positive")));
        }
        if let Some((p, v)) = visibility.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidMarket(format!("visibility[{p}] = {v} must be positive")));
        }
        if !flags.unsorted_visibility {
            if let Some(p) = visibility.windows(2).position(|w| w[1] > w[0]) {
                return Err(Error::InvalidMarket(format!(
                    "visibility increases from position {} to {}",
                    p + 1,
                    p + 2
                )));
            }
        }

        let cont_probs = match &continuation {
            ContinuationSpec::None => vec![0.0; n],
            ContinuationSpec::Polynomial { rho, r } => {
                if flags.reduced {
                    return Err(Error::InvalidMarket(
                        "reduced markets carry no continuation".into(),
                    ));
                }
                quality
                    .iter()
                    .map(|&q| continuation_probability(q, *rho, *r))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::InvalidMarket(e.to_string()))?
            }
            ContinuationSpec::Explicit(c) => {
                if flags.reduced {
                    return Err(Error::InvalidMarket(
                        "reduced markets carry no continuation".into(),
                    ));
                }
                if c.len() != n {
                    return Err(Error::InvalidMarket(format!(
                        "{} continuation probabilities for {} products",
                        c.len(),
                        n
                    )));
                }
                for (i, (&ci, &qi)) in c.iter().zip(&quality).enumerate() {
                    if !(0.0..1.0).contains(&ci) {
                        return Err(Error::InvalidMarket(format!(
                            "continuation[{i}] = {ci} outside [0, 1)"
                        )));
                    }
                    // purchase, continue and leave must form a distribution
                    if ci + qi > 1.0 {
                        return Err(Error::InvalidMarket(format!(
                            "continuation[{i}] = {ci} exceeds 1 - quality = {}",
                            1.0 - qi
                        )));
                    }
                }
                c.clone()
            }
        };

        Ok(Market {
            quality,
            appeal,
            visibility,
            continuation,
            cont_probs,
            flags,
        })
    }

    pub fn n(&self) -> usize {
        self.quality.len()
    }

    pub fn quality(&self) -> &[f64] {
        &self.quality
    }

    pub fn appeal(&self) -> &[f64] {
        &self.appeal
    }

    pub fn visibility(&self) -> &[f64] {
        &self.visibility
    }

    pub fn continuation(&self) -> &ContinuationSpec {
        &self.continuation
    }

    /// Per-product continuation probabilities `c_i` (all zero without continuation).
    pub fn continuation_probs(&self) -> &[f64] {
        &self.cont_probs
    }

    pub fn max_continuation(&self) -> f64 {
        self.cont_probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn flags(&self) -> MarketFlags {
        self.flags
    }

    pub fn is_reduced(&self) -> bool {
        self.flags.reduced
    }

    /// Same instance with a different continuation specification.
    pub fn with_continuation(&self, continuation: ContinuationSpec) -> Result<Market> {
        Market::with_flags(
            self.quality.clone(),
            self.appeal.clone(),
            self.visibility.clone(),
            continuation,
            self.flags,
        )
    }

    /// Same instance with continuation removed.
    pub fn without_continuation(&self) -> Market {
        Market {
            cont_probs: vec![0.0; self.n()],
            continuation: ContinuationSpec::None,
            ..self.clone()
        }
    }

    /// Same instance with visibilities replaced; the unsorted flag is kept.
    pub fn with_visibility(&self, visibility: Vec<f64>) -> Result<Market> {
        Market::with_flags(
            self.quality.clone(),
            self.appeal.clone(),
            visibility,
            self.continuation.clone(),
            self.flags,
        )
    }

    /// Same instance with the social signal folded into the appeals, `A_i + d_i`.
    pub fn with_social_appeal(&self, state: &SocialState) -> Market {
        assert_eq!(state.n(), self.n(), "social state size mismatch");
        let appeal = self
            .appeal
            .iter()
            .zip(state.downloads())
            .map(|(a, &d)| a + d as f64)
            .collect();
        Market {
            appeal,
            ..self.clone()
        }
    }

    /// Appeal of product `i` under the social signal, `A_i + d_i`.
    #[inline]
    pub fn effective_appeal(&self, state: &SocialState, i: usize) -> f64 {
        self.appeal[i] + state.downloads()[i] as f64
    }
}

/// A bijection between products and list positions.
///
/// `positions()[i]` is the position of product `i` (the ranking) and
/// `list()[p]` is the product shown at position `p` (the list). Both are
/// zero-based; [`fmt::Display`] renders the list one-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    sigma: Vec<usize>,
    pi: Vec<usize>,
}

impl Ranking {
    pub fn identity(n: usize) -> Self {
        let sigma: Vec<usize> = (0..n).collect();
        Ranking {
            pi: sigma.clone(),
            sigma,
        }
    }

    /// Builds a ranking from the position of every product.
    pub fn from_positions(sigma: Vec<usize>) -> Result<Self> {
        let pi = invert(&sigma)?;
        Ok(Ranking { sigma, pi })
    }

    /// Builds a ranking from the product shown at every position.
    pub fn from_list(pi: Vec<usize>) -> Result<Self> {
        let sigma = invert(&pi)?;
        Ok(Ranking { sigma, pi })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    #[inline]
    pub fn position(&self, product: usize) -> usize {
        self.sigma[product]
    }

    #[inline]
    pub fn product_at(&self, position: usize) -> usize {
        self.pi[position]
    }

    pub fn positions(&self) -> &[usize] {
        &self.sigma
    }

    pub fn list(&self) -> &[usize] {
        &self.pi
    }

    /// The list as one-based product numbers.
    pub fn list_one_based(&self) -> Vec<usize> {
        self.pi.iter().map(|p| p + 1).collect()
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, p) in self.pi.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", p + 1)?;
        }
        write!(f, "]")
    }
}

fn invert(perm: &[usize]) -> Result<Vec<usize>> {
    let n = perm.len();
    let mut inv = vec![usize::MAX; n];
    for (i, &p) in perm.iter().enumerate() {
        if p >= n || inv[p] != usize::MAX {
            return Err(Error::Domain(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        inv[p] = i;
    }
    Ok(inv)
}

/// Purchase counts `d_i` accumulated by the social influence signal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SocialState {
    downloads: Vec<u64>,
    step: u64,
}

impl SocialState {
    /// No purchases yet, at step 0.
    pub fn new(n: usize) -> Self {
        SocialState {
            downloads: vec![0; n],
            step: 0,
        }
    }

    pub fn from_downloads(downloads: Vec<u64>, step: u64) -> Result<Self> {
        let total: u64 = downloads.iter().sum();
        if total > step {
            return Err(Error::Domain(format!(
                "{total} purchases cannot happen in {step} participants"
            )));
        }
        Ok(SocialState { downloads, step })
    }

    pub fn n(&self) -> usize {
        self.downloads.len()
    }

    pub fn downloads(&self) -> &[u64] {
        &self.downloads
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn total_downloads(&self) -> u64 {
        self.downloads.iter().sum()
    }

    /// Ends the current participant's session, with an optional purchase.
    pub fn advance(&mut self, purchased: Option<usize>) {
        if let Some(i) = purchased {
            self.downloads[i] += 1;
        }
        self.step += 1;
    }
}
