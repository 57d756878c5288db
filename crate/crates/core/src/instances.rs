//! Instance generators: uniform random markets for property sweeps and the
//! Gaussian recipe used for simulation experiments.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::market::{ContinuationSpec, Market, Ranking, SocialState};
use crate::sim::rng_from_seed;

/// Ranges for [`random_market`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMarketSpec {
    pub n_min: usize,
    pub n_max: usize,
    pub rho: (f64, f64),
    pub r: (f64, f64),
}

impl Default for RandomMarketSpec {
    fn default() -> Self {
        RandomMarketSpec {
            n_min: 1,
            n_max: 20,
            rho: (0.0, 1.0),
            r: (0.0, 3.0),
        }
    }
}

impl RandomMarketSpec {
    pub fn sizes(n_min: usize, n_max: usize) -> Self {
        RandomMarketSpec {
            n_min,
            n_max,
            ..Default::default()
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Market with uniform qualities in `[0, 1]`, appeals in `[0.05, 2]`,
/// non-increasing visibilities in `[0.05, 1]` and polynomial continuation.
pub fn random_market<R: Rng + ?Sized>(rng: &mut R, spec: &RandomMarketSpec) -> Market {
    let n = rng.random_range(spec.n_min..=spec.n_max);
    let quality: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let appeal: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=2.0)).collect();
    let mut visibility: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
    visibility.sort_by(|a, b| b.total_cmp(a));
    let rho = uniform(rng, spec.rho);
    let r = uniform(rng, spec.r);
    Market::new(quality, appeal, visibility, ContinuationSpec::Polynomial { rho, r })
        .expect("generated market is valid")
}

/// Purchase counts in `0..=max_per_product` with `step` equal to their sum.
pub fn random_social_state<R: Rng + ?Sized>(rng: &mut R, n: usize, max_per_product: u64) -> SocialState {
    let d: Vec<u64> = (0..n).map(|_| rng.random_range(0..=max_per_product)).collect();
    let step = d.iter().sum();
    SocialState::from_downloads(d, step).expect("sum equals step")
}

pub fn random_ranking_for<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Ranking {
    crate::ranking::random_ranking(n, rng)
}

/// Gaussian draws min-max normalized into fixed ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean_quality: f64,
    pub sd_quality: f64,
    pub mean_appeal: f64,
    pub sd_appeal: f64,
    pub quality_range: (f64, f64),
    pub appeal_range: (f64, f64),
}

impl Default for GaussianSpec {
    fn default() -> Self {
        GaussianSpec {
            mean_quality: 0.5,
            sd_quality: 0.2,
            mean_appeal: 0.5,
            sd_appeal: 0.2,
            quality_range: (0.01, 1.0),
            appeal_range: (0.01, 10.0),
        }
    }
}

/// Rescales `x` linearly so its minimum maps to `lo` and its maximum to `hi`.
pub fn min_max_normalize(x: &mut [f64], (lo, hi): (f64, f64)) {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        x.iter_mut()
            .for_each(|v| *v = lo + (*v - min) / (max - min) * (hi - lo));
    } else {
        x.iter_mut().for_each(|v| *v = hi);
    }
}

/// Draws `(quality, appeal)` vectors for `n` products.
pub fn gaussian_instance(n: usize, spec: &GaussianSpec, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let (qlo, qhi) = spec.quality_range;
    if !(qlo > 0.0 && qhi <= 1.0 && qlo <= qhi) {
        return Err(Error::config("quality_range", "must lie in (0, 1]"));
    }
    let (alo, ahi) = spec.appeal_range;
    if !(alo > 0.0 && alo <= ahi && ahi.is_finite()) {
        return Err(Error::config("appeal_range", "must be positive and ordered"));
    }
    let qd = Normal::new(spec.mean_quality, spec.sd_quality)
        .map_err(|e| Error::config("sd_quality", e.to_string()))?;
    let ad = Normal::new(spec.mean_appeal, spec.sd_appeal)
        .map_err(|e| Error::config("sd_appeal", e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut quality: Vec<f64> = (0..n).map(|_| qd.sample(&mut rng)).collect();
    let mut appeal: Vec<f64> = (0..n).map(|_| ad.sample(&mut rng)).collect();
    min_max_normalize(&mut quality, spec.quality_range);
    min_max_normalize(&mut appeal, spec.appeal_range);
    Ok((quality, appeal))
}

/// Named visibility profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisibilityProfile {
    /// `v_p = 1 / p` for one-based position `p`.
    Harmonic,
    Uniform,
    /// `v_p = p^(-exponent)`.
    Power(f64),
}

impl std::str::FromStr for VisibilityProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(VisibilityProfile::Harmonic),
            "uniform" => Ok(VisibilityProfile::Uniform),
            other => match other.strip_prefix("power:") {
                Some(e) => {
                    let exponent: f64 = e
                        .trim()
                        .parse()
                        .map_err(|_| Error::config("visibility", format!("bad exponent in `{other}`")))?;
                    if !(exponent.is_finite() && exponent >= 0.0) {
                        return Err(Error::config("visibility", "exponent must be finite and non-negative"));
                    }
                    Ok(VisibilityProfile::Power(exponent))
                }
                None => Err(Error::config("visibility", format!("unknown profile `{other}`"))),
            },
        }
    }
}

impl std::fmt::Display for VisibilityProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VisibilityProfile::Harmonic => f.write_str("harmonic"),
            VisibilityProfile::Uniform => f.write_str("uniform"),
            VisibilityProfile::Power(e) => write!(f, "power:{e}"),
        }
    }
}

impl VisibilityProfile {
    pub fn build(self, n: usize) -> Vec<f64> {
        match self {
            VisibilityProfile::Harmonic => (1..=n).map(|p| 1.0 / p as f64).collect(),
            VisibilityProfile::Uniform => vec![1.0; n],
            VisibilityProfile::Power(e) => (1..=n).map(|p| (p as f64).powf(-e)).collect(),
        }
    }
}
