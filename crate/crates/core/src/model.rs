//! Closed-form probabilities and market efficiency under the multinomial
//! logit trial model, with and without continuation.

use crate::error::{Error, Result};
use crate::market::{Market, MarketFlags, Ranking, SocialState};

/// Iteration cap for [`lambda_fixed_point`].
pub const FIXED_POINT_MAX_ITERS: usize = 1_000_000;

#[inline]
fn check_dims(m: &Market, rk: &Ranking, s: &SocialState) {
    assert_eq!(rk.len(), m.n(), "ranking size does not match market");
    assert_eq!(s.n(), m.n(), "social state size does not match market");
}

/// Unnormalized trial weights `v_{sigma_i} * (A_i + d_i)`.
pub fn trial_weights(m: &Market, rk: &Ranking, s: &SocialState) -> Vec<f64> {
    check_dims(m, rk, s);
    (0..m.n())
        .map(|i| m.visibility()[rk.position(i)] * m.effective_appeal(s, i))
        .collect()
}

/// `A_i + d_i` for every product.
pub(crate) fn social_appeals(m: &Market, s: &SocialState) -> Vec<f64> {
    (0..m.n()).map(|i| m.effective_appeal(s, i)).collect()
}

/// Allocation-free efficiency evaluation shared by the public formulas and
/// the optimizers, so that every caller sees bit-identical objective values.
///
/// Returns `(sum_i p_i q_i, sum_i p_i c_i)`; the continuation sum is 0 when
/// `cont` is `None`.
#[inline]
pub(crate) fn efficiency_parts(
    visibility: &[f64],
    appeal: &[f64],
    quality: &[f64],
    cont: Option<&[f64]>,
    sigma: &[usize],
) -> (f64, f64) {
    let n = quality.len();
    let mut total = 0.0;
    for i in 0..n {
        total += visibility[sigma[i]] * appeal[i];
    }
    let mut num = 0.0;
    let mut leak = 0.0;
    for i in 0..n {
        let p = visibility[sigma[i]] * appeal[i] / total;
        num += p * quality[i];
        if let Some(c) = cont {
            leak += p * c[i];
        }
    }
    (num, leak)
}

/// Probability that a participant tries each product on a single draw.
pub fn try_probabilities(m: &Market, rk: &Ranking, s: &SocialState) -> Vec<f64> {
    let mut w = trial_weights(m, rk, s);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Expected purchases of a single trial, `sum_i p_i q_i`.
pub fn expected_purchases(m: &Market, rk: &Ranking, s: &SocialState) -> f64 {
    check_dims(m, rk, s);
    let appeal = social_appeals(m, s);
    efficiency_parts(m.visibility(), &appeal, m.quality(), None, rk.positions()).0
}

/// Expected purchases of a session with continuation,
/// `sum_i p_i q_i / (1 - sum_i p_i c_i)`.
pub fn expected_purchases_with_continuation(
    m: &Market,
    rk: &Ranking,
    s: &SocialState,
) -> Result<f64> {
    check_dims(m, rk, s);
    let appeal = social_appeals(m, s);
    let (num, cont) = efficiency_parts(
        m.visibility(),
        &appeal,
        m.quality(),
        Some(m.continuation_probs()),
        rk.positions(),
    );
    if cont >= 1.0 {
        return Err(Error::Domain(format!(
            "aggregate continuation probability {cont} is not below 1"
        )));
    }
    Ok(num / (1.0 - cont))
}

/// Solves `lambda = sum_i p_i (q_i + c_i lambda)` by iterating the map from 0.
///
/// The map is a contraction with factor `sum_i p_i c_i`, so this is an
/// independent check on [`expected_purchases_with_continuation`].
pub fn lambda_fixed_point(m: &Market, rk: &Ranking, s: &SocialState, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let p = try_probabilities(m, rk, s);
    let q = m.quality();
    let c = m.continuation_probs();
    let mut lambda = 0.0_f64;
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let next: f64 = (0..p.len()).map(|i| p[i] * (q[i] + c[i] * lambda)).sum();
        if (next - lambda).abs() < tol {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numeric(format!(
        "fixed-point iteration did not reach tolerance {tol} in {FIXED_POINT_MAX_ITERS} steps"
    )))
}

/// Maps a market with continuation to an equivalent market without it.
///
/// Qualities become `q_i / (1 - c_i)` and appeals `A_i (1 - c_i)`; the
/// visibilities are unchanged. The result is flagged as reduced since its
/// qualities are expected purchase counts per trial and may exceed 1.
pub fn reduce_market(m: &Market) -> Market {
    let c = m.continuation_probs();
    let quality = m.quality().iter().zip(c).map(|(q, c)| q / (1.0 - c)).collect();
    let appeal = m.appeal().iter().zip(c).map(|(a, c)| a * (1.0 - c)).collect();
    let flags = MarketFlags {
        reduced: true,
        ..m.flags()
    };
    Market::with_flags(
        quality,
        appeal,
        m.visibility().to_vec(),
        crate::market::ContinuationSpec::None,
        flags,
    )
    .expect("reduction of a valid market is valid")
}

/// Expected number of times each product is tried during one session,
/// `p_i / (1 - sum_j p_j c_j)`.
pub fn effective_sample_probabilities(
    m: &Market,
    rk: &Ranking,
    s: &SocialState,
) -> Result<Vec<f64>> {
    let mut p = try_probabilities(m, rk, s);
    let cont: f64 = p.iter().zip(m.continuation_probs()).map(|(p, c)| p * c).sum();
    if cont >= 1.0 {
        return Err(Error::Domain(format!(
            "aggregate continuation probability {cont} is not below 1"
        )));
    }
    let scale = 1.0 / (1.0 - cont);
    p.iter_mut().for_each(|x| *x *= scale);
    Ok(p)
}

/// Distribution of the next purchased product, proportional to
/// `v_{sigma_i} a_i q_i`. It does not depend on continuation.
pub fn next_purchase_distribution(m: &Market, rk: &Ranking, s: &SocialState) -> Result<Vec<f64>> {
    let mut w = trial_weights(m, rk, s);
    w.iter_mut().zip(m.quality()).for_each(|(w, q)| *w *= q);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("no product can ever be purchased".into()));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::ContinuationSpec;

    fn single(q: f64, cont: ContinuationSpec) -> Market {
        Market::new(vec![q], vec![1.0], vec![1.0], cont).unwrap()
    }

    fn three_products(cont: ContinuationSpec) -> Market {
        Market::new(vec![0.9, 0.2, 0.6], vec![0.9, 0.1, 0.3], vec![0.8, 0.5, 0.1], cont).unwrap()
    }

    #[test]
    fn try_probabilities_examples() {
        let m = Market::new(vec![0.5, 0.5], vec![1.0, 1.0], vec![1.0, 1.0], ContinuationSpec::None).unwrap();
        let s = SocialState::new(2);
        assert_eq!(try_probabilities(&m, &Ranking::identity(2), &s), vec![0.5, 0.5]);

        let m1 = single(0.3, ContinuationSpec::None);
        assert_eq!(try_probabilities(&m1, &Ranking::identity(1), &SocialState::new(1)), vec![1.0]);

        let m2 = Market::new(vec![0.5, 0.5], vec![1.0, 1.0], vec![2.0, 1.0], ContinuationSpec::None).unwrap();
        let p = try_probabilities(&m2, &Ranking::identity(2), &s);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn social_signal_enters_appeal() {
        let m = Market::new(vec![0.5, 0.5], vec![1.0, 1.0], vec![1.0, 1.0], ContinuationSpec::None).unwrap();
        let s = SocialState::from_downloads(vec![2, 0], 2).unwrap();
        let p = try_probabilities(&m, &Ranking::identity(2), &s);
        assert!((p[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn expected_purchases_examples() {
        let s1 = SocialState::new(1);
        assert!((expected_purchases(&single(0.7, ContinuationSpec::None), &Ranking::identity(1), &s1) - 0.7).abs() < 1e-15);

        let flat = Market::new(vec![0.4; 4], vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 0.8, 0.3, 0.1], ContinuationSpec::None).unwrap();
        let rk = Ranking::from_list(vec![2, 0, 3, 1]).unwrap();
        assert!((expected_purchases(&flat, &rk, &SocialState::new(4)) - 0.4).abs() < 1e-15);

        // weights 0.72, 0.05, 0.03 over qualities 0.9, 0.2, 0.6
        let lambda = expected_purchases(&three_products(ContinuationSpec::None), &Ranking::identity(3), &SocialState::new(3));
        let oracle = (0.8 * 0.9 * 0.9 + 0.5 * 0.1 * 0.2 + 0.1 * 0.3 * 0.6) / (0.8 * 0.9 + 0.5 * 0.1 + 0.1 * 0.3);
        assert!((lambda - oracle).abs() < 1e-12);
        assert!((lambda - 0.845).abs() < 1e-12);
    }

    #[test]
    fn continuation_examples() {
        let rk = Ranking::identity(1);
        let s = SocialState::new(1);
        let m = single(0.5, ContinuationSpec::Polynomial { rho: 1.0, r: 1.0 });
        let lb = expected_purchases_with_continuation(&m, &rk, &s).unwrap();
        assert!((lb - 2.0 / 3.0).abs() < 1e-15);
        let fp = lambda_fixed_point(&m, &rk, &s, 1e-12).unwrap();
        assert!((fp - 2.0 / 3.0).abs() < 1e-12);

        let none = three_products(ContinuationSpec::None);
        let id = Ranking::identity(3);
        let s3 = SocialState::new(3);
        assert_eq!(
            expected_purchases_with_continuation(&none, &id, &s3).unwrap(),
            expected_purchases(&none, &id, &s3)
        );
    }

    #[test]
    fn fixed_point_without_continuation_is_one_step() {
        let m = three_products(ContinuationSpec::None);
        let rk = Ranking::identity(3);
        let s = SocialState::new(3);
        let fp = lambda_fixed_point(&m, &rk, &s, 1e-12).unwrap();
        assert_eq!(fp, expected_purchases(&m, &rk, &s));
        assert!(lambda_fixed_point(&m, &rk, &s, 0.0).is_err());
    }

    #[test]
    fn reduction_examples() {
        let m = single(0.5, ContinuationSpec::Explicit(vec![0.25]));
        let red = reduce_market(&m);
        assert!((red.quality()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((red.appeal()[0] - 0.75).abs() < 1e-15);
        assert!(red.is_reduced());
        assert!(red.continuation().is_none());

        let plain = three_products(ContinuationSpec::None);
        let red = reduce_market(&plain);
        assert_eq!(red.quality(), plain.quality());
        assert_eq!(red.appeal(), plain.appeal());
    }

    #[test]
    fn effective_sample_examples() {
        let m = single(0.5, ContinuationSpec::Explicit(vec![0.25]));
        let pbar = effective_sample_probabilities(&m, &Ranking::identity(1), &SocialState::new(1)).unwrap();
        assert!((pbar[0] - 4.0 / 3.0).abs() < 1e-15);

        let plain = three_products(ContinuationSpec::None);
        let id = Ranking::identity(3);
        let s = SocialState::new(3);
        assert_eq!(
            effective_sample_probabilities(&plain, &id, &s).unwrap(),
            try_probabilities(&plain, &id, &s)
        );
    }

    #[test]
    fn next_purchase_examples() {
        let s1 = SocialState::new(1);
        let d = next_purchase_distribution(&single(0.2, ContinuationSpec::None), &Ranking::identity(1), &s1).unwrap();
        assert_eq!(d, vec![1.0]);

        // v*a*q = 0.5 for each product
        let m = Market::new(vec![0.5, 1.0], vec![1.0, 0.5], vec![1.0, 1.0], ContinuationSpec::None).unwrap();
        let d = next_purchase_distribution(&m, &Ranking::identity(2), &SocialState::new(2)).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);

        let zero = single(0.0, ContinuationSpec::None);
        assert!(next_purchase_distribution(&zero, &Ranking::identity(1), &s1).is_err());
    }

    #[test]
    fn next_purchase_ignores_continuation() {
        let id = Ranking::identity(3);
        let s = SocialState::new(3);
        let a = next_purchase_distribution(&three_products(ContinuationSpec::None), &id, &s).unwrap();
        let b = next_purchase_distribution(&three_products(ContinuationSpec::Polynomial { rho: 0.8, r: 0.7 }), &id, &s).unwrap();
        assert_eq!(a, b);
    }
}
