//! Privacy budgets, the Laplace mechanism and the exponential mechanism.
//!
//! The exponential mechanism exposes its exact output distribution
//! ([`exp_mech_probabilities`]); the sampler draws from exactly that vector so
//! that exact audits and sampling agree.
//!
//! An infinite ε is accepted everywhere as the noiseless limit: Laplace noise
//! vanishes and the exponential mechanism becomes uniform over the minimizers.

use rand::Rng;

use crate::error::{DpError, Result};

/// Relative slack allowed when a sequence of sub-budgets is summed back up.
const BUDGET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    remaining: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(DpError::param(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon, remaining: epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn remaining(&self) -> f64 {
        self.remaining
    }

    pub fn spent(&self) -> f64 {
        if self.epsilon.is_infinite() {
            return 0.0;
        }
        self.epsilon - self.remaining
    }

    /// Charge `epsilon` against the budget (basic composition).
    pub fn spend(&mut self, epsilon: f64) -> Result<()> {
        if !(epsilon >= 0.0) {
            return Err(DpError::param(format!("cannot spend epsilon {epsilon}")));
        }
        if self.remaining.is_infinite() {
            return Ok(());
        }
        if epsilon > self.remaining + BUDGET_TOLERANCE * self.epsilon {
            return Err(DpError::Budget { requested: epsilon, remaining: self.remaining });
        }
        self.remaining = (self.remaining - epsilon).max(0.0);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivitySpec {
    pub delta: f64,
}

impl SensitivitySpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || delta.is_infinite() {
            return Err(DpError::param(format!("sensitivity must be finite and >= 0, got {delta}")));
        }
        Ok(Self { delta })
    }
}

/// A sampled candidate index and the exact probability it had of being chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismOutcome {
    pub index: usize,
    pub probability: f64,
}

/// Uniform draw from the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One draw from Laplace(0, scale) by inverting the CDF of a single uniform.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || scale.is_infinite() {
        return Err(DpError::param(format!("laplace scale must be positive and finite, got {scale}")));
    }
    let u = open_unit(rng) - 0.5;
    Ok(-scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// Releases `value + Laplace(Δ/ε)` and charges ε to the budget.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    value: f64,
    sens: SensitivitySpec,
    epsilon: f64,
    budget: &mut PrivacyBudget,
    rng: &mut R,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(DpError::param(format!("epsilon must be positive, got {epsilon}")));
    }
    budget.spend(epsilon)?;
    let scale = sens.delta / epsilon;
    if scale == 0.0 {
        return Ok(value);
    }
    Ok(value + laplace_sample(scale, rng)?)
}

/// Natural logs of the exponential-mechanism output probabilities.
///
/// `ln p_i = -ε (q_i - q_min) / (2Δ) - ln Σ_j exp(-ε (q_j - q_min) / (2Δ))`.
pub fn exp_mech_log_probabilities(scores: &[f64], sens: SensitivitySpec, epsilon: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(DpError::param("exponential mechanism needs at least one candidate"));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(DpError::param(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(DpError::param("scores must not be NaN"));
    }
    let k = scores.len() as f64;
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let all_equal = scores.iter().all(|&s| s == min);
    if epsilon == 0.0 || all_equal {
        return Ok(vec![-k.ln(); scores.len()]);
    }
    if sens.delta == 0.0 {
        return Err(DpError::param("zero sensitivity requires all scores to be equal"));
    }
    if epsilon.is_infinite() {
        let winners = scores.iter().filter(|&&s| s == min).count() as f64;
        return Ok(scores.iter().map(|&s| if s == min { -winners.ln() } else { f64::NEG_INFINITY }).collect());
    }
    let weights: Vec<f64> = scores.iter().map(|&s| -epsilon * (s - min) / (2.0 * sens.delta)).collect();
    // max weight is 0, so the sum is in [1, k]
    let log_norm = weights.iter().map(|w| w.exp()).sum::<f64>().ln();
    Ok(weights.into_iter().map(|w| w - log_norm).collect())
}

pub fn exp_mech_probabilities(scores: &[f64], sens: SensitivitySpec, epsilon: f64) -> Result<Vec<f64>> {
    Ok(exp_mech_log_probabilities(scores, sens, epsilon)?.into_iter().map(f64::exp).collect())
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Samples a candidate with probability proportional to `exp(-ε q / (2Δ))`
/// and charges ε to the budget.
pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    sens: SensitivitySpec,
    epsilon: f64,
    budget: &mut PrivacyBudget,
    rng: &mut R,
) -> Result<MechanismOutcome> {
    let probs = exp_mech_probabilities(scores, sens, epsilon)?;
    budget.spend(epsilon)?;
    let index = sample_index(&probs, rng);
    Ok(MechanismOutcome { index, probability: probs[index] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn sens(d: f64) -> SensitivitySpec {
        SensitivitySpec::new(d).unwrap()
    }

    #[test]
    fn laplace_rejects_bad_scale() {
        let mut rng = rng_from_seed(1);
        assert!(laplace_sample(0.0, &mut rng).is_err());
        assert!(laplace_sample(-1.0, &mut rng).is_err());
    }

    #[test]
    fn laplace_sign_balance() {
        let mut rng = rng_from_seed(11);
        let trials = 1_000_000;
        let positive = (0..trials).filter(|_| laplace_sample(1.0, &mut rng).unwrap() > 0.0).count() as f64;
        let sigma = (trials as f64 * 0.25).sqrt();
        assert!((positive - trials as f64 / 2.0).abs() <= 3.0 * sigma);
    }

    #[test]
    fn laplace_tail_bound_at_beta_005() {
        // |r| <= ln(1/β) Δ/ε with probability >= 1 - β; ln 20 = 2.9957
        let bound = 20f64.ln();
        assert!((bound - 2.9957).abs() < 1e-4);
        let mut rng = rng_from_seed(12);
        let trials = 1_000_000;
        let inside = (0..trials).filter(|_| laplace_sample(1.0, &mut rng).unwrap().abs() <= bound).count() as f64;
        assert!(inside / trials as f64 >= 0.945);
    }

    #[test]
    fn laplace_stream_is_deterministic() {
        let draw = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..64).map(|_| laplace_sample(2.0, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn laplace_mechanism_zero_sensitivity_is_identity() {
        let mut rng = rng_from_seed(3);
        let mut budget = PrivacyBudget::new(1.0).unwrap();
        let out = laplace_mechanism(0.75, sens(0.0), 1.0, &mut budget, &mut rng).unwrap();
        assert_eq!(out, 0.75);
        assert_eq!(budget.remaining(), 0.0);
    }

    #[test]
    fn laplace_mechanism_accuracy() {
        let mut rng = rng_from_seed(4);
        let trials = 100_000;
        let mut inside = 0;
        for _ in 0..trials {
            let mut budget = PrivacyBudget::new(1.0).unwrap();
            let out = laplace_mechanism(1.0, sens(1.0), 1.0, &mut budget, &mut rng).unwrap();
            if (out - 1.0).abs() <= 20f64.ln() {
                inside += 1;
            }
        }
        assert!(inside as f64 / trials as f64 >= 0.945);
    }

    #[test]
    fn budget_exhaustion() {
        let mut rng = rng_from_seed(5);
        let mut budget = PrivacyBudget::new(1.0).unwrap();
        laplace_mechanism(0.0, sens(1.0), 0.6, &mut budget, &mut rng).unwrap();
        let err = laplace_mechanism(0.0, sens(1.0), 0.6, &mut budget, &mut rng).unwrap_err();
        assert!(matches!(err, DpError::Budget { .. }));
        assert!(PrivacyBudget::new(0.0).is_err());
        assert!(PrivacyBudget::new(-1.0).is_err());
    }

    #[test]
    fn budget_split_into_equal_parts_is_exact() {
        for parts in 1..200usize {
            let mut b = PrivacyBudget::new(2.0).unwrap();
            let each = 2.0 / parts as f64;
            for _ in 0..parts {
                b.spend(each).unwrap();
            }
            assert!(b.spend(1e-6).is_err());
        }
    }

    #[test]
    fn exp_mech_equal_scores() {
        let p = exp_mech_probabilities(&[0.0, 0.0], sens(0.3), 7.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn exp_mech_ln4_example() {
        // weights 1 and e^{-ln 4} = 1/4 -> (0.8, 0.2)
        let p = exp_mech_probabilities(&[0.0, 4f64.ln()], sens(1.0), 2.0).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-12);
        assert!((p[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn exp_mech_zero_epsilon_is_uniform() {
        let p = exp_mech_probabilities(&[0.0, 5.0, 100.0, 3.0], sens(1.0), 0.0).unwrap();
        for x in p {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_mech_errors() {
        assert!(exp_mech_probabilities(&[], sens(1.0), 1.0).is_err());
        assert!(exp_mech_probabilities(&[0.0, 1.0], sens(0.0), 1.0).is_err());
        assert!(exp_mech_probabilities(&[1.0, 1.0], sens(0.0), 1.0).is_ok());
    }

    #[test]
    fn exp_mech_infinite_epsilon_is_uniform_over_minimizers() {
        let p = exp_mech_probabilities(&[2.0, 1.0, 1.0, 3.0], sens(1.0), f64::INFINITY).unwrap();
        assert_eq!(p, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn single_candidate_is_certain() {
        let mut rng = rng_from_seed(9);
        let mut budget = PrivacyBudget::new(1.0).unwrap();
        let out = exponential_mechanism(&[3.5], sens(1.0), 1.0, &mut budget, &mut rng).unwrap();
        assert_eq!(out, MechanismOutcome { index: 0, probability: 1.0 });
    }

    #[test]
    fn sampler_matches_probabilities() {
        let scores = [0.0, 0.5, 1.0, 2.0];
        let p = exp_mech_probabilities(&scores, sens(1.0), 2.0).unwrap();
        let mut rng = rng_from_seed(10);
        let trials = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let mut b = PrivacyBudget::new(2.0).unwrap();
            let o = exponential_mechanism(&scores, sens(1.0), 2.0, &mut b, &mut rng).unwrap();
            assert!((o.probability - p[o.index]).abs() < 1e-15);
            counts[o.index] += 1;
        }
        for i in 0..4 {
            let f = counts[i] as f64 / trials as f64;
            let sd = (p[i] * (1.0 - p[i]) / trials as f64).sqrt();
            assert!((f - p[i]).abs() <= 4.0 * sd, "index {i}: {f} vs {}", p[i]);
        }
    }

    #[test]
    fn swap_neighbor_ratio_bound() {
        // every score moves by at most Δ
        let delta = 0.5;
        let eps = 1.3;
        let a = [0.0, 0.5, 1.0, 1.5];
        let b = [0.5, 0.0, 1.5, 1.0];
        let pa = exp_mech_log_probabilities(&a, sens(delta), eps).unwrap();
        let pb = exp_mech_log_probabilities(&b, sens(delta), eps).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() <= eps + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn prop_ratio_bound(
            base in proptest::collection::vec(0.0f64..10.0, 1..20),
            shifts in proptest::collection::vec(-1.0f64..=1.0, 20),
            delta in 0.01f64..3.0,
            eps in 0.01f64..5.0,
        ) {
            let moved: Vec<f64> = base.iter().zip(&shifts).map(|(s, d)| s + d * delta).collect();
            let p = exp_mech_log_probabilities(&base, sens(delta), eps).unwrap();
            let q = exp_mech_log_probabilities(&moved, sens(delta), eps).unwrap();
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() <= eps + 1e-9);
            }
        }

        #[test]
        fn prop_shift_invariance(
            base in proptest::collection::vec(0.0f64..10.0, 1..20),
            c in -50.0f64..50.0,
            eps in 0.01f64..5.0,
        ) {
            let shifted: Vec<f64> = base.iter().map(|s| s + c).collect();
            let p = exp_mech_probabilities(&base, sens(1.0), eps).unwrap();
            let q = exp_mech_probabilities(&shifted, sens(1.0), eps).unwrap();
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn prop_basic_composition(parts in proptest::collection::vec(0.01f64..1.0, 1..10), total in 0.5f64..5.0) {
            let mut b = PrivacyBudget::new(total).unwrap();
            let sum: f64 = parts.iter().sum();
            let all_ok = parts.iter().all(|&e| b.spend(e).is_ok());
            if sum <= total * (1.0 - 1e-9) {
                prop_assert!(all_ok);
            } else if sum > total * (1.0 + 1e-9) {
                prop_assert!(!all_ok);
            }
        }
    }
}
