//! Probabilistic representations: distributions over finite hypothesis
//! classes that the learners sample their candidate set from.

use std::fmt;
use std::sync::Arc;

use crate::error::{DpError, Result};
use crate::model::{population_disagreement, DiscreteJointDistribution, Hypothesis, HypothesisClass};
use crate::rng::DpRng;

type Sampler = dyn Fn(&mut DpRng) -> HypothesisClass + Send + Sync;

/// A seeded sampler of hypothesis classes with its declared size bound
/// `max ln|H|` and declared accuracy `(alpha, beta)`.
#[derive(Clone)]
pub struct Representation {
    sampler: Arc<Sampler>,
    size_bound: f64,
    alpha: f64,
    beta: f64,
}

impl fmt::Debug for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Representation")
            .field("size_bound", &self.size_bound)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

impl Representation {
    pub fn new(
        sampler: impl Fn(&mut DpRng) -> HypothesisClass + Send + Sync + 'static,
        size_bound: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(size_bound >= 0.0) {
            return Err(DpError::param("size bound must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(DpError::param("representation alpha and beta must lie in [0, 1]"));
        }
        Ok(Self { sampler: Arc::new(sampler), size_bound, alpha, beta })
    }

    /// The class itself, deterministically: a (0, 0)-representation of size `ln|C|`.
    pub fn trivial(class: &HypothesisClass) -> Self {
        let class = class.clone();
        let size_bound = (class.len() as f64).ln();
        Self { sampler: Arc::new(move |_| class.clone()), size_bound, alpha: 0.0, beta: 0.0 }
    }

    pub fn size_bound(&self) -> f64 {
        self.size_bound
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Whether the declared accuracy is at least as fine as `(alpha, beta)`.
    pub fn satisfies(&self, alpha: f64, beta: f64) -> bool {
        self.alpha <= alpha && self.beta <= beta
    }

    pub fn sample_class(&self, rng: &mut DpRng) -> Result<HypothesisClass> {
        let class = (self.sampler)(rng);
        let ln_size = (class.len() as f64).ln();
        if ln_size > self.size_bound + 1e-12 {
            return Err(DpError::param(format!(
                "sampled class has ln|H| = {ln_size} above declared size {}",
                self.size_bound
            )));
        }
        Ok(class)
    }
}

pub fn trivial_representation(class: &HypothesisClass) -> Representation {
    Representation::trivial(class)
}

/// Fraction of `draws` sampled classes containing some `h` with
/// `dis_{D_X}(c, h) <= alpha`.
pub fn coverage_rate(
    rep: &Representation,
    target: &Hypothesis,
    dist: &DiscreteJointDistribution,
    alpha: f64,
    draws: usize,
    rng: &mut DpRng,
) -> Result<f64> {
    let mut covered = 0usize;
    for _ in 0..draws {
        let class = rep.sample_class(rng)?;
        let mut best = f64::INFINITY;
        for h in class.members() {
            best = best.min(population_disagreement(dist, target, h)?);
        }
        if best <= alpha {
            covered += 1;
        }
    }
    Ok(covered as f64 / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Domain;
    use crate::rng::rng_from_seed;
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn trivial_size_for_thresholds() {
        let class = HypothesisClass::thresholds(Domain::new(1024).unwrap());
        let rep = trivial_representation(&class);
        assert!((rep.size_bound() - 1025f64.ln()).abs() < 1e-12);
        assert!(rep.satisfies(0.0, 0.0));
    }

    #[test]
    fn trivial_is_deterministic_and_complete() {
        let class = HypothesisClass::all_functions(Domain::new(3).unwrap()).unwrap();
        let rep = trivial_representation(&class);
        let a = rep.sample_class(&mut rng_from_seed(1)).unwrap();
        let b = rep.sample_class(&mut rng_from_seed(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, class);
    }

    #[test]
    fn trivial_covers_every_concept_exactly() {
        let d = Domain::new(16).unwrap();
        let class = HypothesisClass::thresholds(d);
        let rep = trivial_representation(&class);
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let mut marginal: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
            let s: f64 = marginal.iter().sum();
            marginal.iter_mut().for_each(|w| *w /= s);
            let dist = DiscreteJointDistribution::from_marginal(d, &marginal, |_| 0.5).unwrap();
            let c = &class.members()[rng.random_range(0..class.len())];
            assert_eq!(coverage_rate(&rep, c, &dist, 0.0, 5, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn size_bound_is_enforced() {
        let class = HypothesisClass::thresholds(Domain::new(8).unwrap());
        let big = class.clone();
        let rep = Representation::new(move |_| big.clone(), 1.0, 0.0, 0.0).unwrap();
        assert!(rep.sample_class(&mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn random_half_representation_coverage() {
        // each draw keeps a uniformly random half of the thresholds; a concept
        // is within α of the draw whenever a nearby threshold survived
        let d = Domain::new(16).unwrap();
        let class = HypothesisClass::thresholds(d);
        let members = class.members().to_vec();
        let half = members.len() / 2;
        let rep = Representation::new(
            move |rng| {
                let mut m = members.clone();
                m.shuffle(rng);
                m.truncate(half);
                HypothesisClass::new(m).unwrap()
            },
            (class.len() as f64).ln(),
            0.25,
            0.25,
        )
        .unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..5 {
            let mut marginal: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
            let s: f64 = marginal.iter().sum();
            marginal.iter_mut().for_each(|w| *w /= s);
            let dist = DiscreteJointDistribution::from_marginal(d, &marginal, |_| 0.5).unwrap();
            let c = class.members()[rng.random_range(0..class.len())].clone();
            let rate = coverage_rate(&rep, &c, &dist, rep.alpha(), 1000, &mut rng).unwrap();
            assert!(rate >= 1.0 - rep.beta(), "coverage {rate}");
        }
    }
}
