use rand::Rng;

use super::dataset::Example;
use super::hypothesis::{Domain, Hypothesis};
use crate::error::{DpError, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Exact probability table over `X × {0,1}`; row `x - 1` holds
/// `[Pr(x, 0), Pr(x, 1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJointDistribution {
    domain: Domain,
    probs: Vec<[f64; 2]>,
    cdf: Vec<f64>,
}

impl DiscreteJointDistribution {
    pub fn new(domain: Domain, probs: Vec<[f64; 2]>) -> Result<Self> {
        if probs.len() != domain.size() {
            return Err(DpError::DomainMismatch { expected: domain.size(), found: probs.len() });
        }
        if probs.iter().flatten().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(DpError::param("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().flatten().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(DpError::param(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .flatten()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { domain, probs, cdf })
    }

    /// Builds from a marginal over X and a per-point probability of `y = 1`.
    pub fn from_marginal(domain: Domain, marginal: &[f64], p_one: impl Fn(u32) -> f64) -> Result<Self> {
        if marginal.len() != domain.size() {
            return Err(DpError::DomainMismatch { expected: domain.size(), found: marginal.len() });
        }
        let probs = marginal
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let q = p_one(i as u32 + 1);
                [w * (1.0 - q), w * q]
            })
            .collect();
        Self::new(domain, probs)
    }

    /// Labels follow `f_{u*}` and are flipped independently with probability `rho`.
    pub fn noisy_threshold(domain: Domain, marginal: &[f64], u_star: usize, rho: f64) -> Result<Self> {
        if u_star > domain.size() {
            return Err(DpError::param(format!("u* = {u_star} outside [0, {}]", domain.size())));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(DpError::param(format!("noise rate must lie in [0, 1], got {rho}")));
        }
        Self::from_marginal(domain, marginal, |x| if x as usize > u_star { 1.0 - rho } else { rho })
    }

    /// Uniform marginal, labels a fair coin independent of `x`.
    pub fn uniform_labels(domain: Domain) -> Self {
        let w = 1.0 / domain.size() as f64;
        Self::from_marginal(domain, &vec![w; domain.size()], |_| 0.5).expect("uniform table is valid")
    }

    pub fn point_mass(domain: Domain, x: u32, y: bool) -> Result<Self> {
        if !domain.contains(x) {
            return Err(DpError::param(format!("point {x} outside domain")));
        }
        let mut probs = vec![[0.0, 0.0]; domain.size()];
        probs[x as usize - 1][y as usize] = 1.0;
        Self::new(domain, probs)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn probs(&self) -> &[[f64; 2]] {
        &self.probs
    }

    pub fn marginal(&self) -> Vec<f64> {
        self.probs.iter().map(|[a, b]| a + b).collect()
    }

    /// Exact mass of `{x : lo <= x <= hi}`; empty when `lo > hi`.
    pub fn interval_mass(&self, lo: usize, hi: usize) -> f64 {
        if lo > hi {
            return 0.0;
        }
        let lo = lo.max(1);
        let hi = hi.min(self.domain.size());
        (lo..=hi).map(|x| self.probs[x - 1][0] + self.probs[x - 1][1]).sum()
    }

    /// `inf_{c ∈ thresholds} err_D(c)` and the first minimizing `u`.
    pub fn best_threshold(&self) -> (usize, f64) {
        (0..=self.domain.size())
            .map(|u| {
                let h = Hypothesis::Threshold { u, domain: self.domain.size() };
                (u, super::population_error(self, &h).expect("same domain"))
            })
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Example {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        // skip zero-probability cells that rounding could land on
        let idx = if self.probs[idx / 2][idx % 2] > 0.0 {
            idx
        } else {
            (0..self.cdf.len()).rev().find(|&j| self.probs[j / 2][j % 2] > 0.0).expect("distribution has positive mass")
        };
        Example { x: idx as u32 / 2 + 1, y: idx % 2 == 1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let d = Domain::new(2).unwrap();
        assert!(DiscreteJointDistribution::new(d, vec![[0.5, 0.5]]).is_err());
        assert!(DiscreteJointDistribution::new(d, vec![[0.5, 0.5], [0.1, 0.0]]).is_err());
        assert!(DiscreteJointDistribution::new(d, vec![[1.5, -0.5], [0.0, 0.0]]).is_err());
        assert!(DiscreteJointDistribution::new(d, vec![[0.25, 0.25], [0.25, 0.25]]).is_ok());
    }

    #[test]
    fn noisy_threshold_table() {
        let d = Domain::new(4).unwrap();
        let dist = DiscreteJointDistribution::noisy_threshold(d, &[0.25; 4], 2, 0.1).unwrap();
        assert!((dist.probs()[0][1] - 0.025).abs() < 1e-15);
        assert!((dist.probs()[3][1] - 0.225).abs() < 1e-15);
        assert!((dist.interval_mass(2, 3) - 0.5).abs() < 1e-15);
        assert_eq!(dist.interval_mass(3, 2), 0.0);
    }
}
