//! Private threshold learning by binary descent over a private median.

use crate::binomial::choose_median_s;
use crate::error::{DpError, Result};
use crate::learners::estimate_mistake_threshold;
use crate::mechanism::{exponential_mechanism, laplace_mechanism, PrivacyBudget, SensitivitySpec};
use crate::model::{threshold_user_error_counts, Hypothesis, HypothesisClass, UserDataset};
use crate::params::{Constants, LearnParams};
use crate::rng::DpRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub iterations: u32,
    pub theta: f64,
    /// User-level mistake threshold used for every error statistic.
    pub t: usize,
    pub epsilon_prime: f64,
}

/// `⌈log_{3/2}(2/α)⌉`.
pub fn descent_iterations(alpha: f64) -> u32 {
    let mut t = 0u32;
    while alpha * 1.5f64.powi(t as i32) < 2.0 {
        t += 1;
    }
    t.max(1)
}

impl ThresholdConfig {
    /// Defaults `T = ⌈log_{3/2}(2/α)⌉`, `θ = 2/3`, `ε' = ε/(4T)`.
    pub fn new(epsilon: f64, alpha: f64, t: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DpError::param(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Self::with_iterations(epsilon, descent_iterations(alpha), 2.0 / 3.0, t)
    }

    pub fn with_iterations(epsilon: f64, iterations: u32, theta: f64, t: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(DpError::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if iterations == 0 {
            return Err(DpError::param("need at least one iteration"));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(DpError::param(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(Self { iterations, theta, t, epsilon_prime: epsilon / (4.0 * iterations as f64) })
    }

    pub fn total_epsilon(&self) -> f64 {
        4.0 * self.iterations as f64 * self.epsilon_prime
    }
}

/// Median scores over `u ∈ {l..r}` as integer user counts:
/// `max(#users with > s points in [l, u-1], #users with > s points in [u+1, r])`.
pub fn median_score_counts(z: &UserDataset, l: usize, r: usize, s: usize) -> Vec<u64> {
    let width = r - l + 1;
    // left_hist[k]: users whose (s+1)-th smallest point in [l, r] is l + k
    let mut left_hist = vec![0u64; width];
    let mut right_hist = vec![0u64; width];
    let mut pts = Vec::with_capacity(z.m());
    for user in z.users() {
        pts.clear();
        pts.extend(user.iter().map(|e| e.x as usize).filter(|&x| x >= l && x <= r));
        if pts.len() <= s {
            continue;
        }
        pts.sort_unstable();
        left_hist[pts[s] - l] += 1;
        right_hist[pts[pts.len() - 1 - s] - l] += 1;
    }
    // left(u) = #{a < u}, right(u) = #{b > u}
    let mut left = vec![0u64; width];
    let mut acc = 0;
    for k in 0..width {
        left[k] = acc;
        acc += left_hist[k];
    }
    let mut right = vec![0u64; width];
    acc = 0;
    for k in (0..width).rev() {
        right[k] = acc;
        acc += right_hist[k];
    }
    left.into_iter().zip(right).map(|(a, b)| a.max(b)).collect()
}

/// Private approximate median of the data mass in `[l, r]`: the exponential
/// mechanism over `u ∈ {l..r}` with Δ = 1/n on the median score.
#[allow(clippy::too_many_arguments)]
pub fn private_median(
    z: &UserDataset,
    epsilon: f64,
    l: usize,
    r: usize,
    alpha_k: f64,
    constants: &Constants,
    budget: &mut PrivacyBudget,
    rng: &mut DpRng,
) -> Result<usize> {
    if l > r {
        return Err(DpError::param(format!("empty median range [{l}, {r}]")));
    }
    if r > z.domain().size() {
        return Err(DpError::param(format!("median range end {r} outside [0, {}]", z.domain().size())));
    }
    let split = choose_median_s(z.m() as u64, alpha_k, constants.divisor(Constants::MEDIAN_GAP))?;
    let s = split.threshold.max(0) as usize;
    let n = z.n() as f64;
    let scores: Vec<f64> = median_score_counts(z, l, r, s).into_iter().map(|c| c as f64 / n).collect();
    let out = exponential_mechanism(&scores, SensitivitySpec::new(1.0 / n)?, epsilon, budget, rng)?;
    Ok(l + out.index)
}

/// Trace of one descent.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRun {
    pub u: usize,
    pub returned_mid: bool,
    pub iterations_run: u32,
    /// `(l, r)` at the start of each executed iteration, then the final pair.
    pub intervals: Vec<(usize, usize)>,
}

fn range_min(counts: &[u64], lo: usize, hi: usize) -> Option<u64> {
    if lo > hi {
        return None;
    }
    counts[lo..=hi].iter().copied().min()
}

/// Noisy minimum over `counts[range]`; an empty range is `+∞` and still charges ε'.
fn noisy_min(
    counts: &[u64],
    range: Option<(usize, usize)>,
    n: f64,
    eps: f64,
    budget: &mut PrivacyBudget,
    rng: &mut DpRng,
) -> Result<f64> {
    match range.and_then(|(lo, hi)| range_min(counts, lo, hi)) {
        Some(c) => laplace_mechanism(c as f64 / n, SensitivitySpec::new(1.0 / n)?, eps, budget, rng),
        None => {
            budget.spend(eps)?;
            Ok(f64::INFINITY)
        }
    }
}

/// Binary descent over thresholds `[0, |X|]` for at most `T` rounds, each
/// spending ε' on the median and ε' on each of three noisy user-level errors.
pub fn private_threshold(
    z: &UserDataset,
    config: &ThresholdConfig,
    constants: &Constants,
    budget: &mut PrivacyBudget,
    rng: &mut DpRng,
) -> Result<ThresholdRun> {
    let counts = threshold_user_error_counts(z, config.t)?;
    let n = z.n() as f64;
    let eps = config.epsilon_prime;
    let (mut l, mut r) = (0usize, z.domain().size());
    let mut intervals = Vec::new();
    let mut alpha_k = 1.0;
    for k in 0..config.iterations {
        if l == r {
            intervals.push((l, r));
            return Ok(ThresholdRun { u: l, returned_mid: false, iterations_run: k, intervals });
        }
        intervals.push((l, r));
        let mid = private_median(z, eps, l, r, alpha_k, constants, budget, rng)?;
        let v_mid = noisy_min(&counts, Some((mid, mid)), n, eps, budget, rng)?;
        let v_l = noisy_min(&counts, (mid > l).then(|| (l, mid - 1)), n, eps, budget, rng)?;
        let v_r = noisy_min(&counts, (mid < r).then(|| (mid + 1, r)), n, eps, budget, rng)?;
        if v_mid < v_l.min(v_r) {
            return Ok(ThresholdRun { u: mid, returned_mid: true, iterations_run: k + 1, intervals });
        } else if v_l < v_r {
            r = mid - 1;
        } else {
            l = mid + 1;
        }
        alpha_k *= config.theta;
    }
    intervals.push((l, r));
    Ok(ThresholdRun { u: l, returned_mid: false, iterations_run: config.iterations, intervals })
}

/// Full threshold learner outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOutcome {
    pub hypothesis: Hypothesis,
    pub eta_hat: f64,
    pub t: usize,
    pub run: ThresholdRun,
    pub epsilon_spent: f64,
}

/// Threshold learner: estimate η at ε/2, choose `t`, then descend at ε/2.
pub fn learn_threshold(z: &UserDataset, params: &LearnParams, rng: &mut DpRng) -> Result<ThresholdOutcome> {
    params.validate()?;
    let z = z.truncate_users(params.max_useful_m())?;
    let class = HypothesisClass::thresholds(z.domain());
    let mut budget = PrivacyBudget::new(params.epsilon)?;
    let (eta_hat, split) = estimate_mistake_threshold(&z, &class, params, 4.0, &mut budget, rng)?;
    let t = split.threshold as usize;
    let config = ThresholdConfig::new(params.epsilon / 2.0, params.alpha, t)?;
    let run = private_threshold(&z, &config, &params.constants, &mut budget, rng)?;
    Ok(ThresholdOutcome {
        hypothesis: Hypothesis::threshold(run.u, z.domain())?,
        eta_hat,
        t,
        run,
        epsilon_spent: budget.spent(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{user_disagreement, Domain, Example};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn iteration_counts() {
        // 1.5^7 = 17.09 < 20 <= 1.5^8 = 25.6
        assert_eq!(descent_iterations(0.1), 8);
        assert_eq!(descent_iterations(1.0 - 1e-9), 2);
        let c = ThresholdConfig::new(1.0, 0.1, 0).unwrap();
        assert_eq!(c.epsilon_prime, 1.0 / 32.0);
        assert!((c.total_epsilon() - 1.0).abs() < 1e-15);
        assert!((c.theta - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn median_scores_match_user_disagreement() {
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let k = rng.random_range(1..10usize);
            let m = rng.random_range(1..5usize);
            let d = Domain::new(k).unwrap();
            let users =
                (0..7).map(|_| (0..m).map(|_| Example::new(rng.random_range(1..=k as u32), false)).collect()).collect();
            let z = UserDataset::new(d, users).unwrap();
            let l = rng.random_range(0..=k);
            let r = rng.random_range(l..=k);
            let s = rng.random_range(0..=m);
            let fast = median_score_counts(&z, l, r, s);
            for u in l..=r {
                // f_{a-1} and f_b disagree exactly on [a, b]
                let left = if u == 0 {
                    0
                } else {
                    let a = Hypothesis::Threshold { u: l.saturating_sub(1), domain: k };
                    let b = Hypothesis::Threshold { u: u - 1, domain: k };
                    if l == 0 {
                        // points are >= 1, so [0, u-1] holds the same points as [1, u-1]
                        let a0 = Hypothesis::Threshold { u: 0, domain: k };
                        user_disagreement(&z, &a0, &b, s).unwrap().count
                    } else {
                        user_disagreement(&z, &a, &b, s).unwrap().count
                    }
                };
                let right = {
                    let a = Hypothesis::Threshold { u, domain: k };
                    let b = Hypothesis::Threshold { u: r, domain: k };
                    // f_u, f_r disagree on [u+1, r]
                    user_disagreement(&z, &a, &b, s).unwrap().count
                };
                assert_eq!(fast[u - l], left.max(right), "u={u} l={l} r={r} s={s}");
            }
        }
    }

    #[test]
    fn median_of_point_mass_noiseless() {
        let d = Domain::new(10).unwrap();
        let z = UserDataset::new(d, (0..15).map(|_| vec![Example::new(6, true)]).collect()).unwrap();
        let mut budget = PrivacyBudget::new(f64::INFINITY).unwrap();
        let mut rng = rng_from_seed(2);
        let mid = private_median(&z, f64::INFINITY, 2, 9, 0.5, &Constants::theory(), &mut budget, &mut rng).unwrap();
        assert_eq!(mid, 6);
    }

    #[test]
    fn median_single_candidate() {
        let d = Domain::new(10).unwrap();
        let z = UserDataset::new(d, vec![vec![Example::new(3, true)]; 4]).unwrap();
        let mut budget = PrivacyBudget::new(1.0).unwrap();
        let mid = private_median(&z, 1.0, 4, 4, 1.0, &Constants::theory(), &mut budget, &mut rng_from_seed(3)).unwrap();
        assert_eq!(mid, 4);
        assert!(private_median(&z, 1.0, 5, 4, 1.0, &Constants::theory(), &mut budget, &mut rng_from_seed(3)).is_err());
    }

    #[test]
    fn noiseless_descent_finds_realizable_threshold() {
        // labels follow f_3 on X = {1..8}
        let d = Domain::new(8).unwrap();
        let users = (1..=8u32).flat_map(|x| std::iter::repeat_n(vec![Example::new(x, x > 3)], 3)).collect();
        let z = UserDataset::new(d, users).unwrap();
        let config = ThresholdConfig::with_iterations(f64::INFINITY, 9, 2.0 / 3.0, 0).unwrap();
        for seed in 0..20 {
            let mut budget = PrivacyBudget::new(f64::INFINITY).unwrap();
            let run =
                private_threshold(&z, &config, &Constants::theory(), &mut budget, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(run.u, 3, "seed {seed}");
        }
    }

    #[test]
    fn breaks_when_interval_collapses() {
        let d = Domain::new(1).unwrap();
        // all labels 1: f_0 is perfect, f_1 errs on everything
        let z = UserDataset::new(d, vec![vec![Example::new(1, true)]; 5]).unwrap();
        let config = ThresholdConfig::with_iterations(f64::INFINITY, 5, 2.0 / 3.0, 0).unwrap();
        let mut budget = PrivacyBudget::new(f64::INFINITY).unwrap();
        let run = private_threshold(&z, &config, &Constants::theory(), &mut budget, &mut rng_from_seed(0)).unwrap();
        assert_eq!(run.u, 0);
    }

    #[test]
    fn descent_spends_exact_budget() {
        let d = Domain::new(32).unwrap();
        let mut rng = rng_from_seed(4);
        let users = (0..50)
            .map(|_| {
                let x = rng.random_range(1..=32u32);
                vec![Example::new(x, x > 10)]
            })
            .collect();
        let z = UserDataset::new(d, users).unwrap();
        let config = ThresholdConfig::new(1.0, 0.2, 0).unwrap();
        let mut budget = PrivacyBudget::new(1.0).unwrap();
        let run = private_threshold(&z, &config, &Constants::theory(), &mut budget, &mut rng).unwrap();
        // early exits leave budget unspent; a full run spends it all
        if !run.returned_mid && run.iterations_run == config.iterations {
            assert!(budget.remaining() < 1e-12);
        }
        assert!(budget.remaining() >= -1e-12);
    }
}
