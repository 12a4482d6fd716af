//! The item-level and user-level agnostic learners, with the private
//! comparison and binary-search estimator of the best achievable error.

use crate::binomial::{binom_tail, choose_compare_t, choose_s, choose_t};
use crate::error::{DpError, Result};
use crate::mechanism::{
    exp_mech_probabilities, exponential_mechanism, laplace_mechanism, PrivacyBudget, SensitivitySpec,
};
use crate::model::{
    surrogate_scores, user_error_counts, user_surrogate_scores, Hypothesis, HypothesisClass, UserDataset,
    UserErrorParams,
};
use crate::params::{Constants, LearnParams};
use crate::representation::Representation;
use crate::rng::DpRng;

/// Result of a binary search for `η = inf_c err_D(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinErrorEstimate {
    pub eta_hat: f64,
    pub interval: (f64, f64),
    pub iterations: u32,
}

/// What a learner returned, plus the private intermediate values it released.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub hypothesis: Hypothesis,
    /// Probability with which the final selection picked this hypothesis.
    pub probability: f64,
    pub eta_hat: Option<f64>,
    pub user_params: Option<UserErrorParams>,
    pub epsilon_spent: f64,
}

/// `⌈log2(2/α)⌉`, the number of halvings until the bracket is at most α/2 wide.
pub fn min_error_iterations(alpha: f64) -> u32 {
    let mut t = 0u32;
    while alpha * 2f64.powi(t as i32) < 2.0 {
        t += 1;
    }
    t
}

fn check_nonempty_budget(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(DpError::param(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Item-level surrogate scores of every candidate as rates over `n`.
pub fn item_scores(z: &UserDataset, class: &HypothesisClass, candidates: &HypothesisClass) -> Result<Vec<f64>> {
    Ok(surrogate_scores(z, class, candidates)?.into_iter().map(|s| s.value).collect())
}

/// Exact output distribution of the item learner once `H` is fixed.
pub fn item_output_probabilities(
    z: &UserDataset,
    class: &HypothesisClass,
    candidates: &HypothesisClass,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let scores = item_scores(z, class, candidates)?;
    exp_mech_probabilities(&scores, SensitivitySpec::new(2.0 / z.n() as f64)?, epsilon)
}

/// Item-level learner: sample `H` from the representation, then select from it
/// with the exponential mechanism on the surrogate score (Δ = 2/n).
pub fn learn_item(
    z: &UserDataset,
    class: &HypothesisClass,
    rep: &Representation,
    params: &LearnParams,
    rng: &mut DpRng,
) -> Result<LearnOutcome> {
    params.validate()?;
    if z.m() != 1 {
        return Err(DpError::param(format!("item-level learner needs m = 1, got m = {}", z.m())));
    }
    class.check_domain(z.domain())?;
    let rep_alpha = params.alpha / Constants::ITEM_REP_ALPHA;
    let rep_beta = params.beta / Constants::ITEM_REP_BETA;
    if !rep.satisfies(rep_alpha, rep_beta) {
        return Err(DpError::param(format!(
            "representation ({}, {}) is coarser than required ({rep_alpha}, {rep_beta})",
            rep.alpha(),
            rep.beta()
        )));
    }
    let candidates = rep.sample_class(rng)?;
    let mut budget = PrivacyBudget::new(params.epsilon)?;
    let scores = item_scores(z, class, &candidates)?;
    let sens = SensitivitySpec::new(2.0 / z.n() as f64)?;
    let out = exponential_mechanism(&scores, sens, params.epsilon, &mut budget, rng)?;
    Ok(LearnOutcome {
        hypothesis: candidates.members()[out.index].clone(),
        probability: out.probability,
        eta_hat: None,
        user_params: None,
        epsilon_spent: budget.spent(),
    })
}

/// Minimum user-level error rate `min_c err^t_z(c)`; `t < 0` counts every user.
fn min_user_error_rate(z: &UserDataset, class: &HypothesisClass, t: i64) -> Result<f64> {
    if t < 0 {
        return Ok(1.0);
    }
    let counts = user_error_counts(z, class, t as usize)?;
    Ok(*counts.iter().min().expect("class is nonempty") as f64 / z.n() as f64)
}

/// Private test of a guess `η̃` against the best achievable error.
///
/// Returns `false` (σ = 0) when the noisy minimum user-level error is at most
/// `Pr[Bin(m, η̃) > t] + margin`, meaning η̃ is not far below η; otherwise
/// `true` (σ = 1). Consumes `epsilon` from `budget`. When `η̃ + α/2 ≥ 1`
/// no cut separates the two binomials and σ = 0 is returned unconditionally.
#[allow(clippy::too_many_arguments)]
pub fn private_compare(
    z: &UserDataset,
    class: &HypothesisClass,
    epsilon: f64,
    eta_tilde: f64,
    alpha: f64,
    constants: &Constants,
    budget: &mut PrivacyBudget,
    rng: &mut DpRng,
) -> Result<bool> {
    check_nonempty_budget(epsilon)?;
    if eta_tilde + alpha / 2.0 >= 1.0 {
        // σ = 0 is always correct here; answer without touching the data
        budget.spend(epsilon)?;
        return Ok(false);
    }
    let m = z.m() as u64;
    let split = choose_compare_t(m, eta_tilde, alpha, constants.divisor(Constants::COMPARE_GAP))?;
    let t = split.threshold;
    let min_err = min_user_error_rate(z, class, t)?;
    let noisy = laplace_mechanism(min_err, SensitivitySpec::new(1.0 / z.n() as f64)?, epsilon, budget, rng)?;
    let margin = (m as f64).sqrt() * alpha / constants.divisor(Constants::COMPARE_MARGIN);
    let reference = binom_tail(m, eta_tilde, t)? + margin;
    Ok(noisy > reference)
}

/// Binary search on `[0, 1]` with `⌈log2(2/α)⌉` private comparisons at
/// `ε/T` each; returns the final left endpoint.
#[allow(clippy::too_many_arguments)]
pub fn private_min_error(
    z: &UserDataset,
    class: &HypothesisClass,
    epsilon: f64,
    alpha: f64,
    beta: f64,
    constants: &Constants,
    budget: &mut PrivacyBudget,
    rng: &mut DpRng,
) -> Result<MinErrorEstimate> {
    check_nonempty_budget(epsilon)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DpError::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DpError::param(format!("beta must lie in (0, 1), got {beta}")));
    }
    let iterations = min_error_iterations(alpha);
    let step_epsilon = epsilon / iterations as f64;
    let (mut l, mut r) = (0.0f64, 1.0f64);
    for _ in 0..iterations {
        let mid = (l + r) / 2.0;
        // σ = 1 says η̃ ≤ η + α/2, so the target lies in [mid, r]
        if private_compare(z, class, step_epsilon, mid, alpha, constants, budget, rng)? {
            l = mid;
        } else {
            r = mid;
        }
    }
    Ok(MinErrorEstimate { eta_hat: l, interval: (l, r), iterations })
}

/// Private estimate `η̂` of the best error, clamped into `[0, 1 - α/3]`, and
/// the user-level mistake threshold `t` derived from it.
pub(crate) fn estimate_mistake_threshold(
    z: &UserDataset,
    class: &HypothesisClass,
    params: &LearnParams,
    beta_share: f64,
    budget: &mut PrivacyBudget,
    rng: &mut DpRng,
) -> Result<(f64, crate::binomial::BinomialSplit)> {
    let half = params.epsilon / 2.0;
    let est = private_min_error(
        z,
        class,
        half,
        params.alpha / 6.0,
        params.beta / beta_share,
        &params.constants,
        budget,
        rng,
    )?;
    let eta_hat = est.eta_hat.clamp(0.0, 1.0 - params.alpha / 3.0);
    let split = choose_t(z.m() as u64, eta_hat, params.alpha, params.constants.divisor(Constants::T_GAP))?;
    if split.threshold < 0 {
        return Err(DpError::Infeasible { context: "mistake threshold t".into(), achieved: split.gap, required: 0.0 });
    }
    Ok((eta_hat, split))
}

/// User-level learner.
///
/// Keeps at most `⌈1/α²⌉` examples per user, estimates η privately at ε/2,
/// picks `t` and `s = 0`, samples `H`, and runs the exponential mechanism on
/// `min_c err^t_z(c) + dis^s_x(c, h)` at ε/2 with Δ = 2/n.
pub fn learn_user(
    z: &UserDataset,
    class: &HypothesisClass,
    rep: &Representation,
    params: &LearnParams,
    rng: &mut DpRng,
) -> Result<LearnOutcome> {
    params.validate()?;
    class.check_domain(z.domain())?;
    let z = z.truncate_users(params.max_useful_m())?;
    let m = z.m();
    let mut budget = PrivacyBudget::new(params.epsilon)?;

    let (eta_hat, t_split) = estimate_mistake_threshold(&z, class, params, Constants::USER_REP_BETA, &mut budget, rng)?;
    let s_split = choose_s(m as u64, params.alpha, params.constants.divisor(Constants::S_GAP))?;
    let user_params = UserErrorParams::new(t_split.threshold as usize, s_split.threshold as usize, m)?
        .with_gaps(t_split.gap, s_split.gap)?;

    let rep_alpha = params.alpha / (Constants::USER_REP_ALPHA * (m as f64).sqrt());
    let rep_beta = params.beta / Constants::USER_REP_BETA;
    if !rep.satisfies(rep_alpha, rep_beta) {
        return Err(DpError::param(format!(
            "representation ({}, {}) is coarser than required ({rep_alpha}, {rep_beta})",
            rep.alpha(),
            rep.beta()
        )));
    }
    let candidates = rep.sample_class(rng)?;
    let scores: Vec<f64> =
        user_surrogate_scores(&z, class, &candidates, user_params)?.into_iter().map(|s| s.value).collect();
    let sens = SensitivitySpec::new(2.0 / z.n() as f64)?;
    let out = exponential_mechanism(&scores, sens, params.epsilon / 2.0, &mut budget, rng)?;
    Ok(LearnOutcome {
        hypothesis: candidates.members()[out.index].clone(),
        probability: out.probability,
        eta_hat: Some(eta_hat),
        user_params: Some(user_params),
        epsilon_spent: budget.spent(),
    })
}

/// `ψ̂ = Pr[Bin(m, η̂ + α/6) > t]`, the user-level error level the learners aim at.
pub fn target_user_error(m: usize, eta_hat: f64, alpha: f64, t: usize) -> Result<f64> {
    binom_tail(m as u64, (eta_hat + alpha / 6.0).min(1.0), t as i64)
}
