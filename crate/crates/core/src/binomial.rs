//! Exact binomial probabilities and the tail cuts that separate two binomials.
//!
//! Everything here is exact up to double rounding: pmfs come from a
//! multiplicative recurrence carried in log space, tails are summed from
//! whichever side carries less mass and complemented.

use crate::error::{DpError, Result};

/// A tail cut `ℓ` (event `Bin(m, ·) > ℓ`) with the gap it achieves between two
/// binomials and the quantity
/// `K = min(m|p-q|, √m|p-q| / √(p(1-p)), 1)` bounding their TV distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialSplit {
    pub threshold: i64,
    pub gap: f64,
    pub k_bound: f64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DpError::param(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// `Pr[Bin(m, p) = k]` for `k = 0..=m`.
pub fn binom_pmf(m: u64, p: f64) -> Result<Vec<f64>> {
    check_prob("p", p)?;
    let len = m as usize + 1;
    let mut pmf = vec![0.0; len];
    if p == 0.0 {
        pmf[0] = 1.0;
        return Ok(pmf);
    }
    if p == 1.0 {
        pmf[m as usize] = 1.0;
        return Ok(pmf);
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut log_pmf = m as f64 * (-p).ln_1p();
    pmf[0] = log_pmf.exp();
    for k in 0..m {
        log_pmf += ((m - k) as f64 / (k + 1) as f64).ln() + log_odds;
        pmf[k as usize + 1] = log_pmf.exp();
    }
    Ok(pmf)
}

/// Upper tails `Pr[X > ℓ]` for `ℓ = -1..=m`, stored at index `ℓ + 1`.
fn tails_from_pmf(pmf: &[f64]) -> Vec<f64> {
    let len = pmf.len();
    // suffix[j] = Σ_{k>=j}, prefix[j] = Σ_{k<j}
    let mut suffix = vec![0.0; len + 1];
    for k in (0..len).rev() {
        suffix[k] = suffix[k + 1] + pmf[k];
    }
    let mut prefix = vec![0.0; len + 1];
    for k in 0..len {
        prefix[k + 1] = prefix[k] + pmf[k];
    }
    (0..=len)
        .map(|j| {
            let upper = if suffix[j] <= prefix[j] { suffix[j] } else { 1.0 - prefix[j] };
            upper.clamp(0.0, 1.0)
        })
        .collect()
}

/// All upper tails of `Bin(m, p)`: element `ℓ + 1` is `Pr[Bin(m,p) > ℓ]`,
/// for `ℓ = -1..=m`.
pub fn binom_tails(m: u64, p: f64) -> Result<Vec<f64>> {
    Ok(tails_from_pmf(&binom_pmf(m, p)?))
}

/// `Pr[Bin(m, p) > ell]`.
pub fn binom_tail(m: u64, p: f64, ell: i64) -> Result<f64> {
    check_prob("p", p)?;
    if ell < 0 {
        return Ok(1.0);
    }
    if ell >= m as i64 {
        return Ok(0.0);
    }
    Ok(binom_tails(m, p)?[ell as usize + 1])
}

/// Exact total-variation distance `½ Σ_k |Bin(m,p)(k) - Bin(m,q)(k)|`.
pub fn binom_tv(m: u64, p: f64, q: f64) -> Result<f64> {
    let a = binom_pmf(m, p)?;
    let b = binom_pmf(m, q)?;
    let tv = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(tv.clamp(0.0, 1.0))
}

/// `K = min(m|p-q|, √m|p-q| / √(p(1-p)), 1)`.
pub fn tv_k_bound(m: u64, p: f64, q: f64) -> f64 {
    let d = (p - q).abs();
    if d == 0.0 {
        return 0.0;
    }
    let mf = m as f64;
    let var = p * (1.0 - p);
    let middle = if var > 0.0 { mf.sqrt() * d / var.sqrt() } else { f64::INFINITY };
    (mf * d).min(middle).min(1.0)
}

/// Finds the cut `ℓ ∈ {-1, ..., m-1}` maximizing
/// `Pr[Bin(m,q) > ℓ] - Pr[Bin(m,p) > ℓ]` (first maximizer on ties).
/// Fails when the best gap is below `required_gap`.
pub fn find_separating_threshold(m: u64, p: f64, q: f64, required_gap: f64) -> Result<BinomialSplit> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    if p > q {
        return Err(DpError::param(format!("need p <= q, got p={p}, q={q}")));
    }
    if m == 0 {
        return Err(DpError::param("m must be positive"));
    }
    let tp = binom_tails(m, p)?;
    let tq = binom_tails(m, q)?;
    let mut best = (-1i64, 0.0f64);
    for ell in 0..m as i64 {
        let j = ell as usize + 1;
        let gap = tq[j] - tp[j];
        if gap > best.1 {
            best = (ell, gap);
        }
    }
    let (threshold, gap) = best;
    if gap < required_gap {
        return Err(DpError::Infeasible {
            context: format!("tail cut for Bin({m}, {p}) vs Bin({m}, {q})"),
            achieved: gap,
            required: required_gap,
        });
    }
    Ok(BinomialSplit { threshold, gap, k_bound: tv_k_bound(m, p, q) })
}

/// User-level mistake threshold `t` separating `Bin(m, η̂+α/6)` from
/// `Bin(m, η̂+α/3)` by at least `√m·α / gap_divisor`.
pub fn choose_t(m: u64, eta_hat: f64, alpha: f64, gap_divisor: f64) -> Result<BinomialSplit> {
    if !(eta_hat >= 0.0) {
        return Err(DpError::param(format!("eta_hat must be >= 0, got {eta_hat}")));
    }
    let p = (eta_hat + alpha / 6.0).min(1.0);
    let q = (eta_hat + alpha / 3.0).min(1.0);
    find_separating_threshold(m, p, q, (m as f64).sqrt() * alpha / gap_divisor)
}

/// The comparison cut used when testing a guess `η̃`: separates `Bin(m, η̃)`
/// from `Bin(m, η̃+α/2)` by at least `√m·α / gap_divisor`.
pub fn choose_compare_t(m: u64, eta_tilde: f64, alpha: f64, gap_divisor: f64) -> Result<BinomialSplit> {
    check_prob("eta_tilde", eta_tilde)?;
    let q = (eta_tilde + alpha / 2.0).min(1.0);
    find_separating_threshold(m, eta_tilde, q, (m as f64).sqrt() * alpha / gap_divisor)
}

/// Disagreement threshold `s = 0`, after checking that
/// `Pr[Bin(m, α/3) > 0] ≥ √m·α / gap_divisor`.
pub fn choose_s(m: u64, alpha: f64, gap_divisor: f64) -> Result<BinomialSplit> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DpError::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let q = alpha / 3.0;
    let gap = binom_tail(m, q, 0)? - binom_tail(m, 0.0, 0)?;
    let required = (m as f64).sqrt() * alpha / gap_divisor;
    if gap < required {
        return Err(DpError::Infeasible {
            context: format!("disagreement threshold s=0 at m={m}, alpha={alpha}"),
            achieved: gap,
            required,
        });
    }
    Ok(BinomialSplit { threshold: 0, gap, k_bound: tv_k_bound(m, 0.0, q) })
}

/// Count threshold for the private median at scale `alpha_k`: separates
/// `Bin(m, α_k/2)` from `Bin(m, 2α_k/3)` by `m'·α_k / gap_divisor`, where
/// `m' = min(m, max(⌊1/α_k⌋, 1))` keeps the requirement in the regime where a
/// linear-in-m gap exists.
pub fn choose_median_s(m: u64, alpha_k: f64, gap_divisor: f64) -> Result<BinomialSplit> {
    if !(alpha_k > 0.0 && alpha_k <= 1.0) {
        return Err(DpError::param(format!("alpha_k must lie in (0, 1], got {alpha_k}")));
    }
    let regime = ((1.0 / alpha_k).floor() as u64).max(1);
    let m_eff = m.min(regime) as f64;
    find_separating_threshold(m, alpha_k / 2.0, 2.0 * alpha_k / 3.0, m_eff * alpha_k / gap_divisor)
}
