//! Exact and Monte Carlo checks of the ε-DP ratio bound on swap neighbors.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{DpError, Result};
use crate::model::{Domain, Example, UserDataset};
use crate::rng::derive_rng;
use crate::rng::DpRng;

/// Minimum trials per side for the empirical estimate.
pub const MIN_EMPIRICAL_TRIALS: u64 = 10_000;
/// Outputs seen fewer times than this on either side are ignored.
pub const MIN_CELL_COUNT: u64 = 10;
/// Output id recorded when a learner reports infeasibility.
pub const INFEASIBLE_OUTPUT: usize = usize::MAX;

const SUM_TOLERANCE: f64 = 1e-9;
const MAX_ENUMERATED: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditMethod {
    Exact,
    Empirical,
}

impl fmt::Display for AuditMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuditMethod::Exact => "exact",
            AuditMethod::Empirical => "empirical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub epsilon_declared: f64,
    /// Largest observed `|ln p - ln p'|`; infinite on a support violation.
    pub epsilon_measured: f64,
    pub method: AuditMethod,
    /// Pairs checked (exact) or samples per dataset (empirical).
    pub trials: u64,
    pub worst_pair: Option<usize>,
    pub worst_output: Option<usize>,
    /// Some output had positive probability on one side only.
    pub violation: bool,
    pub warnings: Vec<String>,
}

impl AuditReport {
    fn empty(epsilon: f64, method: AuditMethod, trials: u64) -> Self {
        Self {
            epsilon_declared: epsilon,
            epsilon_measured: 0.0,
            method,
            trials,
            worst_pair: None,
            worst_output: None,
            violation: false,
            warnings: Vec::new(),
        }
    }

    /// `epsilon_measured <= epsilon_declared + tol` and no support violation.
    pub fn passes(&self, tol: f64) -> bool {
        !self.violation && self.epsilon_measured <= self.epsilon_declared + tol
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |i| i.to_string());
        let mut s = format!(
            "method: {}\nepsilon_declared: {}\nepsilon_measured: {}\ntrials: {}\nworst_pair: {}\nworst_output: {}\nviolation: {}\n",
            self.method,
            self.epsilon_declared,
            self.epsilon_measured,
            self.trials,
            opt(self.worst_pair),
            opt(self.worst_output),
            self.violation
        );
        if self.method == AuditMethod::Empirical {
            s.push_str("note: plug-in estimate, not a certificate\n");
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }

    pub const CSV_HEADER: &'static str =
        "method,epsilon_declared,epsilon_measured,trials,worst_pair,worst_output,violation,warnings";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(String::new, |i| i.to_string());
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.epsilon_declared,
            self.epsilon_measured,
            self.trials,
            opt(self.worst_pair),
            opt(self.worst_output),
            self.violation,
            self.warnings.join("; ").replace(',', " ")
        )
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(DpError::param(format!("probability vector sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Largest `|ln p - ln p'|` over outputs; `0/0` counts as ratio one.
fn max_log_ratio(p: &[f64], q: &[f64]) -> (f64, Option<usize>, bool) {
    let mut worst = (0.0, None, false);
    for (k, (&a, &b)) in p.iter().zip(q).enumerate() {
        let r = match (a > 0.0, b > 0.0) {
            (false, false) => continue,
            (true, true) => (a.ln() - b.ln()).abs(),
            _ => f64::INFINITY,
        };
        if r > worst.0 || worst.1.is_none() {
            worst = (r, Some(k), worst.2 || r.is_infinite());
        }
    }
    worst
}

/// Exact audit: `oracle` gives each dataset's output distribution over a
/// fixed finite output set.
pub fn exact_dp_check<D, F>(oracle: F, pairs: &[(D, D)], epsilon: f64) -> Result<AuditReport>
where
    D: Sync,
    F: Fn(&D) -> Result<Vec<f64>> + Sync,
{
    let per_pair: Vec<(f64, Option<usize>, bool)> = pairs
        .par_iter()
        .map(|(a, b)| {
            let p = oracle(a)?;
            let q = oracle(b)?;
            check_distribution(&p)?;
            check_distribution(&q)?;
            if p.len() != q.len() {
                return Err(DpError::param(format!("output spaces differ: {} vs {} outputs", p.len(), q.len())));
            }
            Ok(max_log_ratio(&p, &q))
        })
        .collect::<Result<_>>()?;
    let mut report = AuditReport::empty(epsilon, AuditMethod::Exact, pairs.len() as u64);
    for (i, (r, out, viol)) in per_pair.into_iter().enumerate() {
        report.violation |= viol;
        if out.is_some() && (report.worst_pair.is_none() || r > report.epsilon_measured) {
            report.epsilon_measured = r;
            report.worst_pair = Some(i);
            report.worst_output = out;
        }
    }
    if pairs.is_empty() {
        report.warnings.push("no neighbor pairs supplied".into());
    }
    Ok(report)
}

/// Output frequencies of `trials` independent runs on one dataset, each run
/// seeded by `(seed, side, trial)`.
pub fn frequency_table<D, F>(sampler: &F, data: &D, seed: u64, side: u64, trials: u64) -> Result<BTreeMap<usize, u64>>
where
    D: Sync,
    F: Fn(&D, &mut DpRng) -> Result<usize> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, &[side, i]);
            match sampler(data, &mut rng) {
                Ok(o) => Ok(o),
                Err(DpError::Infeasible { .. }) => Ok(INFEASIBLE_OUTPUT),
                Err(e) => Err(e),
            }
        })
        .try_fold(BTreeMap::new, |mut acc, out: Result<usize>| {
            *acc.entry(out?).or_insert(0u64) += 1;
            Ok::<_, DpError>(acc)
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            Ok(a)
        })
}

/// Plug-in estimate of the privacy loss between two datasets from
/// `trials` samples on each side.
pub fn empirical_dp_estimate<D, F>(
    sampler: F,
    pair: (&D, &D),
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<AuditReport>
where
    D: Sync,
    F: Fn(&D, &mut DpRng) -> Result<usize> + Sync,
{
    if trials < MIN_EMPIRICAL_TRIALS {
        return Err(DpError::param(format!(
            "empirical audit needs at least {MIN_EMPIRICAL_TRIALS} trials, got {trials}"
        )));
    }
    let left = frequency_table(&sampler, pair.0, seed, 0, trials)?;
    let right = frequency_table(&sampler, pair.1, seed, 1, trials)?;
    Ok(compare_tables(&left, &right, epsilon, trials))
}

/// Builds the empirical report from two frequency tables of equal size.
pub fn compare_tables(
    left: &BTreeMap<usize, u64>,
    right: &BTreeMap<usize, u64>,
    epsilon: f64,
    trials: u64,
) -> AuditReport {
    let mut report = AuditReport::empty(epsilon, AuditMethod::Empirical, trials);
    report.worst_pair = Some(0);
    let mut used = 0usize;
    for (&k, &a) in left {
        let b = right.get(&k).copied().unwrap_or(0);
        if a < MIN_CELL_COUNT || b < MIN_CELL_COUNT {
            continue;
        }
        used += 1;
        let r = (a as f64 / b as f64).ln().abs();
        if r > report.epsilon_measured || report.worst_output.is_none() {
            report.epsilon_measured = r;
            report.worst_output = Some(k);
        }
    }
    let outputs: std::collections::BTreeSet<_> = left.keys().chain(right.keys()).collect();
    if outputs.len() <= 1 {
        report.epsilon_measured = 0.0;
        report.warnings.push("low coverage: sampler produced a single output".into());
    } else if used < 2 {
        report.warnings.push(format!("low coverage: {used} outputs passed the count filter"));
    }
    if left.contains_key(&INFEASIBLE_OUTPUT) || right.contains_key(&INFEASIBLE_OUTPUT) {
        report.warnings.push("some runs were infeasible".into());
    }
    report
}

/// Index of `value` among `bins` equal-width bins on `[lo, hi]`, with the
/// tails folded into the end bins.
pub fn bin_index(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if !(value > lo) {
        return 0;
    }
    let k = ((value - lo) / (hi - lo) * bins as f64).floor();
    (k as usize).min(bins - 1)
}

/// All per-user example lists with `m` examples over the domain.
fn all_users(domain: Domain, m: usize) -> Vec<Vec<Example>> {
    let cells: Vec<Example> =
        (1..=domain.size() as u32).flat_map(|x| [Example::new(x, false), Example::new(x, true)]).collect();
    let mut users: Vec<Vec<Example>> = vec![Vec::new()];
    for _ in 0..m {
        users = users
            .into_iter()
            .flat_map(|u| {
                cells.iter().map(move |&c| {
                    let mut v = u.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    users
}

/// Every dataset of `n` users with `m` examples each.
pub fn enumerate_datasets(domain: Domain, n: usize, m: usize) -> Result<Vec<UserDataset>> {
    if n == 0 || m == 0 {
        return Err(DpError::param("need n >= 1 and m >= 1"));
    }
    let users = all_users(domain, m);
    let total = (users.len() as f64).powi(n as i32);
    if total > MAX_ENUMERATED as f64 {
        return Err(DpError::param(format!("{total} datasets is too many to enumerate")));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; n];
    loop {
        out.push(UserDataset::new(domain, idx.iter().map(|&i| users[i].clone()).collect())?);
        let mut k = 0;
        loop {
            if k == n {
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < users.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// All swap neighbors of `z`: one user's examples replaced by another list.
pub fn swap_neighbors(z: &UserDataset) -> Result<Vec<UserDataset>> {
    let users = all_users(z.domain(), z.m());
    if users.len() as f64 * z.n() as f64 > MAX_ENUMERATED as f64 {
        return Err(DpError::param("too many swap neighbors to enumerate"));
    }
    let mut out = Vec::new();
    for i in 0..z.n() {
        for u in &users {
            if u.as_slice() != z.user(i) {
                out.push(z.with_user(i, u)?);
            }
        }
    }
    Ok(out)
}

/// Every ordered swap-neighbor pair over all datasets of the given shape.
pub fn all_swap_pairs(domain: Domain, n: usize, m: usize) -> Result<Vec<(UserDataset, UserDataset)>> {
    let mut pairs = Vec::new();
    for z in enumerate_datasets(domain, n, m)? {
        for w in swap_neighbors(&z)? {
            pairs.push((z.clone(), w));
            if pairs.len() > MAX_ENUMERATED {
                return Err(DpError::param("too many neighbor pairs to enumerate"));
            }
        }
    }
    Ok(pairs)
}
