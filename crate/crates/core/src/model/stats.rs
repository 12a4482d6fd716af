use super::dataset::UserDataset;
use super::distribution::DiscreteJointDistribution;
use super::hypothesis::{Hypothesis, HypothesisClass};
use crate::binomial::binom_tail;
use crate::error::{DpError, Result};

/// An exact integer count over a known total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Count {
    pub count: u64,
    pub total: u64,
}

impl Count {
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

/// User-level mistake threshold `t` and disagreement threshold `s`, with the
/// binomial tail gaps that justified them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserErrorParams {
    pub t: usize,
    pub s: usize,
    pub gap_t: f64,
    pub gap_s: f64,
}

impl UserErrorParams {
    pub fn new(t: usize, s: usize, m: usize) -> Result<Self> {
        if t > m || s > m {
            return Err(DpError::param(format!("thresholds t={t}, s={s} must lie in [0, m={m}]")));
        }
        Ok(Self { t, s, gap_t: 0.0, gap_s: 0.0 })
    }

    pub fn with_gaps(mut self, gap_t: f64, gap_s: f64) -> Result<Self> {
        if !(gap_t >= 0.0 && gap_s >= 0.0) {
            return Err(DpError::param("tail gaps must be nonnegative"));
        }
        self.gap_t = gap_t;
        self.gap_s = gap_s;
        Ok(self)
    }
}

/// `q(z, h) = min_c err(c) + dis(c, h)` as an exact fraction, plus the
/// minimizing class member and its two counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateScore {
    pub value: f64,
    pub numerator: u64,
    pub denominator: u64,
    pub witness: usize,
    pub err_count: u64,
    pub dis_count: u64,
}

impl SurrogateScore {
    fn new(witness: usize, err_count: u64, dis_count: u64, denominator: u64) -> Self {
        let numerator = err_count + dis_count;
        Self { value: numerator as f64 / denominator as f64, numerator, denominator, witness, err_count, dis_count }
    }
}

fn check_range(name: &str, v: usize, m: usize) -> Result<()> {
    if v > m {
        return Err(DpError::param(format!("{name} = {v} must lie in [0, m = {m}]")));
    }
    Ok(())
}

/// Mistakes of `h` over all `n·m` examples.
pub fn empirical_error(z: &UserDataset, h: &Hypothesis) -> Result<Count> {
    h.check_domain(z.domain())?;
    let count = z.entries().iter().filter(|e| h.eval(e.x) != e.y).count() as u64;
    Ok(Count { count, total: z.entries().len() as u64 })
}

/// Points (labels ignored) on which `c` and `h` differ.
pub fn empirical_disagreement(x: &UserDataset, c: &Hypothesis, h: &Hypothesis) -> Result<Count> {
    c.check_domain(x.domain())?;
    h.check_domain(x.domain())?;
    let count = x.entries().iter().filter(|e| c.eval(e.x) != h.eval(e.x)).count() as u64;
    Ok(Count { count, total: x.entries().len() as u64 })
}

/// Users on whose examples `c` makes more than `t` mistakes.
pub fn user_error(z: &UserDataset, c: &Hypothesis, t: usize) -> Result<Count> {
    c.check_domain(z.domain())?;
    check_range("t", t, z.m())?;
    let count = z.users().filter(|u| u.iter().filter(|e| c.eval(e.x) != e.y).count() > t).count() as u64;
    Ok(Count { count, total: z.n() as u64 })
}

/// Users on whose points `c` and `h` disagree more than `s` times.
pub fn user_disagreement(x: &UserDataset, c: &Hypothesis, h: &Hypothesis, s: usize) -> Result<Count> {
    c.check_domain(x.domain())?;
    h.check_domain(x.domain())?;
    check_range("s", s, x.m())?;
    let count = x.users().filter(|u| u.iter().filter(|e| c.eval(e.x) != h.eval(e.x)).count() > s).count() as u64;
    Ok(Count { count, total: x.n() as u64 })
}

/// `err_D(h) = Pr_{(x,y)~D}[h(x) != y]`, summed exactly over the table.
pub fn population_error(dist: &DiscreteJointDistribution, h: &Hypothesis) -> Result<f64> {
    h.check_domain(dist.domain())?;
    Ok(dist.probs().iter().enumerate().map(|(i, row)| row[!h.eval(i as u32 + 1) as usize]).sum())
}

/// `dis_{D_X}(c, h)` under the marginal of `dist`.
pub fn population_disagreement(dist: &DiscreteJointDistribution, c: &Hypothesis, h: &Hypothesis) -> Result<f64> {
    c.check_domain(dist.domain())?;
    h.check_domain(dist.domain())?;
    Ok(dist
        .probs()
        .iter()
        .enumerate()
        .filter(|(i, _)| c.eval(*i as u32 + 1) != h.eval(*i as u32 + 1))
        .map(|(_, [a, b])| a + b)
        .sum())
}

/// `err^t_{D^m}(c) = Pr[Bin(m, err_D(c)) > t]`.
pub fn population_user_error(dist: &DiscreteJointDistribution, c: &Hypothesis, t: usize, m: usize) -> Result<f64> {
    check_range("t", t, m)?;
    let p = population_error(dist, c)?.clamp(0.0, 1.0);
    binom_tail(m as u64, p, t as i64)
}

/// `dis^s_{D_X^m}(c, h) = Pr[Bin(m, dis_{D_X}(c, h)) > s]`.
pub fn population_user_disagreement(
    dist: &DiscreteJointDistribution,
    c: &Hypothesis,
    h: &Hypothesis,
    s: usize,
    m: usize,
) -> Result<f64> {
    check_range("s", s, m)?;
    let p = population_disagreement(dist, c, h)?.clamp(0.0, 1.0);
    binom_tail(m as u64, p, s as i64)
}

/// Item-level mistakes of every threshold `f_0..f_|X|` in `O(n·m + |X|)`.
pub fn threshold_error_counts(z: &UserDataset) -> Vec<u64> {
    let size = z.domain().size();
    let mut zeros = vec![0u64; size + 1];
    let mut ones = vec![0u64; size + 1];
    for e in z.entries() {
        if e.y {
            ones[e.x as usize] += 1;
        } else {
            zeros[e.x as usize] += 1;
        }
    }
    // f_0 predicts 1 everywhere
    let mut err = zeros.iter().sum::<u64>();
    let mut out = Vec::with_capacity(size + 1);
    out.push(err);
    for x in 1..=size {
        err = err + ones[x] - zeros[x];
        out.push(err);
    }
    out
}

/// User-level error counts of every threshold: entry `u` is the number of
/// users on whom `f_u` errs more than `t` times. Runs in `O(n·m log m + |X|)`.
pub fn threshold_user_error_counts(z: &UserDataset, t: usize) -> Result<Vec<u64>> {
    check_range("t", t, z.m())?;
    let size = z.domain().size();
    let mut diff = vec![0i64; size + 2];
    let mut base = 0i64;
    let mut sorted = Vec::with_capacity(z.m());
    for user in z.users() {
        sorted.clear();
        sorted.extend(user.iter().map(|e| (e.x, e.y)));
        sorted.sort_unstable();
        let mut mistakes = sorted.iter().filter(|(_, y)| !y).count() as i64;
        let mut above = mistakes > t as i64;
        if above {
            base += 1;
        }
        let mut i = 0;
        while i < sorted.len() {
            let x = sorted[i].0;
            // f_u with u >= x predicts 0 at x
            while i < sorted.len() && sorted[i].0 == x {
                mistakes += if sorted[i].1 { 1 } else { -1 };
                i += 1;
            }
            let now = mistakes > t as i64;
            if now != above {
                diff[x as usize] += if now { 1 } else { -1 };
                above = now;
            }
        }
    }
    let mut out = Vec::with_capacity(size + 1);
    let mut acc = base;
    for d in diff.iter().take(size + 1) {
        acc += d;
        out.push(acc as u64);
    }
    Ok(out)
}

/// User-level error counts `n·err^t_z(c)` for every member of `class`.
pub fn user_error_counts(z: &UserDataset, class: &HypothesisClass, t: usize) -> Result<Vec<u64>> {
    class.check_domain(z.domain())?;
    check_range("t", t, z.m())?;
    if let Some(params) = class.threshold_params() {
        let all = threshold_user_error_counts(z, t)?;
        return Ok(params.into_iter().map(|u| all[u]).collect());
    }
    class.members().iter().map(|c| Ok(user_error(z, c, t)?.count)).collect()
}

/// Item-level surrogate score over all `n·m` examples.
pub fn surrogate_score(z: &UserDataset, class: &HypothesisClass, h: &Hypothesis) -> Result<SurrogateScore> {
    class.check_domain(z.domain())?;
    h.check_domain(z.domain())?;
    let total = z.entries().len() as u64;
    let mut best: Option<SurrogateScore> = None;
    for (i, c) in class.members().iter().enumerate() {
        let err = empirical_error(z, c)?.count;
        let dis = empirical_disagreement(z, c, h)?.count;
        if best.is_none_or(|b| err + dis < b.numerator) {
            best = Some(SurrogateScore::new(i, err, dis, total));
        }
    }
    Ok(best.expect("class is nonempty"))
}

/// Item-level surrogate scores of every candidate, with a prefix-count fast
/// path when class and candidates are all thresholds.
pub fn surrogate_scores(
    z: &UserDataset,
    class: &HypothesisClass,
    candidates: &HypothesisClass,
) -> Result<Vec<SurrogateScore>> {
    class.check_domain(z.domain())?;
    candidates.check_domain(z.domain())?;
    let total = z.entries().len() as u64;
    if let (Some(cs), Some(hs)) = (class.threshold_params(), candidates.threshold_params()) {
        let err = threshold_error_counts(z);
        let size = z.domain().size();
        let mut below = vec![0u64; size + 1];
        for e in z.entries() {
            below[e.x as usize] += 1;
        }
        for x in 1..=size {
            below[x] += below[x - 1];
        }
        return Ok(hs
            .iter()
            .map(|&b| {
                let mut best: Option<SurrogateScore> = None;
                for (i, &a) in cs.iter().enumerate() {
                    let dis = below[a.max(b)] - below[a.min(b)];
                    if best.is_none_or(|s| err[a] + dis < s.numerator) {
                        best = Some(SurrogateScore::new(i, err[a], dis, total));
                    }
                }
                best.expect("class is nonempty")
            })
            .collect());
    }

    // histogram of (x, y) makes every statistic O(|X|)
    let size = z.domain().size();
    let mut hist = vec![[0u64; 2]; size];
    for e in z.entries() {
        hist[e.x as usize - 1][e.y as usize] += 1;
    }
    let class_tables: Vec<Vec<bool>> = class.members().iter().map(Hypothesis::to_table).collect();
    let errs: Vec<u64> =
        class_tables.iter().map(|tab| tab.iter().zip(&hist).map(|(&c, row)| row[!c as usize]).sum()).collect();
    Ok(candidates
        .members()
        .iter()
        .map(|h| {
            let htab = h.to_table();
            let mut best: Option<SurrogateScore> = None;
            for (i, ctab) in class_tables.iter().enumerate() {
                let dis: u64 = ctab
                    .iter()
                    .zip(&htab)
                    .zip(&hist)
                    .filter(|((c, h), _)| c != h)
                    .map(|(_, row)| row[0] + row[1])
                    .sum();
                if best.is_none_or(|s| errs[i] + dis < s.numerator) {
                    best = Some(SurrogateScore::new(i, errs[i], dis, total));
                }
            }
            best.expect("class is nonempty")
        })
        .collect())
}

/// `q(z, h) = min_c err^t_z(c) + dis^s_x(c, h)` over user counts.
pub fn user_surrogate_score(
    z: &UserDataset,
    class: &HypothesisClass,
    h: &Hypothesis,
    params: UserErrorParams,
) -> Result<SurrogateScore> {
    class.check_domain(z.domain())?;
    h.check_domain(z.domain())?;
    check_range("t", params.t, z.m())?;
    check_range("s", params.s, z.m())?;
    let total = z.n() as u64;
    let mut best: Option<SurrogateScore> = None;
    for (i, c) in class.members().iter().enumerate() {
        let err = user_error(z, c, params.t)?.count;
        let dis = user_disagreement(z, c, h, params.s)?.count;
        if best.is_none_or(|b| err + dis < b.numerator) {
            best = Some(SurrogateScore::new(i, err, dis, total));
        }
    }
    Ok(best.expect("class is nonempty"))
}

/// User-level surrogate scores of every candidate. For threshold classes the
/// disagreement counts against one candidate are swept outward from it, giving
/// `O(|H| (n·m + |X|))` overall.
pub fn user_surrogate_scores(
    z: &UserDataset,
    class: &HypothesisClass,
    candidates: &HypothesisClass,
    params: UserErrorParams,
) -> Result<Vec<SurrogateScore>> {
    class.check_domain(z.domain())?;
    candidates.check_domain(z.domain())?;
    check_range("t", params.t, z.m())?;
    check_range("s", params.s, z.m())?;
    let total = z.n() as u64;
    let errs = user_error_counts(z, class, params.t)?;

    if let (Some(cs), Some(hs)) = (class.threshold_params(), candidates.threshold_params()) {
        let size = z.domain().size();
        let mut users_at: Vec<Vec<u32>> = vec![Vec::new(); size + 1];
        for (i, user) in z.users().enumerate() {
            for e in user {
                users_at[e.x as usize].push(i as u32);
            }
        }
        let s = params.s as u32;
        let mut counters = vec![0u32; z.n()];
        let mut dis = vec![0u64; size + 1];
        let mut out = Vec::with_capacity(hs.len());
        for &b in &hs {
            // a < b: disagreement region (a, b]
            dis[b] = 0;
            let mut over = 0u64;
            for a in (0..b).rev() {
                for &u in &users_at[a + 1] {
                    counters[u as usize] += 1;
                    if counters[u as usize] == s + 1 {
                        over += 1;
                    }
                }
                dis[a] = over;
            }
            for &u in users_at[1..=b].iter().flatten() {
                counters[u as usize] = 0;
            }
            // a > b: disagreement region (b, a]
            over = 0;
            for a in b + 1..=size {
                for &u in &users_at[a] {
                    counters[u as usize] += 1;
                    if counters[u as usize] == s + 1 {
                        over += 1;
                    }
                }
                dis[a] = over;
            }
            for &u in users_at[b + 1..=size].iter().flatten() {
                counters[u as usize] = 0;
            }
            let mut best: Option<SurrogateScore> = None;
            for (i, &a) in cs.iter().enumerate() {
                if best.is_none_or(|sc| errs[i] + dis[a] < sc.numerator) {
                    best = Some(SurrogateScore::new(i, errs[i], dis[a], total));
                }
            }
            out.push(best.expect("class is nonempty"));
        }
        return Ok(out);
    }

    let class_tables: Vec<Vec<bool>> = class.members().iter().map(Hypothesis::to_table).collect();
    Ok(candidates
        .members()
        .iter()
        .map(|h| {
            let htab = h.to_table();
            let mut best: Option<SurrogateScore> = None;
            for (i, ctab) in class_tables.iter().enumerate() {
                let dis = z
                    .users()
                    .filter(|u| {
                        u.iter().filter(|e| ctab[e.x as usize - 1] != htab[e.x as usize - 1]).count() > params.s
                    })
                    .count() as u64;
                if best.is_none_or(|sc| errs[i] + dis < sc.numerator) {
                    best = Some(SurrogateScore::new(i, errs[i], dis, total));
                }
            }
            best.expect("class is nonempty")
        })
        .collect())
}
