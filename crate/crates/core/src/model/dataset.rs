use std::fmt::Write as _;

use rand::Rng;

use super::distribution::DiscreteJointDistribution;
use super::hypothesis::Domain;
use crate::error::{DpError, Result};

/// One labeled example `(x, y)` with `x ∈ {1, ..., |X|}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Example {
    pub x: u32,
    pub y: bool,
}

impl Example {
    pub fn new(x: u32, y: bool) -> Self {
        Self { x, y }
    }
}

/// `n` users holding exactly `m` labeled examples each, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserDataset {
    domain: Domain,
    n: usize,
    m: usize,
    entries: Vec<Example>,
}

impl UserDataset {
    pub fn new(domain: Domain, users: Vec<Vec<Example>>) -> Result<Self> {
        let n = users.len();
        if n == 0 {
            return Err(DpError::param("dataset needs at least one user"));
        }
        let m = users[0].len();
        if m == 0 {
            return Err(DpError::param("every user needs at least one example"));
        }
        let mut entries = Vec::with_capacity(n * m);
        for (i, user) in users.into_iter().enumerate() {
            if user.len() != m {
                return Err(DpError::param(format!("user {i} holds {} examples, expected {m}", user.len())));
            }
            entries.extend(user);
        }
        Self::from_flat(domain, n, m, entries)
    }

    pub fn from_flat(domain: Domain, n: usize, m: usize, entries: Vec<Example>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(DpError::param("dataset needs n >= 1 and m >= 1"));
        }
        if entries.len() != n * m {
            return Err(DpError::param(format!("expected {} entries, got {}", n * m, entries.len())));
        }
        if let Some(bad) = entries.iter().find(|e| !domain.contains(e.x)) {
            return Err(DpError::param(format!("point {} outside domain 1..={}", bad.x, domain.size())));
        }
        Ok(Self { domain, n, m, entries })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[Example] {
        &self.entries
    }

    pub fn user(&self, i: usize) -> &[Example] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn users(&self) -> impl ExactSizeIterator<Item = &[Example]> + '_ {
        self.entries.chunks_exact(self.m)
    }

    /// Keeps the first `m` examples of every user; a no-op when `m >= self.m()`.
    pub fn truncate_users(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(DpError::param("cannot truncate to zero examples per user"));
        }
        if m >= self.m {
            return Ok(self.clone());
        }
        let entries = self.users().flat_map(|u| u[..m].iter().copied()).collect();
        Ok(Self { domain: self.domain, n: self.n, m, entries })
    }

    /// Swap neighbor: user `i` replaced by `replacement`.
    pub fn with_user(&self, i: usize, replacement: &[Example]) -> Result<Self> {
        if i >= self.n {
            return Err(DpError::param(format!("user index {i} out of range")));
        }
        if replacement.len() != self.m {
            return Err(DpError::param("replacement user must hold m examples"));
        }
        let mut entries = self.entries.clone();
        entries[i * self.m..(i + 1) * self.m].copy_from_slice(replacement);
        Self::from_flat(self.domain, self.n, self.m, entries)
    }

    /// Line-oriented text: one user per line, comma-separated `x:y` pairs.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 6);
        for user in self.users() {
            for (j, e) in user.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:{}", e.x, e.y as u8);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, domain: Domain) -> Result<Self> {
        let mut users = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let user = line
                .split(',')
                .map(|pair| parse_pair(pair.trim()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| DpError::param(format!("malformed dataset line {}", lineno + 1)))?;
            users.push(user);
        }
        Self::new(domain, users)
    }
}

fn parse_pair(pair: &str) -> Option<Example> {
    let (x, y) = pair.split_once(':')?;
    let x = x.parse().ok()?;
    let y = match y {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    Some(Example { x, y })
}

/// `n·m` i.i.d. draws from `dist`, grouped into users in draw order.
pub fn sample_dataset<R: Rng + ?Sized>(
    dist: &DiscreteJointDistribution,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<UserDataset> {
    if n == 0 || m == 0 {
        return Err(DpError::param("sample_dataset needs n >= 1 and m >= 1"));
    }
    let entries = (0..n * m).map(|_| dist.sample(rng)).collect();
    UserDataset::from_flat(dist.domain(), n, m, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn validation() {
        let d = Domain::new(3).unwrap();
        assert!(UserDataset::new(d, vec![]).is_err());
        assert!(UserDataset::new(d, vec![vec![]]).is_err());
        assert!(UserDataset::new(d, vec![vec![Example::new(1, true)], vec![]]).is_err());
        assert!(UserDataset::new(d, vec![vec![Example::new(4, true)]]).is_err());
        assert!(UserDataset::new(d, vec![vec![Example::new(0, true)]]).is_err());
    }

    #[test]
    fn text_format() {
        let d = Domain::new(9).unwrap();
        let z = UserDataset::new(
            d,
            vec![
                vec![Example::new(1, true), Example::new(9, false)],
                vec![Example::new(3, false), Example::new(3, true)],
            ],
        )
        .unwrap();
        let text = z.to_text();
        assert_eq!(text, "1:1,9:0\n3:0,3:1\n");
        assert_eq!(UserDataset::from_text(&text, d).unwrap(), z);
        assert!(UserDataset::from_text("1:2\n", d).is_err());
        assert!(UserDataset::from_text("1:1,2\n", d).is_err());
    }

    #[test]
    fn truncation_keeps_prefix() {
        let d = Domain::new(4).unwrap();
        let z = UserDataset::new(
            d,
            vec![
                vec![Example::new(1, true), Example::new(2, false), Example::new(3, true)],
                vec![Example::new(4, false), Example::new(3, true), Example::new(2, true)],
            ],
        )
        .unwrap();
        let t = z.truncate_users(2).unwrap();
        assert_eq!(t.m(), 2);
        assert_eq!(t.user(1), &[Example::new(4, false), Example::new(3, true)]);
        assert_eq!(z.truncate_users(5).unwrap(), z);
    }

    #[test]
    fn point_mass_sampling() {
        let d = Domain::new(5).unwrap();
        let dist = DiscreteJointDistribution::point_mass(d, 3, true).unwrap();
        let z = sample_dataset(&dist, 10, 4, &mut rng_from_seed(1)).unwrap();
        assert!(z.entries().iter().all(|e| *e == Example::new(3, true)));
    }

    #[test]
    fn sampling_is_seeded() {
        let d = Domain::new(16).unwrap();
        let dist = DiscreteJointDistribution::uniform_labels(d);
        let a = sample_dataset(&dist, 20, 3, &mut rng_from_seed(9)).unwrap();
        let b = sample_dataset(&dist, 20, 3, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_marginal_matches() {
        let d = Domain::new(6).unwrap();
        let probs = vec![[0.05, 0.05], [0.2, 0.0], [0.1, 0.1], [0.0, 0.3], [0.1, 0.05], [0.05, 0.0]];
        let dist = DiscreteJointDistribution::new(d, probs).unwrap();
        let draws = 100_000;
        let z = sample_dataset(&dist, draws, 1, &mut rng_from_seed(2)).unwrap();
        let mut counts = [0usize; 6];
        for e in z.entries() {
            counts[e.x as usize - 1] += 1;
        }
        for (x, &c) in counts.iter().enumerate() {
            let p = dist.marginal()[x];
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sd + 1e-9, "x={}", x + 1);
        }
    }

    proptest! {
        #[test]
        fn prop_text_round_trip(
            size in 1usize..50,
            n in 1usize..8,
            m in 1usize..6,
            seed in any::<u64>(),
        ) {
            let d = Domain::new(size).unwrap();
            let dist = DiscreteJointDistribution::uniform_labels(d);
            let z = sample_dataset(&dist, n, m, &mut rng_from_seed(seed)).unwrap();
            prop_assert_eq!(UserDataset::from_text(&z.to_text(), d).unwrap(), z);
        }
    }
}
