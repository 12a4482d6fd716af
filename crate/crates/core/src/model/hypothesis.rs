use std::fmt;

use crate::error::{DpError, Result};

/// The ordered finite domain `{1, ..., size}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Domain {
    size: usize,
}

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(DpError::param("domain size must be at least 1"));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, x: u32) -> bool {
        x >= 1 && (x as usize) <= self.size
    }
}

/// A {0,1}-valued function on the domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Explicit truth table; entry `x - 1` is `h(x)`.
    Table(Vec<bool>),
    /// `f_u(x) = 1` iff `x > u`, with `u ∈ {0, ..., domain}`.
    Threshold { u: usize, domain: usize },
}

impl Hypothesis {
    pub fn threshold(u: usize, domain: Domain) -> Result<Self> {
        if u > domain.size() {
            return Err(DpError::param(format!("threshold {u} outside [0, {}]", domain.size())));
        }
        Ok(Hypothesis::Threshold { u, domain: domain.size() })
    }

    pub fn table(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(DpError::param("truth table must be nonempty"));
        }
        Ok(Hypothesis::Table(bits))
    }

    pub fn domain_size(&self) -> usize {
        match self {
            Hypothesis::Table(bits) => bits.len(),
            Hypothesis::Threshold { domain, .. } => *domain,
        }
    }

    #[inline]
    pub fn eval(&self, x: u32) -> bool {
        match self {
            Hypothesis::Table(bits) => bits[x as usize - 1],
            Hypothesis::Threshold { u, .. } => x as usize > *u,
        }
    }

    pub fn threshold_param(&self) -> Option<usize> {
        match self {
            Hypothesis::Threshold { u, .. } => Some(*u),
            Hypothesis::Table(_) => None,
        }
    }

    /// Truth table over the whole domain.
    pub fn to_table(&self) -> Vec<bool> {
        (1..=self.domain_size() as u32).map(|x| self.eval(x)).collect()
    }

    pub fn complement(&self) -> Hypothesis {
        Hypothesis::Table(self.to_table().into_iter().map(|b| !b).collect())
    }

    pub(crate) fn check_domain(&self, domain: Domain) -> Result<()> {
        if self.domain_size() != domain.size() {
            return Err(DpError::DomainMismatch { expected: domain.size(), found: self.domain_size() });
        }
        Ok(())
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::Threshold { u, .. } => write!(f, "u={u}"),
            Hypothesis::Table(bits) => {
                write!(f, "bits=")?;
                for &b in bits {
                    write!(f, "{}", b as u8)?;
                }
                Ok(())
            }
        }
    }
}

/// A finite nonempty collection of hypotheses over one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisClass {
    domain: Domain,
    members: Vec<Hypothesis>,
}

impl HypothesisClass {
    pub fn new(members: Vec<Hypothesis>) -> Result<Self> {
        let first = members.first().ok_or_else(|| DpError::param("hypothesis class must be nonempty"))?;
        let domain = Domain::new(first.domain_size())?;
        for h in &members {
            h.check_domain(domain)?;
        }
        Ok(Self { domain, members })
    }

    /// All thresholds `f_0, ..., f_|X|`.
    pub fn thresholds(domain: Domain) -> Self {
        let members = (0..=domain.size()).map(|u| Hypothesis::Threshold { u, domain: domain.size() }).collect();
        Self { domain, members }
    }

    /// Every function `X -> {0,1}`; only sensible for tiny domains.
    pub fn all_functions(domain: Domain) -> Result<Self> {
        if domain.size() > 16 {
            return Err(DpError::param("all_functions is limited to |X| <= 16"));
        }
        let k = domain.size();
        let members =
            (0u32..(1 << k)).map(|mask| Hypothesis::Table((0..k).map(|i| mask >> i & 1 == 1).collect())).collect();
        Ok(Self { domain, members })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Hypothesis> {
        self.members.get(i)
    }

    /// Threshold parameters when every member is a threshold.
    pub fn threshold_params(&self) -> Option<Vec<usize>> {
        self.members.iter().map(Hypothesis::threshold_param).collect()
    }

    pub(crate) fn check_domain(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(DpError::DomainMismatch { expected: domain.size(), found: self.domain.size() });
        }
        Ok(())
    }
}
