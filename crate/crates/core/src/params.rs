//! Learner parameters and the proof constants behind every additive slack.

use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsMode {
    /// Literal constants from the correctness proofs.
    Theory,
    /// Additive slack margins enlarged by `slack_scale`.
    Practical,
}

/// Constant set used by the learners.
///
/// Gap and margin divisors are divided by `slack_scale`, i.e. every additive
/// slack is multiplied by it. Representation accuracy divisors are not scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub mode: ConstantsMode,
    pub slack_scale: f64,
}

impl Constants {
    /// Item learner samples H at (α/18, β/5).
    pub const ITEM_REP_ALPHA: f64 = 18.0;
    pub const ITEM_REP_BETA: f64 = 5.0;
    /// User learner samples H at (α/(134400·√m), β/7).
    pub const USER_REP_ALPHA: f64 = 134_400.0;
    pub const USER_REP_BETA: f64 = 7.0;
    /// Comparison cut must separate by √m·α/1400; decision margin √m·α/2800.
    pub const COMPARE_GAP: f64 = 1400.0;
    pub const COMPARE_MARGIN: f64 = 2800.0;
    /// Mistake threshold t separates by √m·α/4200.
    pub const T_GAP: f64 = 4200.0;
    /// Disagreement threshold s separates by √m·α/2100.
    pub const S_GAP: f64 = 2100.0;
    /// Median count threshold separates by m·α/4200.
    pub const MEDIAN_GAP: f64 = 4200.0;

    /// Slack multiplier used by [`Constants::practical_default`].
    pub const DEFAULT_PRACTICAL_SLACK: f64 = 200.0;

    pub fn theory() -> Self {
        Self { mode: ConstantsMode::Theory, slack_scale: 1.0 }
    }

    pub fn practical(slack_scale: f64) -> Result<Self> {
        if !(slack_scale >= 1.0) || slack_scale.is_infinite() {
            return Err(DpError::param(format!("slack scale must be finite and >= 1, got {slack_scale}")));
        }
        Ok(Self { mode: ConstantsMode::Practical, slack_scale })
    }

    pub fn practical_default() -> Self {
        Self { mode: ConstantsMode::Practical, slack_scale: Self::DEFAULT_PRACTICAL_SLACK }
    }

    pub fn for_mode(mode: ConstantsMode) -> Self {
        match mode {
            ConstantsMode::Theory => Self::theory(),
            ConstantsMode::Practical => Self::practical_default(),
        }
    }

    /// Effective divisor for a theory-mode gap constant.
    pub fn divisor(&self, base: f64) -> f64 {
        base / self.slack_scale
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::theory()
    }
}

/// Target excess error α, failure probability β, privacy ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub constants: Constants,
}

impl LearnParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, constants: Constants) -> Result<Self> {
        let p = Self { alpha, beta, epsilon, constants };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DpError::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(DpError::param(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.epsilon > 0.0) {
            return Err(DpError::param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Examples per user kept by the user-level learners: `⌈1/α²⌉`.
    pub fn max_useful_m(&self) -> usize {
        (1.0 / (self.alpha * self.alpha)).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(LearnParams::new(0.1, 0.1, 1.0, Constants::theory()).is_ok());
        assert!(LearnParams::new(0.0, 0.1, 1.0, Constants::theory()).is_err());
        assert!(LearnParams::new(0.1, 1.0, 1.0, Constants::theory()).is_err());
        assert!(LearnParams::new(0.1, 0.1, 0.0, Constants::theory()).is_err());
        assert!(LearnParams::new(0.1, 0.1, f64::INFINITY, Constants::theory()).is_ok());
        assert!(Constants::practical(0.5).is_err());
    }

    #[test]
    fn divisors() {
        assert_eq!(Constants::theory().divisor(Constants::COMPARE_GAP), 1400.0);
        assert_eq!(Constants::practical(100.0).unwrap().divisor(Constants::T_GAP), 42.0);
        let p = LearnParams::new(0.1, 0.1, 1.0, Constants::theory()).unwrap();
        assert_eq!(p.max_useful_m(), 100);
    }
}
