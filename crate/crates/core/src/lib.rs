//! Pure differentially private agnostic learners.
//!
//! The crate implements three ε-DP learners over finite domains:
//!
//! * an item-level learner that runs the exponential mechanism on a sampled
//!   hypothesis class with the surrogate score
//!   `q(z, h) = min_c err_z(c) + dis_x(c, h)`,
//! * a user-level learner that replaces both statistics by their user-level
//!   analogues (fraction of users with more than `t` mistakes, more than `s`
//!   disagreements) after privately estimating the best achievable error,
//! * a threshold learner that runs a private binary descent whose split points
//!   come from a private approximate median.
//!
//! Supporting modules provide the Laplace and exponential mechanisms with exact
//! output probabilities, exact binomial tails and total-variation distances,
//! exact population oracles, DP audits and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod binomial;
pub mod error;
pub mod harness;
pub mod learners;
pub mod mechanism;
pub mod model;
pub mod params;
pub mod representation;
pub mod rng;
pub mod threshold;

pub use error::{DpError, Result};
pub use mechanism::{MechanismOutcome, PrivacyBudget, SensitivitySpec};
pub use model::{
    DiscreteJointDistribution, Domain, Example, Hypothesis, HypothesisClass, UserDataset, UserErrorParams,
};
pub use params::{Constants, ConstantsMode, LearnParams};
pub use representation::Representation;
pub use rng::DpRng;
