//! Domains, hypotheses, user-grouped datasets, exact distributions, and the
//! empirical and population statistics the learners score with.
//!
//! All empirical statistics are carried as exact integer counts; rates are
//! formed by a single division at the end.

mod dataset;
mod distribution;
mod hypothesis;
mod stats;

pub use dataset::{sample_dataset, Example, UserDataset};
pub use distribution::DiscreteJointDistribution;
pub use hypothesis::{Domain, Hypothesis, HypothesisClass};
pub use stats::{
    empirical_disagreement, empirical_error, population_disagreement, population_error, population_user_disagreement,
    population_user_error, surrogate_score, surrogate_scores, threshold_error_counts, threshold_user_error_counts,
    user_disagreement, user_error, user_error_counts, user_surrogate_score, user_surrogate_scores, Count,
    SurrogateScore, UserErrorParams,
};
