//! Writing-style trait scoring and harm prediction over message corpora.
//!
//! The pipeline: parse a category lexicon, count feature occurrences per
//! user, normalize twice (by word count, then min-max across users), score
//! eight personality-style traits as correlation-weighted sums, partition
//! users by boxplot outlier status, cross-tabulate against message risk
//! labels, and fit polynomial regressors that predict per-user harm levels
//! directly from the linguistic features.
//!
//! Trait outputs are behavioral similarity scores derived from writing
//! style. They are not psychological assessments; see the repository README
//! for the responsible-use notes.

pub mod corpus;
pub mod features;
pub mod harm;
pub mod lexicon;
pub mod regress;
pub mod stability;
pub mod synth;
pub mod traits;
