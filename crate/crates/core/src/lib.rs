//! Collaborative filtering under manipulated training data: rating
//! predictors, distortion measures and their bounds, attack constructions,
//! and an experiment harness.

pub mod algorithms;
pub mod attack;
pub mod distortion;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod ratings;
pub mod seeds;

pub use error::{Error, Result};
pub use ratings::{InspectionOrder, RatingPmf, RatingScale, RatingsVector, TrainingSet};
