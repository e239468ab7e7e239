//! Rating prediction algorithms.
//!
//! Every fitted model implements [`Predictor`]. Probabilistic models
//! ([`MixtureTypeModel`], produced by KDE and naive Bayes) also emit a PMF for
//! the next rating; the neighbor-based models only emit scalars.

mod kde;
mod knn;
mod mixture;
mod nb;
mod simple_nn;

pub use kde::{kde_fit, kernel_component, KdeConfig};
pub use knn::{knn_fit, knn_predict, knn_similarity, KnnConfig, KnnModel};
pub use mixture::{mixture_predict_pmf, MixtureTypeModel};
pub use nb::{
    nb_em_run, nb_fit, nb_fit_path, nb_posterior_logdensity, nb_q_map, nb_sample, EmRun, NbConfig,
    NbFitPath, NbParams,
};
pub use simple_nn::{simple_nn_neighbors, simple_nn_predict, simple_nn_similarity, SimpleNnModel};

use crate::ratings::{RatingPmf, RatingScale, RatingsVector};

/// A fitted prediction model.
///
/// `history` holds the active user's ratings so far. Any rating it carries for
/// the predicted product itself is ignored.
pub trait Predictor: Send + Sync {
    fn scale(&self) -> &RatingScale;

    fn n_products(&self) -> usize;

    /// Point prediction in `[min level, max level]`.
    fn predict_scalar(&self, product: usize, history: &RatingsVector) -> f64;

    /// Predictive PMF; `None` for scalar-only algorithms.
    fn predict_pmf(&self, _product: usize, _history: &RatingsVector) -> Option<RatingPmf> {
        None
    }
}
