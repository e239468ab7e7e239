use serde::{Deserialize, Serialize};

use crate::algorithms::Predictor;
use crate::error::{Error, Result};
use crate::ratings::{RatingScale, RatingsVector, TrainingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    /// Neighbor count.
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 10 }
    }
}

/// Mean rating and centred norm of one training vector.
#[derive(Clone, Copy, Debug)]
struct VectorStats {
    mean: f64,
    /// `sqrt(Σ (w_i - mean)²)` over all rated products; zero for constant raters.
    norm: f64,
}

fn vector_stats(w: &RatingsVector, scale: &RatingScale) -> Option<VectorStats> {
    let count = w.rated_count();
    if count == 0 {
        return None;
    }
    let mean = w.rated().map(|(_, l)| scale.value(l)).sum::<f64>() / count as f64;
    let norm = w
        .rated()
        .map(|(_, l)| (scale.value(l) - mean).powi(2))
        .sum::<f64>()
        .sqrt();
    Some(VectorStats { mean, norm })
}

/// Active-user history reduced to the quantities the similarity needs.
struct HistoryStats {
    ratings: Vec<(usize, f64)>,
    mean: f64,
    norm: f64,
}

impl HistoryStats {
    fn new(history: &RatingsVector, skip: Option<usize>, scale: &RatingScale) -> Self {
        let ratings: Vec<(usize, f64)> = history
            .rated()
            .filter(|&(p, _)| Some(p) != skip)
            .map(|(p, l)| (p, scale.value(l)))
            .collect();
        let mean = if ratings.is_empty() {
            0.0
        } else {
            ratings.iter().map(|r| r.1).sum::<f64>() / ratings.len() as f64
        };
        let norm = ratings
            .iter()
            .map(|r| (r.1 - mean).powi(2))
            .sum::<f64>()
            .sqrt();
        Self {
            ratings,
            mean,
            norm,
        }
    }
}

fn similarity(w: &RatingsVector, ws: VectorStats, h: &HistoryStats, scale: &RatingScale) -> f64 {
    if ws.norm == 0.0 || h.norm == 0.0 {
        return 0.0;
    }
    let numerator: f64 = h
        .ratings
        .iter()
        .filter_map(|&(p, x)| w.get(p).map(|l| (scale.value(l) - ws.mean) * (x - h.mean)))
        .sum();
    numerator / (ws.norm * h.norm)
}

/// Correlation-style similarity between a training vector and a history.
///
/// The training vector's spread is taken over all of its ratings, the
/// history's over its own ratings; the cross term only runs over products
/// both have rated. Undefined cases (a constant or empty side) score 0.
pub fn knn_similarity(w: &RatingsVector, history: &RatingsVector, scale: &RatingScale) -> f64 {
    match vector_stats(w, scale) {
        Some(ws) => similarity(w, ws, &HistoryStats::new(history, None, scale), scale),
        None => 0.0,
    }
}

#[derive(Clone, Debug)]
pub struct KnnModel {
    training: TrainingSet,
    k: usize,
    stats: Vec<Option<VectorStats>>,
}

pub fn knn_fit(training: &TrainingSet, cfg: &KnnConfig) -> Result<KnnModel> {
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("knn needs k >= 1".into()));
    }
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let stats = training
        .iter()
        .map(|w| vector_stats(w, training.scale()))
        .collect();
    Ok(KnnModel {
        training: training.clone(),
        k: cfg.k,
        stats,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Mean rating of training vector `index`, `None` for an all-"?" vector.
    pub fn vector_mean(&self, index: usize) -> Option<f64> {
        self.stats[index].map(|s| s.mean)
    }

    /// Whether vector `index` can never carry weight (no ratings, or constant).
    pub fn is_flagged(&self, index: usize) -> bool {
        self.stats[index].is_none_or(|s| s.norm == 0.0)
    }

    pub fn similarity(&self, index: usize, history: &RatingsVector) -> f64 {
        let scale = self.training.scale();
        match self.stats[index] {
            Some(ws) => similarity(
                &self.training.vectors()[index],
                ws,
                &HistoryStats::new(history, None, scale),
                scale,
            ),
            None => 0.0,
        }
    }

    /// Mean training rating of `product`, or the top level when nobody rated it.
    fn product_mean(&self, product: usize) -> f64 {
        let scale = self.training.scale();
        let (sum, count) = self
            .training
            .iter()
            .filter_map(|w| w.get(product))
            .fold((0.0, 0usize), |(s, c), l| (s + scale.value(l), c + 1));
        if count == 0 {
            scale.max()
        } else {
            sum / count as f64
        }
    }

    /// Indices of the selected neighbors for `product`, best first.
    pub fn neighbors(&self, product: usize, history: &RatingsVector) -> Vec<(usize, f64)> {
        let scale = self.training.scale();
        let h = HistoryStats::new(history, Some(product), scale);
        let mut scored: Vec<(usize, f64)> = self
            .training
            .iter()
            .enumerate()
            .filter(|(_, w)| w.get(product).is_some())
            .map(|(i, w)| {
                let ws = self.stats[i].expect("a vector rating the product has stats");
                (i, similarity(w, ws, &h, scale))
            })
            .collect();
        // Highest similarity first; ascending index on ties.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(self.k);
        scored
    }
}

/// Mean-offset kNN prediction, clamped to the scale.
///
/// With at most one prior rating the similarity is undefined and the
/// training mean of `product` is used instead.
pub fn knn_predict(model: &KnnModel, product: usize, history: &RatingsVector) -> f64 {
    let scale = model.training.scale();
    let prior = history.rated().filter(|&(p, _)| p != product).count();
    if prior <= 1 {
        return scale.clamp(model.product_mean(product));
    }
    let h = HistoryStats::new(history, Some(product), scale);
    let (mut weighted, mut total) = (0.0, 0.0);
    for (i, s) in model.neighbors(product, history) {
        let w = &model.training.vectors()[i];
        let mean = model.stats[i].expect("neighbor has stats").mean;
        let rating = scale.value(w.get(product).expect("neighbor rates the product"));
        weighted += s * (rating - mean);
        total += s.abs();
    }
    if total == 0.0 {
        scale.clamp(h.mean)
    } else {
        scale.clamp(h.mean + weighted / total)
    }
}

impl Predictor for KnnModel {
    fn scale(&self) -> &RatingScale {
        self.training.scale()
    }

    fn n_products(&self) -> usize {
        self.training.n_products()
    }

    fn predict_scalar(&self, product: usize, history: &RatingsVector) -> f64 {
        knn_predict(self, product, history)
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn five(levels: &[Option<u8>]) -> RatingsVector {
        RatingsVector::from_dense(levels)
    }

    fn fit(scale: RatingScale, vectors: Vec<RatingsVector>, k: usize) -> KnnModel {
        let n = vectors[0].len();
        knn_fit(
            &TrainingSet::new(scale, n, vectors).unwrap(),
            &KnnConfig { k },
        )
        .unwrap()
    }

    #[test]
    fn vector_means_and_flags() {
        let model = fit(
            RatingScale::binary(),
            vec![five(&[Some(1), None, Some(0)]), five(&[None, None, None])],
            3,
        );
        assert_eq!(model.vector_mean(0), Some(0.5));
        assert_eq!(model.vector_mean(1), None);
        assert!(model.is_flagged(1));

        let flat = fit(
            RatingScale::five_level(),
            vec![five(&[Some(1), Some(1)])],
            1,
        );
        assert_eq!(flat.vector_mean(0), Some(0.25));
        assert!(flat.is_flagged(0));
        assert_eq!(flat.similarity(0, &five(&[Some(0), Some(4)])), 0.0);
    }

    #[test]
    fn perfect_correlation() {
        let scale = RatingScale::five_level();
        let w = five(&[Some(4), Some(0), Some(2), None, None]);
        let history = w.clone();
        assert_abs_diff_eq!(knn_similarity(&w, &history, &scale), 1.0, epsilon = 1e-15);
        let elsewhere = five(&[None, None, None, Some(1), Some(3)]);
        assert_eq!(knn_similarity(&w, &elsewhere, &scale), 0.0);
    }

    #[test]
    fn similarity_matches_direct_covariance() {
        // w = (1, 0, 1, 1, 0) rates everything; history rates products 0 and 1 as (1, 0).
        let scale = RatingScale::binary();
        let w = five(&[Some(1), Some(0), Some(1), Some(1), Some(0)]);
        let history = five(&[Some(1), Some(0), None, None, None]);
        let w_vals = [1.0, 0.0, 1.0, 1.0, 0.0];
        let w_mean = 3.0 / 5.0;
        let w_ss: f64 = w_vals.iter().map(|v: &f64| (v - w_mean).powi(2)).sum();
        let x_vals = [1.0, 0.0];
        let cov: f64 = (0..2)
            .map(|i| (w_vals[i] - w_mean) * (x_vals[i] - 0.5))
            .sum();
        let expected = cov / (w_ss.sqrt() * (0.5f64).sqrt());
        assert_abs_diff_eq!(
            knn_similarity(&w, &history, &scale),
            expected,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            expected,
            1.0 / (1.2f64.sqrt() * 2.0f64.sqrt()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cold_start_uses_product_mean() {
        let model = fit(
            RatingScale::five_level(),
            vec![
                five(&[Some(3), Some(1)]),
                five(&[Some(1), None]),
                five(&[None, Some(2)]),
            ],
            2,
        );
        assert_abs_diff_eq!(
            knn_predict(&model, 0, &RatingsVector::new(2)),
            0.5,
            epsilon = 1e-15
        );
        // One prior rating is still the cold-start regime.
        assert_abs_diff_eq!(
            knn_predict(&model, 0, &five(&[None, Some(4)])),
            0.5,
            epsilon = 1e-15
        );

        let unrated = fit(RatingScale::five_level(), vec![five(&[Some(3), None])], 1);
        assert_eq!(knn_predict(&unrated, 1, &RatingsVector::new(2)), 1.0);
    }

    #[test]
    fn identical_neighbors_reproduce_their_rating() {
        let scale = RatingScale::five_level();
        // Each neighbor has mean 0.5 over its rated products, like the history.
        let w = five(&[Some(4), Some(0), Some(2), Some(3), Some(1)]);
        let model = fit(scale, vec![w.clone(); 4], 3);
        let history = five(&[Some(4), Some(0), None, None, None]);
        let value = knn_predict(&model, 3, &history);
        // x̂ + (w_3 - ŵ) = 0.5 + (0.75 - 0.5)
        assert_abs_diff_eq!(value, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn neighbor_ties_break_by_index_and_prediction_is_clamped() {
        let scale = RatingScale::binary();
        let a = five(&[Some(1), Some(0), Some(1)]);
        let b = five(&[Some(1), Some(0), Some(1)]);
        let c = five(&[Some(0), Some(1), Some(1)]);
        let model = fit(scale, vec![c, a, b], 2);
        let history = five(&[Some(1), Some(0), None]);
        let picked: Vec<usize> = model.neighbors(2, &history).iter().map(|n| n.0).collect();
        assert_eq!(picked, vec![1, 2]);
        let v = knn_predict(&model, 2, &history);
        assert!((0.0..=1.0).contains(&v));
        // 0.5 + (1 - 2/3) = 0.8333
        assert_abs_diff_eq!(v, 0.5 + 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_weight_falls_back_to_history_mean() {
        let scale = RatingScale::five_level();
        let model = fit(scale, vec![five(&[Some(2), Some(2), Some(4)])], 5);
        let history = five(&[Some(0), Some(4), None]);
        assert_abs_diff_eq!(knn_predict(&model, 2, &history), 0.5, epsilon = 1e-15);
    }
}
