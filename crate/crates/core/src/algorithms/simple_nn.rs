use crate::algorithms::Predictor;
use crate::error::{Error, Result};
use crate::ratings::{RatingScale, RatingsVector, TrainingSet};

/// Agreements minus disagreements over products both vectors rate.
pub fn simple_nn_similarity(x: &RatingsVector, y: &RatingsVector) -> i64 {
    x.rated()
        .filter_map(|(p, a)| y.get(p).map(|b| if a == b { 1 } else { -1 }))
        .sum()
}

/// Every vector rating `product` whose similarity to `history` is maximal.
/// The history's own entry for `product` is ignored.
pub fn simple_nn_neighbors(
    training: &TrainingSet,
    product: usize,
    history: &RatingsVector,
) -> Vec<usize> {
    let mut history = history.clone();
    history.remove(product);
    let mut best = i64::MIN;
    let mut set = Vec::new();
    for (i, w) in training.iter().enumerate() {
        if w.get(product).is_none() {
            continue;
        }
        let s = simple_nn_similarity(w, &history);
        if s > best {
            best = s;
            set.clear();
        }
        if s == best {
            set.push(i);
        }
    }
    set
}

/// Mean rating of the maximal-similarity set, or 1 when nobody rated `product`.
pub fn simple_nn_predict(
    training: &TrainingSet,
    product: usize,
    history: &RatingsVector,
) -> Result<f64> {
    if !training.scale().is_binary() {
        return Err(Error::NonBinaryScale);
    }
    Ok(predict(training, product, history))
}

fn predict(training: &TrainingSet, product: usize, history: &RatingsVector) -> f64 {
    let neighbors = simple_nn_neighbors(training, product, history);
    if neighbors.is_empty() {
        return training.scale().max();
    }
    let total: f64 = neighbors
        .iter()
        .map(|&i| {
            training.scale().value(
                training.vectors()[i]
                    .get(product)
                    .expect("neighbor rates product"),
            )
        })
        .sum();
    total / neighbors.len() as f64
}

/// Fitted form of the simple nearest-neighbor rule (it just keeps the data).
#[derive(Clone, Debug)]
pub struct SimpleNnModel {
    training: TrainingSet,
}

impl SimpleNnModel {
    pub fn new(training: &TrainingSet) -> Result<Self> {
        if !training.scale().is_binary() {
            return Err(Error::NonBinaryScale);
        }
        Ok(Self {
            training: training.clone(),
        })
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }
}

impl Predictor for SimpleNnModel {
    fn scale(&self) -> &RatingScale {
        self.training.scale()
    }

    fn n_products(&self) -> usize {
        self.training.n_products()
    }

    fn predict_scalar(&self, product: usize, history: &RatingsVector) -> f64 {
        predict(&self.training, product, history)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(levels: &[Option<u8>]) -> RatingsVector {
        RatingsVector::from_dense(levels)
    }

    #[test]
    fn similarity_counts() {
        let x = v(&[Some(1), Some(0), None, Some(1)]);
        let y = v(&[Some(1), Some(1), Some(0), None]);
        assert_eq!(simple_nn_similarity(&x, &y), 0);
        assert_eq!(simple_nn_similarity(&x, &x), 3);
    }

    #[test]
    fn optimistic_when_unrated() {
        let data = TrainingSet::new(RatingScale::binary(), 2, vec![v(&[Some(0), None])]).unwrap();
        assert_eq!(
            simple_nn_predict(&data, 1, &RatingsVector::new(2)).unwrap(),
            1.0
        );
    }

    #[test]
    fn ties_are_averaged() {
        let data = TrainingSet::new(
            RatingScale::binary(),
            2,
            vec![
                v(&[Some(1), Some(1)]),
                v(&[Some(1), Some(0)]),
                v(&[Some(0), Some(0)]),
            ],
        )
        .unwrap();
        let history = v(&[Some(1), None]);
        assert_eq!(simple_nn_neighbors(&data, 1, &history), vec![0, 1]);
        assert_eq!(simple_nn_predict(&data, 1, &history).unwrap(), 0.5);
    }

    #[test]
    fn rejects_non_binary_scale() {
        let data = TrainingSet::new(RatingScale::five_level(), 1, vec![v(&[Some(3)])]).unwrap();
        assert!(matches!(
            simple_nn_predict(&data, 0, &RatingsVector::new(1)),
            Err(Error::NonBinaryScale)
        ));
        assert!(SimpleNnModel::new(&data).is_err());
    }
}
