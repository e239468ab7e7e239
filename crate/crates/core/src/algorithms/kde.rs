use serde::{Deserialize, Serialize};

use crate::algorithms::MixtureTypeModel;
use crate::error::{Error, Result};
use crate::ratings::{RatingPmf, RatingScale, TrainingSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    /// Kernel bandwidth; mass decays as `exp(-|s̄ - s| / beta)`.
    pub beta: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self { beta: 0.15 }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta > 0.0 && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "kde beta must be positive, got {}",
                self.beta
            )))
        }
    }
}

/// Kernel PMF `k_s` centred on level `s`, or uniform for an unrated entry.
pub fn kernel_component(s: Option<u8>, scale: &RatingScale, beta: f64) -> RatingPmf {
    match s {
        None => RatingPmf::uniform(scale.clone()),
        Some(level) => {
            let centre = scale.value(level);
            let weights = scale
                .levels()
                .iter()
                .map(|v| (-(v - centre).abs() / beta).exp())
                .collect();
            RatingPmf::from_weights(scale.clone(), weights).expect("kernel weights are positive")
        }
    }
}

/// One product-kernel component per training vector, each with weight `1/M`.
pub fn kde_fit(training: &TrainingSet, cfg: &KdeConfig) -> Result<MixtureTypeModel> {
    cfg.validate()?;
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let scale = training.scale().clone();
    let k = scale.len();
    let unrated = k as u8;
    let mut kernels = Vec::with_capacity((k + 1) * k);
    for level in 0..k as u8 {
        kernels.extend_from_slice(kernel_component(Some(level), &scale, cfg.beta).probs());
    }
    kernels.extend_from_slice(kernel_component(None, &scale, cfg.beta).probs());
    assert!(
        kernels.iter().all(|&p| p > 0.0),
        "kernel underflow; beta {} is too small for this scale",
        cfg.beta
    );

    let n = training.n_products();
    let mut codes = vec![unrated; training.len() * n];
    for (c, w) in training.iter().enumerate() {
        for (p, level) in w.rated() {
            codes[c * n + p] = level;
        }
    }
    let m = training.len();
    Ok(MixtureTypeModel::from_kernels(
        scale,
        n,
        vec![1.0 / m as f64; m],
        kernels,
        codes,
    ))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::ratings::RatingsVector;

    #[test]
    fn unrated_kernel_is_uniform() {
        let k = kernel_component(None, &RatingScale::five_level(), 0.15);
        assert_eq!(k.probs(), &[0.2; 5]);
    }

    #[test]
    fn binary_kernel_values() {
        // Two-level normalization solved by hand: k_1(1) = 1 / (1 + e^{-1/β}).
        let k1 = kernel_component(Some(1), &RatingScale::binary(), 0.15);
        let closed = 1.0 / (1.0 + (-1.0f64 / 0.15).exp());
        assert_abs_diff_eq!(k1.prob(1), closed, epsilon = 1e-15);
        assert_abs_diff_eq!(k1.prob(1), 0.998_728_98, epsilon = 1e-8);
        assert_abs_diff_eq!(k1.prob(0), 0.001_271_02, epsilon = 1e-8);
        let k0 = kernel_component(Some(0), &RatingScale::binary(), 0.15);
        assert_eq!(k0.prob(0), k1.prob(1));
        assert_eq!(k0.prob(1), k1.prob(0));
    }

    #[test]
    fn five_level_kernel_centred() {
        let k = kernel_component(Some(2), &RatingScale::five_level(), 0.15);
        let raw = [
            (-10.0f64 / 3.0).exp(),
            (-5.0f64 / 3.0).exp(),
            1.0,
            (-5.0f64 / 3.0).exp(),
            (-10.0f64 / 3.0).exp(),
        ];
        let total: f64 = raw.iter().sum();
        for (p, r) in k.probs().iter().zip(raw) {
            assert_abs_diff_eq!(*p, r / total, epsilon = 1e-15);
        }
        assert_eq!(k.argmax(), 2);
        assert_abs_diff_eq!(k.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_shapes() {
        let scale = RatingScale::binary();
        let blank = TrainingSet::new(scale.clone(), 3, vec![RatingsVector::new(3)]).unwrap();
        let model = kde_fit(&blank, &KdeConfig::default()).unwrap();
        assert_eq!(model.n_components(), 1);
        for n in 0..3 {
            assert_eq!(model.marginal(0, n), &[0.5, 0.5]);
        }

        let v = RatingsVector::from_dense(&[Some(1), None]);
        let twins = TrainingSet::new(scale.clone(), 2, vec![v.clone(), v]).unwrap();
        let model = kde_fit(&twins, &KdeConfig::default()).unwrap();
        assert_eq!(model.weights(), &[0.5, 0.5]);
        assert_eq!(model.marginal(0, 0), model.marginal(1, 0));
        assert_eq!(
            model.marginal(0, 0),
            kernel_component(Some(1), &scale, 0.15).probs()
        );
    }

    #[test]
    fn fit_errors() {
        let empty = TrainingSet::empty(RatingScale::binary(), 2);
        assert!(matches!(
            kde_fit(&empty, &KdeConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
        let one = TrainingSet::new(RatingScale::binary(), 1, vec![RatingsVector::new(1)]).unwrap();
        assert!(kde_fit(&one, &KdeConfig { beta: 0.0 }).is_err());
    }
}
