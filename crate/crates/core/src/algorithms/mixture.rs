use crate::algorithms::Predictor;
use crate::error::{Error, Result};
use crate::ratings::{pmf_mean, RatingPmf, RatingScale, RatingsVector};

const WEIGHT_TOL: f64 = 1e-10;

/// Per-component product marginals.
#[derive(Clone, Debug)]
enum Marginals {
    /// `probs[(c * n_products + n) * levels + s]`.
    Table { probs: Vec<f64>, ln_probs: Vec<f64> },
    /// Kernel mixture: component `c` uses kernel row `codes[c * n_products + n]`,
    /// where code `levels` is the "?" kernel.
    Kernel {
        kernels: Vec<f64>,
        ln_kernels: Vec<f64>,
        codes: Vec<u8>,
    },
}

/// PMF over `S̄^N` written as a finite mixture of product-form components.
#[derive(Clone, Debug)]
pub struct MixtureTypeModel {
    scale: RatingScale,
    n_products: usize,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    marginals: Marginals,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::WeightSumViolation(total));
    }
    Ok(())
}

impl MixtureTypeModel {
    /// Mixture with explicit marginals: `marginals[c][n]` is the product-`n`
    /// marginal of component `c`.
    pub fn new(
        scale: RatingScale,
        weights: Vec<f64>,
        marginals: Vec<Vec<RatingPmf>>,
    ) -> Result<Self> {
        check_weights(&weights)?;
        if marginals.len() != weights.len() {
            return Err(Error::InvalidConfig(
                "one marginal row per component".into(),
            ));
        }
        let n_products = marginals[0].len();
        let mut probs = Vec::with_capacity(weights.len() * n_products * scale.len());
        for row in &marginals {
            if row.len() != n_products {
                return Err(Error::LengthMismatch {
                    expected: n_products,
                    found: row.len(),
                });
            }
            for pmf in row {
                if *pmf.scale() != scale {
                    return Err(Error::ScaleMismatch);
                }
                probs.extend_from_slice(pmf.probs());
            }
        }
        Ok(Self::from_table(scale, n_products, weights, probs))
    }

    pub(crate) fn from_table(
        scale: RatingScale,
        n_products: usize,
        weights: Vec<f64>,
        probs: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(probs.len(), weights.len() * n_products * scale.len());
        let ln_probs = probs.iter().map(|p| p.ln()).collect();
        Self {
            scale,
            n_products,
            ln_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            marginals: Marginals::Table { probs, ln_probs },
        }
    }

    pub(crate) fn from_kernels(
        scale: RatingScale,
        n_products: usize,
        weights: Vec<f64>,
        kernels: Vec<f64>,
        codes: Vec<u8>,
    ) -> Self {
        debug_assert_eq!(kernels.len(), (scale.len() + 1) * scale.len());
        debug_assert_eq!(codes.len(), weights.len() * n_products);
        let ln_kernels = kernels.iter().map(|p| p.ln()).collect();
        Self {
            scale,
            n_products,
            ln_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            marginals: Marginals::Kernel {
                kernels,
                ln_kernels,
                codes,
            },
        }
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Product-`n` marginal of component `c` as a slice over levels.
    pub fn marginal(&self, c: usize, n: usize) -> &[f64] {
        let k = self.scale.len();
        match &self.marginals {
            Marginals::Table { probs, .. } => {
                let at = (c * self.n_products + n) * k;
                &probs[at..at + k]
            }
            Marginals::Kernel { kernels, codes, .. } => {
                let at = codes[c * self.n_products + n] as usize * k;
                &kernels[at..at + k]
            }
        }
    }

    pub fn marginal_pmf(&self, c: usize, n: usize) -> RatingPmf {
        RatingPmf::from_weights(self.scale.clone(), self.marginal(c, n).to_vec())
            .expect("marginals are normalized at construction")
    }

    #[inline]
    fn ln_marginal_at(&self, c: usize, n: usize, level: u8) -> f64 {
        let k = self.scale.len();
        match &self.marginals {
            Marginals::Table { ln_probs, .. } => {
                ln_probs[(c * self.n_products + n) * k + level as usize]
            }
            Marginals::Kernel {
                ln_kernels, codes, ..
            } => ln_kernels[codes[c * self.n_products + n] as usize * k + level as usize],
        }
    }

    /// Smallest marginal mass over all components, products and levels.
    pub fn min_marginal(&self) -> f64 {
        match &self.marginals {
            Marginals::Table { probs, .. } => probs.iter().copied().fold(f64::INFINITY, f64::min),
            Marginals::Kernel { kernels, .. } => {
                kernels.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Unnormalized log posterior component weights given a history, skipping
    /// `skip` (the product being predicted).
    pub fn posterior_log_weights(&self, history: &RatingsVector, skip: Option<usize>) -> Vec<f64> {
        let rated: Vec<(usize, u8)> = history.rated().filter(|&(p, _)| Some(p) != skip).collect();
        (0..self.n_components())
            .map(|c| {
                rated.iter().fold(self.ln_weights[c], |acc, &(p, l)| {
                    acc + self.ln_marginal_at(c, p, l)
                })
            })
            .collect()
    }

    /// Log-probability of the history's rated entries under the mixture.
    pub fn log_evidence(&self, history: &RatingsVector) -> f64 {
        log_sum_exp(&self.posterior_log_weights(history, None))
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// PMF of the rating of `product` conditioned on the rated entries of
/// `history`, computed in log space against the largest component term.
pub fn mixture_predict_pmf(
    model: &MixtureTypeModel,
    product: usize,
    history: &RatingsVector,
) -> RatingPmf {
    let log_w = model.posterior_log_weights(history, Some(product));
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        max.is_finite(),
        "every mixture component assigns zero likelihood to the history"
    );
    let k = model.scale.len();
    let mut acc = vec![0.0; k];
    for (c, lw) in log_w.iter().enumerate() {
        let post = (lw - max).exp();
        if post == 0.0 {
            continue;
        }
        for (a, m) in acc.iter_mut().zip(model.marginal(c, product)) {
            *a += post * m;
        }
    }
    RatingPmf::from_weights(model.scale.clone(), acc).expect("positive posterior mass")
}

impl Predictor for MixtureTypeModel {
    fn scale(&self) -> &RatingScale {
        &self.scale
    }

    fn n_products(&self) -> usize {
        self.n_products
    }

    fn predict_scalar(&self, product: usize, history: &RatingsVector) -> f64 {
        pmf_mean(&mixture_predict_pmf(self, product, history))
    }

    fn predict_pmf(&self, product: usize, history: &RatingsVector) -> Option<RatingPmf> {
        Some(mixture_predict_pmf(self, product, history))
    }
}
