//! Brute-force reference over the full type space: a mixture expanded into an
//! explicit table with one entry per complete rating vector.

use rayon::prelude::*;

use crate::algorithms::MixtureTypeModel;
use crate::error::{Error, Result};
use crate::ratings::{RatingPmf, RatingScale, RatingsVector};

/// Largest table `densify` will build.
pub const MAX_DENSE: f64 = 1e7;

/// Explicit PMF over complete rating vectors. Entry `i` belongs to the vector
/// whose level at product `n` is digit `n` of `i` in base `|S|`, product 0
/// least significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTypePmf {
    scale: RatingScale,
    n_products: usize,
    probs: Vec<f64>,
}

impl DenseTypePmf {
    pub fn new(scale: RatingScale, n_products: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = table_size(&scale, n_products)?;
        if probs.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: probs.len(),
            });
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidPmf(format!("dense table sums to {total}")));
        }
        Ok(Self {
            scale,
            n_products,
            probs,
        })
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Level of product `n` in the vector at table index `index`.
    pub fn level(&self, index: usize, n: usize) -> u8 {
        let k = self.scale.len();
        (index / k.pow(n as u32) % k) as u8
    }

    /// Table index of a complete vector.
    pub fn index_of(&self, levels: &[u8]) -> usize {
        let k = self.scale.len();
        levels.iter().rev().fold(0, |acc, &l| acc * k + l as usize)
    }

    fn consistent(&self, index: usize, history: &RatingsVector) -> bool {
        history.rated().all(|(n, l)| self.level(index, n) == l)
    }
}

fn table_size(scale: &RatingScale, n: usize) -> Result<usize> {
    let size = (scale.len() as f64).powi(n as i32);
    if size > MAX_DENSE {
        return Err(Error::TooLarge(size));
    }
    Ok(scale.len().pow(n as u32))
}

pub fn densify(model: &MixtureTypeModel) -> Result<DenseTypePmf> {
    let scale = model.scale().clone();
    let n = model.n_products();
    let k = scale.len();
    let size = table_size(&scale, n)?;
    let probs = (0..size)
        .into_par_iter()
        .map(|index| {
            model
                .weights()
                .iter()
                .enumerate()
                .map(|(c, w)| {
                    let mut rest = index;
                    let mut p = *w;
                    for product in 0..n {
                        p *= model.marginal(c, product)[rest % k];
                        rest /= k;
                    }
                    p
                })
                .sum()
        })
        .collect();
    Ok(DenseTypePmf {
        scale,
        n_products: n,
        probs,
    })
}

/// Predictive PMF of `product` given `history`, by summing the table.
/// The history's own entry for `product`, if any, is ignored.
pub fn dense_condition(
    t: &DenseTypePmf,
    history: &RatingsVector,
    product: usize,
) -> Result<RatingPmf> {
    if product >= t.n_products {
        return Err(Error::ProductOutOfRange {
            index: product,
            n_products: t.n_products,
        });
    }
    let mut evidence = history.clone();
    evidence.remove(product);
    let mut weights = vec![0.0; t.scale.len()];
    for (index, p) in t.probs.iter().enumerate() {
        if *p > 0.0 && t.consistent(index, &evidence) {
            weights[t.level(index, product) as usize] += p;
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    RatingPmf::from_weights(t.scale.clone(), weights)
}

/// KL divergence of `b` from `a` over the whole table.
pub fn dense_kl(a: &DenseTypePmf, b: &DenseTypePmf) -> Result<f64> {
    if a.scale != b.scale {
        return Err(Error::ScaleMismatch);
    }
    if a.n_products != b.n_products {
        return Err(Error::LengthMismatch {
            expected: a.n_products,
            found: b.n_products,
        });
    }
    let mut total = 0.0;
    for (index, (&p, &q)) in a.probs.iter().zip(&b.probs).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { level: index });
        }
        total += p * (p / q).ln();
    }
    Ok(total.max(0.0))
}
