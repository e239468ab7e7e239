//! Ratings, rating scales and PMFs over a scale.
//!
//! Ratings are stored as level indices into a [`RatingScale`], never as raw
//! floats, so equality between ratings is exact. A product without a rating
//! ("?") is simply absent from a [`RatingsVector`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for probability sums.
pub const PROB_TOL: f64 = 1e-12;

/// Finite, strictly increasing set of admissible rating values in `[0, 1]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatingScale {
    levels: Arc<[f64]>,
}

impl PartialEq for RatingScale {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.levels, &other.levels) || self.levels[..] == other.levels[..]
    }
}

impl RatingScale {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidScale("at least two levels required".into()));
        }
        if levels.len() > u8::MAX as usize {
            return Err(Error::InvalidScale("too many levels".into()));
        }
        if levels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidScale("levels must lie in [0, 1]".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScale(
                "levels must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            levels: levels.into(),
        })
    }

    /// `k` evenly spaced levels `0, 1/(k-1), ..., 1`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidScale("at least two levels required".into()));
        }
        Self::new((0..k).map(|i| i as f64 / (k - 1) as f64).collect())
    }

    pub fn binary() -> Self {
        Self::uniform(2).expect("binary scale")
    }

    /// `{0, 0.25, 0.5, 0.75, 1}`, the normalization of 1-5 star ratings.
    pub fn five_level() -> Self {
        Self::uniform(5).expect("five level scale")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn value(&self, level: u8) -> f64 {
        self.levels[level as usize]
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    pub fn top_level(&self) -> u8 {
        (self.levels.len() - 1) as u8
    }

    pub fn is_binary(&self) -> bool {
        self.levels[..] == [0.0, 1.0]
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min(), self.max())
    }

    pub(crate) fn check_level(&self, level: u8) -> Result<()> {
        if (level as usize) < self.len() {
            Ok(())
        } else {
            Err(Error::LevelOutOfRange {
                level: level as usize,
                levels: self.len(),
            })
        }
    }
}

/// Sparse ratings vector over `N` products. Absent products are unrated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingsVector {
    len: usize,
    entries: BTreeMap<usize, u8>,
}

impl RatingsVector {
    /// All-"?" vector over `len` products.
    pub fn new(len: usize) -> Self {
        Self {
            len,
            entries: BTreeMap::new(),
        }
    }

    /// Dense constructor; `None` marks an unrated product.
    pub fn from_dense(levels: &[Option<u8>]) -> Self {
        Self {
            len: levels.len(),
            entries: levels
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.map(|l| (i, l)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, product: usize) -> Option<u8> {
        self.entries.get(&product).copied()
    }

    pub fn set(&mut self, product: usize, level: u8) -> Result<()> {
        if product >= self.len {
            return Err(Error::ProductOutOfRange {
                index: product,
                n_products: self.len,
            });
        }
        self.entries.insert(product, level);
        Ok(())
    }

    pub fn remove(&mut self, product: usize) -> Option<u8> {
        self.entries.remove(&product)
    }

    /// `(product, level)` pairs in ascending product order.
    pub fn rated(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.entries.iter().map(|(&p, &l)| (p, l))
    }

    pub fn rated_count(&self) -> usize {
        self.entries.len()
    }

    /// Number of "?" entries.
    pub fn question_count(&self) -> usize {
        self.len - self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<Option<u8>> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Copy of `self` keeping only the given products.
    pub fn restricted_to(&self, products: &[usize]) -> Self {
        let mut out = Self::new(self.len);
        for &p in products {
            if let Some(l) = self.get(p) {
                out.entries.insert(p, l);
            }
        }
        out
    }
}

/// Ordered collection of ratings vectors sharing a scale and product count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    scale: RatingScale,
    n_products: usize,
    vectors: Vec<RatingsVector>,
}

impl TrainingSet {
    pub fn new(scale: RatingScale, n_products: usize, vectors: Vec<RatingsVector>) -> Result<Self> {
        for v in &vectors {
            if v.len() != n_products {
                return Err(Error::LengthMismatch {
                    expected: n_products,
                    found: v.len(),
                });
            }
            for (_, level) in v.rated() {
                scale.check_level(level)?;
            }
        }
        Ok(Self {
            scale,
            n_products,
            vectors,
        })
    }

    pub fn empty(scale: RatingScale, n_products: usize) -> Self {
        Self {
            scale,
            n_products,
            vectors: Vec::new(),
        }
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[RatingsVector] {
        &self.vectors
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RatingsVector> {
        self.vectors.iter()
    }

    pub fn into_vectors(self) -> Vec<RatingsVector> {
        self.vectors
    }

    /// `(self, other)` as one training set.
    pub fn concat(&self, other: &TrainingSet) -> Result<TrainingSet> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch);
        }
        if self.n_products != other.n_products {
            return Err(Error::LengthMismatch {
                expected: self.n_products,
                found: other.n_products,
            });
        }
        let mut vectors = self.vectors.clone();
        vectors.extend_from_slice(&other.vectors);
        Ok(TrainingSet {
            scale: self.scale.clone(),
            n_products: self.n_products,
            vectors,
        })
    }

    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            scale: self.scale.clone(),
            n_products: self.n_products,
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
        }
    }

    pub fn question_count(&self) -> usize {
        self.vectors.iter().map(RatingsVector::question_count).sum()
    }

    /// Fraction of "?" cells; 0 for an empty set.
    pub fn question_fraction(&self) -> f64 {
        let cells = self.len() * self.n_products;
        if cells == 0 {
            0.0
        } else {
            self.question_count() as f64 / cells as f64
        }
    }

    /// Per-level rating counts of one product.
    pub fn product_counts(&self, product: usize) -> Vec<usize> {
        let mut counts = vec![0; self.scale.len()];
        for v in &self.vectors {
            if let Some(l) = v.get(product) {
                counts[l as usize] += 1;
            }
        }
        counts
    }
}

/// PMF over the levels of a rating scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingPmf {
    scale: RatingScale,
    probs: Vec<f64>,
}

impl RatingPmf {
    pub fn new(scale: RatingScale, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != scale.len() {
            return Err(Error::InvalidPmf(format!(
                "{} probabilities for {} levels",
                probs.len(),
                scale.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPmf("negative or non-finite mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPmf(format!("masses sum to {total}")));
        }
        Ok(Self { scale, probs })
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(scale: RatingScale, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.len() != scale.len()
            || total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || !total.is_finite()
        {
            return Err(Error::InvalidPmf("weights cannot be normalized".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(scale, weights)
    }

    pub fn uniform(scale: RatingScale) -> Self {
        let k = scale.len();
        Self {
            scale,
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(scale: RatingScale, level: u8) -> Self {
        let mut probs = vec![0.0; scale.len()];
        probs[level as usize] = 1.0;
        Self { scale, probs }
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, level: u8) -> f64 {
        self.probs[level as usize]
    }

    /// Level of maximal mass; the lowest such level on ties.
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as u8
    }
}

fn same_scale(p: &RatingPmf, q: &RatingPmf) -> Result<()> {
    if p.scale == q.scale {
        Ok(())
    } else {
        Err(Error::ScaleMismatch)
    }
}

/// `D(p || q)` in nats; `0 ln(0/q)` counts as zero.
pub fn kl_divergence(p: &RatingPmf, q: &RatingPmf) -> Result<f64> {
    same_scale(p, q)?;
    let mut d = 0.0;
    for (level, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::AbsoluteContinuityViolation { level });
            }
            d += a * (a / b).ln();
        }
    }
    // Rounding can push D(p||p) a hair below zero.
    Ok(d.max(0.0))
}

pub fn pmf_mean(p: &RatingPmf) -> f64 {
    p.probs
        .iter()
        .zip(p.scale.levels())
        .map(|(pr, v)| pr * v)
        .sum()
}

pub fn l1_distance(p: &RatingPmf, q: &RatingPmf) -> Result<f64> {
    same_scale(p, q)?;
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Convex combination of PMFs over a shared scale.
pub fn mix_pmfs(parts: &[(f64, &RatingPmf)]) -> Result<RatingPmf> {
    let (_, first) = parts.first().ok_or(Error::WeightSumViolation(0.0))?;
    let scale = first.scale.clone();
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > PROB_TOL {
        return Err(Error::WeightSumViolation(total));
    }
    let mut probs = vec![0.0; scale.len()];
    for (w, pmf) in parts {
        if pmf.scale != scale {
            return Err(Error::ScaleMismatch);
        }
        for (acc, p) in probs.iter_mut().zip(&pmf.probs) {
            *acc += w * p;
        }
    }
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    RatingPmf::new(scale, probs)
}

/// Order `ν` in which an active user inspects products.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspectionOrder {
    order: Vec<usize>,
}

impl InspectionOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &p in &order {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidOrder(n));
            }
        }
        Ok(Self { order })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    /// First `n` inspected products.
    pub fn prefix(&self, n: usize) -> &[usize] {
        &self.order[..n.min(self.order.len())]
    }
}
