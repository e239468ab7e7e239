//! Manipulated-data constructions: a random push attack and two analytic
//! instances (the nearest-neighbor worst case and the four-block toy).

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distortion::PointMassLaw;
use crate::error::{Error, Result};
use crate::ratings::{InspectionOrder, RatingScale, RatingsVector, TrainingSet};
use crate::seeds::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushAttackConfig {
    /// Fraction of products pushed to the top rating.
    pub promote_fraction: f64,
    /// Number of attacker profiles.
    pub count: usize,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushAttack {
    pub profiles: TrainingSet,
    /// Promoted products, ascending.
    pub promoted: Vec<usize>,
}

/// Attacker profiles that rate promoted products at the top level and every
/// other product by sampling its empirical marginal in `honest`; cells are
/// then hidden uniformly at random until the "?" fraction matches `honest`.
pub fn generate_push_attack(honest: &TrainingSet, cfg: &PushAttackConfig) -> Result<PushAttack> {
    if honest.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(cfg.promote_fraction > 0.0 && cfg.promote_fraction <= 1.0) || cfg.count == 0 {
        return Err(Error::InvalidConfig(format!("invalid push attack {cfg:?}")));
    }
    let scale = honest.scale();
    let n = honest.n_products();
    let mut rng = SeedStream::new(cfg.rng_seed).rng();

    let n_promoted = (cfg.promote_fraction * n as f64).floor() as usize;
    let mut promoted = index::sample(&mut rng, n, n_promoted).into_vec();
    promoted.sort_unstable();
    let mut is_promoted = vec![false; n];
    promoted.iter().for_each(|&p| is_promoted[p] = true);

    // Cumulative empirical marginals; uniform where nobody rated the product.
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|p| {
            let counts = honest.product_counts(p);
            let total: usize = counts.iter().sum();
            let mut acc = 0.0;
            counts
                .iter()
                .map(|&c| {
                    acc += if total == 0 {
                        1.0 / scale.len() as f64
                    } else {
                        c as f64 / total as f64
                    };
                    acc
                })
                .collect()
        })
        .collect();

    let top = scale.top_level();
    let mut dense: Vec<Vec<Option<u8>>> = (0..cfg.count)
        .map(|_| {
            (0..n)
                .map(|p| {
                    if is_promoted[p] {
                        Some(top)
                    } else {
                        let u: f64 = rng.gen();
                        let level = cumulative[p]
                            .iter()
                            .position(|&c| u < c)
                            .unwrap_or(scale.len() - 1);
                        Some(level as u8)
                    }
                })
                .collect()
        })
        .collect();

    let cells = cfg.count * n;
    let hidden = (honest.question_fraction() * cells as f64).round() as usize;
    for cell in index::sample(&mut rng, cells, hidden.min(cells)) {
        dense[cell / n][cell % n] = None;
    }
    let profiles = TrainingSet::new(
        scale.clone(),
        n,
        dense.iter().map(|d| RatingsVector::from_dense(d)).collect(),
    )?;
    Ok(PushAttack { profiles, promoted })
}

/// Honest and manipulated data on which the simple nearest-neighbor rule keeps
/// a constant RMS distortion of `1/(3√2)` at every even history length.
///
/// Products come in pairs `(2j, 2j+1)`. The single honest type rates the
/// first product of each pair 1 and the second 0. Every honest vector shows
/// a distinct subset of pairs and hides the rest; its manipulated partner
/// copies it and fills the hidden pairs with `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCaseInstance {
    pub honest: TrainingSet,
    pub manipulated: TrainingSet,
    pub order: InspectionOrder,
    /// Levels of the honest type, `1, 0, 1, 0, ...`.
    pub clean_type: Vec<u8>,
}

impl WorstCaseInstance {
    pub fn n_products(&self) -> usize {
        self.clean_type.len()
    }

    /// Manipulated fraction; exactly 1/2.
    pub fn r(&self) -> f64 {
        self.manipulated.len() as f64 / (self.honest.len() + self.manipulated.len()) as f64
    }

    /// Trajectory law of the clean run: the active user is the honest type.
    pub fn clean_law(&self) -> PointMassLaw {
        PointMassLaw::new(self.honest.scale().clone(), self.clean_type.clone())
    }

    /// History after the honest type has rated the first `k` products.
    pub fn clean_history(&self, k: usize) -> RatingsVector {
        let mut h = RatingsVector::new(self.n_products());
        for p in 0..k {
            h.set(p, self.clean_type[p]).expect("in range");
        }
        h
    }
}

pub const WORST_CASE_MAX_N: usize = 24;

pub fn build_worst_case_instance(n: usize) -> Result<WorstCaseInstance> {
    if n % 2 == 1 || n == 0 {
        return Err(Error::OddN(n));
    }
    if n > WORST_CASE_MAX_N {
        return Err(Error::TooLarge(2f64.powi(n as i32 / 2)));
    }
    let pairs = n / 2;
    let clean_type: Vec<u8> = (0..n).map(|p| u8::from(p % 2 == 0)).collect();
    let mut honest = Vec::with_capacity(1 << pairs);
    let mut manipulated = Vec::with_capacity(1 << pairs);
    // Bit (pairs - 1 - j) of `mask` hides pair j, so mask 0 is the full type.
    for mask in 0..(1usize << pairs) {
        let mut y = RatingsVector::new(n);
        let mut z = RatingsVector::new(n);
        for j in 0..pairs {
            let hidden = mask >> (pairs - 1 - j) & 1 == 1;
            let (a, b) = (2 * j, 2 * j + 1);
            if hidden {
                z.set(a, 0)?;
                z.set(b, 1)?;
            } else {
                y.set(a, 1)?;
                y.set(b, 0)?;
                z.set(a, 1)?;
                z.set(b, 0)?;
            }
        }
        honest.push(y);
        manipulated.push(z);
    }
    let scale = RatingScale::binary();
    Ok(WorstCaseInstance {
        honest: TrainingSet::new(scale.clone(), n, honest)?,
        manipulated: TrainingSet::new(scale, n, manipulated)?,
        order: InspectionOrder::identity(n),
        clean_type,
    })
}

/// Honest data: `k` all-1 vectors and `k` all-"?" vectors. Manipulated data:
/// `k` all-0 vectors and `k` all-"?" vectors. Binary scale, `n` products.
pub fn build_block_toy(k: usize, n: usize) -> Result<(TrainingSet, TrainingSet)> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidConfig(
            "block toy needs k >= 1 and n >= 1".into(),
        ));
    }
    let filled = |level: u8| RatingsVector::from_dense(&vec![Some(level); n]);
    let blank = RatingsVector::new(n);
    let block = |level: u8| -> Vec<RatingsVector> {
        std::iter::repeat_n(filled(level), k)
            .chain(std::iter::repeat_n(blank.clone(), k))
            .collect()
    };
    let scale = RatingScale::binary();
    Ok((
        TrainingSet::new(scale.clone(), n, block(1))?,
        TrainingSet::new(scale, n, block(0))?,
    ))
}
