use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::Predictor;
use crate::distortion::{DistortionSeries, Measure, TrajectoryLaw};
use crate::error::{Error, Result};
use crate::ratings::{kl_divergence, InspectionOrder, RatingPmf, RatingsVector};
use crate::seeds::derive;

const CHUNK: usize = 256;

/// Monte-Carlo estimate of a distortion measure with plain standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSeries {
    pub measure: Measure,
    pub samples: usize,
    pub seed: u64,
    /// Sample mean of the step-`k` term (a squared difference for RMS).
    pub per_step_mean: Vec<f64>,
    pub per_step_se: Vec<f64>,
    /// Sample mean of the per-trajectory average over all `n` steps.
    pub pooled_mean: f64,
    pub pooled_se: f64,
}

impl McSeries {
    pub fn as_series(&self) -> DistortionSeries {
        DistortionSeries {
            measure: self.measure,
            per_step: self.per_step_mean.clone(),
        }
    }

    /// Point estimate of the distortion after all `n` steps.
    pub fn value(&self) -> f64 {
        self.as_series().average()
    }
}

struct Law<'a>(&'a dyn Predictor);

impl TrajectoryLaw for Law<'_> {
    fn next_pmf(&self, product: usize, history: &RatingsVector) -> RatingPmf {
        self.0
            .predict_pmf(product, history)
            .expect("probabilistic clean model")
    }
}

#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    pooled: f64,
    pooled_sq: f64,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
            pooled: 0.0,
            pooled_sq: 0.0,
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.pooled += other.pooled;
        self.pooled_sq += other.pooled_sq;
        self
    }
}

fn sample_level<R: Rng>(pmf: &RatingPmf, rng: &mut R) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in pmf.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    // Rounding left `u` above the cumulative sum; take the last level with mass.
    pmf.probs().iter().rposition(|&p| p > 0.0).unwrap_or(0) as u8
}

fn step_term(
    measure: Measure,
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    product: usize,
    history: &RatingsVector,
) -> Result<f64> {
    Ok(match measure {
        Measure::Rms => {
            let d =
                clean.predict_scalar(product, history) - corrupt.predict_scalar(product, history);
            d * d
        }
        Measure::Kl | Measure::Binary => {
            let p = clean
                .predict_pmf(product, history)
                .ok_or(Error::NotProbabilistic)?;
            let q = corrupt
                .predict_pmf(product, history)
                .ok_or(Error::NotProbabilistic)?;
            if measure == Measure::Kl {
                kl_divergence(&p, &q)?
            } else {
                let pick = |pmf: &RatingPmf| u8::from(pmf.prob(1) >= 0.5);
                p.prob(pick(&p)) - p.prob(pick(&q))
            }
        }
    })
}

/// Trajectory-sampling estimate with the clean model as the trajectory law.
pub fn distortion_monte_carlo(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
    samples: usize,
    seed: u64,
    measure: Measure,
) -> Result<McSeries> {
    if clean
        .predict_pmf(0, &RatingsVector::new(clean.n_products()))
        .is_none()
    {
        return Err(Error::NotProbabilistic);
    }
    distortion_monte_carlo_with_law(
        &Law(clean),
        clean,
        corrupt,
        order,
        n,
        samples,
        seed,
        measure,
    )
}

/// Trajectory-sampling estimate under an explicit law. Samples are split into
/// fixed chunks with their own derived seeds and reduced in chunk order, so the
/// result does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn distortion_monte_carlo_with_law(
    law: &dyn TrajectoryLaw,
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
    samples: usize,
    seed: u64,
    measure: Measure,
) -> Result<McSeries> {
    if samples == 0 {
        return Err(Error::InvalidConfig("at least one sample required".into()));
    }
    if n == 0 || n > order.len() {
        return Err(Error::InvalidConfig(format!(
            "n = {n} outside 1..={}",
            order.len()
        )));
    }
    if measure == Measure::Binary && !clean.scale().is_binary() {
        return Err(Error::NonBinaryScale);
    }
    let products = order.prefix(n);
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<Moments> {
            let mut rng = crate::seeds::SeedStream::new(derive(seed, chunk as u64)).rng();
            let mut m = Moments::new(n);
            let count = CHUNK.min(samples - chunk * CHUNK);
            for _ in 0..count {
                let mut history = RatingsVector::new(order.len());
                let mut total = 0.0;
                for (k, &product) in products.iter().enumerate() {
                    let t = step_term(measure, clean, corrupt, product, &history)?;
                    m.sum[k] += t;
                    m.sum_sq[k] += t * t;
                    total += t;
                    if k + 1 < n {
                        let level = sample_level(&law.next_pmf(product, &history), &mut rng);
                        history.set(product, level)?;
                    }
                }
                let avg = total / n as f64;
                m.pooled += avg;
                m.pooled_sq += avg * avg;
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let total = partials.iter().fold(Moments::new(n), |acc, m| acc.merge(m));

    let s = samples as f64;
    let se = |sum: f64, sum_sq: f64| {
        if samples < 2 {
            return f64::NAN;
        }
        let mean = sum / s;
        let var = ((sum_sq - s * mean * mean) / (s - 1.0)).max(0.0);
        (var / s).sqrt()
    };
    Ok(McSeries {
        measure,
        samples,
        seed,
        per_step_mean: total.sum.iter().map(|v| v / s).collect(),
        per_step_se: total
            .sum
            .iter()
            .zip(&total.sum_sq)
            .map(|(a, b)| se(*a, *b))
            .collect(),
        pooled_mean: total.pooled / s,
        pooled_se: se(total.pooled, total.pooled_sq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{kde_fit, KdeConfig};
    use crate::distortion::kl_distortion_exact;
    use crate::ratings::{RatingScale, TrainingSet};

    fn instance() -> (TrainingSet, TrainingSet) {
        let v = |d: &[Option<u8>]| RatingsVector::from_dense(d);
        let y = TrainingSet::new(
            RatingScale::binary(),
            5,
            vec![
                v(&[Some(1), Some(1), None, Some(0), Some(1)]),
                v(&[Some(0), None, Some(1), Some(0), None]),
                v(&[Some(1), Some(0), Some(1), None, Some(1)]),
                v(&[None, Some(1), Some(0), Some(1), Some(0)]),
                v(&[Some(0), Some(0), Some(0), None, None]),
                v(&[Some(1), None, None, Some(1), Some(1)]),
            ],
        )
        .unwrap();
        let z = TrainingSet::new(
            RatingScale::binary(),
            5,
            vec![
                v(&[Some(0), Some(1), Some(0), Some(1), Some(0)]),
                v(&[Some(0), Some(1), Some(0), Some(1), Some(0)]),
            ],
        )
        .unwrap();
        (y, z)
    }

    #[test]
    fn identical_models_give_exact_zero() {
        let (y, _) = instance();
        let model = kde_fit(&y, &KdeConfig::default()).unwrap();
        let order = InspectionOrder::identity(5);
        for measure in [Measure::Kl, Measure::Rms, Measure::Binary] {
            let mc = distortion_monte_carlo(&model, &model, &order, 5, 300, 1, measure).unwrap();
            assert_eq!(mc.value(), 0.0);
        }
    }

    #[test]
    fn agrees_with_enumeration() {
        let (y, z) = instance();
        let clean = kde_fit(&y, &KdeConfig::default()).unwrap();
        let corrupt = kde_fit(&y.concat(&z).unwrap(), &KdeConfig::default()).unwrap();
        let order = InspectionOrder::new(vec![2, 0, 4, 1, 3]).unwrap();
        let exact = kl_distortion_exact(&clean, &corrupt, &order, 5).unwrap();
        let mc =
            distortion_monte_carlo(&clean, &corrupt, &order, 5, 100_000, 42, Measure::Kl).unwrap();
        assert!(
            (mc.pooled_mean - exact.average()).abs() <= 3.0 * mc.pooled_se,
            "mc {} ± {} vs exact {}",
            mc.pooled_mean,
            mc.pooled_se,
            exact.average()
        );
        for k in 0..5 {
            assert!(
                (mc.per_step_mean[k] - exact.per_step[k]).abs() <= 4.0 * mc.per_step_se[k] + 1e-15
            );
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let (y, z) = instance();
        let clean = kde_fit(&y, &KdeConfig::default()).unwrap();
        let corrupt = kde_fit(&y.concat(&z).unwrap(), &KdeConfig::default()).unwrap();
        let order = InspectionOrder::identity(5);
        let a = distortion_monte_carlo(&clean, &corrupt, &order, 4, 1000, 9, Measure::Rms).unwrap();
        let b = distortion_monte_carlo(&clean, &corrupt, &order, 4, 1000, 9, Measure::Rms).unwrap();
        assert_eq!(a, b);
    }
}
