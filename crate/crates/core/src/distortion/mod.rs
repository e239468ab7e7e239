//! Distortion of predictions caused by manipulated training data.
//!
//! An active user inspects products in a fixed order and rates each one by
//! sampling from the clean-data prediction. At step `k` the clean and corrupted
//! predictions for the next product are compared; a distortion measure is the
//! expected comparison averaged over the first `n` steps. [`exact`] evaluates
//! the expectation by enumerating every history, [`monte_carlo`] by sampling
//! trajectories, and [`empirical`] replaces the simulated user by held-out
//! users.

mod bounds;
pub mod empirical;
pub mod exact;
pub mod monte_carlo;

pub use bounds::{kl_bound, rms_bound};
pub use empirical::{
    empirical_rms_distortion, empirical_rms_distortion_series, empirical_rms_prediction_error,
    empirical_rms_prediction_error_series, sample_orders,
};
pub use exact::{
    binary_distortion_exact, exact_distortions, kl_distortion_exact, rms_distortion_exact,
    rms_distortion_exact_with_law, ExactDistortions, MAX_HISTORIES,
};
pub use monte_carlo::{distortion_monte_carlo, distortion_monte_carlo_with_law, McSeries};

use serde::{Deserialize, Serialize};

use crate::algorithms::{mixture_predict_pmf, MixtureTypeModel};
use crate::ratings::{RatingPmf, RatingScale, RatingsVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    /// Expected KL divergence of the corrupted from the clean predictive PMF.
    Kl,
    /// Root of the expected squared difference of scalar predictions.
    Rms,
    /// Expected drop in the probability of a correct thresholded prediction.
    Binary,
}

/// Per-step expectations `E_k`, `k = 1..=n`, of one measure.
///
/// For [`Measure::Rms`] the entries are expected squared differences and
/// [`value`](Self::value) takes the root of their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionSeries {
    pub measure: Measure,
    pub per_step: Vec<f64>,
}

impl DistortionSeries {
    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }

    /// Distortion after `n` steps.
    pub fn value(&self, n: usize) -> f64 {
        assert!(
            n >= 1 && n <= self.per_step.len(),
            "n = {n} outside 1..={}",
            self.per_step.len()
        );
        let mean = self.per_step[..n].iter().sum::<f64>() / n as f64;
        match self.measure {
            Measure::Rms => mean.max(0.0).sqrt(),
            Measure::Kl | Measure::Binary => mean,
        }
    }

    /// `value(n)` for every `n`.
    pub fn values(&self) -> Vec<f64> {
        (1..=self.len()).map(|n| self.value(n)).collect()
    }

    /// Distortion over all steps.
    pub fn average(&self) -> f64 {
        self.value(self.len())
    }
}

/// Law of the simulated active user's next rating.
pub trait TrajectoryLaw: Sync {
    fn next_pmf(&self, product: usize, history: &RatingsVector) -> RatingPmf;
}

impl TrajectoryLaw for MixtureTypeModel {
    fn next_pmf(&self, product: usize, history: &RatingsVector) -> RatingPmf {
        mixture_predict_pmf(self, product, history)
    }
}

/// Degenerate law: the user always rates according to one fixed type.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMassLaw {
    scale: RatingScale,
    levels: Vec<u8>,
}

impl PointMassLaw {
    pub fn new(scale: RatingScale, levels: Vec<u8>) -> Self {
        Self { scale, levels }
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }
}

impl TrajectoryLaw for PointMassLaw {
    fn next_pmf(&self, product: usize, _history: &RatingsVector) -> RatingPmf {
        RatingPmf::point_mass(self.scale.clone(), self.levels[product])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
    Empirical,
}

/// Distortion values per prefix length next to the theoretical bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub n_values: Vec<usize>,
    pub kl: Option<Vec<f64>>,
    pub rms: Option<Vec<f64>>,
    pub binary: Option<Vec<f64>>,
    pub kl_bound: Vec<f64>,
    pub rms_bound: Vec<f64>,
    pub r: f64,
    pub method: Method,
}

impl DistortionReport {
    /// Report over `n = 1..=n_max`; every supplied series must cover `n_max`
    /// prefix lengths.
    pub fn new(
        r: f64,
        method: Method,
        n_max: usize,
        kl: Option<Vec<f64>>,
        rms: Option<Vec<f64>>,
        binary: Option<Vec<f64>>,
    ) -> Self {
        for s in [&kl, &rms, &binary].into_iter().flatten() {
            assert_eq!(s.len(), n_max, "series length must match n_max");
        }
        let n_values: Vec<usize> = (1..=n_max).collect();
        Self {
            kl_bound: n_values.iter().map(|&n| kl_bound(n, r)).collect(),
            rms_bound: n_values.iter().map(|&n| rms_bound(n, r)).collect(),
            n_values,
            kl,
            rms,
            binary,
            r,
            method,
        }
    }

    /// Prefix lengths at which a supplied series exceeds its bound by more
    /// than `tol`.
    pub fn bound_violations(&self, tol: f64) -> Vec<(Measure, usize)> {
        let mut out = Vec::new();
        for (measure, series, bound) in [
            (Measure::Kl, &self.kl, &self.kl_bound),
            (Measure::Rms, &self.rms, &self.rms_bound),
        ] {
            if let Some(series) = series {
                for ((&n, v), b) in self.n_values.iter().zip(series).zip(bound) {
                    if *v > b + tol {
                        out.push((measure, n));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_values() {
        let s = DistortionSeries {
            measure: Measure::Rms,
            per_step: vec![1.0 / 9.0, 0.0, 1.0 / 9.0, 0.0],
        };
        assert!((s.value(2) - 1.0 / 18f64.sqrt()).abs() < 1e-15);
        assert!((s.value(1) - 1.0 / 3.0).abs() < 1e-15);
        let k = DistortionSeries {
            measure: Measure::Kl,
            per_step: vec![0.3, 0.1],
        };
        assert_eq!(k.values(), vec![0.3, 0.2]);
    }

    #[test]
    fn report_bounds_are_closed_forms() {
        let report = DistortionReport::new(0.1, Method::Exact, 40, None, Some(vec![0.0; 40]), None);
        for (i, &n) in report.n_values.iter().enumerate() {
            assert_eq!(report.rms_bound[i], rms_bound(n, 0.1));
            assert_eq!(report.kl_bound[i], kl_bound(n, 0.1));
        }
        assert!(report.bound_violations(0.0).is_empty());
        let loud =
            DistortionReport::new(0.1, Method::Empirical, 2, None, Some(vec![0.0, 1.0]), None);
        assert_eq!(loud.bound_violations(1e-9), vec![(Measure::Rms, 2)]);
    }
}
