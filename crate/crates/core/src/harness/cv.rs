use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    kde_fit, knn_fit, nb_fit_path, KdeConfig, KnnConfig, NbConfig, Predictor, SimpleNnModel,
};
use crate::distortion::{empirical_rms_prediction_error, sample_orders};
use crate::error::{Error, Result};
use crate::ratings::TrainingSet;
use crate::seeds::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algo {
    Kde,
    Nb,
    Knn,
    SimpleNn,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Kde, Algo::Nb, Algo::Knn, Algo::SimpleNn];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Kde => "kde",
            Algo::Nb => "nb",
            Algo::Knn => "knn",
            Algo::SimpleNn => "simple-nn",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

/// A family of predictors indexed by one tuning parameter.
pub trait AlgoFamily: Sync {
    fn fit(&self, gamma: f64, training: &TrainingSet) -> Result<Box<dyn Predictor>>;

    /// One predictor per grid value.
    fn fit_grid(&self, grid: &[f64], training: &TrainingSet) -> Result<Vec<Box<dyn Predictor>>> {
        grid.iter().map(|&g| self.fit(g, training)).collect()
    }
}

/// The parameter of each family: `β` for KDE, `τ` for NB, `k` for kNN; the
/// simple nearest-neighbor rule ignores it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Family {
    pub algo: Algo,
    pub kde: KdeConfig,
    pub nb: NbConfig,
}

impl Family {
    pub fn new(algo: Algo, kde: KdeConfig, nb: NbConfig) -> Self {
        Self { algo, kde, nb }
    }
}

impl AlgoFamily for Family {
    fn fit(&self, gamma: f64, training: &TrainingSet) -> Result<Box<dyn Predictor>> {
        Ok(match self.algo {
            Algo::Kde => Box::new(kde_fit(training, &KdeConfig { beta: gamma })?),
            Algo::Nb => {
                let cfg = NbConfig {
                    tau: gamma,
                    ..self.nb
                };
                Box::new(crate::algorithms::nb_fit(training, &cfg)?.1)
            }
            Algo::Knn => {
                if gamma < 1.0 || gamma.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!("k = {gamma}")));
                }
                Box::new(knn_fit(training, &KnnConfig { k: gamma as usize })?)
            }
            Algo::SimpleNn => Box::new(SimpleNnModel::new(training)?),
        })
    }

    fn fit_grid(&self, grid: &[f64], training: &TrainingSet) -> Result<Vec<Box<dyn Predictor>>> {
        if self.algo != Algo::Nb {
            return grid.iter().map(|&g| self.fit(g, training)).collect();
        }
        // One EM path serves every τ.
        let path = nb_fit_path(training, &self.nb)?;
        Ok(grid
            .iter()
            .map(|&tau| Box::new(path.select(tau).params.to_model()) as Box<dyn Predictor>)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best: f64,
    /// Validation error for each grid value.
    pub errors: Vec<f64>,
    pub validation_rows: Vec<usize>,
}

/// Holds out a seeded 20% of the users, fits every grid value on the rest and
/// returns the value with the smallest RMS prediction error over `n` steps
/// on the held-out users. Ties go to the smaller value.
pub fn cross_validate(
    family: &dyn AlgoFamily,
    grid: &[f64],
    w: &TrainingSet,
    n: usize,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    if w.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} users for cross-validation",
            w.len()
        )));
    }
    let stream = SeedStream::new(seed);
    let holdout = (w.len() as f64 * 0.2).round() as usize;
    let mut rows: Vec<usize> = (0..w.len()).collect();
    rows.shuffle(&mut stream.child("holdout").rng());
    let (held, train_rows) = rows.split_at(holdout);
    let mut train_rows = train_rows.to_vec();
    train_rows.sort_unstable();
    let mut validation_rows: Vec<usize> = held
        .iter()
        .copied()
        .filter(|&i| w.vectors()[i].rated_count() >= n)
        .collect();
    validation_rows.sort_unstable();
    assert!(
        validation_rows
            .iter()
            .all(|v| train_rows.binary_search(v).is_err()),
        "validation rows leaked into training"
    );
    if validation_rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no validation user has {n} ratings"
        )));
    }
    let train = w.subset(&train_rows);
    let validation = w.subset(&validation_rows);
    let orders = sample_orders(&validation, n, stream.child("orders").seed())?;

    let models = family.fit_grid(grid, &train)?;
    let errors = models
        .iter()
        .map(|m| empirical_rms_prediction_error(m.as_ref(), &validation, &orders, n))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        let better = errors[i] < errors[best] || errors[i] == errors[best] && grid[i] < grid[best];
        if better {
            best = i;
        }
    }
    Ok(CvResult {
        best: grid[best],
        errors,
        validation_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{nb_sample, NbParams};
    use crate::ratings::{RatingPmf, RatingScale, RatingsVector};

    /// Predicts `gamma` everywhere.
    struct Flat;

    struct Constant(TrainingSet, f64);

    impl Predictor for Constant {
        fn scale(&self) -> &RatingScale {
            self.0.scale()
        }
        fn n_products(&self) -> usize {
            self.0.n_products()
        }
        fn predict_scalar(&self, _: usize, _: &RatingsVector) -> f64 {
            self.1
        }
    }

    impl AlgoFamily for Flat {
        fn fit(&self, gamma: f64, training: &TrainingSet) -> Result<Box<dyn Predictor>> {
            Ok(Box::new(Constant(training.clone(), gamma)))
        }
    }

    fn all_zero(m: usize) -> TrainingSet {
        TrainingSet::new(
            RatingScale::binary(),
            4,
            vec![RatingsVector::from_dense(&[Some(0); 4]); m],
        )
        .unwrap()
    }

    fn synthetic(m: usize) -> TrainingSet {
        let scale = RatingScale::five_level();
        let theta = (0..2)
            .map(|l| {
                (0..12)
                    .map(|p| {
                        let peak = (l * 3 + p) % 5;
                        let w = (0..5).map(|s| if s == peak { 6.0 } else { 1.0 }).collect();
                        RatingPmf::from_weights(scale.clone(), w).unwrap()
                    })
                    .collect()
            })
            .collect();
        nb_sample(
            &NbParams::new(scale, vec![0.5, 0.5], theta, 0.3).unwrap(),
            m,
            8,
        )
    }

    #[test]
    fn singleton_grid() {
        let r = cross_validate(&Flat, &[0.7], &all_zero(10), 2, 1).unwrap();
        assert_eq!(r.best, 0.7);
        assert_eq!(r.validation_rows.len(), 2);
    }

    #[test]
    fn monotone_error_picks_smallest() {
        let r = cross_validate(&Flat, &[0.4, 0.1, 0.3, 0.2], &all_zero(10), 3, 1).unwrap();
        assert_eq!(r.best, 0.1);
        assert!((r.errors[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ties_pick_smaller_value() {
        let r = cross_validate(&Flat, &[0.0, 0.5], &all_zero(10), 3, 1).unwrap();
        assert_eq!(r.best, 0.0);
        let symmetric = TrainingSet::new(
            RatingScale::binary(),
            2,
            vec![RatingsVector::from_dense(&[Some(0), Some(1)]); 10],
        )
        .unwrap();
        let r = cross_validate(&Flat, &[0.75, 0.25], &symmetric, 2, 1).unwrap();
        assert_eq!(r.errors[0], r.errors[1]);
        assert_eq!(r.best, 0.25);
    }

    #[test]
    fn knn_choice_is_reproducible() {
        let w = synthetic(150);
        let family = Family::new(Algo::Knn, KdeConfig::default(), NbConfig::default());
        let grid: Vec<f64> = (1..=40).map(f64::from).collect();
        let a = cross_validate(&family, &grid, &w, 5, 99).unwrap();
        let b = cross_validate(&family, &grid, &w, 5, 99).unwrap();
        assert_eq!(a, b);
        assert!(grid.contains(&a.best));
        assert!(a.errors.iter().all(|e| e.is_finite() && *e >= 0.0));
    }

    #[test]
    fn nb_grid_shares_one_path() {
        let w = synthetic(100);
        let nb = NbConfig {
            l_max: 3,
            restarts: 2,
            ..NbConfig::default()
        };
        let family = Family::new(Algo::Nb, KdeConfig::default(), nb);
        let grid = [1.0, 100.0, 10_000.0];
        let fitted = family.fit_grid(&grid, &w).unwrap();
        assert_eq!(fitted.len(), 3);
        let r = cross_validate(&family, &grid, &w, 4, 5).unwrap();
        assert!(grid.contains(&r.best));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            cross_validate(&Flat, &[1.0], &all_zero(4), 1, 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            cross_validate(&Flat, &[1.0], &all_zero(10), 5, 0),
            Err(Error::InsufficientData(_))
        ));
        assert!("lda".parse::<Algo>().is_err());
        assert_eq!("simple-nn".parse::<Algo>().unwrap(), Algo::SimpleNn);
    }
}
