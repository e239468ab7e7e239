//! Distortion and prediction error measured on held-out users.
//!
//! Each test user `x` comes with an order `ν^x` over `n` of its rated
//! products. At step `k` the predictors see `x` restricted to the first `k-1`
//! products of that order and predict the `k`-th.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::algorithms::Predictor;
use crate::error::{Error, Result};
use crate::ratings::{RatingsVector, TrainingSet};
use crate::seeds::SeedStream;

/// For every vector, `n` of its rated products in uniformly random order.
pub fn sample_orders(users: &TrainingSet, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = SeedStream::new(seed).rng();
    users
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let rated: Vec<usize> = x.rated().map(|(p, _)| p).collect();
            if rated.len() < n {
                return Err(Error::InsufficientHistory {
                    index,
                    found: rated.len(),
                    needed: n,
                });
            }
            let mut picked: Vec<usize> = rated.choose_multiple(&mut rng, n).copied().collect();
            picked.shuffle(&mut rng);
            Ok(picked)
        })
        .collect()
}

fn check_orders(users: &TrainingSet, orders: &[Vec<usize>], n: usize) -> Result<()> {
    if orders.len() != users.len() {
        return Err(Error::InvalidConfig(format!(
            "{} orders for {} users",
            orders.len(),
            users.len()
        )));
    }
    if users.is_empty() {
        return Err(Error::InsufficientData("no test users".into()));
    }
    for (index, (x, order)) in users.iter().zip(orders).enumerate() {
        let usable = order
            .iter()
            .take(n)
            .filter(|&&p| x.get(p).is_some())
            .count();
        if order.len() < n || usable < n {
            return Err(Error::InsufficientHistory {
                index,
                found: usable,
                needed: n,
            });
        }
    }
    Ok(())
}

/// Per-user squared terms for steps `1..=n`, reduced in user order.
fn mean_squares<F>(
    users: &TrainingSet,
    orders: &[Vec<usize>],
    n: usize,
    term: F,
) -> Result<Vec<f64>>
where
    F: Fn(&RatingsVector, usize, &RatingsVector) -> f64 + Sync,
{
    check_orders(users, orders, n)?;
    let per_user: Vec<Vec<f64>> = users
        .vectors()
        .par_iter()
        .zip(orders.par_iter())
        .map(|(x, order)| {
            let mut history = RatingsVector::new(x.len());
            order[..n]
                .iter()
                .map(|&product| {
                    let t = term(x, product, &history);
                    history
                        .set(product, x.get(product).expect("ordered product is rated"))
                        .expect("in range");
                    t
                })
                .collect()
        })
        .collect();
    // Cumulative (1/n') Σ_{k<=n'} per user, then averaged over users.
    let mut out = vec![0.0; n];
    for terms in &per_user {
        let mut running = 0.0;
        for (i, t) in terms.iter().enumerate() {
            running += t;
            out[i] += running / (i + 1) as f64;
        }
    }
    let m = users.len() as f64;
    Ok(out.into_iter().map(|v| (v / m).sqrt()).collect())
}

/// Empirical RMS distortion for every prefix length `1..=n`.
pub fn empirical_rms_distortion_series(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    users: &TrainingSet,
    orders: &[Vec<usize>],
    n: usize,
) -> Result<Vec<f64>> {
    mean_squares(users, orders, n, |_, product, history| {
        let d = clean.predict_scalar(product, history) - corrupt.predict_scalar(product, history);
        d * d
    })
}

pub fn empirical_rms_distortion(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    users: &TrainingSet,
    orders: &[Vec<usize>],
    n: usize,
) -> Result<f64> {
    Ok(
        *empirical_rms_distortion_series(clean, corrupt, users, orders, n)?
            .last()
            .expect("n >= 1"),
    )
}

/// Empirical RMS prediction error for every prefix length `1..=n`.
pub fn empirical_rms_prediction_error_series(
    predictor: &dyn Predictor,
    users: &TrainingSet,
    orders: &[Vec<usize>],
    n: usize,
) -> Result<Vec<f64>> {
    let scale = users.scale().clone();
    mean_squares(users, orders, n, |x, product, history| {
        let truth = scale.value(x.get(product).expect("ordered product is rated"));
        let d = truth - predictor.predict_scalar(product, history);
        d * d
    })
}

pub fn empirical_rms_prediction_error(
    predictor: &dyn Predictor,
    users: &TrainingSet,
    orders: &[Vec<usize>],
    n: usize,
) -> Result<f64> {
    Ok(
        *empirical_rms_prediction_error_series(predictor, users, orders, n)?
            .last()
            .expect("n >= 1"),
    )
}
