//! Naive Bayes mixture fitted by MAP expectation-maximization.
//!
//! Data model: a user type is drawn from one of `L` product-form components
//! (weights `eta`, per-product level PMFs `theta`), then each rating is
//! independently hidden with probability `q`. Priors: geometric on `L`
//! (`e^{-tau L}`), Dirichlet(2, ..., 2) on `eta` and on every `theta[l][n]`,
//! Beta(2, 2) on `q`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::mixture::log_sum_exp;
use crate::algorithms::MixtureTypeModel;
use crate::error::{Error, Result};
use crate::ratings::{RatingPmf, RatingScale, RatingsVector, TrainingSet};
use crate::seeds::{derive, SeedStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbConfig {
    /// Rate of the geometric prior on the component count.
    pub tau: f64,
    /// Largest component count tried.
    pub l_max: usize,
    pub em_max_iters: usize,
    /// EM stops once the log-density gain of an iteration drops below this.
    pub em_tol: f64,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for NbConfig {
    fn default() -> Self {
        Self {
            tau: 10_000.0,
            l_max: 6,
            em_max_iters: 200,
            em_tol: 1e-6,
            restarts: 3,
            rng_seed: 0,
        }
    }
}

impl NbConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau > 0.0
            && self.tau.is_finite()
            && self.l_max >= 1
            && self.em_max_iters >= 1
            && self.em_tol > 0.0
            && self.restarts >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid naive Bayes config {self:?}"
            )))
        }
    }
}

/// Fitted or generating parameters `(L, eta, theta, q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    scale: RatingScale,
    n_products: usize,
    eta: Vec<f64>,
    /// `theta[(l * n_products + n) * levels + s]`.
    theta: Vec<f64>,
    q: f64,
}

impl NbParams {
    pub fn new(
        scale: RatingScale,
        eta: Vec<f64>,
        theta: Vec<Vec<RatingPmf>>,
        q: f64,
    ) -> Result<Self> {
        let total: f64 = eta.iter().sum();
        if eta.is_empty() || eta.iter().any(|e| *e < 0.0) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::WeightSumViolation(total));
        }
        if theta.len() != eta.len() {
            return Err(Error::InvalidConfig("one theta row per component".into()));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidConfig(format!(
                "q must lie in [0, 1), got {q}"
            )));
        }
        let n_products = theta[0].len();
        let mut flat = Vec::with_capacity(eta.len() * n_products * scale.len());
        for row in &theta {
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
                flat.extend_from_slice(pmf.probs());
            }
        }
        Ok(Self {
            scale,
            n_products,
            eta,
            theta: flat,
            q,
        })
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    /// Component count `L`.
    pub fn n_components(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn theta(&self, l: usize, n: usize) -> &[f64] {
        let k = self.scale.len();
        let at = (l * self.n_products + n) * k;
        &self.theta[at..at + k]
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    /// The implied PMF over `S̄^N`, as a mixture.
    pub fn to_model(&self) -> MixtureTypeModel {
        MixtureTypeModel::from_table(
            self.scale.clone(),
            self.n_products,
            self.eta.clone(),
            self.theta.clone(),
        )
    }

    pub fn min_theta(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `ln((k-1)!)`, i.e. `ln Γ(k)` for integer `k >= 1`.
fn ln_gamma_int(k: usize) -> f64 {
    (2..k).map(|i| (i as f64).ln()).sum()
}

/// Neumaier-compensated sum.
fn stable_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `n ln x` with `0 ln 0 = 0`.
fn xlogy(n: f64, x: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * x.ln()
    }
}

/// Beta(2, 2) MAP estimate of the hiding probability: `(#? + 1) / (mN + 2)`.
pub fn nb_q_map(training: &TrainingSet) -> f64 {
    let cells = training.len() * training.n_products();
    (training.question_count() as f64 + 1.0) / (cells as f64 + 2.0)
}

struct Data {
    rows: Vec<Vec<(usize, u8)>>,
    questions: usize,
    cells: usize,
}

impl Data {
    fn new(training: &TrainingSet) -> Self {
        Self {
            rows: training.iter().map(|w| w.rated().collect()).collect(),
            questions: training.question_count(),
            cells: training.len() * training.n_products(),
        }
    }
}

/// Terms of the log posterior that do not depend on the data, plus the
/// hiding-probability likelihood. The constants `c_L`, `c_q` and the overall
/// normalizer are dropped; the Dirichlet normalizers, which vary with `L`, are
/// kept so that values are comparable across component counts.
fn prior_and_mask_terms(params: &NbParams, data: &Data, tau: f64) -> f64 {
    let l = params.n_components();
    let k = params.scale.len();
    let ln_c_eta = ln_gamma_int(2 * l);
    let ln_c_theta = ln_gamma_int(2 * k);
    let q = params.q;
    let rated = (data.cells - data.questions) as f64;
    -tau * l as f64
        + ln_c_eta
        + stable_sum(params.eta.iter().map(|e| e.ln()))
        + (l * params.n_products) as f64 * ln_c_theta
        + stable_sum(params.theta.iter().map(|t| t.ln()))
        + q.ln()
        + (1.0 - q).ln()
        + xlogy(data.questions as f64, q)
        + xlogy(rated, 1.0 - q)
}

struct Expectation {
    log_lik: f64,
    weight_totals: Vec<f64>,
    /// Expected level counts, laid out like `theta`.
    counts: Vec<f64>,
}

fn e_step(params: &NbParams, data: &Data) -> Expectation {
    let l = params.n_components();
    let k = params.scale.len();
    let n = params.n_products;
    let ln_eta: Vec<f64> = params.eta.iter().map(|e| e.ln()).collect();
    let ln_theta: Vec<f64> = params.theta.iter().map(|t| t.ln()).collect();
    let mut weight_totals = vec![0.0; l];
    let mut counts = vec![0.0; params.theta.len()];
    let mut row_lls = Vec::with_capacity(data.rows.len());
    let mut lr = vec![0.0; l];
    for row in &data.rows {
        for (c, slot) in lr.iter_mut().enumerate() {
            *slot = row.iter().fold(ln_eta[c], |acc, &(p, s)| {
                acc + ln_theta[(c * n + p) * k + s as usize]
            });
        }
        let ll = log_sum_exp(&lr);
        row_lls.push(ll);
        for c in 0..l {
            let resp = (lr[c] - ll).exp();
            weight_totals[c] += resp;
            for &(p, s) in row {
                counts[(c * n + p) * k + s as usize] += resp;
            }
        }
    }
    Expectation {
        log_lik: stable_sum(row_lls),
        weight_totals,
        counts,
    }
}

/// Dirichlet(2, ..., 2) MAP update (add-one smoothing).
fn m_step(params: &mut NbParams, e: &Expectation, m: usize) {
    let l = params.n_components();
    let k = params.scale.len();
    for (eta, w) in params.eta.iter_mut().zip(&e.weight_totals) {
        *eta = (w + 1.0) / (m as f64 + l as f64);
    }
    for (theta, counts) in params.theta.chunks_mut(k).zip(e.counts.chunks(k)) {
        let total: f64 = counts.iter().sum::<f64>() + k as f64;
        for (t, c) in theta.iter_mut().zip(counts) {
            *t = (c + 1.0) / total;
        }
    }
}

/// Log posterior density of `params` given `training`, up to an additive
/// constant that does not depend on `L`.
pub fn nb_posterior_logdensity(params: &NbParams, training: &TrainingSet, cfg: &NbConfig) -> f64 {
    let data = Data::new(training);
    let prior = prior_and_mask_terms(params, &data, cfg.tau);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    prior + e_step(params, &data).log_lik
}

/// One EM run at a fixed component count.
#[derive(Clone, Debug)]
pub struct EmRun {
    pub params: NbParams,
    /// Log posterior density before each M-step; the last entry belongs to
    /// `params`.
    pub trace: Vec<f64>,
    pub seed: u64,
}

impl EmRun {
    pub fn log_density(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

fn random_init<R: Rng>(
    scale: &RatingScale,
    n_products: usize,
    l: usize,
    q: f64,
    rng: &mut R,
) -> NbParams {
    let k = scale.len();
    let mut theta = Vec::with_capacity(l * n_products * k);
    for _ in 0..l * n_products {
        // Symmetric Dirichlet(1) via normalized exponentials.
        let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 1e-9).collect();
        let total: f64 = draws.iter().sum();
        theta.extend(draws.into_iter().map(|d| d / total));
    }
    NbParams {
        scale: scale.clone(),
        n_products,
        eta: vec![1.0 / l as f64; l],
        theta,
        q,
    }
}

fn em_from(mut params: NbParams, data: &Data, cfg: &NbConfig, seed: u64) -> EmRun {
    let mut trace = Vec::new();
    for _ in 0..cfg.em_max_iters {
        let e = e_step(&params, data);
        let density = prior_and_mask_terms(&params, data, cfg.tau) + e.log_lik;
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| density - prev < cfg.em_tol);
        trace.push(density);
        if converged {
            return EmRun {
                params,
                trace,
                seed,
            };
        }
        m_step(&mut params, &e, data.rows.len());
    }
    // Iteration cap hit: score the last M-step so the trace ends on `params`.
    let e = e_step(&params, data);
    trace.push(prior_and_mask_terms(&params, data, cfg.tau) + e.log_lik);
    EmRun {
        params,
        trace,
        seed,
    }
}

/// EM from one seeded random start with `l` components; `q` is fixed at its
/// closed-form MAP value.
pub fn nb_em_run(training: &TrainingSet, l: usize, cfg: &NbConfig, seed: u64) -> Result<EmRun> {
    cfg.validate()?;
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if l == 0 {
        return Err(Error::InvalidConfig(
            "component count must be positive".into(),
        ));
    }
    let data = Data::new(training);
    let q = nb_q_map(training);
    let mut rng = SeedStream::new(seed).rng();
    let init = random_init(training.scale(), training.n_products(), l, q, &mut rng);
    Ok(em_from(init, &data, cfg, seed))
}

/// Best EM run for every component count `1..=l_max`.
#[derive(Clone, Debug)]
pub struct NbFitPath {
    tau: f64,
    runs: Vec<EmRun>,
}

impl NbFitPath {
    pub fn runs(&self) -> &[EmRun] {
        &self.runs
    }

    /// Run maximizing the posterior under prior rate `tau`; ties go to the
    /// smaller component count.
    pub fn select(&self, tau: f64) -> &EmRun {
        let score =
            |run: &EmRun| run.log_density() + (self.tau - tau) * run.params.n_components() as f64;
        let mut best = &self.runs[0];
        for run in &self.runs[1..] {
            if score(run) > score(best) {
                best = run;
            }
        }
        best
    }
}

/// Runs EM for every component count and restart. The `tau` of `cfg` only
/// matters for reporting; [`NbFitPath::select`] rescores for any rate.
pub fn nb_fit_path(training: &TrainingSet, cfg: &NbConfig) -> Result<NbFitPath> {
    cfg.validate()?;
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let data = Data::new(training);
    let q = nb_q_map(training);
    let jobs: Vec<(usize, usize)> = (1..=cfg.l_max)
        .flat_map(|l| (0..cfg.restarts).map(move |r| (l, r)))
        .collect();
    let runs: Vec<EmRun> = jobs
        .par_iter()
        .map(|&(l, r)| {
            let seed = derive(cfg.rng_seed, ((l as u64) << 32) | r as u64);
            let mut rng = SeedStream::new(seed).rng();
            let init = random_init(training.scale(), training.n_products(), l, q, &mut rng);
            em_from(init, &data, cfg, seed)
        })
        .collect();
    let mut best: Vec<EmRun> = Vec::with_capacity(cfg.l_max);
    for (run, &(l, _)) in runs.into_iter().zip(&jobs) {
        match best.get_mut(l - 1) {
            Some(current) if run.log_density() > current.log_density() => *current = run,
            Some(_) => {}
            None => best.push(run),
        }
    }
    for run in &best {
        assert!(
            run.params.min_theta() > 0.0,
            "Dirichlet MAP keeps theta strictly positive"
        );
    }
    Ok(NbFitPath {
        tau: cfg.tau,
        runs: best,
    })
}

/// MAP fit: parameters and the implied mixture over types.
pub fn nb_fit(training: &TrainingSet, cfg: &NbConfig) -> Result<(NbParams, MixtureTypeModel)> {
    let path = nb_fit_path(training, cfg)?;
    let params = path.select(cfg.tau).params.clone();
    let model = params.to_model();
    Ok((params, model))
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `m` vectors drawn i.i.d. from the generative model.
pub fn nb_sample(params: &NbParams, m: usize, seed: u64) -> TrainingSet {
    let mut rng = SeedStream::new(seed).rng();
    let n = params.n_products;
    let vectors = (0..m)
        .map(|_| {
            let l = sample_index(&params.eta, &mut rng);
            let mut w = RatingsVector::new(n);
            for p in 0..n {
                let level = sample_index(params.theta(l, p), &mut rng) as u8;
                let hidden = rng.gen::<f64>() < params.q;
                if !hidden {
                    w.set(p, level).expect("product in range");
                }
            }
            w
        })
        .collect();
    TrainingSet::new(params.scale.clone(), n, vectors).expect("sampled levels are valid")
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn bin(p1: f64) -> RatingPmf {
        RatingPmf::new(RatingScale::binary(), vec![1.0 - p1, p1]).unwrap()
    }

    fn two_cluster_params(q: f64) -> NbParams {
        let n = 8;
        let high: Vec<RatingPmf> = (0..n)
            .map(|i| bin(if i % 4 == 3 { 0.2 } else { 0.9 }))
            .collect();
        let low: Vec<RatingPmf> = (0..n)
            .map(|i| bin(if i % 4 == 3 { 0.8 } else { 0.1 }))
            .collect();
        NbParams::new(RatingScale::binary(), vec![0.6, 0.4], vec![high, low], q).unwrap()
    }

    #[test]
    fn q_map_matches_grid_search() {
        let params = two_cluster_params(0.0);
        let data = nb_sample(&params, 50, 3);
        assert_eq!(data.question_count(), 0);
        let cells = (data.len() * data.n_products()) as f64;
        assert_abs_diff_eq!(nb_q_map(&data), 1.0 / (cells + 2.0), epsilon = 1e-15);

        // Oracle: maximize q(1-q) q^h (1-q)^(cells-h) on a fine grid.
        let hidden = nb_sample(&params.clone().with_q(0.3), 50, 4);
        let h = hidden.question_count() as f64;
        let f = |q: f64| (h + 1.0) * q.ln() + (cells - h + 1.0) * (1.0 - q).ln();
        let grid_best = (1..1_000_000)
            .map(|i| i as f64 / 1_000_000.0)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert_abs_diff_eq!(nb_q_map(&hidden), grid_best, epsilon = 1e-6);
    }

    #[test]
    fn log_density_collapses_for_one_component() {
        let n = 4;
        let q: f64 = 0.2;
        let params =
            NbParams::new(RatingScale::binary(), vec![1.0], vec![vec![bin(0.5); n]], q).unwrap();
        let w = RatingsVector::from_dense(&[Some(1), Some(0), Some(0), Some(1)]);
        let data = TrainingSet::new(RatingScale::binary(), n, vec![w]).unwrap();
        let cfg = NbConfig {
            tau: 3.0,
            ..NbConfig::default()
        };
        let likelihood = n as f64 * (1.0 - q).ln() + n as f64 * 0.5f64.ln();
        // -tau L + ln Γ(2) + ln η + N ln Γ(4) + Σ ln θ + ln q(1-q)
        let prior = -3.0
            + 0.0
            + 0.0
            + n as f64 * 6f64.ln()
            + 2.0 * n as f64 * 0.5f64.ln()
            + q.ln()
            + (1.0 - q).ln();
        assert_abs_diff_eq!(
            nb_posterior_logdensity(&params, &data, &cfg),
            likelihood + prior,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_q_with_hidden_entries_is_impossible() {
        let params = two_cluster_params(0.0);
        let data = nb_sample(&params.clone().with_q(0.5), 20, 1);
        assert!(data.question_count() > 0);
        assert_eq!(
            nb_posterior_logdensity(&params, &data, &NbConfig::default()),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn em_trace_is_monotone() {
        let data = nb_sample(&two_cluster_params(0.3), 300, 11);
        let cfg = NbConfig {
            tau: 1.0,
            em_tol: 1e-10,
            ..NbConfig::default()
        };
        for l in 1..=4 {
            let run = nb_em_run(&data, l, &cfg, 5 + l as u64).unwrap();
            assert!(run.trace.len() >= 2);
            for w in run.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "trace decreased: {} -> {}", w[0], w[1]);
            }
            assert_abs_diff_eq!(
                run.log_density(),
                nb_posterior_logdensity(&run.params, &data, &cfg),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_and_masks_at_rate_q() {
        let params = two_cluster_params(0.25);
        assert_eq!(nb_sample(&params, 100, 9), nb_sample(&params, 100, 9));
        let m = 10_000;
        let data = nb_sample(&params, m, 2);
        let cells = (m * params.n_products()) as f64;
        let rate = data.question_count() as f64 / cells;
        let sigma = (0.25 * 0.75 / cells).sqrt();
        assert!((rate - 0.25).abs() <= 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn degenerate_components_replicate_a_single_type() {
        let n = 5;
        let point = |p: f64| RatingPmf::new(RatingScale::binary(), vec![1.0 - p, p]).unwrap();
        let theta = vec![(0..n).map(|i| point((i % 2) as f64)).collect()];
        let params = NbParams::new(RatingScale::binary(), vec![1.0], theta, 0.4).unwrap();
        let data = nb_sample(&params, 50, 0);
        for w in data.iter() {
            for (p, l) in w.rated() {
                assert_eq!(l as usize, p % 2);
            }
        }
    }

    #[test]
    fn replicated_vector_is_learned() {
        let scale = RatingScale::five_level();
        let w = RatingsVector::from_dense(&[Some(0), Some(4), Some(2), Some(3)]);
        let data = TrainingSet::new(scale, 4, vec![w.clone(); 40]).unwrap();
        let cfg = NbConfig {
            tau: 1.0,
            l_max: 3,
            ..NbConfig::default()
        };
        let (params, model) = nb_fit(&data, &cfg).unwrap();
        for l in 0..params.n_components() {
            for (p, level) in w.rated() {
                if params.eta()[l] > 0.2 {
                    let pmf = RatingPmf::new(params.scale().clone(), params.theta(l, p).to_vec())
                        .unwrap();
                    assert_eq!(pmf.argmax(), level);
                }
            }
        }
        assert!(model.min_marginal() > 0.0);
        assert_eq!(nb_q_map(&data), 1.0 / 162.0);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let empty = TrainingSet::empty(RatingScale::binary(), 3);
        assert!(matches!(
            nb_fit(&empty, &NbConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
    }
}
