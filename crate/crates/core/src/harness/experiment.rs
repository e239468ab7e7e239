use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand_distr::{Dirichlet, Distribution};
use rayon::prelude::*;

use crate::algorithms::{nb_sample, KdeConfig, NbConfig, NbParams, Predictor};
use crate::attack::{generate_push_attack, PushAttackConfig};
use crate::distortion::{
    empirical_rms_distortion_series, empirical_rms_prediction_error_series, rms_bound,
    sample_orders,
};
use crate::error::{Error, Result};
use crate::harness::{
    cross_validate, ingest_csv, sample_protocol_split, write_plot_table, Algo, AlgoFamily,
    DataSource, ExperimentConfig, Family, PlotTable, SyntheticSpec,
};
use crate::ratings::{RatingPmf, RatingScale, TrainingSet};
use crate::seeds::SeedStream;

/// Random naive Bayes parameters described by `spec`.
pub fn synthetic_params(spec: &SyntheticSpec, levels: usize, seed: u64) -> Result<NbParams> {
    let scale = RatingScale::uniform(levels)?;
    let mut rng = SeedStream::new(seed).rng();
    let dirichlet = Dirichlet::new(&vec![spec.alpha; levels])
        .map_err(|e| Error::InvalidConfig(format!("dirichlet: {e}")))?;
    let theta = (0..spec.components)
        .map(|_| {
            (0..spec.products)
                .map(|_| RatingPmf::from_weights(scale.clone(), dirichlet.sample(&mut rng)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    NbParams::new(
        scale,
        vec![1.0 / spec.components as f64; spec.components],
        theta,
        spec.question_rate,
    )
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<TrainingSet> {
    let stream = SeedStream::new(cfg.seed).child("data");
    match &cfg.data {
        DataSource::Synthetic(spec) => {
            let params = synthetic_params(spec, cfg.levels, stream.child("params").seed())?;
            Ok(nb_sample(
                &params,
                spec.users,
                stream.child("sample").seed(),
            ))
        }
        DataSource::Csv(path) => Ok(ingest_csv(path, &RatingScale::uniform(cfg.levels)?)?.data),
    }
}

/// Averaged series of one algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgoResult {
    pub algo: Algo,
    /// RMS prediction error on clean data for `n = 1..=n_max`.
    pub errors: Vec<f64>,
    /// RMS distortion for `n = 1..=n_max`, one series per attack.
    pub distortions: Vec<Vec<f64>>,
    /// Parameter chosen on the honest data in each replication.
    pub params: Vec<f64>,
    /// Parameter chosen on the attacked data, per replication and attack.
    pub attack_params: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub attack_r: Vec<f64>,
    pub results: Vec<AlgoResult>,
    /// Files written, in write order.
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn result(&self, algo: Algo) -> Option<&AlgoResult> {
        self.results.iter().find(|r| r.algo == algo)
    }
}

struct CellResult {
    param: f64,
    attack_params: Vec<f64>,
    errors: Vec<f64>,
    distortions: Vec<Vec<f64>>,
}

struct Replication {
    seeds: Vec<(String, u64)>,
    honest: usize,
    test: usize,
    cells: Vec<CellResult>,
}

fn family(cfg: &ExperimentConfig, algo: Algo, nb_seed: u64) -> Family {
    Family::new(
        algo,
        KdeConfig { beta: cfg.kde_beta },
        NbConfig {
            rng_seed: nb_seed,
            ..cfg.nb
        },
    )
}

fn grid(cfg: &ExperimentConfig, algo: Algo) -> Vec<f64> {
    match algo {
        Algo::Kde => vec![cfg.kde_beta],
        Algo::Nb => cfg.tau_grid.clone(),
        Algo::Knn => cfg.knn_grid.iter().map(|&k| k as f64).collect(),
        Algo::SimpleNn => vec![0.0],
    }
}

fn run_replication(cfg: &ExperimentConfig, data: &TrainingSet, rep: usize) -> Result<Replication> {
    let stream = SeedStream::new(cfg.seed)
        .child("replication")
        .index(rep as u64);
    let mut seeds = vec![
        ("split".to_string(), stream.child("split").seed()),
        ("orders".to_string(), stream.child("orders").seed()),
    ];
    let split = sample_protocol_split(data, cfg.honest, cfg.test, cfg.n_max, seeds[0].1)?;
    let (y, x) = (&split.honest, &split.test);
    let orders = sample_orders(x, cfg.n_max, seeds[1].1)?;

    let mut attacks = Vec::with_capacity(cfg.attack_counts.len());
    for (a, &count) in cfg.attack_counts.iter().enumerate() {
        let seed = stream.child("attack").index(a as u64).seed();
        seeds.push((format!("attack.{a}"), seed));
        attacks.push(if count == 0 {
            None
        } else {
            let z = generate_push_attack(
                y,
                &PushAttackConfig {
                    promote_fraction: cfg.promote_fraction,
                    count,
                    rng_seed: seed,
                },
            )?;
            Some(y.concat(&z.profiles)?)
        });
    }

    let mut cells = Vec::with_capacity(cfg.algorithms.len());
    for &algo in &cfg.algorithms {
        let algo_stream = stream.child(algo.name());
        let cv_seed = algo_stream.child("cv").seed();
        let fit_seed = algo_stream.child("fit").seed();
        seeds.push((format!("{algo}.cv"), cv_seed));
        seeds.push((format!("{algo}.fit"), fit_seed));
        let grid = grid(cfg, algo);
        // Each training set gets its own cross-validated parameter.
        let tune = |w: &TrainingSet, seed: u64| -> Result<f64> {
            if grid.len() == 1 {
                return Ok(grid[0]);
            }
            Ok(cross_validate(&family(cfg, algo, seed), &grid, w, cfg.n_max, seed)?.best)
        };
        let param = tune(y, cv_seed)?;
        let clean = family(cfg, algo, fit_seed).fit(param, y)?;
        let errors = empirical_rms_prediction_error_series(clean.as_ref(), x, &orders, cfg.n_max)?;
        let mut distortions = Vec::with_capacity(attacks.len());
        let mut attack_params = Vec::with_capacity(attacks.len());
        for (a, attacked) in attacks.iter().enumerate() {
            let (series, p) = match attacked {
                None => (vec![0.0; cfg.n_max], param),
                Some(w) => {
                    let p = tune(w, SeedStream::new(cv_seed).index(a as u64).seed())?;
                    let corrupt: Box<dyn Predictor> =
                        family(cfg, algo, SeedStream::new(fit_seed).index(a as u64).seed())
                            .fit(p, w)?;
                    let series = empirical_rms_distortion_series(
                        clean.as_ref(),
                        corrupt.as_ref(),
                        x,
                        &orders,
                        cfg.n_max,
                    )?;
                    (series, p)
                }
            };
            distortions.push(series);
            attack_params.push(p);
        }
        cells.push(CellResult {
            param,
            attack_params,
            errors,
            distortions,
        });
    }
    Ok(Replication {
        seeds,
        honest: y.len(),
        test: x.len(),
        cells,
    })
}

fn mean_series<'a>(series: impl Iterator<Item = &'a Vec<f64>>, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for s in series {
        if out.is_empty() {
            out = vec![0.0; s.len()];
        }
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out.iter().map(|v| v / count as f64).collect()
}

fn r_label(r: f64) -> String {
    format!("{r:.2}")
}

/// Runs every replication and writes the plot tables and `summary.txt`
/// into `out`. Identical configs give byte-identical directories.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    run_experiment_on(cfg, &load_data(cfg)?, out)
}

/// [`run_experiment`] on already loaded data; `cfg.data` is ignored.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    data: &TrainingSet,
    out: &Path,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if data.scale().len() != cfg.levels {
        return Err(Error::InvalidConfig(format!(
            "data has {} levels, config {}",
            data.scale().len(),
            cfg.levels
        )));
    }
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, data, rep))
        .collect::<Result<_>>()?;

    let attack_r: Vec<f64> = cfg.attack_counts.iter().map(|&c| cfg.attack_r(c)).collect();
    let count = reps.len();
    let results: Vec<AlgoResult> = cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, &algo)| AlgoResult {
            algo,
            errors: mean_series(reps.iter().map(|r| &r.cells[i].errors), count),
            distortions: (0..attack_r.len())
                .map(|a| mean_series(reps.iter().map(|r| &r.cells[i].distortions[a]), count))
                .collect(),
            params: reps.iter().map(|r| r.cells[i].param).collect(),
            attack_params: reps
                .iter()
                .map(|r| r.cells[i].attack_params.clone())
                .collect(),
        })
        .collect();

    // Tables keyed by name so collisions resolve the same way every run.
    let mut tables: BTreeMap<String, PlotTable> = BTreeMap::new();
    for res in &results {
        let name = format!("{}_errors", res.algo);
        tables.insert(name.clone(), PlotTable::from_values(name, &res.errors));
        for (r, series) in attack_r.iter().zip(&res.distortions) {
            let name = format!("{}_distortions_{}", res.algo, r_label(*r));
            tables.insert(name.clone(), PlotTable::from_values(name, series));
        }
    }
    for &r in cfg.bound_r.iter().chain(&attack_r) {
        let name = format!("bnd_{}", r_label(r));
        let bound: Vec<f64> = (1..=cfg.n_max).map(|n| rms_bound(n, r)).collect();
        tables
            .entry(name.clone())
            .or_insert_with(|| PlotTable::from_values(name, &bound));
    }

    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for table in tables.values() {
        write_plot_table(table, out)?;
        files.push(format!("{}.table", table.name));
    }
    fs::write(
        out.join("summary.txt"),
        summary(cfg, data, &reps, &attack_r, &results),
    )?;
    files.push("summary.txt".to_string());
    Ok(ExperimentReport {
        attack_r,
        results,
        files,
    })
}

fn summary(
    cfg: &ExperimentConfig,
    data: &TrainingSet,
    reps: &[Replication],
    attack_r: &[f64],
    results: &[AlgoResult],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[config]");
    s.push_str(&cfg.to_text());
    let _ = writeln!(s, "\n[data]");
    let _ = writeln!(s, "users = {}", data.len());
    let _ = writeln!(s, "products = {}", data.n_products());
    let _ = writeln!(s, "question_fraction = {:.6}", data.question_fraction());
    for (i, rep) in reps.iter().enumerate() {
        let _ = writeln!(s, "\n[replication {i}]");
        let _ = writeln!(s, "honest_users = {}", rep.honest);
        let _ = writeln!(s, "test_users = {}", rep.test);
        for (name, seed) in &rep.seeds {
            let _ = writeln!(s, "seed.{name} = {seed}");
        }
        for (algo, cell) in cfg.algorithms.iter().zip(&rep.cells) {
            let label = match algo {
                Algo::Kde => "beta",
                Algo::Nb => "tau",
                Algo::Knn => "k",
                Algo::SimpleNn => "none",
            };
            let _ = writeln!(s, "param.{algo}.{label} = {}", cell.param);
            for (a, p) in cell.attack_params.iter().enumerate() {
                let _ = writeln!(s, "param.{algo}.{label}.attack.{a} = {p}");
            }
        }
    }
    let n = cfg.n_max;
    let _ = writeln!(s, "\n[results at n = {n}]");
    for (a, r) in attack_r.iter().enumerate() {
        let _ = writeln!(s, "r = {r:.6} bound = {:.9e}", rms_bound(n, *r));
        for res in results {
            let _ = writeln!(
                s,
                "  {} distortion = {:.9e} error = {:.9e}",
                res.algo,
                res.distortions[a][n - 1],
                res.errors[n - 1]
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::parse(
            "synthetic.users = 120\nsynthetic.products = 12\nsynthetic.components = 2\n\
             synthetic.question_rate = 0.3\nhonest = 90\ntest = 30\nn_max = 4\nattack_counts = 0,20\n\
             knn.grid = 1..5\nnb.tau_grid = 1,1000\nnb.l_max = 2\nnb.restarts = 1\nreplications = 2\nseed = 3\n",
        )
        .unwrap()
    }

    #[test]
    fn synthetic_data_matches_settings() {
        let cfg = tiny();
        let data = load_data(&cfg).unwrap();
        assert_eq!((data.len(), data.n_products()), (120, 12));
        assert_eq!(data, load_data(&cfg).unwrap());
    }

    #[test]
    fn end_to_end_tiny() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let report = run_experiment(&cfg, dir.path()).unwrap();
        for res in &report.results {
            assert!(res.distortions[0].iter().all(|&d| d == 0.0), "{}", res.algo);
            assert!(res.distortions[1].iter().all(|&d| d >= 0.0));
            assert!(res.errors.iter().all(|e| e.is_finite() && *e > 0.0));
            assert_eq!(res.params.len(), 2);
        }
        for f in &report.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let bound = crate::harness::read_plot_table(&dir.path().join("bnd_0.10.table")).unwrap();
        for (n, v) in bound.rows {
            assert!((v - rms_bound(n, 0.1)).abs() <= 1e-9 * v);
        }
        let zero = crate::harness::read_plot_table(&dir.path().join("kde_distortions_0.00.table"))
            .unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }
}
