use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use robustcf::algorithms::{kde_fit, knn_fit, KdeConfig, KnnConfig, SimpleNnModel};
use robustcf::attack::{
    build_block_toy, build_worst_case_instance, generate_push_attack, PushAttackConfig,
};
use robustcf::distortion::{rms_bound, rms_distortion_exact, rms_distortion_exact_with_law};
use robustcf::harness::{
    bound_sweep, ingest_csv, load_data, run_experiment_on, write_plot_table, Algo,
    ExperimentConfig, PlotTable,
};
use robustcf::{InspectionOrder, RatingScale, TrainingSet};

#[derive(Parser)]
#[command(
    name = "robustcf",
    version,
    about = "Manipulation-robust collaborative filtering toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a ratings CSV into a binary cache.
    Ingest {
        /// `user,item,rating` file with integer ratings 1..=levels.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        /// Cache file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate push-attack profiles against a data set and write them as CSV.
    Attack {
        #[command(flatten)]
        data: DataArgs,
        /// Manipulated fraction of the combined data.
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        promote_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write RMS distortion bound tables.
    Bound {
        /// Manipulated fractions; defaults to 0.01, 0.05, 0.1 and 0.2.
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distortion and prediction error of one algorithm.
    Eval {
        #[arg(long)]
        algo: Algo,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Full protocol: every configured algorithm and attack size.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Numerical checks of the distortion bounds and the analytic instances.
    Verify {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Ratings CSV or a cache written by `ingest`.
    #[arg(long)]
    data: PathBuf,
    /// Rating levels of a CSV input.
    #[arg(long, default_value_t = 5)]
    levels: usize,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ratings CSV or cache; overrides the config's data source.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Manipulated fractions; override the config's attack sizes.
    #[arg(long, value_delimiter = ',')]
    r: Vec<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Binary cache of an ingested file.
#[derive(Serialize, Deserialize)]
struct Cache {
    data: TrainingSet,
    user_ids: Vec<u64>,
    item_ids: Vec<u64>,
}

fn is_cache(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

fn read_cache(path: &Path) -> Result<Cache> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let cache: Cache = bincode::deserialize(&bytes).context("decoding cache")?;
    let n = cache.data.n_products();
    let scale = cache.data.scale().clone();
    // Revalidate what came off disk.
    let data = TrainingSet::new(scale, n, cache.data.into_vectors())?;
    Ok(Cache { data, ..cache })
}

fn load(path: &Path, levels: usize) -> Result<Cache> {
    if is_cache(path) {
        return read_cache(path);
    }
    let ingested = ingest_csv(path, &RatingScale::uniform(levels)?)?;
    Ok(Cache {
        data: ingested.data,
        user_ids: ingested.user_ids,
        item_ids: ingested.item_ids,
    })
}

fn ingest(input: &Path, levels: usize, out: &Path) -> Result<()> {
    let ingested = ingest_csv(input, &RatingScale::uniform(levels)?)?;
    println!(
        "users {} items {} ratings {} duplicates {}",
        ingested.data.len(),
        ingested.data.n_products(),
        ingested.data.iter().map(|v| v.rated_count()).sum::<usize>(),
        ingested.duplicates
    );
    let cache = Cache {
        data: ingested.data,
        user_ids: ingested.user_ids,
        item_ids: ingested.item_ids,
    };
    fs::write(out, bincode::serialize(&cache)?)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn attack(data: &DataArgs, r: f64, promote_fraction: f64, seed: u64, out: &Path) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        bail!("--r must lie in (0, 1)");
    }
    let cache = load(&data.data, data.levels)?;
    let count = (r * cache.data.len() as f64 / (1.0 - r)).round().max(1.0) as usize;
    let attack = generate_push_attack(
        &cache.data,
        &PushAttackConfig {
            promote_fraction,
            count,
            rng_seed: seed,
        },
    )?;
    let first_id = cache.user_ids.iter().max().map_or(0, |m| m + 1);
    let mut w = std::io::BufWriter::new(fs::File::create(out)?);
    writeln!(w, "user,item,rating")?;
    for (i, z) in attack.profiles.iter().enumerate() {
        for (p, level) in z.rated() {
            writeln!(
                w,
                "{},{},{}",
                first_id + i as u64,
                cache.item_ids[p],
                level + 1
            )?;
        }
    }
    w.flush()?;
    let promoted: Vec<String> = attack
        .promoted
        .iter()
        .map(|&p| cache.item_ids[p].to_string())
        .collect();
    println!("profiles {count} promoted {}", promoted.join(","));
    Ok(())
}

fn bound(r: &[f64], n_max: usize, out: &Path) -> Result<()> {
    if n_max == 0 {
        bail!("--n-max must be at least 1");
    }
    let r = if r.is_empty() {
        ExperimentConfig::default().bound_r
    } else {
        r.to_vec()
    };
    fs::create_dir_all(out)?;
    for r in r {
        if !(0.0..1.0).contains(&r) {
            bail!("r = {r} outside [0, 1)");
        }
        let values: Vec<f64> = (1..=n_max).map(|n| rms_bound(n, r)).collect();
        write_plot_table(&PlotTable::from_values(format!("bnd_{r:.2}"), &values), out)?;
    }
    Ok(())
}

fn run(args: &RunArgs, algo: Option<Algo>) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_max {
        cfg.n_max = n;
    }
    if !args.r.is_empty() {
        cfg.set_attack_fractions(&args.r)?;
    }
    if let Some(algo) = algo {
        cfg.algorithms = vec![algo];
    }
    let data = match &args.data {
        Some(path) => load(path, cfg.levels)?.data,
        None => load_data(&cfg)?,
    };
    let report = run_experiment_on(&cfg, &data, &args.out)?;
    let n = cfg.n_max;
    for (a, r) in report.attack_r.iter().enumerate() {
        println!("r = {r:.4}  bound(n={n}) = {:.6}", rms_bound(n, *r));
        for res in &report.results {
            println!(
                "  {:<9} distortion {:.6}  error {:.6}",
                res.algo.name(),
                res.distortions[a][n - 1],
                res.errors[n - 1]
            );
        }
    }
    println!(
        "wrote {} files to {}",
        report.files.len(),
        args.out.display()
    );
    Ok(())
}

fn line(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn verify(instances: usize, seed: u64) -> Result<bool> {
    let sweep = bound_sweep(instances, seed)?;
    let mut ok = true;
    ok &= line(
        "kl <= ln(1/(1-r))/n",
        sweep.kl_violations == 0,
        format!(
            "{} violations in {} checks, max ratio {:.6}",
            sweep.kl_violations, sweep.checks, sweep.max_kl_ratio
        ),
    );
    ok &= line(
        "rms <= sqrt(kl/2)",
        sweep.rms_violations == 0,
        format!("{} violations", sweep.rms_violations),
    );
    ok &= line(
        "binary <= 2 rms",
        sweep.binary_double_violations == 0,
        format!("{} violations", sweep.binary_double_violations),
    );
    println!(
        "INFO binary <= rms: {} violations (the drop is |2p-1| when the threshold flips)",
        sweep.binary_violations
    );
    ok &= line(
        "kl <= D(type pmfs)/n",
        sweep.chain_violations == 0,
        format!("{} violations", sweep.chain_violations),
    );
    ok &= line(
        "D(type pmfs) <= ln(1/(1-r))",
        sweep.divergence_violations == 0,
        format!("{} violations", sweep.divergence_violations),
    );

    let target = 1.0 / (3.0 * 2f64.sqrt());
    for n in [8, 12] {
        let inst = build_worst_case_instance(n)?;
        let clean = SimpleNnModel::new(&inst.honest)?;
        let corrupt = SimpleNnModel::new(&inst.honest.concat(&inst.manipulated)?)?;
        let rms =
            rms_distortion_exact_with_law(&inst.clean_law(), &clean, &corrupt, &inst.order, n)?;
        let worst = (2..=n)
            .step_by(2)
            .map(|k| (rms.value(k) - target).abs())
            .fold(0.0, f64::max);
        ok &= line(
            &format!("nearest-neighbor worst case N={n}"),
            worst <= 1e-9,
            format!("max |rms - 1/(3 sqrt 2)| = {worst:.3e}"),
        );
    }

    let (y, z) = build_block_toy(1, 1)?;
    let yz = y.concat(&z)?;
    let order = InspectionOrder::identity(1);
    let knn = rms_distortion_exact_with_law(
        &kde_fit(&y, &KdeConfig::default())?,
        &knn_fit(&y, &KnnConfig::default())?,
        &knn_fit(&yz, &KnnConfig::default())?,
        &order,
        1,
    )?
    .value(1);
    let kde = rms_distortion_exact(
        &kde_fit(&y, &KdeConfig::default())?,
        &kde_fit(&yz, &KdeConfig::default())?,
        &order,
        1,
    )?
    .value(1);
    let k1 = 1.0 / (1.0 + (-1.0 / 0.15f64).exp());
    ok &= line("block toy knn", knn == 0.5, format!("{knn}"));
    ok &= line(
        "block toy kde",
        (kde - ((k1 + 0.5) / 2.0 - 0.5)).abs() <= 1e-6,
        format!("{kde:.9}"),
    );
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest { input, levels, out } => ingest(input, *levels, out).map(|_| true),
        Command::Attack {
            data,
            r,
            promote_fraction,
            seed,
            out,
        } => attack(data, *r, *promote_fraction, *seed, out).map(|_| true),
        Command::Bound { r, n_max, out } => bound(r, *n_max, out).map(|_| true),
        Command::Eval { algo, run: args } => run(args, Some(*algo)).map(|_| true),
        Command::Experiment { run: args } => run(args, None).map(|_| true),
        Command::Verify { instances, seed } => verify(*instances, *seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
