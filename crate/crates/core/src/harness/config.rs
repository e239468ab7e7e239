use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::algorithms::NbConfig;
use crate::error::{Error, Result};
use crate::harness::Algo;

/// Synthetic ratings drawn from a random naive Bayes mixture: `eta` uniform,
/// every `theta[l][n]` from a symmetric Dirichlet(`alpha`), entries hidden
/// with probability `question_rate`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub products: usize,
    pub components: usize,
    pub question_rate: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Rating levels, spread evenly over `[0, 1]`.
    pub levels: usize,
    pub honest: usize,
    pub test: usize,
    /// Attacker profile counts, one attack per entry.
    pub attack_counts: Vec<usize>,
    pub promote_fraction: f64,
    pub n_max: usize,
    pub algorithms: Vec<Algo>,
    pub kde_beta: f64,
    pub knn_grid: Vec<usize>,
    pub tau_grid: Vec<f64>,
    /// EM settings; `tau` is chosen by cross-validation.
    pub nb: NbConfig,
    pub replications: usize,
    pub seed: u64,
    /// Manipulated fractions of the standalone bound tables.
    pub bound_r: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticSpec {
                users: 5000,
                products: 100,
                components: 4,
                question_rate: 0.5,
                alpha: 0.5,
            }),
            levels: 5,
            honest: 4000,
            test: 1000,
            attack_counts: vec![444, 1714, 4000],
            promote_fraction: 0.5,
            n_max: 40,
            algorithms: vec![Algo::Kde, Algo::Nb, Algo::Knn],
            kde_beta: 0.15,
            knn_grid: (1..=40).collect(),
            tau_grid: vec![1.0, 10.0, 100.0, 1000.0, 10_000.0, 100_000.0],
            nb: NbConfig::default(),
            replications: 5,
            seed: 0,
            bound_r: vec![0.01, 0.05, 0.1, 0.2],
        }
    }
}

fn list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect()
}

/// `a..b` (inclusive) or a comma-separated list.
fn int_grid(value: &str) -> Option<Vec<usize>> {
    match value.split_once("..") {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (a <= b).then(|| (a..=b).collect())
        }
        None => list(value),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults overridden by `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut fractions = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "r" {
                fractions =
                    Some(list::<f64>(value).ok_or_else(|| {
                        Error::InvalidConfig(format!("line {}: bad r list", i + 1))
                    })?);
                continue;
            }
            cfg.set(key, value)
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        }
        if let Some(r) = fractions {
            cfg.set_attack_fractions(&r)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn synthetic_mut(&mut self) -> &mut SyntheticSpec {
        if !matches!(self.data, DataSource::Synthetic(_)) {
            self.data = Self::default().data;
        }
        match &mut self.data {
            DataSource::Synthetic(s) => s,
            DataSource::Csv(_) => unreachable!("replaced above"),
        }
    }

    /// Overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidConfig(format!("bad value {value:?} for {key}"));
        match key {
            "data" => {
                self.data = match value {
                    "synthetic" => Self::default().data,
                    _ => {
                        DataSource::Csv(PathBuf::from(value.strip_prefix("csv:").ok_or_else(bad)?))
                    }
                }
            }
            "synthetic.users" => self.synthetic_mut().users = value.parse().map_err(|_| bad())?,
            "synthetic.products" => {
                self.synthetic_mut().products = value.parse().map_err(|_| bad())?
            }
            "synthetic.components" => {
                self.synthetic_mut().components = value.parse().map_err(|_| bad())?
            }
            "synthetic.question_rate" => {
                self.synthetic_mut().question_rate = value.parse().map_err(|_| bad())?
            }
            "synthetic.alpha" => self.synthetic_mut().alpha = value.parse().map_err(|_| bad())?,
            "levels" => self.levels = value.parse().map_err(|_| bad())?,
            "honest" => self.honest = value.parse().map_err(|_| bad())?,
            "test" => self.test = value.parse().map_err(|_| bad())?,
            "attack_counts" => self.attack_counts = list(value).ok_or_else(bad)?,
            "promote_fraction" => self.promote_fraction = value.parse().map_err(|_| bad())?,
            "n_max" => self.n_max = value.parse().map_err(|_| bad())?,
            "algorithms" => {
                self.algorithms = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            "kde.beta" => self.kde_beta = value.parse().map_err(|_| bad())?,
            "knn.grid" => self.knn_grid = int_grid(value).ok_or_else(bad)?,
            "nb.tau_grid" => self.tau_grid = list(value).ok_or_else(bad)?,
            "nb.l_max" => self.nb.l_max = value.parse().map_err(|_| bad())?,
            "nb.restarts" => self.nb.restarts = value.parse().map_err(|_| bad())?,
            "nb.em_max_iters" => self.nb.em_max_iters = value.parse().map_err(|_| bad())?,
            "nb.em_tol" => self.nb.em_tol = value.parse().map_err(|_| bad())?,
            "replications" => self.replications = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "bound_r" => self.bound_r = list(value).ok_or_else(bad)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Attack sizes giving manipulated fractions `r` against `honest` users.
    pub fn set_attack_fractions(&mut self, r: &[f64]) -> Result<()> {
        if r.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidConfig(format!("r must lie in [0, 1): {r:?}")));
        }
        self.attack_counts = r
            .iter()
            .map(|r| (r * self.honest as f64 / (1.0 - r)).round() as usize)
            .collect();
        Ok(())
    }

    /// Manipulated fraction of an attack with `count` profiles.
    pub fn attack_r(&self, count: usize) -> f64 {
        count as f64 / (self.honest + count) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.honest == 0 || self.test == 0 || self.replications == 0 {
            return fail("honest, test and replications must be positive");
        }
        if self.n_max == 0 {
            return fail("n_max must be at least 1");
        }
        if self.levels < 2 || self.levels > u8::MAX as usize {
            return fail("levels must lie in 2..=255");
        }
        if self.attack_counts.is_empty() || self.algorithms.is_empty() {
            return fail("need at least one attack size and one algorithm");
        }
        if !(self.promote_fraction > 0.0 && self.promote_fraction <= 1.0) {
            return fail("promote_fraction must lie in (0, 1]");
        }
        if self.knn_grid.is_empty() || self.knn_grid.contains(&0) || self.tau_grid.is_empty() {
            return fail("cross-validation grids must be nonempty with k >= 1");
        }
        if self.tau_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return fail("tau values must be positive");
        }
        if self.bound_r.iter().any(|r| !(0.0..1.0).contains(r)) {
            return fail("bound_r values must lie in [0, 1)");
        }
        if self.algorithms.contains(&Algo::SimpleNn) && self.levels != 2 {
            return fail("simple-nn needs levels = 2");
        }
        if let DataSource::Synthetic(s) = &self.data {
            let ok = s.users >= self.honest + self.test
                && s.products >= 1
                && s.components >= 1
                && (0.0..1.0).contains(&s.question_rate)
                && s.alpha > 0.0;
            if !ok {
                return fail("invalid synthetic data spec");
            }
        }
        crate::algorithms::KdeConfig {
            beta: self.kde_beta,
        }
        .validate()?;
        NbConfig {
            tau: self.tau_grid[0],
            ..self.nb
        }
        .validate()
    }

    /// Canonical `key = value` rendering; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("writing to a String");
        match &self.data {
            DataSource::Synthetic(s) => {
                kv("data", "synthetic".into());
                kv("synthetic.users", s.users.to_string());
                kv("synthetic.products", s.products.to_string());
                kv("synthetic.components", s.components.to_string());
                kv("synthetic.question_rate", s.question_rate.to_string());
                kv("synthetic.alpha", s.alpha.to_string());
            }
            DataSource::Csv(p) => kv("data", format!("csv:{}", p.display())),
        }
        kv("levels", self.levels.to_string());
        kv("honest", self.honest.to_string());
        kv("test", self.test.to_string());
        kv("attack_counts", join(&self.attack_counts));
        kv("promote_fraction", self.promote_fraction.to_string());
        kv("n_max", self.n_max.to_string());
        kv("algorithms", join(&self.algorithms));
        kv("kde.beta", self.kde_beta.to_string());
        kv("knn.grid", join(&self.knn_grid));
        kv("nb.tau_grid", join(&self.tau_grid));
        kv("nb.l_max", self.nb.l_max.to_string());
        kv("nb.restarts", self.nb.restarts.to_string());
        kv("nb.em_max_iters", self.nb.em_max_iters.to_string());
        kv("nb.em_tol", self.nb.em_tol.to_string());
        kv("replications", self.replications.to_string());
        kv("seed", self.seed.to_string());
        kv("bound_r", join(&self.bound_r));
        out
    }
}
