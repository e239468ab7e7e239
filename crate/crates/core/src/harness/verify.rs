//! Numerical sweep of the KDE distortion bounds over small random instances,
//! every inspection order and every history length.

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;

use crate::algorithms::{kde_fit, KdeConfig};
use crate::distortion::{exact_distortions, kl_bound};
use crate::error::Result;
use crate::oracle::{dense_kl, densify};
use crate::ratings::{InspectionOrder, RatingScale, RatingsVector, TrainingSet};
use crate::seeds::SeedStream;

pub const SWEEP_TOL: f64 = 1e-9;

/// How the manipulated vectors relate to the honest ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZVariant {
    /// Independent random vectors.
    Random,
    /// Copies of honest vectors.
    Copy,
    /// Honest vectors with every rating flipped.
    Flipped,
    /// Fully rated all-0 vectors.
    AllZero,
    /// Fully rated vectors opposite to the first honest vector.
    Opposite,
}

pub const Z_VARIANTS: [ZVariant; 5] = [
    ZVariant::Random,
    ZVariant::Copy,
    ZVariant::Flipped,
    ZVariant::AllZero,
    ZVariant::Opposite,
];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepInstance {
    pub honest: TrainingSet,
    pub manipulated: TrainingSet,
    pub r: f64,
    pub variant: ZVariant,
}

fn random_vector<R: Rng>(n: usize, rng: &mut R) -> RatingsVector {
    let dense: Vec<Option<u8>> = (0..n)
        .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(0..2u8)))
        .collect();
    RatingsVector::from_dense(&dense)
}

fn flip(v: &RatingsVector) -> RatingsVector {
    let mut out = RatingsVector::new(v.len());
    for (p, l) in v.rated() {
        out.set(p, 1 - l).expect("binary level");
    }
    out
}

/// Instance `index` of the sweep. Binary scale; `N`, the total size `M` and
/// `r` cycle through {3, 4, 5}, {4, 8, 12} and {1/4, 1/2}.
pub fn sweep_instance(index: usize, seed: u64) -> Result<SweepInstance> {
    let n = [3, 4, 5][index % 3];
    let m = [4, 8, 12][index / 3 % 3];
    let r = [0.25, 0.5][index / 9 % 2];
    let variant = Z_VARIANTS[index / 18 % Z_VARIANTS.len()];
    let mut rng = SeedStream::new(seed).index(index as u64).rng();
    let z_count = (r * m as f64) as usize;
    let honest: Vec<RatingsVector> = (0..m - z_count)
        .map(|_| random_vector(n, &mut rng))
        .collect();
    let manipulated: Vec<RatingsVector> = (0..z_count)
        .map(|i| match variant {
            ZVariant::Random => random_vector(n, &mut rng),
            ZVariant::Copy => honest[i % honest.len()].clone(),
            ZVariant::Flipped => flip(&honest[i % honest.len()]),
            ZVariant::AllZero => RatingsVector::from_dense(&vec![Some(0); n]),
            ZVariant::Opposite => {
                let first = &honest[0];
                let dense: Vec<Option<u8>> = (0..n)
                    .map(|p| Some(first.get(p).map_or(0, |l| 1 - l)))
                    .collect();
                RatingsVector::from_dense(&dense)
            }
        })
        .collect();
    let scale = RatingScale::binary();
    Ok(SweepInstance {
        honest: TrainingSet::new(scale.clone(), n, honest)?,
        manipulated: TrainingSet::new(scale, n, manipulated)?,
        r,
        variant,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepReport {
    pub instances: usize,
    /// `(instance, order, n)` triples checked.
    pub checks: usize,
    /// KL distortion above `(1/n) ln(1/(1-r))`.
    pub kl_violations: usize,
    /// RMS distortion above `sqrt(kl / 2)`.
    pub rms_violations: usize,
    /// Binary distortion above RMS distortion.
    pub binary_violations: usize,
    /// Binary distortion above twice the RMS distortion.
    pub binary_double_violations: usize,
    /// KL distortion above `D(clean || corrupt) / n` of the full type PMFs.
    pub chain_violations: usize,
    /// Instances where `D(clean || corrupt)` exceeds `ln(1/(1-r))`.
    pub divergence_violations: usize,
    /// Largest `kl / bound` seen.
    pub max_kl_ratio: f64,
}

impl SweepReport {
    /// Every check except binary against RMS, which can fail: when the
    /// corrupted threshold flips, the drop is `|2p - 1|` while the RMS term is
    /// only `|p - p'|`. Twice the RMS distortion always bounds it.
    pub fn passed(&self) -> bool {
        self.kl_violations == 0
            && self.rms_violations == 0
            && self.binary_double_violations == 0
            && self.chain_violations == 0
            && self.divergence_violations == 0
    }

    fn merge(mut self, o: &SweepReport) -> Self {
        self.instances += o.instances;
        self.checks += o.checks;
        self.kl_violations += o.kl_violations;
        self.rms_violations += o.rms_violations;
        self.binary_violations += o.binary_violations;
        self.binary_double_violations += o.binary_double_violations;
        self.chain_violations += o.chain_violations;
        self.divergence_violations += o.divergence_violations;
        self.max_kl_ratio = self.max_kl_ratio.max(o.max_kl_ratio);
        self
    }
}

pub fn check_instance(inst: &SweepInstance) -> Result<SweepReport> {
    let cfg = KdeConfig::default();
    let clean = kde_fit(&inst.honest, &cfg)?;
    let corrupt = kde_fit(&inst.honest.concat(&inst.manipulated)?, &cfg)?;
    let divergence = dense_kl(&densify(&clean)?, &densify(&corrupt)?)?;
    let mut report = SweepReport {
        instances: 1,
        divergence_violations: usize::from(divergence > (1.0 / (1.0 - inst.r)).ln() + SWEEP_TOL),
        ..SweepReport::default()
    };
    let n_products = inst.honest.n_products();
    for perm in (0..n_products).permutations(n_products) {
        let order = InspectionOrder::new(perm)?;
        let d = exact_distortions(&clean, &corrupt, &order, n_products)?;
        let binary = d.binary.expect("binary scale");
        for n in 1..=n_products {
            let (kl, rms, bin) = (d.kl.value(n), d.rms.value(n), binary.value(n));
            let bound = kl_bound(n, inst.r);
            report.checks += 1;
            report.kl_violations += usize::from(kl > bound + SWEEP_TOL);
            report.rms_violations += usize::from(rms > (kl / 2.0).sqrt() + SWEEP_TOL);
            report.binary_violations += usize::from(bin > rms + SWEEP_TOL);
            report.binary_double_violations += usize::from(bin > 2.0 * rms + SWEEP_TOL);
            report.chain_violations += usize::from(kl > divergence / n as f64 + SWEEP_TOL);
            report.max_kl_ratio = report.max_kl_ratio.max(kl / bound);
        }
    }
    Ok(report)
}

pub fn bound_sweep(instances: usize, seed: u64) -> Result<SweepReport> {
    let reports: Vec<SweepReport> = (0..instances)
        .into_par_iter()
        .map(|i| check_instance(&sweep_instance(i, seed)?))
        .collect::<Result<_>>()?;
    Ok(reports
        .iter()
        .fold(SweepReport::default(), |acc, r| acc.merge(r)))
}
