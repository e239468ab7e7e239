//! Exact distortion by depth-first enumeration of active-user histories.
//!
//! Each node of the search tree is one history `x^{k-1}`; its probability is
//! the product of the trajectory law's PMF values along the path, carried down
//! the recursion so every prefix is visited and weighted exactly once.

use crate::algorithms::Predictor;
use crate::distortion::{DistortionSeries, Measure, TrajectoryLaw};
use crate::error::{Error, Result};
use crate::ratings::{kl_divergence, InspectionOrder, RatingPmf, RatingsVector};

/// Upper limit on `|S̄|^n` for exact enumeration.
pub const MAX_HISTORIES: f64 = 1e7;

/// Law given by the clean predictor's own PMFs.
struct PredictiveLaw<'a>(&'a dyn Predictor);

impl TrajectoryLaw for PredictiveLaw<'_> {
    fn next_pmf(&self, product: usize, history: &RatingsVector) -> RatingPmf {
        self.0
            .predict_pmf(product, history)
            .expect("checked to be probabilistic before enumeration")
    }
}

#[derive(Clone, Copy, Default)]
struct Wants {
    kl: bool,
    rms: bool,
    binary: bool,
}

/// All measures from one enumeration. `binary` is present only on the binary
/// scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistortions {
    pub kl: DistortionSeries,
    pub rms: DistortionSeries,
    pub binary: Option<DistortionSeries>,
}

struct Enumeration<'a> {
    law: &'a dyn TrajectoryLaw,
    clean: &'a dyn Predictor,
    corrupt: &'a dyn Predictor,
    order: &'a [usize],
    wants: Wants,
    kl: Vec<f64>,
    rms: Vec<f64>,
    binary: Vec<f64>,
}

/// `x̌ = 1` iff `p(1) >= 1/2`.
fn threshold(pmf: &RatingPmf) -> u8 {
    u8::from(pmf.prob(1) >= 0.5)
}

impl Enumeration<'_> {
    fn visit(&mut self, depth: usize, history: &mut RatingsVector, prob: f64) -> Result<()> {
        let product = self.order[depth];
        let w = self.wants;
        if w.kl || w.binary {
            let p = self
                .clean
                .predict_pmf(product, history)
                .ok_or(Error::NotProbabilistic)?;
            let q = self
                .corrupt
                .predict_pmf(product, history)
                .ok_or(Error::NotProbabilistic)?;
            if w.kl {
                self.kl[depth] += prob * kl_divergence(&p, &q)?;
            }
            if w.binary {
                self.binary[depth] += prob * (p.prob(threshold(&p)) - p.prob(threshold(&q)));
            }
        }
        if w.rms {
            let d = self.clean.predict_scalar(product, history)
                - self.corrupt.predict_scalar(product, history);
            self.rms[depth] += prob * d * d;
        }
        if depth + 1 == self.order.len() {
            return Ok(());
        }
        let next = self.law.next_pmf(product, history);
        for (level, &p) in next.probs().iter().enumerate() {
            if p > 0.0 {
                history.set(product, level as u8)?;
                self.visit(depth + 1, history, prob * p)?;
                history.remove(product);
            }
        }
        Ok(())
    }
}

fn check_shape(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
) -> Result<()> {
    if clean.scale() != corrupt.scale() {
        return Err(Error::ScaleMismatch);
    }
    for m in [clean.n_products(), corrupt.n_products()] {
        if m != order.len() {
            return Err(Error::LengthMismatch {
                expected: order.len(),
                found: m,
            });
        }
    }
    if n == 0 || n > order.len() {
        return Err(Error::InvalidConfig(format!(
            "n = {n} outside 1..={}",
            order.len()
        )));
    }
    let histories = (clean.scale().len() as f64).powi(n as i32);
    if histories > MAX_HISTORIES {
        return Err(Error::EnumerationTooLarge(histories));
    }
    Ok(())
}

fn enumerate<'a>(
    law: &'a dyn TrajectoryLaw,
    clean: &'a dyn Predictor,
    corrupt: &'a dyn Predictor,
    order: &'a InspectionOrder,
    n: usize,
    wants: Wants,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_shape(clean, corrupt, order, n)?;
    let mut e = Enumeration {
        law,
        clean,
        corrupt,
        order: order.prefix(n),
        wants,
        kl: vec![0.0; n],
        rms: vec![0.0; n],
        binary: vec![0.0; n],
    };
    let mut history = RatingsVector::new(order.len());
    e.visit(0, &mut history, 1.0)?;
    Ok((e.kl, e.rms, e.binary))
}

fn require_pmf(clean: &dyn Predictor) -> Result<()> {
    clean
        .predict_pmf(0, &RatingsVector::new(clean.n_products()))
        .map(|_| ())
        .ok_or(Error::NotProbabilistic)
}

/// KL distortion per step, with the clean model as the trajectory law.
pub fn kl_distortion_exact(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
) -> Result<DistortionSeries> {
    require_pmf(clean)?;
    let wants = Wants {
        kl: true,
        ..Wants::default()
    };
    let (kl, _, _) = enumerate(&PredictiveLaw(clean), clean, corrupt, order, n, wants)?;
    Ok(DistortionSeries {
        measure: Measure::Kl,
        per_step: kl,
    })
}

/// RMS distortion per step, with the clean model as the trajectory law.
pub fn rms_distortion_exact(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
) -> Result<DistortionSeries> {
    require_pmf(clean)?;
    rms_distortion_exact_with_law(&PredictiveLaw(clean), clean, corrupt, order, n)
}

/// RMS distortion per step under an explicit trajectory law; works for
/// scalar-only predictors.
pub fn rms_distortion_exact_with_law(
    law: &dyn TrajectoryLaw,
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
) -> Result<DistortionSeries> {
    let wants = Wants {
        rms: true,
        ..Wants::default()
    };
    let (_, rms, _) = enumerate(law, clean, corrupt, order, n, wants)?;
    Ok(DistortionSeries {
        measure: Measure::Rms,
        per_step: rms,
    })
}

/// Binary prediction distortion per step.
pub fn binary_distortion_exact(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
) -> Result<DistortionSeries> {
    if !clean.scale().is_binary() {
        return Err(Error::NonBinaryScale);
    }
    require_pmf(clean)?;
    let wants = Wants {
        binary: true,
        ..Wants::default()
    };
    let (_, _, binary) = enumerate(&PredictiveLaw(clean), clean, corrupt, order, n, wants)?;
    Ok(DistortionSeries {
        measure: Measure::Binary,
        per_step: binary,
    })
}

/// KL, RMS and (on the binary scale) binary distortion from one enumeration.
pub fn exact_distortions(
    clean: &dyn Predictor,
    corrupt: &dyn Predictor,
    order: &InspectionOrder,
    n: usize,
) -> Result<ExactDistortions> {
    require_pmf(clean)?;
    let is_binary = clean.scale().is_binary();
    let wants = Wants {
        kl: true,
        rms: true,
        binary: is_binary,
    };
    let (kl, rms, binary) = enumerate(&PredictiveLaw(clean), clean, corrupt, order, n, wants)?;
    Ok(ExactDistortions {
        kl: DistortionSeries {
            measure: Measure::Kl,
            per_step: kl,
        },
        rms: DistortionSeries {
            measure: Measure::Rms,
            per_step: rms,
        },
        binary: is_binary.then_some(DistortionSeries {
            measure: Measure::Binary,
            per_step: binary,
        }),
    })
}
