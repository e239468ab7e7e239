use proptest::prelude::*;
use rand::Rng;

use robustcf::algorithms::{
    kde_fit, knn_fit, nb_em_run, nb_fit, KdeConfig, KnnConfig, MixtureTypeModel, NbConfig,
    Predictor,
};
use robustcf::distortion::{kl_bound, rms_bound};
use robustcf::ratings::pmf_mean;
use robustcf::seeds::SeedStream;
use robustcf::{RatingScale, RatingsVector, TrainingSet};

fn random_set(seed: u64, m: usize, n: usize, levels: usize, hidden: f64) -> TrainingSet {
    let mut rng = SeedStream::new(seed).rng();
    let vectors = (0..m)
        .map(|_| {
            let dense: Vec<Option<u8>> = (0..n)
                .map(|_| (!rng.gen_bool(hidden)).then(|| rng.gen_range(0..levels as u8)))
                .collect();
            RatingsVector::from_dense(&dense)
        })
        .collect();
    TrainingSet::new(RatingScale::uniform(levels).unwrap(), n, vectors).unwrap()
}

fn random_history(seed: u64, n: usize, levels: usize) -> RatingsVector {
    random_set(seed ^ 0xabcd, 1, n, levels, 0.5)
        .into_vectors()
        .remove(0)
}

fn assert_positive(model: &MixtureTypeModel) {
    assert!(model.min_marginal() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kde_scalar_is_pmf_mean(seed in any::<u64>(), m in 1usize..12, n in 1usize..8, levels in 2usize..6) {
        let w = random_set(seed, m, n, levels, 0.4);
        let model = kde_fit(&w, &KdeConfig::default()).unwrap();
        assert_positive(&model);
        let h = random_history(seed, n, levels);
        for p in 0..n {
            let pmf = model.predict_pmf(p, &h).unwrap();
            prop_assert!((model.predict_scalar(p, &h) - pmf_mean(&pmf)).abs() <= 1e-12);
        }
    }

    #[test]
    fn nb_scalar_is_pmf_mean(seed in any::<u64>(), m in 1usize..30, n in 1usize..6) {
        let w = random_set(seed, m, n, 3, 0.3);
        let cfg = NbConfig { l_max: 3, restarts: 2, em_max_iters: 50, rng_seed: seed, ..NbConfig::default() };
        let (params, model) = nb_fit(&w, &cfg).unwrap();
        prop_assert!(params.min_theta() > 0.0);
        assert_positive(&model);
        let h = random_history(seed, n, 3);
        for p in 0..n {
            let pmf = model.predict_pmf(p, &h).unwrap();
            prop_assert!((model.predict_scalar(p, &h) - pmf_mean(&pmf)).abs() <= 1e-12);
        }
    }

    #[test]
    fn em_never_decreases(seed in any::<u64>(), m in 2usize..40, n in 1usize..7, l in 1usize..5) {
        let w = random_set(seed, m, n, 2, 0.3);
        let run = nb_em_run(&w, l, &NbConfig::default(), seed).unwrap();
        for pair in run.trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-9, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn knn_stays_on_the_scale(seed in any::<u64>(), m in 1usize..20, n in 1usize..8, levels in 2usize..6, k in 1usize..12) {
        let w = random_set(seed, m, n, levels, 0.3);
        let model = knn_fit(&w, &KnnConfig { k }).unwrap();
        let h = random_history(seed, n, levels);
        for p in 0..n {
            let x = model.predict_scalar(p, &h);
            prop_assert!((0.0..=1.0).contains(&x), "{x}");
        }
    }

    #[test]
    fn bounds_are_monotone(n in 1usize..200, r in 0.001f64..0.95) {
        prop_assert!(kl_bound(n + 1, r) < kl_bound(n, r));
        prop_assert!(rms_bound(n + 1, r) < rms_bound(n, r));
        let r2 = r + (1.0 - r) / 2.0;
        prop_assert!(kl_bound(n, r2) > kl_bound(n, r));
        prop_assert!(rms_bound(n, r2) > rms_bound(n, r));
    }
}
