use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::ratings::TrainingSet;
use crate::seeds::SeedStream;

/// Honest training users and test users drawn from one data set.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSplit {
    pub honest: TrainingSet,
    pub test: TrainingSet,
    /// Source rows of `honest`.
    pub honest_rows: Vec<usize>,
    /// Source rows of `test`, after dropping users with fewer than `n_max`
    /// ratings.
    pub test_rows: Vec<usize>,
}

/// Samples `honest + test` distinct users uniformly, keeps the first `honest`
/// as training data and the rest, minus users with fewer than `n_max` ratings,
/// as test users.
pub fn sample_protocol_split(
    data: &TrainingSet,
    honest: usize,
    test: usize,
    n_max: usize,
    seed: u64,
) -> Result<ProtocolSplit> {
    if honest == 0 || test == 0 {
        return Err(Error::InvalidConfig(
            "honest and test counts must be positive".into(),
        ));
    }
    if honest + test > data.len() {
        return Err(Error::InsufficientData(format!(
            "{} users requested from {}",
            honest + test,
            data.len()
        )));
    }
    let mut rows: Vec<usize> = (0..data.len()).collect();
    let (picked, _) = rows.partial_shuffle(&mut SeedStream::new(seed).rng(), honest + test);
    let honest_rows = picked[..honest].to_vec();
    let test_rows: Vec<usize> = picked[honest..]
        .iter()
        .copied()
        .filter(|&i| data.vectors()[i].rated_count() >= n_max)
        .collect();
    if test_rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no test user has {n_max} ratings"
        )));
    }
    Ok(ProtocolSplit {
        honest: data.subset(&honest_rows),
        test: data.subset(&test_rows),
        honest_rows,
        test_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::{RatingScale, RatingsVector};

    fn users(counts: &[usize]) -> TrainingSet {
        let n = 40;
        let vectors = counts
            .iter()
            .map(|&c| {
                let dense: Vec<Option<u8>> = (0..n).map(|p| (p < c).then_some(1)).collect();
                RatingsVector::from_dense(&dense)
            })
            .collect();
        TrainingSet::new(RatingScale::binary(), n, vectors).unwrap()
    }

    #[test]
    fn deterministic_and_disjoint() {
        let data = users(&[5, 6, 7]);
        let a = sample_protocol_split(&data, 2, 1, 1, 11).unwrap();
        assert_eq!(a, sample_protocol_split(&data, 2, 1, 1, 11).unwrap());
        assert_eq!(a.honest.len(), 2);
        assert_eq!(a.test.len(), 1);
        let mut all: Vec<usize> = a.honest_rows.iter().chain(&a.test_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn short_test_users_are_dropped() {
        let data = users(&[39, 40, 40, 40]);
        for seed in 0..20 {
            let s = sample_protocol_split(&data, 1, 3, 40, seed).unwrap();
            assert!(!s.test_rows.contains(&0));
            assert!(s.test.iter().all(|x| x.rated_count() >= 40));
        }
    }

    #[test]
    fn too_few_users() {
        let data = users(&[3, 3]);
        assert!(matches!(
            sample_protocol_split(&data, 2, 1, 1, 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            sample_protocol_split(&data, 1, 1, 4, 0),
            Err(Error::InsufficientData(_))
        ));
    }
}
