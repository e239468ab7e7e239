use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ratings::{RatingScale, RatingsVector, TrainingSet};

/// A ratings file loaded into a training set.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub data: TrainingSet,
    /// External id of each vector, ascending.
    pub user_ids: Vec<u64>,
    /// External id of each product index, ascending.
    pub item_ids: Vec<u64>,
    /// Repeated `(user, item)` pairs; the last occurrence was kept.
    pub duplicates: usize,
}

/// Reads `user,item,rating` records. Ratings are integers `1..=scale.len()`
/// mapped to levels `0..scale.len()`. Tab-separated files are accepted too;
/// columns past the third are ignored, as are `#` comment lines and a
/// non-numeric first record.
pub fn ingest_csv(path: &Path, scale: &RatingScale) -> Result<Ingested> {
    let text = fs::read_to_string(path)?;
    let text = text.trim_start_matches('\u{feff}');
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let delimiter = match first {
        Some(l) if !l.contains(',') && l.contains('\t') => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .delimiter(delimiter)
        .from_reader(text.as_bytes());

    let mut cells: BTreeMap<(u64, u64), u8> = BTreeMap::new();
    let mut items = BTreeSet::new();
    let mut duplicates = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if record.len() < 3 {
            return Err(parse_err(format!(
                "expected 3 fields, found {}",
                record.len()
            )));
        }
        let (user, item) = match (record[0].parse::<u64>(), record[1].parse::<u64>()) {
            (Ok(u), Ok(it)) => (u, it),
            _ if i == 0 => continue,
            _ => return Err(parse_err(format!("bad user or item id in {record:?}"))),
        };
        let raw = &record[2];
        let level = match raw.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && v >= 1.0 && v <= scale.len() as f64 => v as u8 - 1,
            Ok(_) => {
                return Err(Error::UnknownRatingValue {
                    path: path.to_path_buf(),
                    line,
                    raw: raw.to_string(),
                })
            }
            Err(_) => return Err(parse_err(format!("bad rating {raw:?}"))),
        };
        if cells.insert((user, item), level).is_some() {
            duplicates += 1;
        }
        items.insert(item);
    }
    if cells.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }

    let item_ids: Vec<u64> = items.into_iter().collect();
    let item_index: BTreeMap<u64, usize> = item_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();
    let n = item_ids.len();
    let mut user_ids = Vec::new();
    let mut vectors: Vec<RatingsVector> = Vec::new();
    for ((user, item), level) in cells {
        if user_ids.last() != Some(&user) {
            user_ids.push(user);
            vectors.push(RatingsVector::new(n));
        }
        vectors
            .last_mut()
            .expect("pushed above")
            .set(item_index[&item], level)?;
    }
    Ok(Ingested {
        data: TrainingSet::new(scale.clone(), n, vectors)?,
        user_ids,
        item_ids,
        duplicates,
    })
}
