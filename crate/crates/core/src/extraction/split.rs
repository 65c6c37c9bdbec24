use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::ScenarioRecord;

/// Seeded train/validation split. Augmented records travel with their
/// parent. The train side receives whole groups until it holds at least
/// `ceil(train_fraction * n)` records; both sides keep input order.
pub fn split(
    records: &[ScenarioRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<ScenarioRecord>, Vec<ScenarioRecord>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut roots: BTreeMap<&str, usize> = BTreeMap::new();
    let group_of: Vec<usize> = records
        .iter()
        .map(|r| {
            let next = roots.len();
            *roots.entry(r.root_id()).or_insert(next)
        })
        .collect();
    let mut sizes = vec![0usize; roots.len()];
    for &g in &group_of {
        sizes[g] += 1;
    }
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let target = (train_fraction * records.len() as f64 - 1e-9).ceil() as usize;
    let mut in_train = vec![false; roots.len()];
    let mut filled = 0;
    for g in order {
        if filled >= target {
            break;
        }
        in_train[g] = true;
        filled += sizes[g];
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (r, &g) in records.iter().zip(&group_of) {
        if in_train[g] {
            train.push(r.clone());
        } else {
            val.push(r.clone());
        }
    }
    Ok((train, val))
}
