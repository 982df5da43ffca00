use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Seeded stratified split into `(train, eval)`.
///
/// Each class contributes `round(fraction · n_c)` samples to the train side,
/// clamped to `[1, n_c - 1]` so both sides see every class. `fraction = 1`
/// puts everything in train and leaves eval empty. Rows keep their original
/// relative order.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1], got {fraction}")));
    }
    let mut rng = Rng::new(seed);
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (class, members) in class_members(data).into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if fraction == 1.0 {
            train.extend(members);
            continue;
        }
        if n < 2 {
            return Err(Error::Stratification { class: class as u32, count: n });
        }
        let mut members = members;
        rng.shuffle(&mut members);
        let k = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..k]);
        eval.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((data.select(&train), data.select(&eval)))
}

/// Stratified subsample keeping `fraction` of every class (the train side of
/// [`split`]).
pub fn stratified_subsample(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    split(data, fraction, seed).map(|(train, _)| train)
}

fn class_members(data: &Dataset) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); data.num_classes];
    for (i, &l) in data.labels.iter().enumerate() {
        members[l as usize].push(i);
    }
    members
}
