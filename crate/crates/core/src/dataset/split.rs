use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Partition users instead of samples; off by default.
    #[serde(default)]
    pub cross_user: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            cross_user: false,
        }
    }
}

/// Indices into `Dataset::samples`, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn take_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Stratified by (activity, orientation) cell: each cell contributes
/// `round(fraction * n)` samples to training, at least one to each side.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, streams::SPLIT, 0));
    let mut train = Vec::new();
    let mut test = Vec::new();

    if spec.cross_user {
        let users: BTreeSet<u32> = dataset
            .samples
            .iter()
            .map(|s| {
                s.user_id
                    .ok_or_else(|| Error::Split(format!("sample {} has no user id", s.sample_id)))
            })
            .collect::<Result<_>>()?;
        if users.len() < 2 {
            return Err(Error::Split("cross-user split needs at least two users".into()));
        }
        let mut order: Vec<u32> = users.into_iter().collect();
        order.shuffle(&mut rng);
        let train_users: BTreeSet<u32> = order[..take_count(order.len(), spec.train_fraction)]
            .iter()
            .copied()
            .collect();
        for (i, s) in dataset.samples.iter().enumerate() {
            if train_users.contains(&s.user_id.expect("checked above")) {
                train.push(i);
            } else {
                test.push(i);
            }
        }
        return Ok(Split { train, test });
    }

    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        cells.entry((s.activity, s.orientation)).or_default().push(i);
    }
    for a in 0..dataset.num_activities() {
        for o in 0..dataset.num_orientations() {
            let n = cells.get(&(a, o)).map_or(0, Vec::len);
            if n < 2 {
                return Err(Error::Split(format!(
                    "cell ({}, {}) has {n} samples, need at least 2",
                    dataset.activity_names[a], dataset.orientation_names[o]
                )));
            }
        }
    }
    for members in cells.values_mut() {
        members.shuffle(&mut rng);
        let k = take_count(members.len(), spec.train_fraction);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CsiSample, MultiApSample, DEFAULT_ACTIVITIES, DEFAULT_ORIENTATIONS};
    use ndarray::Array2;

    fn balanced(per_cell: usize, users: u32) -> Dataset {
        let mut samples = Vec::new();
        let mut id = 0;
        for a in 0..4 {
            for o in 0..4 {
                for k in 0..per_cell {
                    let user = Some(k as u32 % users);
                    samples.push(MultiApSample {
                        sample_id: id,
                        activity: a,
                        orientation: o,
                        user_id: user,
                        views: vec![CsiSample {
                            ap_id: 1,
                            sample_id: id,
                            amplitudes: Array2::zeros((1, 1)),
                            activity: a,
                            orientation: o,
                            user_id: user,
                        }],
                    });
                    id += 1;
                }
            }
        }
        Dataset {
            subcarriers: 1,
            length: 1,
            ap_ids: vec![1],
            activity_names: DEFAULT_ACTIVITIES.iter().map(|s| s.to_string()).collect(),
            orientation_names: DEFAULT_ORIENTATIONS.iter().map(|s| s.to_string()).collect(),
            samples,
        }
    }

    fn per_cell_train(ds: &Dataset, split: &Split) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for &i in &split.train {
            *counts.entry((ds.samples[i].activity, ds.samples[i].orientation)).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn default_split_counts() {
        let ds = balanced(120, 6);
        let s = split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len(), 1_536);
        assert_eq!(s.test.len(), 384);
        assert!(per_cell_train(&ds, &s).values().all(|&c| c == 96));
    }

    #[test]
    fn partition_and_determinism() {
        let ds = balanced(7, 3);
        let spec = SplitSpec { train_fraction: 0.7, seed: 11, cross_user: false };
        let a = split(&ds, &spec).unwrap();
        let b = split(&ds, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ds.samples.len()).collect::<Vec<_>>());
        for &c in per_cell_train(&ds, &a).values() {
            assert!((c as f64 - 0.7 * 7.0).abs() <= 1.0);
        }
        let other = split(&ds, &SplitSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn two_per_cell_half_split() {
        let ds = balanced(2, 1);
        let s = split(&ds, &SplitSpec { train_fraction: 0.5, seed: 0, cross_user: false }).unwrap();
        assert!(per_cell_train(&ds, &s).values().all(|&c| c == 1));
        assert_eq!(s.test.len(), 16);
    }

    #[test]
    fn empty_cell_is_split_error() {
        let mut ds = balanced(3, 1);
        ds.samples.retain(|s| !(s.activity == 2 && s.orientation == 3));
        assert!(matches!(split(&ds, &SplitSpec::default()), Err(Error::Split(_))));
    }

    #[test]
    fn cross_user_keeps_users_apart() {
        let ds = balanced(6, 6);
        let s = split(&ds, &SplitSpec { cross_user: true, ..Default::default() }).unwrap();
        let users = |idx: &[usize]| -> BTreeSet<u32> {
            idx.iter().map(|&i| ds.samples[i].user_id.unwrap()).collect()
        };
        assert_eq!(users(&s.train).len(), 5);
        assert!(users(&s.train).is_disjoint(&users(&s.test)));
    }
}
