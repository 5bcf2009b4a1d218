//! Deterministic splits.
//!
//! All randomness comes from [`SplitMix64`], so a split is fully determined by its seed and
//! can be reproduced by any implementation of the same generator:
//!
//! * `next_u64`: `state += 0x9E3779B97F4A7C15; z = state;`
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;`
//!   `return z ^ (z >> 31)` (wrapping arithmetic).
//! * `below(n)`: draw `r = next_u64()` until `r <= u64::MAX - ((u64::MAX % n + 1) % n)`,
//!   then return `r % n`.
//! * shuffle: Fisher-Yates from the last position down, `j = below(i + 1)`.
//! * independent streams for one seed use `seed ^ (stream * 0xD1B54A32D192ED03)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HrtfSet;
use crate::error::{Error, Result};

/// The SplitMix64 generator.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for an independent stream derived from `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        Self::new(seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Unbiased integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let reject_from = u64::MAX - ((u64::MAX % n + 1) % n);
        loop {
            let r = self.next_u64();
            if r <= reject_from {
                return r % n;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

const STREAM_SPLIT: u64 = 1;
const STREAM_SUBSAMPLE: u64 = 2;
const STREAM_VALIDATION_SUBJECTS: u64 = 3;

/// How to partition one subject's measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitSpec {
    /// Random disjoint sets of the given sizes.
    Counts {
        seed: u64,
        eval: usize,
        val: usize,
        train: usize,
    },
    /// Explicit measurement indices.
    Explicit {
        eval: Vec<usize>,
        val: Vec<usize>,
        train: Vec<usize>,
    },
}

/// Measurement indices of each partition, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Partitions `n_measurements` indices according to `spec`.
pub fn make_splits(n_measurements: usize, spec: &SplitSpec) -> Result<Splits> {
    match spec {
        SplitSpec::Counts {
            seed,
            eval,
            val,
            train,
        } => {
            let total = eval + val + train;
            if total > n_measurements {
                return Err(Error::Split(format!(
                    "requested {eval} + {val} + {train} = {total} measurements, only {n_measurements} available"
                )));
            }
            let mut idx: Vec<usize> = (0..n_measurements).collect();
            SplitMix64::stream(*seed, STREAM_SPLIT).shuffle(&mut idx);
            let take = |from: usize, n: usize| {
                let mut v = idx[from..from + n].to_vec();
                v.sort_unstable();
                v
            };
            Ok(Splits {
                eval: take(0, *eval),
                val: take(*eval, *val),
                train: take(eval + val, *train),
            })
        }
        SplitSpec::Explicit { eval, val, train } => {
            let mut seen = vec![false; n_measurements];
            for &i in eval.iter().chain(val).chain(train) {
                if i >= n_measurements {
                    return Err(Error::Split(format!(
                        "index {i} out of range for {n_measurements} measurements"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Split(format!("index {i} appears in two partitions")));
                }
            }
            let sorted = |v: &Vec<usize>| {
                let mut v = v.clone();
                v.sort_unstable();
                v
            };
            Ok(Splits {
                eval: sorted(eval),
                val: sorted(val),
                train: sorted(train),
            })
        }
    }
}

/// Draws `n` of `train` without replacement; the result is sorted ascending.
pub fn subsample_train(train: &[usize], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > train.len() {
        return Err(Error::Split(format!(
            "cannot draw {n} measurements from a training set of {}",
            train.len()
        )));
    }
    let mut pool = train.to_vec();
    SplitMix64::stream(seed, STREAM_SUBSAMPLE).shuffle(&mut pool);
    pool.truncate(n);
    pool.sort_unstable();
    Ok(pool)
}

/// Multi-subject protocol: pre-training subjects, held-out adaptation subjects, a direction
/// set unseen by everyone and a second direction set held out from the adaptation subjects
/// (and, as validation, from a few pre-training subjects).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSubjectPreset {
    pub seed: u64,
    pub n_pretrain: usize,
    pub n_adapt: usize,
    /// Directions held out from every subject.
    pub n_unseen: usize,
    /// Directions held out from adaptation subjects and validation subjects.
    pub n_seen: usize,
    pub n_val_subjects: usize,
}

impl MultiSubjectPreset {
    pub const HUTUBS_PROTOCOL: &'static str = "hutubs-paper";

    /// 87 pre-training subjects, 7 adaptation subjects, 100 unseen and 100 seen held-out
    /// directions, validation on 10 pre-training subjects.
    pub fn hutubs_protocol(seed: u64) -> Self {
        Self {
            seed,
            n_pretrain: 87,
            n_adapt: 7,
            n_unseen: 100,
            n_seen: 100,
            n_val_subjects: 10,
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        match name {
            Self::HUTUBS_PROTOCOL => Ok(Self::hutubs_protocol(seed)),
            other => Err(Error::Config(format!("unknown split preset {other:?}"))),
        }
    }

    /// Applies the preset. Subjects are ordered by id with embedded numbers compared
    /// numerically, the first `n_pretrain` pre-train and the next `n_adapt` adapt. Every
    /// subject must share the same direction grid.
    pub fn split(&self, sets: &BTreeMap<String, HrtfSet>) -> Result<MultiSubjectSplits> {
        let mut ids: Vec<&String> = sets.keys().collect();
        ids.sort_by(|a, b| natural_cmp(a, b));
        if self.n_pretrain + self.n_adapt > ids.len() {
            return Err(Error::Split(format!(
                "preset needs {} + {} subjects, container has {}",
                self.n_pretrain,
                self.n_adapt,
                ids.len()
            )));
        }
        if self.n_val_subjects > self.n_pretrain {
            return Err(Error::Split(
                "more validation subjects than pre-training subjects".into(),
            ));
        }
        let reference = &sets[ids[0]];
        let n = reference.len();
        for id in &ids {
            let s = &sets[*id];
            if s.len() != n {
                return Err(Error::Split(format!(
                    "subject {id} has {} measurements, expected {n}",
                    s.len()
                )));
            }
            for (i, (a, b)) in s.measurements().iter().zip(reference.measurements()).enumerate() {
                if a.direction.great_circle_distance(&b.direction) > 1e-6 {
                    return Err(Error::Measurement {
                        subject: (*id).clone(),
                        index: i,
                        reason: "direction grid differs between subjects".into(),
                    });
                }
            }
        }
        if self.n_unseen + self.n_seen > n {
            return Err(Error::Split(format!(
                "cannot hold out {} + {} of {n} directions",
                self.n_unseen, self.n_seen
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        SplitMix64::stream(self.seed, STREAM_SPLIT).shuffle(&mut idx);
        let sorted = |s: &[usize]| {
            let mut v = s.to_vec();
            v.sort_unstable();
            v
        };
        let unseen = sorted(&idx[..self.n_unseen]);
        let seen = sorted(&idx[self.n_unseen..self.n_unseen + self.n_seen]);
        let pool = sorted(&idx[self.n_unseen + self.n_seen..]);

        let pretrain: Vec<String> = ids[..self.n_pretrain].iter().map(|s| (*s).clone()).collect();
        let adapt: Vec<String> = ids[self.n_pretrain..self.n_pretrain + self.n_adapt]
            .iter()
            .map(|s| (*s).clone())
            .collect();
        let mut val_pick = pretrain.clone();
        SplitMix64::stream(self.seed, STREAM_VALIDATION_SUBJECTS).shuffle(&mut val_pick);
        val_pick.truncate(self.n_val_subjects);
        val_pick.sort_by(|a, b| natural_cmp(a, b));

        Ok(MultiSubjectSplits {
            pretrain_subjects: pretrain,
            adapt_subjects: adapt,
            val_subjects: val_pick,
            unseen,
            seen,
            pool,
        })
    }
}

/// Output of [`MultiSubjectPreset::split`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSubjectSplits {
    pub pretrain_subjects: Vec<String>,
    pub adapt_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
    /// Directions held out from all subjects (unseen-direction test set).
    pub unseen: Vec<usize>,
    /// Directions held out from adaptation and validation subjects (seen-direction test set,
    /// and the validation set).
    pub seen: Vec<usize>,
    /// Remaining directions.
    pub pool: Vec<usize>,
}

impl MultiSubjectSplits {
    /// Pre-training directions of a subject.
    pub fn pretrain_indices(&self, subject: &str) -> Vec<usize> {
        if self.val_subjects.iter().any(|s| s == subject) {
            self.pool.clone()
        } else {
            let mut v: Vec<usize> = self.pool.iter().chain(&self.seen).copied().collect();
            v.sort_unstable();
            v
        }
    }
}

/// Orders strings with embedded decimal numbers compared by value (`pp2` < `pp10`).
pub(crate) fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(&cb) {
        let ord = match (x, y) {
            ((true, xs), (true, ys)) => {
                let xt = xs.trim_start_matches('0');
                let yt = ys.trim_start_matches('0');
                xt.len().cmp(&yt.len()).then_with(|| xt.cmp(yt))
            }
            _ => x.1.cmp(y.1),
        };
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}
