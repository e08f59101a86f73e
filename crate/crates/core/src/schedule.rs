//! Component-index schedules.
//!
//! | kind | permutation drawn | stream |
//! |------|-------------------|--------|
//! | `Independent` | never | i.i.d. uniform indices |
//! | `RandomReshuffling` | at every [`Schedule::begin_epoch`] | fresh permutation per epoch |
//! | `ShuffleOnce` | once, in [`Schedule::new`] | same permutation every epoch |
//! | `Cyclic` | never (identity) | `0, 1, …, n−1` every epoch |
//!
//! Draws come from a [`SeededRng`] on the schedule stream of the seed, so two
//! schedules with equal `(kind, n, seed)` emit identical index streams.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScheduleKind {
    Independent,
    RandomReshuffling,
    ShuffleOnce,
    Cyclic,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::Independent,
        ScheduleKind::RandomReshuffling,
        ScheduleKind::ShuffleOnce,
        ScheduleKind::Cyclic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Independent => "independent",
            ScheduleKind::RandomReshuffling => "rr",
            ScheduleKind::ShuffleOnce => "so",
            ScheduleKind::Cyclic => "cyclic",
        }
    }

    pub fn is_permutation(self) -> bool {
        !matches!(self, ScheduleKind::Independent)
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ScheduleKind::Independent),
            "rr" => Ok(ScheduleKind::RandomReshuffling),
            "so" => Ok(ScheduleKind::ShuffleOnce),
            "cyclic" => Ok(ScheduleKind::Cyclic),
            other => Err(invalid(
                "schedule",
                alloc::format!("unknown schedule `{}`", other),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    n: usize,
    seed: u64,
    permutation: Vec<usize>,
    cursor: usize,
    rng: SeededRng,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "a schedule needs at least one component"));
        }
        let mut rng = SeededRng::new(seed, stream::SCHEDULE);
        let mut permutation: Vec<usize> = (0..n).collect();
        if kind == ScheduleKind::ShuffleOnce {
            rng.shuffle(&mut permutation);
        }
        Ok(Self {
            kind,
            n,
            seed,
            permutation,
            cursor: n,
            rng,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Current epoch order; meaningless for `Independent`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Starts epoch `epoch`. Random reshuffling draws a new permutation here.
    pub fn begin_epoch(&mut self, epoch: usize) -> Result<()> {
        if self.cursor != self.n && epoch != 0 {
            return Err(Error::MidEpoch {
                epoch,
                remaining: self.n - self.cursor,
            });
        }
        if self.kind == ScheduleKind::RandomReshuffling {
            self.rng.shuffle(&mut self.permutation);
        }
        self.cursor = 0;
        Ok(())
    }

    pub fn next_index(&mut self) -> Result<usize> {
        match self.kind {
            ScheduleKind::Independent => {
                self.cursor = (self.cursor + 1).min(self.n);
                Ok(self.rng.below(self.n))
            }
            _ => {
                if self.cursor >= self.n {
                    return Err(Error::EpochExhausted(self.n));
                }
                let i = self.permutation[self.cursor];
                self.cursor += 1;
                Ok(i)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::vec::Vec;

    fn epoch(s: &mut Schedule, e: usize) -> Vec<usize> {
        s.begin_epoch(e).unwrap();
        (0..s.n()).map(|_| s.next_index().unwrap()).collect()
    }

    #[test]
    fn parse_round_trip() {
        for k in ScheduleKind::ALL {
            assert_eq!(k.as_str().parse::<ScheduleKind>().unwrap(), k);
        }
        assert!("shuffle".parse::<ScheduleKind>().is_err());
    }

    #[test]
    fn cyclic_is_identity_for_any_seed() {
        for seed in [0, 50, 999] {
            let mut s = Schedule::new(ScheduleKind::Cyclic, 4, seed).unwrap();
            assert_eq!(epoch(&mut s, 0), [0, 1, 2, 3]);
            assert_eq!(epoch(&mut s, 1), [0, 1, 2, 3]);
        }
    }

    #[test]
    fn shuffle_once_repeats() {
        let mut s = Schedule::new(ScheduleKind::ShuffleOnce, 4, 50).unwrap();
        let before = s.permutation().to_vec();
        let first = epoch(&mut s, 0);
        assert_eq!(first, before);
        for e in 1..10 {
            assert_eq!(epoch(&mut s, e), first);
        }
    }

    #[test]
    fn random_reshuffling_changes_permutations() {
        let mut s = Schedule::new(ScheduleKind::RandomReshuffling, 4, 50).unwrap();
        let distinct: BTreeSet<Vec<usize>> = (0..20).map(|e| epoch(&mut s, e)).collect();
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn independent_begin_epoch_only_resets_cursor() {
        let mut s = Schedule::new(ScheduleKind::Independent, 1, 3).unwrap();
        s.begin_epoch(0).unwrap();
        assert_eq!(s.cursor(), 0);
        for _ in 0..5 {
            assert_eq!(s.next_index().unwrap(), 0);
        }
    }

    #[test]
    fn independent_frequencies() {
        let mut s = Schedule::new(ScheduleKind::Independent, 10, 50).unwrap();
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[s.next_index().unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 1e5;
            assert!((f - 0.1).abs() <= 0.01, "{f}");
        }
    }

    #[test]
    fn errors() {
        assert!(Schedule::new(ScheduleKind::Cyclic, 0, 1).is_err());
        let mut s = Schedule::new(ScheduleKind::Cyclic, 3, 1).unwrap();
        assert_eq!(s.next_index(), Err(Error::EpochExhausted(3)));
        s.begin_epoch(0).unwrap();
        s.next_index().unwrap();
        assert_eq!(
            s.begin_epoch(1),
            Err(Error::MidEpoch {
                epoch: 1,
                remaining: 2
            })
        );
    }

    proptest::proptest! {
        #[test]
        fn every_epoch_is_a_permutation(n in 1usize..40, seed in 0u64..1000, k in 0usize..3) {
            let kind = [ScheduleKind::RandomReshuffling, ScheduleKind::ShuffleOnce, ScheduleKind::Cyclic][k];
            let mut s = Schedule::new(kind, n, seed).unwrap();
            for e in 0..3 {
                let mut got = epoch(&mut s, e);
                got.sort_unstable();
                proptest::prop_assert_eq!(got, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn streams_are_deterministic(n in 1usize..20, seed in 0u64..1000, k in 0usize..4) {
            let kind = ScheduleKind::ALL[k];
            let mut a = Schedule::new(kind, n, seed).unwrap();
            let mut b = Schedule::new(kind, n, seed).unwrap();
            for e in 0..4 {
                proptest::prop_assert_eq!(epoch(&mut a, e), epoch(&mut b, e));
            }
        }
    }
}
