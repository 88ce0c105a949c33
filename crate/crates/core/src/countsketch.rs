// SPDX-License-Identifier: Apache-2.0

//! Count sketch over bin-ids: a `K x R` array of signed counters with one
//! `(bucket, sign)` hash pair per row. Each row gives an unbiased estimate
//! `g_i(b) * A[i][h_i(b)]`; rows are combined by mean or median.

use crate::error::{Error, Result};
use crate::hash;
use crate::partition::BinId;

/// Rule for combining the per-row estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Recovery {
    /// Arithmetic mean of the rows; unbiased.
    #[default]
    Mean = 0,
    /// Median of the rows (mean of the two middle rows when `K` is even).
    Median = 1,
}

impl Recovery {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Recovery::Mean),
            1 => Some(Recovery::Median),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Recovery::Mean => "mean",
            Recovery::Median => "median",
        }
    }
}

/// Combined estimate together with the row estimates it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CountEstimate {
    pub value: f64,
    pub per_row: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    repetitions: usize,
    range: usize,
    seed: u64,
    recovery: Recovery,
    row_seeds: Vec<u64>,
    counters: Vec<i64>,
    saturated: bool,
}

impl CountSketch {
    pub fn new(repetitions: usize, range: usize, seed: u64, recovery: Recovery) -> Result<Self> {
        if repetitions == 0 {
            return Err(Error::InvalidParameter {
                name: "K",
                reason: "repetitions must be at least 1".into(),
            });
        }
        if range == 0 {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: "range must be at least 1".into(),
            });
        }
        let len = repetitions.checked_mul(range).ok_or(Error::InvalidParameter {
            name: "R",
            reason: "K * R overflows".into(),
        })?;
        Ok(CountSketch {
            repetitions,
            range,
            seed,
            recovery,
            row_seeds: (0..repetitions).map(|i| hash::row_seed(seed, i)).collect(),
            counters: vec![0; len],
            saturated: false,
        })
    }

    /// Rebuilds a sketch from stored counters. A counter pinned at `i64::MIN`
    /// or `i64::MAX` restores the saturation flag.
    pub fn from_counters(
        repetitions: usize,
        range: usize,
        seed: u64,
        recovery: Recovery,
        counters: Vec<i64>,
    ) -> Result<Self> {
        let mut cs = Self::new(repetitions, range, seed, recovery)?;
        if counters.len() != cs.counters.len() {
            return Err(Error::InvalidParameter {
                name: "counters",
                reason: format!("expected {} counters, got {}", cs.counters.len(), counters.len()),
            });
        }
        cs.saturated = counters.iter().any(|&c| c == i64::MIN || c == i64::MAX);
        cs.counters = counters;
        Ok(cs)
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn recovery(&self) -> Recovery {
        self.recovery
    }

    /// Row-major `K x R` counters.
    pub fn counters(&self) -> &[i64] {
        &self.counters
    }

    /// Sticky flag: some update saturated a counter.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// Counter index and sign of `b` in `row`.
    #[inline]
    pub fn locate(&self, row: usize, b: &BinId) -> (usize, i64) {
        let h = hash::hash_bin(self.row_seeds[row], b);
        (row * self.range + hash::bucket(h, self.range), hash::sign(h))
    }

    pub fn insert(&mut self, b: &BinId, count: i64) {
        for row in 0..self.repetitions {
            let (idx, sign) = self.locate(row, b);
            let v = self.counters[idx] as i128 + sign as i128 * count as i128;
            let clamped = v.clamp(i64::MIN as i128, i64::MAX as i128);
            self.saturated |= clamped != v;
            self.counters[idx] = clamped as i64;
        }
    }

    pub fn estimate(&self, b: &BinId) -> CountEstimate {
        let per_row: Vec<f64> = (0..self.repetitions)
            .map(|row| {
                let (idx, sign) = self.locate(row, b);
                sign as f64 * self.counters[idx] as f64
            })
            .collect();
        let value = combine(self.recovery, &per_row);
        CountEstimate { value, per_row }
    }

    /// Combined estimate only.
    #[inline]
    pub fn estimate_value(&self, b: &BinId) -> f64 {
        if self.repetitions == 1 {
            let (idx, sign) = self.locate(0, b);
            return sign as f64 * self.counters[idx] as f64;
        }
        self.estimate(b).value
    }

    /// Fails with the name of the first mismatching parameter.
    pub fn check_compatible(&self, other: &CountSketch) -> Result<()> {
        let field = if self.repetitions != other.repetitions {
            "K"
        } else if self.range != other.range {
            "R"
        } else if self.seed != other.seed {
            "cs seed"
        } else if self.recovery != other.recovery {
            "recovery"
        } else {
            return Ok(());
        };
        Err(Error::Incompatible { field })
    }

    /// Element-wise counter sum, in place.
    pub fn merge_from(&mut self, other: &CountSketch) -> Result<()> {
        self.check_compatible(other)?;
        for (a, &b) in self.counters.iter_mut().zip(&other.counters) {
            match a.checked_add(b) {
                Some(v) => *a = v,
                None => {
                    self.saturated = true;
                    *a = if b > 0 { i64::MAX } else { i64::MIN };
                }
            }
        }
        self.saturated |= other.saturated;
        Ok(())
    }

    pub fn merge(&self, other: &CountSketch) -> Result<CountSketch> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// Heap bytes owned by the counter array.
    pub fn footprint_bytes(&self) -> usize {
        self.counters.capacity() * std::mem::size_of::<i64>()
            + self.row_seeds.capacity() * std::mem::size_of::<u64>()
    }
}

fn combine(recovery: Recovery, rows: &[f64]) -> f64 {
    match recovery {
        Recovery::Mean => rows.iter().sum::<f64>() / rows.len() as f64,
        Recovery::Median => {
            let mut v = rows.to_vec();
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                0.5 * (v[m - 1] + v[m])
            }
        }
    }
}
