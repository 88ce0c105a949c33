// SPDX-License-Identifier: Apache-2.0

//! Exact histogram and the estimators that need every occupied bin.

use crate::countsketch::CountSketch;
use crate::error::{Error, Result};
use crate::partition::{BinId, Partitioner};
use crate::sketch::DensitySketch;
use std::collections::BTreeMap;

/// Exact per-bin counts. Only occupied bins are stored.
#[derive(Debug, Clone)]
pub struct ExactHistogram {
    partitioner: Partitioner,
    counts: BTreeMap<BinId, u64>,
    n: u64,
}

impl ExactHistogram {
    pub fn new(partitioner: Partitioner) -> Self {
        ExactHistogram {
            partitioner,
            counts: BTreeMap::new(),
            n: 0,
        }
    }

    pub fn insert(&mut self, x: &[f64]) -> Result<()> {
        let b = self.partitioner.bin_of(x)?;
        *self.counts.entry(b).or_insert(0) += 1;
        self.n += 1;
        Ok(())
    }

    pub fn partitioner(&self) -> &Partitioner {
        &self.partitioner
    }

    pub fn counts(&self) -> &BTreeMap<BinId, u64> {
        &self.counts
    }

    pub fn count(&self, b: &BinId) -> u64 {
        self.counts.get(b).copied().unwrap_or(0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of occupied bins.
    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    /// `c(bin(y)) / (n * volume)`.
    pub fn density(&self, y: &[f64]) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::EmptySketch);
        }
        let b = self.partitioner.bin_of(y)?;
        Ok(self.count(&b) as f64 / (self.n as f64 * self.partitioner.bin_volume()))
    }

    /// `sum_b p_b^2` over occupied bins.
    pub fn collision_mass(&self) -> f64 {
        let n = self.n as f64;
        self.counts.values().map(|&c| (c as f64 / n).powi(2)).sum()
    }
}

pub fn exact_histogram<'a, I>(data: I, partitioner: &Partitioner) -> Result<ExactHistogram>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut eh = ExactHistogram::new(partitioner.clone());
    for x in data {
        eh.insert(x)?;
    }
    Ok(eh)
}

/// `sum_b c_hat(b)` over the occupied bins of `eh`, unclamped.
pub fn n_hat_raw(eh: &ExactHistogram, cs: &CountSketch) -> f64 {
    eh.counts.keys().map(|b| cs.estimate_value(b)).sum()
}

/// `sum_b max(0, c_hat(b))` over the occupied bins of `eh`.
pub fn n_hat(eh: &ExactHistogram, cs: &CountSketch) -> f64 {
    eh.counts.keys().map(|b| cs.estimate_value(b).max(0.0)).sum()
}

/// Normalised sketch density `max(0, c_hat(b)) / (volume * n_hat)` for `y`
/// in an occupied bin `b`, zero elsewhere.
pub fn density_star_exact(eh: &ExactHistogram, cs: &CountSketch, y: &[f64]) -> Result<f64> {
    let nh = n_hat(eh, cs);
    if nh <= 0.0 {
        return Err(Error::DegenerateNormalizer { n_hat: nh });
    }
    let b = eh.partitioner.bin_of(y)?;
    if !eh.counts.contains_key(&b) {
        return Ok(0.0);
    }
    Ok(cs.estimate_value(&b).max(0.0) / (eh.partitioner.bin_volume() * nh))
}

/// Precomputed normalised sketch density and its heap-restricted
/// counterpart, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct StarDensities {
    partitioner: Partitioner,
    /// Clamped estimate per occupied bin.
    estimates: BTreeMap<BinId, f64>,
    heap: BTreeMap<BinId, f64>,
    n_hat: f64,
    n_hat_heap: f64,
}

impl StarDensities {
    /// Both normalisers come from fresh clamped estimates of the final count
    /// sketch, so `f_S` is `f*_C` restricted to heap bins and renormalised.
    pub fn new(eh: &ExactHistogram, ds: &DensitySketch) -> Result<Self> {
        check_same(eh, ds)?;
        let cs = ds.count_sketch();
        let estimates: BTreeMap<BinId, f64> = eh
            .counts
            .keys()
            .map(|b| (b.clone(), cs.estimate_value(b).max(0.0)))
            .collect();
        let n_hat: f64 = estimates.values().sum();
        if n_hat <= 0.0 {
            return Err(Error::DegenerateNormalizer { n_hat });
        }
        let mut heap = BTreeMap::new();
        for (b, _) in ds.heap().iter() {
            let c = estimates.get(b).copied().ok_or_else(|| {
                Error::Malformed(format!("heap bin {b} is not occupied in the histogram"))
            })?;
            heap.insert(b.clone(), c);
        }
        let n_hat_heap: f64 = heap.values().sum();
        if n_hat_heap <= 0.0 {
            return Err(Error::EmptyHeap);
        }
        Ok(StarDensities {
            partitioner: eh.partitioner.clone(),
            estimates,
            heap,
            n_hat,
            n_hat_heap,
        })
    }

    pub fn n_hat(&self) -> f64 {
        self.n_hat
    }

    pub fn n_hat_heap(&self) -> f64 {
        self.n_hat_heap
    }

    /// `n_hat_h / n_hat`.
    pub fn capture_ratio(&self) -> f64 {
        self.n_hat_heap / self.n_hat
    }

    pub fn star(&self, y: &[f64]) -> Result<f64> {
        let b = self.partitioner.bin_of(y)?;
        let c = self.estimates.get(&b).copied().unwrap_or(0.0);
        Ok(c / (self.partitioner.bin_volume() * self.n_hat))
    }

    pub fn sampling(&self, y: &[f64]) -> Result<f64> {
        let b = self.partitioner.bin_of(y)?;
        let c = self.heap.get(&b).copied().unwrap_or(0.0);
        Ok(c / (self.partitioner.bin_volume() * self.n_hat_heap))
    }

    /// `integral |f*_C - f_S|`, summed bin by bin.
    pub fn l1_gap(&self) -> f64 {
        let mut total = 0.0;
        for (b, &c) in &self.estimates {
            let star = c / self.n_hat;
            let s = self.heap.get(b).map_or(0.0, |&h| h / self.n_hat_heap);
            total += (star - s).abs();
        }
        total
    }
}

fn check_same(eh: &ExactHistogram, ds: &DensitySketch) -> Result<()> {
    let (a, b) = (&eh.partitioner, ds.partitioner());
    if a.scheme() != b.scheme() {
        return Err(Error::Incompatible { field: "scheme" });
    }
    if a.dim() != b.dim() {
        return Err(Error::Incompatible { field: "dim" });
    }
    if let (Partitioner::Lsh(x), Partitioner::Lsh(y)) = (a, b) {
        if x.seed() != y.seed() {
            return Err(Error::Incompatible { field: "lsh seed" });
        }
    }
    if !a.same_as(b) {
        return Err(Error::Incompatible { field: "width" });
    }
    if eh.n != ds.len() {
        return Err(Error::Incompatible { field: "n" });
    }
    Ok(())
}

/// Both sides of the total-variation identity: `integral |f*_C - f_S|` and
/// `2 (1 - n_hat_h / n_hat)`, each by enumeration of the occupied bins.
pub fn tv_gap(eh: &ExactHistogram, ds: &DensitySketch) -> Result<(f64, f64)> {
    let s = StarDensities::new(eh, ds)?;
    Ok((s.l1_gap(), 2.0 * (1.0 - s.capture_ratio())))
}
