// SPDX-License-Identifier: Apache-2.0

//! The density sketch: a partitioner, a count sketch over bin-ids and a
//! top-H heap of heavy bins.
//!
//! Construction is single pass. For every point the bin is inserted into the
//! count sketch with weight one, re-estimated, and the (clamped) estimate is
//! offered to the heap. Densities are `max(0, c_hat(bin(y))) / (n * volume)`;
//! samples pick a heap bin proportionally to its stored count and then a
//! uniform point inside it.

use crate::countsketch::{CountSketch, Recovery};
use crate::error::{Error, Result};
use crate::partition::{BinId, Partitioner};
use crate::topbins::TopBins;
use rand::Rng;

pub const DEFAULT_REPETITIONS: usize = 4;
pub const DEFAULT_RANGE: usize = 1 << 16;
pub const DEFAULT_HEAP_CAPACITY: usize = 4096;

/// Count-sketch and heap parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchConfig {
    /// `K`, number of count-sketch rows.
    pub repetitions: usize,
    /// `R`, counters per row.
    pub range: usize,
    /// `H`, heap capacity.
    pub heap_capacity: usize,
    pub recovery: Recovery,
    /// Seed of the count-sketch hash family.
    pub seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            repetitions: DEFAULT_REPETITIONS,
            range: DEFAULT_RANGE,
            heap_capacity: DEFAULT_HEAP_CAPACITY,
            recovery: Recovery::Mean,
            seed: 0,
        }
    }
}

impl SketchConfig {
    pub fn new(repetitions: usize, range: usize, heap_capacity: usize) -> Self {
        SketchConfig {
            repetitions,
            range,
            heap_capacity,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_recovery(mut self, recovery: Recovery) -> Self {
        self.recovery = recovery;
        self
    }
}

#[derive(Debug, Clone)]
pub struct DensitySketch {
    partitioner: Partitioner,
    cs: CountSketch,
    heap: TopBins,
    n: u64,
}

impl DensitySketch {
    pub fn new(partitioner: Partitioner, config: SketchConfig) -> Result<Self> {
        let cs = CountSketch::new(config.repetitions, config.range, config.seed, config.recovery)?;
        Ok(DensitySketch {
            partitioner,
            cs,
            heap: TopBins::new(config.heap_capacity),
            n: 0,
        })
    }

    pub(crate) fn from_parts(partitioner: Partitioner, cs: CountSketch, heap: TopBins, n: u64) -> Self {
        DensitySketch {
            partitioner,
            cs,
            heap,
            n,
        }
    }

    pub fn partitioner(&self) -> &Partitioner {
        &self.partitioner
    }

    pub fn count_sketch(&self) -> &CountSketch {
        &self.cs
    }

    pub fn heap(&self) -> &TopBins {
        &self.heap
    }

    pub fn dim(&self) -> usize {
        self.partitioner.dim()
    }

    /// Exact number of inserted points.
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn config(&self) -> SketchConfig {
        SketchConfig {
            repetitions: self.cs.repetitions(),
            range: self.cs.range(),
            heap_capacity: self.heap.capacity(),
            recovery: self.cs.recovery(),
            seed: self.cs.seed(),
        }
    }

    /// Adds one point. Invalid points are rejected and leave the sketch
    /// untouched.
    pub fn insert(&mut self, x: &[f64]) -> Result<()> {
        let bin = self.partitioner.bin_of(x)?;
        self.insert_bin(bin);
        Ok(())
    }

    pub fn extend<'a, I>(&mut self, points: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        for p in points {
            self.insert(p)?;
        }
        Ok(())
    }

    fn insert_bin(&mut self, bin: BinId) {
        self.cs.insert(&bin, 1);
        self.n += 1;
        let estimate = self.cs.estimate_value(&bin).max(0.0);
        // estimates are finite, so the heap cannot reject them
        let _ = self.heap.update(bin, estimate);
    }

    /// Clamped count estimate of the bin containing `y`.
    pub fn count_estimate(&self, y: &[f64]) -> Result<f64> {
        let bin = self.partitioner.bin_of(y)?;
        Ok(self.cs.estimate_value(&bin).max(0.0))
    }

    /// Point density estimate `max(0, c_hat(bin(y))) / (n * volume)`.
    pub fn density(&self, y: &[f64]) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::EmptySketch);
        }
        let c = self.count_estimate(y)?;
        Ok(c / (self.n as f64 * self.partitioner.bin_volume()))
    }

    /// Density of the distribution [`DensitySketch::sample`] draws from:
    /// heap count over `(n_hat_h * volume)` inside heap bins, zero elsewhere.
    pub fn sampling_density(&self, y: &[f64]) -> Result<f64> {
        let total = self.heap.total_count();
        if total <= 0.0 {
            return Err(Error::EmptyHeap);
        }
        let bin = self.partitioner.bin_of(y)?;
        Ok(self
            .heap
            .get(&bin)
            .map_or(0.0, |c| c / (total * self.partitioner.bin_volume())))
    }

    /// One synthetic point: a heap bin drawn proportionally to its count,
    /// then a uniform point in that bin.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let bin = self.heap.sample_bin(rng)?;
        self.partitioner.sample_in_bin(bin, rng)
    }

    /// Sampler with a precomputed cumulative table over the heap bins in
    /// bin-id order, for drawing many points. Its output under a fixed seed
    /// depends only on the heap contents, not on the heap's internal layout.
    pub fn sampler(&self) -> Result<Sampler<'_>> {
        let entries = self.heap.entries();
        if entries.is_empty() {
            return Err(Error::EmptyHeap);
        }
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for (_, c) in &entries {
            acc += c;
            cumulative.push(acc);
        }
        Ok(Sampler {
            partitioner: &self.partitioner,
            bins: entries.into_iter().map(|(b, _)| b).collect(),
            cumulative,
        })
    }

    /// Estimated capture ratio `n_hat_h / n`, clamped to `[0, 1]`.
    pub fn capture_ratio(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::EmptySketch);
        }
        Ok((self.heap.total_count() / self.n as f64).clamp(0.0, 1.0))
    }

    /// Fails with the name of the first mismatching parameter.
    pub fn check_compatible(&self, other: &DensitySketch) -> Result<()> {
        let a = &self.partitioner;
        let b = &other.partitioner;
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
        self.cs.check_compatible(&other.cs)?;
        if self.heap.capacity() != other.heap.capacity() {
            return Err(Error::Incompatible { field: "H" });
        }
        Ok(())
    }

    /// Sketch of the union of both input streams. Counters and `n` add; the
    /// heap is rebuilt from the union of both heaps' bins, re-estimated from
    /// the merged counters, keeping the `H` largest (ties by bin-id).
    pub fn merge(&self, other: &DensitySketch) -> Result<DensitySketch> {
        self.check_compatible(other)?;
        let cs = self.cs.merge(&other.cs)?;
        let mut candidates: Vec<(BinId, f64)> = self
            .heap
            .iter()
            .chain(other.heap.iter())
            .map(|(b, _)| b.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|b| {
                let c = cs.estimate_value(&b);
                (b, c)
            })
            .filter(|(_, c)| *c > 0.0)
            .collect();
        candidates.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        candidates.truncate(self.heap.capacity());
        candidates.sort_by(|x, y| x.0.cmp(&y.0));
        let heap = TopBins::from_entries(self.heap.capacity(), candidates)?;
        Ok(DensitySketch {
            partitioner: self.partitioner.clone(),
            cs,
            heap,
            n: self.n + other.n,
        })
    }

    /// Bytes of sketch state: counters, heap storage and the fixed-size
    /// struct. Depends on `(K, R, H, d)` only, never on `n`.
    pub fn footprint_bytes(&self) -> usize {
        let partition = match &self.partitioner {
            Partitioner::Regular { .. } => 0,
            Partitioner::Aligned { widths } => widths.capacity() * 8,
            Partitioner::Lsh(l) => {
                let d = l.dim();
                // projection, offsets, LU factors and permutation
                (2 * d * d + d) * 8 + d * std::mem::size_of::<usize>()
            }
        };
        std::mem::size_of::<Self>()
            + partition
            + self.cs.footprint_bytes()
            + self.heap.footprint_bytes(self.dim())
    }
}

/// Bulk sampler over a frozen view of a sketch's heap.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    partitioner: &'a Partitioner,
    bins: Vec<BinId>,
    cumulative: Vec<f64>,
}

impl Sampler<'_> {
    pub fn sample_bin<R: Rng + ?Sized>(&self, rng: &mut R) -> &BinId {
        let total = *self.cumulative.last().unwrap();
        let target = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        &self.bins[i.min(self.bins.len() - 1)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let bin = self.sample_bin(rng);
        self.partitioner.sample_in_bin(bin, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn regular(dim: usize, h: f64) -> Partitioner {
        Partitioner::regular(dim, h).unwrap()
    }

    fn big() -> SketchConfig {
        SketchConfig::new(1, 1 << 20, 4096).with_seed(3)
    }

    #[test]
    fn single_point_density() {
        let mut ds = DensitySketch::new(regular(2, 1.0), big()).unwrap();
        ds.insert(&[0.3, 0.4]).unwrap();
        assert_eq!(ds.density(&[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(ds.density(&[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(ds.density(&[50.0, -50.0]).unwrap(), 0.0);
    }

    #[test]
    fn repeated_point_is_one_heap_bin() {
        let mut ds = DensitySketch::new(regular(3, 0.5), big()).unwrap();
        for _ in 0..10 {
            ds.insert(&[1.0, 2.0, 3.0]).unwrap();
        }
        let e = ds.heap().entries();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].1, 10.0);
        assert_eq!(ds.len(), 10);
    }

    #[test]
    fn uniform_cell_density_is_inverse_volume() {
        let p = regular(2, 0.5);
        let mut ds = DensitySketch::new(p.clone(), big()).unwrap();
        let b = BinId::from([3, -2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            ds.insert(&p.sample_in_bin(&b, &mut rng).unwrap()).unwrap();
        }
        let y = p.bin_center(&b).unwrap();
        assert_eq!(ds.density(&y).unwrap(), 1.0 / 0.25);
    }

    #[test]
    fn empty_sketch_errors() {
        let ds = DensitySketch::new(regular(1, 1.0), SketchConfig::default()).unwrap();
        assert_eq!(ds.density(&[0.0]).unwrap_err(), Error::EmptySketch);
        assert_eq!(ds.capture_ratio().unwrap_err(), Error::EmptySketch);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(ds.sample(&mut rng).unwrap_err(), Error::EmptyHeap);
        assert!(ds.sampler().is_err());
    }

    #[test]
    fn invalid_point_leaves_sketch_unchanged() {
        let mut ds = DensitySketch::new(regular(2, 1.0), big()).unwrap();
        ds.insert(&[0.0, 0.0]).unwrap();
        assert!(ds.insert(&[f64::NAN, 0.0]).is_err());
        assert!(ds.insert(&[1.0]).is_err());
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn stream_heap_matches_exact_histogram() {
        let p = regular(2, 0.25);
        let mut ds = DensitySketch::new(p.clone(), SketchConfig::new(1, 1 << 20, 100_000)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut exact: HashMap<BinId, u64> = HashMap::new();
        for _ in 0..10_000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0)];
            ds.insert(&x).unwrap();
            *exact.entry(p.bin_of(&x).unwrap()).or_default() += 1;
        }
        // verify the configuration is collision free before relying on it
        let mut buckets = std::collections::HashSet::new();
        for b in exact.keys() {
            assert!(buckets.insert(ds.count_sketch().locate(0, b).0));
        }
        assert_eq!(ds.heap().len(), exact.len());
        for (b, c) in ds.heap().entries() {
            assert_eq!(c, exact[&b] as f64);
        }
        assert_eq!(ds.capture_ratio().unwrap(), 1.0);
    }

    #[test]
    fn sampling_two_bins() {
        let p = regular(1, 1.0);
        let mut ds = DensitySketch::new(p, big()).unwrap();
        for _ in 0..4 {
            ds.insert(&[0.5]).unwrap();
        }
        for _ in 0..12 {
            ds.insert(&[5.5]).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let sampler = ds.sampler().unwrap();
        let mut hits_direct = 0;
        let mut hits_bulk = 0;
        for _ in 0..n {
            let s = ds.sample(&mut rng).unwrap();
            assert!((0.0..1.0).contains(&s[0]) || (5.0..6.0).contains(&s[0]));
            if s[0] >= 5.0 {
                hits_direct += 1;
            }
            if sampler.sample(&mut rng).unwrap()[0] >= 5.0 {
                hits_bulk += 1;
            }
        }
        let sd = (0.75 * 0.25 / n as f64).sqrt();
        for hits in [hits_direct, hits_bulk] {
            let p = hits as f64 / n as f64;
            assert!((p - 0.75).abs() < 3.0 * sd, "p = {p}");
        }
    }

    #[test]
    fn sampling_density_integrates_to_one() {
        let p = regular(2, 0.5);
        let mut ds = DensitySketch::new(p.clone(), SketchConfig::new(2, 64, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            ds.insert(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).unwrap();
        }
        let total: f64 = ds
            .heap()
            .entries()
            .iter()
            .map(|(b, _)| ds.sampling_density(&p.bin_center(b).unwrap()).unwrap() * p.bin_volume())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clustered_data_captures_more_than_scattered() {
        let p = regular(2, 1.0);
        let cfg = SketchConfig::new(4, 1 << 14, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut clustered = DensitySketch::new(p.clone(), cfg).unwrap();
        let mut scattered = DensitySketch::new(p, cfg).unwrap();
        for i in 0..5000 {
            let centre = (i % 4) as f64 * 10.0;
            clustered
                .insert(&[centre + rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)])
                .unwrap();
            scattered
                .insert(&[rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)])
                .unwrap();
        }
        let c = clustered.capture_ratio().unwrap();
        let s = scattered.capture_ratio().unwrap();
        assert!(c > s, "clustered {c} vs scattered {s}");
        assert!(c > 0.99);
    }

    #[test]
    fn empty_heap_capture_ratio_is_zero() {
        let mut ds = DensitySketch::new(regular(1, 1.0), SketchConfig::new(2, 16, 0)).unwrap();
        ds.insert(&[0.0]).unwrap();
        assert_eq!(ds.capture_ratio().unwrap(), 0.0);
        assert!(ds.heap().is_empty());
    }

    #[test]
    fn merge_mismatch_names_field() {
        let a = DensitySketch::new(regular(2, 1.0), SketchConfig::default()).unwrap();
        let cases = [
            (DensitySketch::new(regular(2, 2.0), SketchConfig::default()).unwrap(), "width"),
            (DensitySketch::new(regular(3, 1.0), SketchConfig::default()).unwrap(), "dim"),
            (
                DensitySketch::new(Partitioner::aligned(vec![1.0, 1.0]).unwrap(), SketchConfig::default())
                    .unwrap(),
                "scheme",
            ),
            (
                DensitySketch::new(regular(2, 1.0), SketchConfig::default().with_seed(9)).unwrap(),
                "cs seed",
            ),
            (
                DensitySketch::new(regular(2, 1.0), SketchConfig::new(4, 1 << 16, 10)).unwrap(),
                "H",
            ),
        ];
        for (b, field) in cases {
            assert_eq!(a.merge(&b).unwrap_err(), Error::Incompatible { field });
        }
        let l1 = DensitySketch::new(Partitioner::lsh(2, 1.0, 1).unwrap(), SketchConfig::default()).unwrap();
        let l2 = DensitySketch::new(Partitioner::lsh(2, 1.0, 2).unwrap(), SketchConfig::default()).unwrap();
        assert_eq!(l1.merge(&l2).unwrap_err(), Error::Incompatible { field: "lsh seed" });
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let cfg = big();
        let empty = DensitySketch::new(regular(2, 0.5), cfg).unwrap();
        let mut s = empty.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3000 {
            s.insert(&[rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).unwrap();
        }
        let m = empty.merge(&s).unwrap();
        assert_eq!(m.count_sketch().counters(), s.count_sketch().counters());
        assert_eq!(m.len(), s.len());
        assert_eq!(m.heap().entries(), s.heap().entries());
    }

    #[test]
    fn merge_is_commutative_and_associative() {
        let cfg = SketchConfig::new(3, 128, 20).with_seed(5);
        let p = regular(2, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut parts: Vec<DensitySketch> = (0..3).map(|_| DensitySketch::new(p.clone(), cfg).unwrap()).collect();
        for i in 0..3000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            parts[i % 3].insert(&x).unwrap();
        }
        let ab = parts[0].merge(&parts[1]).unwrap();
        let ba = parts[1].merge(&parts[0]).unwrap();
        assert_eq!(ab.count_sketch().counters(), ba.count_sketch().counters());
        assert_eq!(ab.heap().entries(), ba.heap().entries());

        let left = ab.merge(&parts[2]).unwrap();
        let right = parts[0].merge(&parts[1].merge(&parts[2]).unwrap()).unwrap();
        assert_eq!(left.count_sketch().counters(), right.count_sketch().counters());
        assert_eq!(left.len(), right.len());
    }

    #[test]
    fn footprint_ignores_stream_length() {
        let cfg = SketchConfig::new(2, 256, 8);
        let mut a = DensitySketch::new(regular(2, 1.0), cfg).unwrap();
        let before = a.footprint_bytes();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5000 {
            a.insert(&[rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)]).unwrap();
        }
        assert_eq!(a.footprint_bytes(), before);
    }
}
