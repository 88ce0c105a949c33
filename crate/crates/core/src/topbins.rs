// SPDX-License-Identifier: Apache-2.0

//! Augmented min-heap holding the `H` bins with the largest estimated counts.
//!
//! The heap is an implicit binary min-heap on count, with a side index from
//! bin-id to heap slot so an existing bin can be updated in place.

use crate::error::{Error, Result};
use crate::partition::BinId;
use rand::Rng;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct TopBins {
    capacity: usize,
    heap: Vec<(BinId, f64)>,
    index: HashMap<BinId, usize>,
}

impl TopBins {
    /// A heap of capacity zero retains nothing.
    pub fn new(capacity: usize) -> Self {
        TopBins {
            capacity,
            heap: Vec::with_capacity(capacity),
            // twice the live size so tombstone cleanup rehashes in place
            // instead of growing the table
            index: HashMap::with_capacity(2 * capacity + 2),
        }
    }

    /// Rebuilds a heap from `(bin, count)` entries, e.g. those produced by
    /// [`TopBins::entries`].
    pub fn from_entries(capacity: usize, entries: impl IntoIterator<Item = (BinId, f64)>) -> Result<Self> {
        let mut t = TopBins::new(capacity);
        for (b, c) in entries {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "count",
                    reason: format!("heap counts must be positive and finite, got {c}"),
                });
            }
            if t.index.contains_key(&b) {
                return Err(Error::InvalidParameter {
                    name: "bin",
                    reason: format!("duplicate heap entry {b}"),
                });
            }
            if t.heap.len() == capacity {
                return Err(Error::InvalidParameter {
                    name: "H",
                    reason: "more entries than capacity".into(),
                });
            }
            t.update(b, c)?;
        }
        Ok(t)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, b: &BinId) -> bool {
        self.index.contains_key(b)
    }

    pub fn get(&self, b: &BinId) -> Option<f64> {
        self.index.get(b).map(|&i| self.heap[i].1)
    }

    /// Smallest retained entry.
    pub fn min(&self) -> Option<(&BinId, f64)> {
        self.heap.first().map(|(b, c)| (b, *c))
    }

    /// Offers `(b, count)` to the heap.
    ///
    /// A bin already present gets its count overwritten. An absent bin is
    /// inserted while there is room; once full it replaces the minimum only
    /// if `count` is strictly greater. Non-positive counts are not inserted;
    /// a present bin offered a non-positive count is removed.
    pub fn update(&mut self, b: BinId, count: f64) -> Result<()> {
        if !count.is_finite() {
            return Err(Error::InvalidParameter {
                name: "count",
                reason: format!("heap count must be finite, got {count}"),
            });
        }
        if let Some(&slot) = self.index.get(&b) {
            if count <= 0.0 {
                self.remove_at(slot);
                return Ok(());
            }
            let old = self.heap[slot].1;
            self.heap[slot].1 = count;
            if count < old {
                self.sift_up(slot);
            } else {
                self.sift_down(slot);
            }
            return Ok(());
        }
        if count <= 0.0 || self.capacity == 0 {
            return Ok(());
        }
        if self.heap.len() < self.capacity {
            self.push(b, count);
        } else if count > self.heap[0].1 {
            let (old, _) = std::mem::replace(&mut self.heap[0], (b.clone(), count));
            self.index.remove(&old);
            self.index.insert(b, 0);
            self.sift_down(0);
        }
        Ok(())
    }

    /// Sum of retained counts; `n_hat_h` of the sampling distribution.
    pub fn total_count(&self) -> f64 {
        self.heap.iter().map(|(_, c)| c).sum()
    }

    /// Draws a bin with probability `count / total_count` using one uniform
    /// variate and a linear cumulative scan over the heap slots.
    pub fn sample_bin<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&BinId> {
        if self.heap.is_empty() {
            return Err(Error::EmptyHeap);
        }
        let target = rng.random::<f64>() * self.total_count();
        let mut acc = 0.0;
        for (b, c) in &self.heap {
            acc += c;
            if target < acc {
                return Ok(b);
            }
        }
        Ok(&self.heap[self.heap.len() - 1].0)
    }

    /// Entries sorted by bin-id.
    pub fn entries(&self) -> Vec<(BinId, f64)> {
        let mut v = self.heap.clone();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Iterates in heap-slot order.
    pub fn iter(&self) -> impl Iterator<Item = (&BinId, f64)> {
        self.heap.iter().map(|(b, c)| (b, *c))
    }

    /// Approximate heap bytes owned by the structure (independent of how
    /// many bins have been offered).
    pub fn footprint_bytes(&self, dim: usize) -> usize {
        let entry = std::mem::size_of::<(BinId, f64)>() + dim * std::mem::size_of::<i64>();
        let index_slot = std::mem::size_of::<(BinId, usize)>() + dim * std::mem::size_of::<i64>() + 1;
        self.heap.capacity() * entry + self.index.capacity() * index_slot
    }

    fn push(&mut self, b: BinId, count: f64) {
        let slot = self.heap.len();
        self.index.insert(b.clone(), slot);
        self.heap.push((b, count));
        self.sift_up(slot);
    }

    fn remove_at(&mut self, slot: usize) {
        let last = self.heap.len() - 1;
        self.swap(slot, last);
        let (b, _) = self.heap.pop().unwrap();
        self.index.remove(&b);
        if slot < self.heap.len() {
            self.sift_down(slot);
            self.sift_up(slot);
        }
    }

    fn swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.heap.swap(i, j);
        *self.index.get_mut(&self.heap[i].0).unwrap() = i;
        *self.index.get_mut(&self.heap[j].0).unwrap() = j;
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.heap[i].1 < self.heap[parent].1 {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut smallest = i;
            if l < n && self.heap[l].1 < self.heap[smallest].1 {
                smallest = l;
            }
            if r < n && self.heap[r].1 < self.heap[smallest].1 {
                smallest = r;
            }
            if smallest == i {
                break;
            }
            self.swap(i, smallest);
            i = smallest;
        }
    }

    #[cfg(test)]
    pub(crate) fn check_invariants(&self) {
        assert!(self.heap.len() <= self.capacity);
        assert_eq!(self.heap.len(), self.index.len());
        for (i, (b, c)) in self.heap.iter().enumerate() {
            assert!(*c > 0.0);
            assert_eq!(self.index[b], i);
            if i > 0 {
                assert!(self.heap[(i - 1) / 2].1 <= *c, "heap order violated at {i}");
            }
        }
    }
}
