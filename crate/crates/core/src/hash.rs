// SPDX-License-Identifier: Apache-2.0

//! Seeded 64-bit mixing hash over bin-ids.
//!
//! A bin-id is hashed as its canonical encoding: each index as a fixed-width
//! little-endian `i64` word, in order. The word is absorbed through the
//! MurmurHash3 64-bit finaliser, so the hash of a bin-id is platform-stable.
//!
//! For count-sketch row `i` the row seed is `fmix64(seed ^ fmix64(i + 1))`.
//! The bucket takes the high bits of the row hash (`(hash * R) >> 64`) and
//! the sign takes bit 0 (`0 -> +1`, `1 -> -1`).

use crate::partition::BinId;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// MurmurHash3 64-bit finaliser.
#[inline]
pub fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

#[inline]
pub fn row_seed(seed: u64, row: usize) -> u64 {
    fmix64(seed ^ fmix64((row as u64).wrapping_add(1)))
}

#[inline]
pub fn hash_bin(seed: u64, bin: &BinId) -> u64 {
    let words = bin.as_slice();
    let mut h = seed ^ (words.len() as u64).wrapping_mul(GOLDEN);
    for &w in words {
        let word = u64::from_le_bytes(w.to_le_bytes());
        h = fmix64(h ^ word).wrapping_add(GOLDEN);
    }
    fmix64(h)
}

#[inline]
pub fn bucket(hash: u64, range: usize) -> usize {
    ((hash as u128 * range as u128) >> 64) as usize
}

#[inline]
pub fn sign(hash: u64) -> i64 {
    if hash & 1 == 0 {
        1
    } else {
        -1
    }
}
