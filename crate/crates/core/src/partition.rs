// SPDX-License-Identifier: Apache-2.0

//! Grid partitions of `R^d`: axis-aligned regular and per-axis-width grids,
//! and l2-LSH grids built from `d` Gaussian projections with uniform offsets.
//!
//! Every cell is half-open: for the regular grid a point `x` lies in bin `b`
//! iff `h * b_i <= x_i < h * (b_i + 1)` for all `i`.

use crate::error::{check_point, Error, Result};
use crate::linalg::Lu;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::fmt;

/// Smallest accepted `|det W|` for an LSH projection.
pub const DET_EPSILON: f64 = 1e-6;
/// Number of redraws attempted when a projection is ill-conditioned.
pub const MAX_PROJECTION_REDRAWS: usize = 16;

const MAX_SAMPLE_ATTEMPTS: usize = 1024;
// Largest |x / h| whose floor still fits an i64 without saturating.
const MAX_CELL_INDEX: f64 = 9.0e18;

/// Identifier of one partition cell: `d` signed integers, ordered
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinId(Box<[i64]>);

impl BinId {
    pub fn new(indices: impl Into<Box<[i64]>>) -> Self {
        BinId(indices.into())
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for BinId {
    fn from(v: Vec<i64>) -> Self {
        BinId(v.into_boxed_slice())
    }
}

impl<const N: usize> From<[i64; N]> for BinId {
    fn from(v: [i64; N]) -> Self {
        BinId(Box::new(v))
    }
}

impl fmt::Display for BinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Partitioning scheme tag, also used as the on-disk discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Regular = 0,
    Aligned = 1,
    Lsh = 2,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Scheme::Regular),
            1 => Some(Scheme::Aligned),
            2 => Some(Scheme::Lsh),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Regular => "regular",
            Scheme::Aligned => "aligned",
            Scheme::Lsh => "lsh",
        }
    }
}

/// Grid of parallelepipeds: bin `i` is `floor((<x, w_i> + b_i) / h)`.
#[derive(Debug, Clone)]
pub struct LshPartition {
    dim: usize,
    width: f64,
    seed: u64,
    /// Row-major `d x d`, row `i` is `w_i`.
    projection: Vec<f64>,
    offsets: Vec<f64>,
    lu: Lu,
}

impl LshPartition {
    /// Draws `W` with i.i.d. standard normal entries and `b_i ~ U[0, width)`
    /// from a ChaCha20 stream seeded with `seed`. Ill-conditioned draws are
    /// discarded and the stream continues.
    pub fn generate(dim: usize, width: f64, seed: u64) -> Result<Self> {
        validate_dim(dim)?;
        validate_width("width", width)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for _ in 0..=MAX_PROJECTION_REDRAWS {
            let projection: Vec<f64> = (0..dim * dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let offsets: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..width)).collect();
            let lu = Lu::new(&projection, dim);
            if lu.det().abs() > DET_EPSILON {
                return Ok(LshPartition {
                    dim,
                    width,
                    seed,
                    projection,
                    offsets,
                    lu,
                });
            }
        }
        Err(Error::ProjectionRetriesExhausted {
            attempts: MAX_PROJECTION_REDRAWS + 1,
        })
    }

    /// Builds a partition from explicit parameters (deserialisation, tests).
    pub fn from_parts(
        dim: usize,
        width: f64,
        seed: u64,
        projection: Vec<f64>,
        offsets: Vec<f64>,
    ) -> Result<Self> {
        validate_dim(dim)?;
        validate_width("width", width)?;
        if projection.len() != dim * dim {
            return Err(Error::InvalidParameter {
                name: "projection",
                reason: format!("expected {} entries, got {}", dim * dim, projection.len()),
            });
        }
        if offsets.len() != dim {
            return Err(Error::InvalidParameter {
                name: "offsets",
                reason: format!("expected {dim} entries, got {}", offsets.len()),
            });
        }
        if projection.iter().chain(&offsets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "projection",
                reason: "non-finite entry".into(),
            });
        }
        if offsets.iter().any(|&o| !(0.0..width).contains(&o)) {
            return Err(Error::InvalidParameter {
                name: "offsets",
                reason: format!("offsets must lie in [0, {width})"),
            });
        }
        let lu = Lu::new(&projection, dim);
        if lu.det().abs() <= DET_EPSILON {
            return Err(Error::SingularProjection { det: lu.det() });
        }
        Ok(LshPartition {
            dim,
            width,
            seed,
            projection,
            offsets,
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn determinant(&self) -> f64 {
        self.lu.det()
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.projection[i * d..(i + 1) * d];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.offsets[i]
            })
            .collect()
    }
}

/// One of the three supported partitioning schemes. Immutable once built.
#[derive(Debug, Clone)]
pub enum Partitioner {
    Regular { dim: usize, width: f64 },
    Aligned { widths: Vec<f64> },
    Lsh(LshPartition),
}

impl Partitioner {
    pub fn regular(dim: usize, width: f64) -> Result<Self> {
        validate_dim(dim)?;
        validate_width("width", width)?;
        Ok(Partitioner::Regular { dim, width })
    }

    pub fn aligned(widths: Vec<f64>) -> Result<Self> {
        validate_dim(widths.len())?;
        for &w in &widths {
            validate_width("widths", w)?;
        }
        Ok(Partitioner::Aligned { widths })
    }

    pub fn lsh(dim: usize, width: f64, seed: u64) -> Result<Self> {
        LshPartition::generate(dim, width, seed).map(Partitioner::Lsh)
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Partitioner::Regular { .. } => Scheme::Regular,
            Partitioner::Aligned { .. } => Scheme::Aligned,
            Partitioner::Lsh(_) => Scheme::Lsh,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Partitioner::Regular { dim, .. } => *dim,
            Partitioner::Aligned { widths } => widths.len(),
            Partitioner::Lsh(l) => l.dim,
        }
    }

    /// Maps a finite point of the right dimension to its cell.
    pub fn bin_of(&self, x: &[f64]) -> Result<BinId> {
        check_point(x, self.dim())?;
        let scaled: Vec<f64> = match self {
            Partitioner::Regular { width, .. } => x.iter().map(|v| v / width).collect(),
            Partitioner::Aligned { widths } => x.iter().zip(widths).map(|(v, w)| v / w).collect(),
            Partitioner::Lsh(l) => l.project(x).into_iter().map(|v| v / l.width).collect(),
        };
        scaled
            .into_iter()
            .enumerate()
            .map(|(index, q)| {
                let f = q.floor();
                if f.abs() < MAX_CELL_INDEX {
                    Ok(f as i64)
                } else {
                    Err(Error::NonFinite { index, value: q })
                }
            })
            .collect::<Result<Vec<i64>>>()
            .map(BinId::from)
    }

    /// Volume of every cell; all schemes are translation-invariant grids so
    /// the value does not depend on the bin.
    pub fn bin_volume(&self) -> f64 {
        match self {
            Partitioner::Regular { dim, width } => width.powi(*dim as i32),
            Partitioner::Aligned { widths } => widths.iter().product(),
            Partitioner::Lsh(l) => l.width.powi(l.dim as i32) / l.lu.det().abs(),
        }
    }

    /// Deterministic map from `r in [0,1)^d` to the point of cell `b` with
    /// local coordinates `r`. Uniform `r` gives a uniform point in the cell.
    pub fn point_in_bin(&self, b: &BinId, r: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if b.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: b.dim(),
            });
        }
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.len(),
            });
        }
        let idx = b.as_slice();
        Ok(match self {
            Partitioner::Regular { width, .. } => idx
                .iter()
                .zip(r)
                .map(|(&i, &u)| width * (i as f64 + u))
                .collect(),
            Partitioner::Aligned { widths } => idx
                .iter()
                .zip(r)
                .zip(widths)
                .map(|((&i, &u), w)| w * (i as f64 + u))
                .collect(),
            Partitioner::Lsh(l) => {
                let rhs: Vec<f64> = idx
                    .iter()
                    .zip(r)
                    .zip(&l.offsets)
                    .map(|((&i, &u), off)| l.width * (i as f64 + u) - off)
                    .collect();
                l.lu.solve(&rhs)
            }
        })
    }

    /// Centre of cell `b` (local coordinates all one half).
    pub fn bin_center(&self, b: &BinId) -> Result<Vec<f64>> {
        self.point_in_bin(b, &vec![0.5; self.dim()])
    }

    /// Uniform draw from cell `b`. Draws whose rounding lands on a
    /// neighbouring cell are rejected, so the result always maps back to `b`.
    pub fn sample_in_bin<R: Rng + ?Sized>(&self, b: &BinId, rng: &mut R) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut r = vec![0.0; d];
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            for u in r.iter_mut() {
                *u = rng.random::<f64>();
            }
            let p = self.point_in_bin(b, &r)?;
            if p.iter().all(|v| v.is_finite()) && self.bin_of(&p).as_ref() == Ok(b) {
                return Ok(p);
            }
        }
        Err(Error::SampleRejected {
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    /// True when both partitions are parameterised identically (bitwise for
    /// floating-point parameters).
    pub fn same_as(&self, other: &Partitioner) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        match (self, other) {
            (
                Partitioner::Regular { dim: d1, width: w1 },
                Partitioner::Regular { dim: d2, width: w2 },
            ) => d1 == d2 && w1.to_bits() == w2.to_bits(),
            (Partitioner::Aligned { widths: a }, Partitioner::Aligned { widths: b }) => {
                bits(a) == bits(b)
            }
            (Partitioner::Lsh(a), Partitioner::Lsh(b)) => {
                a.dim == b.dim
                    && a.seed == b.seed
                    && a.width.to_bits() == b.width.to_bits()
                    && bits(&a.projection) == bits(&b.projection)
                    && bits(&a.offsets) == bits(&b.offsets)
            }
            _ => false,
        }
    }
}

fn validate_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "dimension must be at least 1".into(),
        });
    }
    Ok(())
}

fn validate_width(name: &'static str, w: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("width must be positive and finite, got {w}"),
        });
    }
    Ok(())
}
