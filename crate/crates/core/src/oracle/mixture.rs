// SPDX-License-Identifier: Apache-2.0

//! Gaussian mixtures with diagonal covariance, used as ground truth.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix.
    pub variance: Vec<f64>,
}

impl Component {
    pub fn new(weight: f64, mean: Vec<f64>, variance: Vec<f64>) -> Self {
        Component { weight, mean, variance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<Component>,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    /// Weights must be positive and sum to one (to 1e-9); variances must be
    /// positive and finite.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidParameter {
            name: "components",
            reason,
        };
        let dim = components
            .first()
            .ok_or_else(|| invalid("mixture needs at least one component".into()))?
            .mean
            .len();
        if dim == 0 {
            return Err(invalid("dimension must be positive".into()));
        }
        let mut cumulative = Vec::with_capacity(components.len());
        let mut acc = 0.0;
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(invalid(format!("component {i}: weight {} is not positive", c.weight)));
            }
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(invalid(format!("component {i}: expected dimension {dim}")));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(invalid(format!("component {i}: mean is not finite")));
            }
            if c.variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(invalid(format!("component {i}: variances must be positive")));
            }
            acc += c.weight;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {acc}, not 1")));
        }
        Ok(GaussianMixture {
            dim,
            components,
            cumulative,
        })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![Component::new(1.0, vec![0.0; dim], vec![1.0; dim])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * normal_pdf(x, &c.mean, &c.variance))
            .sum()
    }

    /// Draws a point and the index of the component it came from.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let u = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1);
        let c = &self.components[k];
        let x = c
            .mean
            .iter()
            .zip(&c.variance)
            .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (k, x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_labeled(rng).1
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (acc, x) in m.iter_mut().zip(&c.mean) {
                *acc += c.weight * x;
            }
        }
        m
    }

    /// Full covariance matrix, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mu = self.mean();
        let mut cov = vec![0.0; d * d];
        for c in &self.components {
            for i in 0..d {
                for j in 0..d {
                    let mut v = (c.mean[i] - mu[i]) * (c.mean[j] - mu[j]);
                    if i == j {
                        v += c.variance[i];
                    }
                    cov[i * d + j] += c.weight * v;
                }
            }
        }
        cov
    }

    /// Axis-aligned box covering every component's mean +/- `k` standard
    /// deviations.
    pub fn bounding_box(&self, k: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for c in &self.components {
            for i in 0..self.dim {
                let s = k * c.variance[i].sqrt();
                lo[i] = lo[i].min(c.mean[i] - s);
                hi[i] = hi[i].max(c.mean[i] + s);
            }
        }
        (lo, hi)
    }

    /// Roughness `integral f^2`, in closed form.
    pub fn roughness(&self) -> f64 {
        let mut r = 0.0;
        for a in &self.components {
            for b in &self.components {
                let var: Vec<f64> = a.variance.iter().zip(&b.variance).map(|(x, y)| x + y).collect();
                r += a.weight * b.weight * normal_pdf(&a.mean, &b.mean, &var);
            }
        }
        r
    }
}

/// `n` i.i.d. draws from `mixture`.
pub fn gaussian_mixture<R: Rng + ?Sized>(mixture: &GaussianMixture, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| mixture.sample(rng)).collect()
}

fn normal_pdf(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut q = 0.0;
    let mut norm = 1.0;
    for ((xi, mi), vi) in x.iter().zip(mean).zip(var) {
        q += (xi - mi) * (xi - mi) / vi;
        norm *= 2.0 * PI * vi;
    }
    (-0.5 * q).exp() / norm.sqrt()
}
