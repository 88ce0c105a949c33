// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// Unbiased sample covariance, row-major `d x d`.
pub fn sample_covariance(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least 2 samples, have {}", samples.len()),
        });
    }
    let d = samples[0].len();
    let n = samples.len() as f64;
    let mut mu = vec![0.0; d];
    for s in samples {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: s.len(),
            });
        }
        for (m, x) in mu.iter_mut().zip(s) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    for s in samples {
        for i in 0..d {
            let di = s[i] - mu[i];
            for j in i..d {
                cov[i * d + j] += di * (s[j] - mu[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= n - 1.0;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    Ok(cov)
}

/// Mean squared element-wise difference between the sample covariance of
/// `samples` and `reference` (row-major `d x d`).
pub fn covariance_mse(samples: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let cov = sample_covariance(samples)?;
    if cov.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            actual: cov.len(),
        });
    }
    Ok(cov.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / cov.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mixture::{gaussian_mixture, Component, GaussianMixture};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples_give_reference_power() {
        let s = vec![vec![1.0, 2.0]; 10];
        let reference = [2.0, 0.5, 0.5, 1.0];
        let mse = covariance_mse(&s, &reference).unwrap();
        assert!((mse - (4.0 + 0.25 + 0.25 + 1.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert!(covariance_mse(&[vec![1.0]], &[1.0]).is_err());
    }

    #[test]
    fn hand_computed_covariance() {
        let s = vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![4.0, 5.0]];
        let c = sample_covariance(&s).unwrap();
        // means (2, 2); deviations (-2,-2), (0,-1), (2,3)
        assert_eq!(c, vec![4.0, 5.0, 5.0, 7.0]);
    }

    #[test]
    fn mse_shrinks_with_sample_size() {
        let m = GaussianMixture::new(vec![
            Component::new(0.5, vec![-1.0, 0.0], vec![1.0, 0.5]),
            Component::new(0.5, vec![2.0, 1.0], vec![0.5, 1.0]),
        ])
        .unwrap();
        let reference = m.covariance();
        let avg = |n: usize| {
            (0..20u64)
                .map(|s| {
                    let pts = gaussian_mixture(&m, n, &mut ChaCha8Rng::seed_from_u64(s));
                    covariance_mse(&pts, &reference).unwrap()
                })
                .sum::<f64>()
                / 20.0
        };
        let (a, b, c) = (avg(100), avg(1000), avg(10_000));
        assert!(a > b && b > c, "{a} {b} {c}");
        assert!(c < 0.01);
    }
}
