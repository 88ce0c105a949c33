// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo estimation of IMSE and its variance/bias split.
//!
//! The integral over `R^d` is replaced by an average over points drawn
//! uniformly from a box covering every mixture component's mean +/- 6
//! standard deviations, scaled by the box volume. The same points are used
//! for every trial so that per-point means and variances across trials are
//! well defined.

use super::mixture::GaussianMixture;
use crate::error::{Error, Result};
use rand::Rng;

/// Half-width of the integration box in component standard deviations.
pub const BOX_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct McDomain {
    points: Vec<Vec<f64>>,
    truth: Vec<f64>,
    volume: f64,
}

impl McDomain {
    pub fn new<R: Rng + ?Sized>(truth: &GaussianMixture, n_mc: usize, rng: &mut R) -> Result<Self> {
        if n_mc < 2 {
            return Err(Error::InvalidParameter {
                name: "n_mc",
                reason: "need at least 2 integration points".into(),
            });
        }
        let (lo, hi) = truth.bounding_box(BOX_SIGMAS);
        let volume = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        let points: Vec<Vec<f64>> = (0..n_mc)
            .map(|_| lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect())
            .collect();
        let truth = points.iter().map(|p| truth.pdf(p)).collect();
        Ok(McDomain { points, truth, volume })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// True density at each point.
    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImseReport {
    pub imse: f64,
    pub iv: f64,
    pub isb: f64,
    pub n_trials: usize,
    pub n_mc_points: usize,
    /// Standard error of `imse`: trial spread and integration-point spread
    /// in quadrature.
    pub std_err: f64,
    /// Jackknife over trials plus integration-point spread.
    pub iv_std_err: f64,
    pub isb_std_err: f64,
}

/// Estimator values at the domain points, one row per trial.
#[derive(Debug, Clone)]
pub struct ImseAccumulator {
    volume: f64,
    truth: Vec<f64>,
    trials: Vec<Vec<f64>>,
}

struct PointStats {
    mean: Vec<f64>,
    /// Sum of squared deviations from the mean, per point.
    ss: Vec<f64>,
}

impl ImseAccumulator {
    pub fn new(domain: &McDomain) -> Self {
        ImseAccumulator {
            volume: domain.volume,
            truth: domain.truth.clone(),
            trials: Vec::new(),
        }
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn push_trial(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.truth.len() {
            return Err(Error::DimensionMismatch {
                expected: self.truth.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        self.trials.push(values);
        Ok(())
    }

    /// Evaluates `f` at every domain point and records the values as one
    /// trial.
    pub fn add_trial<F>(&mut self, domain: &McDomain, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let values = domain.points.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
        self.push_trial(values)
    }

    fn stats(&self) -> PointStats {
        let t = self.trials.len() as f64;
        let m = self.truth.len();
        let mut mean = vec![0.0; m];
        for row in &self.trials {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= t);
        let mut ss = vec![0.0; m];
        for row in &self.trials {
            for ((s, v), mu) in ss.iter_mut().zip(row).zip(&mean) {
                *s += (v - mu).powi(2);
            }
        }
        PointStats { mean, ss }
    }

    fn check_trials(&self) -> Result<usize> {
        let t = self.trials.len();
        if t < 2 {
            return Err(Error::InvalidParameter {
                name: "n_trials",
                reason: format!("need at least 2 trials, have {t}"),
            });
        }
        Ok(t)
    }

    /// Per-point variance contributions of each leave-one-out replicate,
    /// reduced to the replicate's integrated value.
    fn jackknife_iv(&self, st: &PointStats) -> Vec<f64> {
        let t = self.trials.len() as f64;
        self.trials
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                for ((v, mu), ss) in row.iter().zip(&st.mean).zip(&st.ss) {
                    let d = v - mu;
                    acc += (ss - d * d * t / (t - 1.0)) / (t - 2.0);
                }
                self.volume * acc / st.mean.len() as f64
            })
            .collect()
    }

    fn jackknife_isb(&self, st: &PointStats) -> Vec<f64> {
        let t = self.trials.len() as f64;
        self.trials
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                for (((v, mu), ss), f) in row.iter().zip(&st.mean).zip(&st.ss).zip(&self.truth) {
                    let d = v - mu;
                    let m = mu - d / (t - 1.0);
                    let s2 = (ss - d * d * t / (t - 1.0)) / (t - 2.0);
                    acc += (m - f).powi(2) - s2 / (t - 1.0);
                }
                self.volume * acc / st.mean.len() as f64
            })
            .collect()
    }

    pub fn report(&self) -> Result<ImseReport> {
        let t = self.check_trials()?;
        let m = self.truth.len();
        let tf = t as f64;
        let v = self.volume;
        let st = self.stats();

        let per_trial: Vec<f64> = self
            .trials
            .iter()
            .map(|row| v * row.iter().zip(&self.truth).map(|(x, f)| (x - f).powi(2)).sum::<f64>() / m as f64)
            .collect();
        let imse = mean(&per_trial);
        let sq_err_by_point: Vec<f64> = (0..m)
            .map(|i| self.trials.iter().map(|r| (r[i] - self.truth[i]).powi(2)).sum::<f64>() / tf)
            .collect();
        let std_err = (sem(&per_trial).powi(2) + (v * sem(&sq_err_by_point)).powi(2)).sqrt();

        let var_by_point: Vec<f64> = st.ss.iter().map(|s| s / (tf - 1.0)).collect();
        let bias_by_point: Vec<f64> = st
            .mean
            .iter()
            .zip(&self.truth)
            .zip(&var_by_point)
            .map(|((mu, f), s2)| (mu - f).powi(2) - s2 / tf)
            .collect();
        let iv = v * mean(&var_by_point);
        let isb = (v * mean(&bias_by_point)).max(0.0);

        let (iv_jack, isb_jack) = if t >= 3 {
            (jackknife_se(&self.jackknife_iv(&st)), jackknife_se(&self.jackknife_isb(&st)))
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(ImseReport {
            imse,
            iv,
            isb,
            n_trials: t,
            n_mc_points: m,
            std_err,
            iv_std_err: iv_jack.hypot(v * sem(&var_by_point)),
            isb_std_err: isb_jack.hypot(v * sem(&bias_by_point)),
        })
    }
}

/// `IV(a) - IV(b)` and its standard error for two estimators evaluated on
/// the same trials and domain. Pairing by trial index lets shared data
/// randomness cancel.
pub fn iv_gap(a: &ImseAccumulator, b: &ImseAccumulator) -> Result<(f64, f64)> {
    let t = a.check_trials()?;
    if b.trials.len() != t || b.truth.len() != a.truth.len() || a.volume != b.volume {
        return Err(Error::InvalidParameter {
            name: "accumulators",
            reason: "trial count or domain differs".into(),
        });
    }
    let (sa, sb) = (a.stats(), b.stats());
    let tf = t as f64;
    let diff: Vec<f64> = sa.ss.iter().zip(&sb.ss).map(|(x, y)| (x - y) / (tf - 1.0)).collect();
    let gap = a.volume * mean(&diff);
    let points = a.volume * sem(&diff);
    if t < 3 {
        return Ok((gap, f64::NAN));
    }
    let ja = a.jackknife_iv(&sa);
    let jb = b.jackknife_iv(&sb);
    let jd: Vec<f64> = ja.iter().zip(&jb).map(|(x, y)| x - y).collect();
    Ok((gap, jackknife_se(&jd).hypot(points)))
}

/// Builds one estimator per trial with `trial(t)` and reports its IMSE
/// against `truth`.
pub fn estimate_imse<R, F, E>(
    truth: &GaussianMixture,
    n_trials: usize,
    n_mc: usize,
    rng: &mut R,
    mut trial: F,
) -> Result<ImseReport>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> Result<E>,
    E: Fn(&[f64]) -> Result<f64>,
{
    if n_trials < 2 {
        return Err(Error::InvalidParameter {
            name: "n_trials",
            reason: "need at least 2 trials".into(),
        });
    }
    let domain = McDomain::new(truth, n_mc, rng)?;
    let mut acc = ImseAccumulator::new(&domain);
    for t in 0..n_trials {
        let est = trial(t)?;
        acc.add_trial(&domain, est)?;
    }
    acc.report()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean.
pub(crate) fn sem(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

fn jackknife_se(replicates: &[f64]) -> f64 {
    let n = replicates.len() as f64;
    let mu = mean(replicates);
    ((n - 1.0) / n * replicates.iter().map(|x| (x - mu).powi(2)).sum::<f64>()).sqrt()
}
