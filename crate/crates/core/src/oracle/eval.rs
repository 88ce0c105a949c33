// SPDX-License-Identifier: Apache-2.0

//! Seeded experiments that measure the sketch against the exact oracle, and
//! the named scenarios that emit them as CSV.

use super::covariance::{covariance_mse, sample_covariance};
use super::histogram::{exact_histogram, n_hat_raw, ExactHistogram, StarDensities};
use super::imse::{iv_gap, mean, sem, ImseAccumulator, ImseReport, McDomain};
use super::mixture::{gaussian_mixture, Component, GaussianMixture};
use crate::countsketch::Recovery;
use crate::error::{Error, Result};
use crate::hash::fmix64;
use crate::partition::{Partitioner, Scheme};
use crate::sketch::{DensitySketch, SketchConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

/// Partition and sketch parameters of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub scheme: Scheme,
    pub dim: usize,
    pub width: f64,
    pub n: usize,
    pub sketch: SketchConfig,
}

impl Setup {
    pub fn regular(dim: usize, width: f64, n: usize, sketch: SketchConfig) -> Self {
        Setup {
            scheme: Scheme::Regular,
            dim,
            width,
            n,
            sketch,
        }
    }

    /// The LSH projection is seeded with the sketch seed.
    pub fn partitioner(&self) -> Result<Partitioner> {
        match self.scheme {
            Scheme::Regular => Partitioner::regular(self.dim, self.width),
            Scheme::Aligned => Partitioner::aligned(vec![self.width; self.dim]),
            Scheme::Lsh => Partitioner::lsh(self.dim, self.width, self.sketch.seed),
        }
    }

    fn with_seed(mut self, seed: u64) -> Self {
        self.sketch.seed = seed;
        self
    }

    fn row(&self, metric: &str, value: f64, std_err: f64, seed: u64) -> EvalRow {
        EvalRow {
            scheme: self.scheme,
            d: self.dim,
            n: self.n,
            h: self.width,
            k: self.sketch.repetitions,
            r: self.sketch.range,
            heap: self.sketch.heap_capacity,
            metric: metric.to_string(),
            value,
            std_err,
            seed,
        }
    }
}

/// Independent seed for stream `stream`, trial `t` of an experiment seeded
/// with `seed`.
pub fn trial_seed(seed: u64, stream: u64, t: u64) -> u64 {
    fmix64(fmix64(seed ^ fmix64(stream)) ^ t)
}

const DATA: u64 = 1;
const HASH: u64 = 2;
const SAMPLE: u64 = 3;
const DOMAIN: u64 = 4;

fn build(setup: &Setup, data: &[Vec<f64>]) -> Result<(DensitySketch, ExactHistogram)> {
    let p = setup.partitioner()?;
    let mut ds = DensitySketch::new(p.clone(), setup.sketch)?;
    ds.extend(data.iter().map(|x| x.as_slice()))?;
    let eh = exact_histogram(data.iter().map(|x| x.as_slice()), &p)?;
    Ok((ds, eh))
}

fn draw(truth: &GaussianMixture, n: usize, seed: u64) -> Vec<Vec<f64>> {
    gaussian_mixture(truth, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Two-component mixture in `dim` dimensions used by the default scenarios.
pub fn default_mixture(dim: usize) -> GaussianMixture {
    let a: Vec<f64> = (0..dim).map(|i| if i == 0 { -1.5 } else { 0.0 }).collect();
    let b: Vec<f64> = (0..dim).map(|i| if i == 0 { 1.5 } else { 0.5 }).collect();
    GaussianMixture::new(vec![
        Component::new(0.4, a, vec![0.5; dim]),
        Component::new(0.6, b, vec![1.0; dim]),
    ])
    .expect("valid mixture")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvGap {
    pub lhs: f64,
    pub rhs: f64,
    pub capture_ratio: f64,
    pub occupied: usize,
}

/// Both sides of the total-variation identity on one seeded stream.
pub fn tv_identity(truth: &GaussianMixture, setup: &Setup, data_seed: u64) -> Result<TvGap> {
    let data = draw(truth, setup.n, data_seed);
    let (ds, eh) = build(setup, &data)?;
    let s = StarDensities::new(&eh, &ds)?;
    Ok(TvGap {
        lhs: s.l1_gap(),
        rhs: 2.0 * (1.0 - s.capture_ratio()),
        capture_ratio: s.capture_ratio(),
        occupied: eh.occupied(),
    })
}

/// IMSE of the sketch density over `trials` independent data sets and hash
/// seeds.
pub fn sketch_imse(
    truth: &GaussianMixture,
    setup: &Setup,
    trials: usize,
    n_mc: usize,
    seed: u64,
) -> Result<ImseReport> {
    let domain = McDomain::new(truth, n_mc, &mut ChaCha8Rng::seed_from_u64(trial_seed(seed, DOMAIN, 0)))?;
    let mut acc = ImseAccumulator::new(&domain);
    for t in 0..trials as u64 {
        let data = draw(truth, setup.n, trial_seed(seed, DATA, t));
        let s = setup.with_seed(trial_seed(seed, HASH, t));
        let mut ds = DensitySketch::new(s.partitioner()?, s.sketch)?;
        ds.extend(data.iter().map(|x| x.as_slice()))?;
        acc.add_trial(&domain, |x| ds.density(x))?;
    }
    acc.report()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvGapResult {
    /// Measured `IV(f_C) - IV(f_H)`.
    pub measured: f64,
    pub std_err: f64,
    /// `(#bins - 1) / (K R n h^d)` with `#bins` averaged over trials.
    pub predicted: f64,
    /// Hash-noise variance of the count estimates integrated over the domain,
    /// keeping the correlation between points that share a bin.
    pub predicted_correlated: f64,
    pub mean_bins: f64,
    pub iv_histogram: f64,
    pub iv_sketch: f64,
}

/// Measures the excess integrated variance of the sketch density over the
/// exact histogram. Each trial draws fresh data and a fresh hash seed; both
/// estimators see the same data.
pub fn iv_gap_experiment(
    truth: &GaussianMixture,
    setup: &Setup,
    trials: usize,
    n_mc: usize,
    seed: u64,
) -> Result<IvGapResult> {
    if setup.sketch.recovery != Recovery::Mean {
        return Err(Error::InvalidParameter {
            name: "recovery",
            reason: "the variance prediction assumes mean recovery".into(),
        });
    }
    let domain = McDomain::new(truth, n_mc, &mut ChaCha8Rng::seed_from_u64(trial_seed(seed, DOMAIN, 0)))?;
    let mut acc_h = ImseAccumulator::new(&domain);
    let mut acc_c = ImseAccumulator::new(&domain);
    let kr = (setup.sketch.repetitions * setup.sketch.range) as f64;
    let mut bins = Vec::with_capacity(trials);
    let mut correlated = Vec::with_capacity(trials);
    let mut volume = 0.0;
    for t in 0..trials as u64 {
        let data = draw(truth, setup.n, trial_seed(seed, DATA, t));
        let s = setup.with_seed(trial_seed(seed, HASH, t));
        let (ds, eh) = build(&s, &data)?;
        acc_h.add_trial(&domain, |x| eh.density(x))?;
        acc_c.add_trial(&domain, |x| ds.density(x))?;
        volume = eh.partitioner().bin_volume();
        let b = eh.occupied() as f64;
        let s2 = eh.collision_mass();
        // cells in the integration box; empty ones see clamped zero-mean noise
        let cells = (domain.volume() / volume).max(b);
        let clamp = 0.5 - 0.5 / PI;
        correlated.push(((b - 1.0) * s2 + (cells - b) * s2 * clamp) / (kr * volume));
        bins.push(b);
    }
    let (measured, std_err) = iv_gap(&acc_c, &acc_h)?;
    let mean_bins = mean(&bins);
    Ok(IvGapResult {
        measured,
        std_err,
        predicted: (mean_bins - 1.0) / (kr * setup.n as f64 * volume),
        predicted_correlated: mean(&correlated),
        mean_bins,
        iv_histogram: acc_h.report()?.iv,
        iv_sketch: acc_c.report()?.iv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingBound {
    pub imse_sampling: ImseReport,
    pub imse_star: ImseReport,
    /// Mean over trials of `(1 - ratio_h)^2`.
    pub dropped_sq: f64,
    pub dropped_sq_err: f64,
    /// `12 (1 - ratio_h)^2 + 3 IMSE(f*_C)`.
    pub bound: f64,
    /// Standard error of `bound - IMSE(f_S)`.
    pub std_err: f64,
}

/// IMSE of the heap sampling density against the bound in terms of the
/// capture ratio and the IMSE of the normalised sketch density. Both
/// densities use fresh count estimates of the final sketch.
pub fn sampling_bound(
    truth: &GaussianMixture,
    setup: &Setup,
    trials: usize,
    n_mc: usize,
    seed: u64,
) -> Result<SamplingBound> {
    let domain = McDomain::new(truth, n_mc, &mut ChaCha8Rng::seed_from_u64(trial_seed(seed, DOMAIN, 0)))?;
    let mut acc_s = ImseAccumulator::new(&domain);
    let mut acc_star = ImseAccumulator::new(&domain);
    let mut dropped = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let data = draw(truth, setup.n, trial_seed(seed, DATA, t));
        let s = setup.with_seed(trial_seed(seed, HASH, t));
        let (ds, eh) = build(&s, &data)?;
        let dens = StarDensities::new(&eh, &ds)?;
        acc_s.add_trial(&domain, |x| dens.sampling(x))?;
        acc_star.add_trial(&domain, |x| dens.star(x))?;
        dropped.push((1.0 - dens.capture_ratio()).powi(2));
    }
    let imse_sampling = acc_s.report()?;
    let imse_star = acc_star.report()?;
    let dropped_sq = mean(&dropped);
    let dropped_sq_err = if trials > 1 { sem(&dropped) } else { 0.0 };
    let std_err = (imse_sampling.std_err.powi(2)
        + (3.0 * imse_star.std_err).powi(2)
        + (12.0 * dropped_sq_err).powi(2))
    .sqrt();
    Ok(SamplingBound {
        imse_sampling,
        imse_star,
        dropped_sq,
        dropped_sq_err,
        bound: 12.0 * dropped_sq + 3.0 * imse_star.imse,
        std_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceTrial {
    pub sketch_mse: f64,
    pub subsample_mse: f64,
    /// Serialized sketch size in bytes.
    pub budget_bytes: usize,
    /// Points of `8 d` bytes that fit the same budget.
    pub subsample_size: usize,
}

/// Covariance recovery from sketch samples against a uniform subsample of
/// the data that occupies the same number of bytes. The reference is the
/// sample covariance of the full data.
pub fn covariance_trial(
    truth: &GaussianMixture,
    setup: &Setup,
    draws: usize,
    seed: u64,
) -> Result<CovarianceTrial> {
    let data = draw(truth, setup.n, trial_seed(seed, DATA, 0));
    let s = setup.with_seed(trial_seed(seed, HASH, 0));
    let mut ds = DensitySketch::new(s.partitioner()?, s.sketch)?;
    ds.extend(data.iter().map(|x| x.as_slice()))?;
    let reference = sample_covariance(&data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, SAMPLE, 0));
    let sampler = ds.sampler()?;
    let synthetic = (0..draws).map(|_| sampler.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    let sketch_mse = covariance_mse(&synthetic, &reference)?;

    let budget_bytes = ds.to_bytes().len();
    let subsample_size = (budget_bytes / (8 * setup.dim)).clamp(2, data.len());
    let picked = rand::seq::index::sample(&mut rng, data.len(), subsample_size);
    let subsample: Vec<Vec<f64>> = picked.iter().map(|i| data[i].clone()).collect();
    let subsample_mse = covariance_mse(&subsample, &reference)?;
    Ok(CovarianceTrial {
        sketch_mse,
        subsample_mse,
        budget_bytes,
        subsample_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentration {
    /// Fraction of trials with `|n_hat - n| > eps n`.
    pub exceedance: f64,
    /// `#bins / (eps^2 n R)` with `#bins` averaged over trials.
    pub bound: f64,
    pub mean_bins: f64,
    pub trials: usize,
}

/// Concentration of the unclamped estimate `n_hat = sum_b c_hat(b)` over
/// the occupied bins.
pub fn nhat_concentration(
    truth: &GaussianMixture,
    setup: &Setup,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<Concentration> {
    let n = setup.n as f64;
    let mut exceed = 0usize;
    let mut bins = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let data = draw(truth, setup.n, trial_seed(seed, DATA, t));
        let s = setup.with_seed(trial_seed(seed, HASH, t));
        let (ds, eh) = build(&s, &data)?;
        let nh = n_hat_raw(&eh, ds.count_sketch());
        if (nh - n).abs() > epsilon * n {
            exceed += 1;
        }
        bins.push(eh.occupied() as f64);
    }
    let mean_bins = mean(&bins);
    Ok(Concentration {
        exceedance: exceed as f64 / trials as f64,
        bound: mean_bins / (epsilon * epsilon * n * setup.sketch.range as f64),
        mean_bins,
        trials,
    })
}

/// One CSV output row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub scheme: Scheme,
    pub d: usize,
    pub n: usize,
    pub h: f64,
    pub k: usize,
    pub r: usize,
    pub heap: usize,
    pub metric: String,
    pub value: f64,
    pub std_err: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "scheme,d,n,h,K,R,H,metric,value,std_err,seed";

impl fmt::Display for EvalRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme.name(),
            self.d,
            self.n,
            self.h,
            self.k,
            self.r,
            self.heap,
            self.metric,
            self.value,
            self.std_err,
            self.seed
        )
    }
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[EvalRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    TvIdentity,
    Convergence,
    IvGap,
    SamplingBound,
    Covariance,
    NhatConcentration,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::TvIdentity,
        Scenario::Convergence,
        Scenario::IvGap,
        Scenario::SamplingBound,
        Scenario::Covariance,
        Scenario::NhatConcentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TvIdentity => "lemma1",
            Scenario::Convergence => "theorem2-convergence",
            Scenario::IvGap => "theorem3-ivgap",
            Scenario::SamplingBound => "theorem5-bound",
            Scenario::Covariance => "covariance",
            Scenario::NhatConcentration => "nhat-concentration",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Scenario size. `quick` shrinks trial counts and stream lengths for smoke
/// runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub seed: u64,
    pub quick: bool,
}

pub fn run(scenario: Scenario, opts: EvalOptions) -> Result<Vec<EvalRow>> {
    match scenario {
        Scenario::TvIdentity => run_tv_identity(opts),
        Scenario::Convergence => run_convergence(opts),
        Scenario::IvGap => run_ivgap(opts),
        Scenario::SamplingBound => run_bound(opts),
        Scenario::Covariance => run_covariance(opts),
        Scenario::NhatConcentration => run_nhat(opts),
    }
}

/// Configurations for the total-variation identity: one and two dimensions,
/// heaps from a handful of bins up to every occupied bin.
pub fn tv_setups() -> Vec<Setup> {
    let mut out = Vec::new();
    for (dim, width, heaps) in [(1, 0.25, [2, 4, 8, 16, 10_000]), (2, 0.5, [5, 8, 16, 64, 10_000])] {
        for (k, r) in [(1, 64), (3, 256)] {
            for heap in heaps {
                let cfg = SketchConfig::new(k, r, heap).with_recovery(if k == 1 {
                    Recovery::Mean
                } else {
                    Recovery::Median
                });
                out.push(Setup::regular(dim, width, 2000, cfg));
            }
        }
    }
    out.push(Setup {
        scheme: Scheme::Lsh,
        ..Setup::regular(2, 0.7, 2000, SketchConfig::new(2, 128, 8))
    });
    out.push(Setup {
        scheme: Scheme::Aligned,
        ..Setup::regular(2, 0.4, 2000, SketchConfig::new(1, 1 << 16, 32))
    });
    out
}

fn run_tv_identity(opts: EvalOptions) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for (i, setup) in tv_setups().into_iter().enumerate() {
        let seed = trial_seed(opts.seed, i as u64, 0);
        let setup = setup.with_seed(seed);
        let truth = default_mixture(setup.dim);
        let g = tv_identity(&truth, &setup, seed)?;
        rows.push(setup.row("tv_lhs", g.lhs, 0.0, seed));
        rows.push(setup.row("tv_rhs", g.rhs, 0.0, seed));
        rows.push(setup.row("capture_ratio", g.capture_ratio, 0.0, seed));
    }
    Ok(rows)
}

fn run_convergence(opts: EvalOptions) -> Result<Vec<EvalRow>> {
    let truth = default_mixture(2);
    let (grid, trials, n_mc): (&[usize], usize, usize) = if opts.quick {
        (&[1_000, 10_000], 5, 5_000)
    } else {
        (&[1_000, 10_000, 100_000], 20, 20_000)
    };
    let mut rows = Vec::new();
    for &n in grid {
        let h = (n as f64).powf(-0.25);
        let setup = Setup::regular(2, h, n, SketchConfig::new(2, 1 << 20, 16));
        let r = sketch_imse(&truth, &setup, trials, n_mc, opts.seed)?;
        rows.push(setup.row("imse", r.imse, r.std_err, opts.seed));
        rows.push(setup.row("iv", r.iv, r.iv_std_err, opts.seed));
        rows.push(setup.row("isb", r.isb, r.isb_std_err, opts.seed));
    }
    Ok(rows)
}

fn run_ivgap(opts: EvalOptions) -> Result<Vec<EvalRow>> {
    let truth = GaussianMixture::standard(1)?;
    let trials = if opts.quick { 30 } else { 200 };
    let mut rows = Vec::new();
    for k in [1, 4] {
        for r in [64, 256] {
            let setup = Setup::regular(1, 0.5, 2000, SketchConfig::new(k, r, 1));
            let g = iv_gap_experiment(&truth, &setup, trials, 2000, opts.seed)?;
            rows.push(setup.row("iv_gap", g.measured, g.std_err, opts.seed));
            rows.push(setup.row("iv_gap_formula", g.predicted, 0.0, opts.seed));
            rows.push(setup.row("iv_gap_correlated", g.predicted_correlated, 0.0, opts.seed));
            rows.push(setup.row("bins", g.mean_bins, 0.0, opts.seed));
        }
    }
    Ok(rows)
}

/// Configurations for the sampling-density bound: moderate cell widths, a
/// range of heap sizes and count-sketch widths.
pub fn bound_setups() -> Vec<Setup> {
    let mut out = Vec::new();
    for (dim, width) in [(1, 0.5), (2, 0.75)] {
        for heap in [2, 6, 12, 10_000] {
            out.push(Setup::regular(dim, width, 2000, SketchConfig::new(2, 256, heap)));
        }
        out.push(Setup::regular(dim, width, 2000, SketchConfig::new(1, 32, 8)));
    }
    out
}

fn run_bound(opts: EvalOptions) -> Result<Vec<EvalRow>> {
    let (trials, n_mc) = if opts.quick { (5, 2_000) } else { (20, 10_000) };
    let mut rows = Vec::new();
    for setup in bound_setups() {
        let truth = default_mixture(setup.dim);
        let b = sampling_bound(&truth, &setup, trials, n_mc, opts.seed)?;
        rows.push(setup.row("imse_sampling", b.imse_sampling.imse, b.imse_sampling.std_err, opts.seed));
        rows.push(setup.row("imse_star", b.imse_star.imse, b.imse_star.std_err, opts.seed));
        rows.push(setup.row("dropped_sq", b.dropped_sq, b.dropped_sq_err, opts.seed));
        rows.push(setup.row("bound", b.bound, b.std_err, opts.seed));
    }
    Ok(rows)
}

/// Three tight, well separated clusters: the regime where a few heavy cells
/// carry most of the mass.
pub fn covariance_mixture() -> GaussianMixture {
    GaussianMixture::new(vec![
        Component::new(0.3, vec![-3.0, 0.0], vec![0.2, 0.2]),
        Component::new(0.5, vec![2.0, 1.0], vec![0.3, 0.1]),
        Component::new(0.2, vec![0.0, 3.0], vec![0.1, 0.3]),
    ])
    .expect("valid mixture")
}

/// Sketch configuration for the covariance comparison.
pub fn covariance_setup() -> Setup {
    let cfg = SketchConfig::new(5, 2048, 100_000).with_recovery(Recovery::Median);
    Setup::regular(2, 0.2, 100_000, cfg)
}

fn run_covariance(opts: EvalOptions) -> Result<Vec<EvalRow>> {
    let truth = covariance_mixture();
    let mut setup = covariance_setup();
    let runs = if opts.quick { 5 } else { 50 };
    if opts.quick {
        setup.n = 20_000;
    }
    let mut rows = Vec::new();
    let mut wins = 0;
    for i in 0..runs {
        let seed = trial_seed(opts.seed, i, 0);
        let c = covariance_trial(&truth, &setup, setup.n, seed)?;
        if c.sketch_mse <= c.subsample_mse {
            wins += 1;
        }
        rows.push(setup.row("cov_mse_sketch", c.sketch_mse, 0.0, seed));
        rows.push(setup.row("cov_mse_subsample", c.subsample_mse, 0.0, seed));
        rows.push(setup.row("budget_bytes", c.budget_bytes as f64, 0.0, seed));
    }
    rows.push(setup.row("sketch_win_rate", wins as f64 / runs as f64, 0.0, opts.seed));
    Ok(rows)
}

/// Scattered configuration: cells much smaller than the data spread, so
/// nearly every point has its own cell.
pub fn scattered_setup() -> Setup {
    Setup::regular(2, 0.01, 1000, SketchConfig::new(1, 256, 1))
}

/// Clustered configuration: a few heavy cells.
pub fn clustered_setup() -> Setup {
    Setup::regular(1, 0.5, 2000, SketchConfig::new(1, 4, 1))
}

fn run_nhat(opts: EvalOptions) -> Result<Vec<EvalRow>> {
    let trials = if opts.quick { 50 } else { 500 };
    let mut rows = Vec::new();
    for setup in [scattered_setup(), clustered_setup()] {
        let truth = GaussianMixture::standard(setup.dim)?;
        let c = nhat_concentration(&truth, &setup, 0.1, trials, opts.seed)?;
        let p = c.exceedance;
        rows.push(setup.row("exceedance", p, (p * (1.0 - p) / trials as f64).sqrt(), opts.seed));
        rows.push(setup.row("bound", c.bound, 0.0, opts.seed));
        rows.push(setup.row("bins", c.mean_bins, 0.0, opts.seed));
    }
    Ok(rows)
}
