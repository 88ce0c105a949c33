// SPDX-License-Identifier: Apache-2.0

//! `dsketch`: build, query, sample, merge and inspect density sketches.
//!
//! Exit status is 0 on success, 1 on a runtime or data error and 2 on a
//! usage error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use density_sketch::io::{write_point, PointReader, ReadOptions};
use density_sketch::oracle::eval::{self, EvalOptions, Scenario};
use density_sketch::sketch::{DEFAULT_HEAP_CAPACITY, DEFAULT_RANGE, DEFAULT_REPETITIONS};
use density_sketch::{DensitySketch, Partitioner, Recovery, SketchConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "dsketch", version, about = "Streaming density sketches over numeric CSV data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a sketch from a point stream in one pass.
    Build(BuildArgs),
    /// Print the density estimate at each query point.
    Query {
        sketch: PathBuf,
        /// Query points; `-` or omitted reads standard input.
        points: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        skip_header: bool,
    },
    /// Draw synthetic points from a sketch.
    Sample {
        sketch: PathBuf,
        #[arg(short = 'n', long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Merge two sketches built with identical parameters.
    Merge {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print sketch parameters and summary statistics.
    Info { sketch: PathBuf },
    /// Run an evaluation scenario against the exact oracle and print CSV.
    Eval {
        #[arg(value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smaller trial counts and streams.
        #[arg(long)]
        quick: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Input points; `-` or omitted reads standard input.
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Regular)]
    scheme: SchemeArg,
    /// Cell width.
    #[arg(short, long, default_value_t = 1.0, value_parser = positive_f64)]
    width: f64,
    /// Per-axis widths for the aligned scheme.
    #[arg(long, value_delimiter = ',', conflicts_with = "width", value_parser = positive_f64)]
    widths: Option<Vec<f64>>,
    /// Point dimension; inferred from the first row unless the scheme is lsh.
    #[arg(long, value_parser = positive_usize)]
    dim: Option<usize>,
    #[arg(short = 'K', default_value_t = DEFAULT_REPETITIONS, value_parser = positive_usize)]
    repetitions: usize,
    #[arg(short = 'R', default_value_t = DEFAULT_RANGE, value_parser = positive_usize)]
    range: usize,
    #[arg(short = 'H', default_value_t = DEFAULT_HEAP_CAPACITY)]
    heap: usize,
    #[arg(long, value_enum, default_value_t = RecoveryArg::Mean)]
    recovery: RecoveryArg,
    /// Seeds the count-sketch hashes and the lsh projection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    skip_header: bool,
    /// Zero-based column holding a class label; one sketch is built per
    /// label and written to `<output stem>.<label>.<ext>`.
    #[arg(long)]
    label_column: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SchemeArg {
    Regular,
    Aligned,
    Lsh,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RecoveryArg {
    Mean,
    Median,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ScenarioArg {
    #[value(name = "lemma1", alias = "tv-identity")]
    TvIdentity,
    #[value(name = "theorem2-convergence", alias = "convergence")]
    Convergence,
    #[value(name = "theorem3-ivgap", alias = "ivgap")]
    IvGap,
    #[value(name = "theorem5-bound", alias = "bound")]
    SamplingBound,
    Covariance,
    #[value(name = "nhat-concentration", alias = "nhat")]
    NhatConcentration,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::TvIdentity => Scenario::TvIdentity,
            ScenarioArg::Convergence => Scenario::Convergence,
            ScenarioArg::IvGap => Scenario::IvGap,
            ScenarioArg::SamplingBound => Scenario::SamplingBound,
            ScenarioArg::Covariance => Scenario::Covariance,
            ScenarioArg::NhatConcentration => Scenario::NhatConcentration,
        }
    }
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive and finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dsketch: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Build(args) => build(args),
        Command::Query {
            sketch,
            points,
            output,
            skip_header,
        } => query(&sketch, points.as_deref(), output.as_deref(), skip_header),
        Command::Sample {
            sketch,
            count,
            seed,
            output,
        } => sample(&sketch, count, seed, output.as_deref()),
        Command::Merge { a, b, output } => merge(&a, &b, &output),
        Command::Info { sketch } => info(&sketch),
        Command::Eval {
            scenario,
            seed,
            quick,
            output,
        } => {
            let rows = eval::run(scenario.into(), EvalOptions { seed, quick })?;
            let mut out = open_output(output.as_deref())?;
            eval::write_csv(&mut out, &rows)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            Ok(Box::new(BufReader::new(f)))
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn read_sketch(path: &Path) -> Result<DensitySketch> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    DensitySketch::from_bytes(&bytes).with_context(|| format!("{}", path.display()))
}

fn write_sketch(path: &Path, ds: &DensitySketch) -> Result<()> {
    std::fs::write(path, ds.to_bytes()).with_context(|| format!("cannot write {}", path.display()))
}

impl BuildArgs {
    fn config(&self) -> Result<SketchConfig> {
        let recovery = match self.recovery {
            RecoveryArg::Mean => Recovery::Mean,
            RecoveryArg::Median => Recovery::Median,
        };
        Ok(SketchConfig::new(self.repetitions, self.range, self.heap)
            .with_seed(self.seed)
            .with_recovery(recovery))
    }

    /// Dimension known before reading any data, if any.
    fn fixed_dim(&self) -> Result<Option<usize>> {
        let from_widths = self.widths.as_ref().map(|w| w.len());
        match (self.dim, from_widths) {
            (Some(d), Some(w)) if d != w => bail!("--dim {d} disagrees with {w} --widths"),
            (Some(d), _) => Ok(Some(d)),
            (None, w) => {
                if self.scheme == SchemeArg::Lsh {
                    bail!("--dim is required for the lsh scheme");
                }
                Ok(w)
            }
        }
    }

    fn partitioner(&self, dim: usize) -> Result<Partitioner> {
        let p = match self.scheme {
            SchemeArg::Regular => {
                if self.widths.is_some() {
                    bail!("--widths applies only to the aligned scheme");
                }
                Partitioner::regular(dim, self.width)?
            }
            SchemeArg::Aligned => match &self.widths {
                Some(w) => Partitioner::aligned(w.clone())?,
                None => Partitioner::aligned(vec![self.width; dim])?,
            },
            SchemeArg::Lsh => {
                if self.widths.is_some() {
                    bail!("--widths applies only to the aligned scheme");
                }
                Partitioner::lsh(dim, self.width, self.seed)?
            }
        };
        Ok(p)
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let config = args.config()?;
    let fixed = args.fixed_dim()?;
    // validate partition parameters before touching the input
    let mut partitioner = match fixed {
        Some(d) => Some(args.partitioner(d)?),
        None => None,
    };
    let reader = PointReader::new(
        open_input(args.input.as_deref())?,
        ReadOptions {
            skip_header: args.skip_header,
            label_column: args.label_column,
            dim: fixed,
        },
    );
    let mut sketches: BTreeMap<String, DensitySketch> = BTreeMap::new();
    for rec in reader {
        let rec = rec?;
        if partitioner.is_none() {
            partitioner = Some(args.partitioner(rec.point.len())?);
        }
        let p = partitioner.as_ref().expect("set above");
        let key = rec.label.unwrap_or_default();
        if !sketches.contains_key(&key) {
            sketches.insert(key.clone(), DensitySketch::new(p.clone(), config)?);
        }
        let ds = sketches.get_mut(&key).expect("inserted above");
        ds.insert(&rec.point).with_context(|| format!("line {}", rec.line))?;
    }
    if args.label_column.is_none() {
        let ds = match sketches.remove("") {
            Some(ds) => ds,
            None => {
                let p = match partitioner {
                    Some(p) => p,
                    None => bail!("input has no points; pass --dim to build an empty sketch"),
                };
                DensitySketch::new(p, config)?
            }
        };
        write_sketch(&args.output, &ds)?;
        summarize(&args.output, &ds);
        return Ok(());
    }
    if sketches.is_empty() {
        bail!("input has no labelled points");
    }
    for (label, ds) in &sketches {
        let path = labelled_path(&args.output, label);
        write_sketch(&path, ds)?;
        summarize(&path, ds);
    }
    Ok(())
}

fn summarize(path: &Path, ds: &DensitySketch) {
    let ratio = ds.capture_ratio().map_or("n/a".to_string(), |r| format!("{r:.4}"));
    eprintln!(
        "{}: n={} d={} heap={}/{} bins, estimated capture ratio {ratio}",
        path.display(),
        ds.len(),
        ds.dim(),
        ds.heap().len(),
        ds.heap().capacity()
    );
}

/// `out.dsk` + `cat` -> `out.cat.dsk`; label characters outside
/// `[A-Za-z0-9_-]` become `_`.
fn labelled_path(out: &Path, label: &str) -> PathBuf {
    let clean: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{clean}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{clean}"),
    };
    out.with_file_name(name)
}

fn query(sketch: &Path, points: Option<&Path>, output: Option<&Path>, skip_header: bool) -> Result<()> {
    let ds = read_sketch(sketch)?;
    let reader = PointReader::new(
        open_input(points)?,
        ReadOptions {
            skip_header,
            label_column: None,
            dim: Some(ds.dim()),
        },
    );
    let mut out = open_output(output)?;
    for rec in reader {
        let rec = rec?;
        let f = ds.density(&rec.point).with_context(|| format!("line {}", rec.line))?;
        writeln!(out, "{f}")?;
    }
    out.flush()?;
    Ok(())
}

fn sample(sketch: &Path, count: usize, seed: u64, output: Option<&Path>) -> Result<()> {
    let ds = read_sketch(sketch)?;
    let mut out = open_output(output)?;
    if count > 0 {
        let sampler = ds.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            write_point(&mut out, &sampler.sample(&mut rng)?)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn merge(a: &Path, b: &Path, output: &Path) -> Result<()> {
    let x = read_sketch(a)?;
    let y = read_sketch(b)?;
    let m = x.merge(&y)?;
    write_sketch(output, &m)?;
    summarize(output, &m);
    Ok(())
}

fn info(path: &Path) -> Result<()> {
    let ds = read_sketch(path)?;
    let cfg = ds.config();
    let p = ds.partitioner();
    let mut out = io::stdout().lock();
    writeln!(out, "scheme: {}", p.scheme().name())?;
    writeln!(out, "d: {}", ds.dim())?;
    match p {
        Partitioner::Regular { width, .. } => writeln!(out, "width: {width}")?,
        Partitioner::Aligned { widths } => {
            let w: Vec<String> = widths.iter().map(|w| w.to_string()).collect();
            writeln!(out, "widths: {}", w.join(","))?
        }
        Partitioner::Lsh(l) => {
            writeln!(out, "width: {}", l.width())?;
            writeln!(out, "lsh seed: {}", l.seed())?;
        }
    }
    writeln!(out, "bin volume: {}", p.bin_volume())?;
    writeln!(out, "K: {}", cfg.repetitions)?;
    writeln!(out, "R: {}", cfg.range)?;
    writeln!(out, "recovery: {}", cfg.recovery.name())?;
    writeln!(out, "cs seed: {}", cfg.seed)?;
    writeln!(out, "n: {}", ds.len())?;
    writeln!(out, "H: {}", cfg.heap_capacity)?;
    writeln!(out, "heap bins: {}", ds.heap().len())?;
    let ratio = ds.capture_ratio().map_or("n/a".to_string(), |r| r.to_string());
    writeln!(out, "estimated capture ratio: {ratio}")?;
    writeln!(out, "saturated: {}", ds.count_sketch().is_saturated())?;
    writeln!(out, "state bytes: {}", ds.footprint_bytes())?;
    Ok(())
}
