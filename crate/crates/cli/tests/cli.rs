// SPDX-License-Identifier: Apache-2.0

use density_sketch::oracle::exact_histogram;
use density_sketch::DensitySketch;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use tempfile::TempDir;

fn dsketch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsketch")).args(args).output().unwrap()
}

fn dsketch_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dsketch"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn load(p: &Path) -> DensitySketch {
    DensitySketch::from_bytes(&std::fs::read(p).unwrap()).unwrap()
}

/// Deterministic pseudo-random 2D rows.
fn rows(n: usize, seed: u64) -> String {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut out = String::new();
    for _ in 0..n {
        let (a, b) = (next(), next());
        out.push_str(&format!("{},{}\n", 4.0 * a * b - 1.0, 3.0 * (a - b)));
    }
    out
}

fn parse_points(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn build_three_rows_with_defaults() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "0.5,1.5\n-2,3\n0.7,1.1\n");
    let out = dir.path().join("s.dsk");
    let res = dsketch(&["build", s(&input), "-o", s(&out)]);
    ok(&res);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("n=3") && stderr.contains("d=2"), "{stderr}");
    assert!(stderr.contains("capture ratio"));
    let ds = load(&out);
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.dim(), 2);
}

#[test]
fn build_is_deterministic_under_seed() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", &rows(2000, 1));
    let a = dir.path().join("a.dsk");
    let b = dir.path().join("b.dsk");
    for (out, scheme) in [(&a, "lsh"), (&b, "lsh")] {
        ok(&dsketch(&[
            "build", s(&input), "-o", s(out), "--scheme", scheme, "--dim", "2", "--seed", "9", "-w", "0.3",
        ]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn build_reads_stdin_and_skips_header_and_comments() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.dsk");
    let text = "x y\n# note\n1 2\n\n3 4\n";
    ok(&dsketch_stdin(&["build", "-", "-o", s(&out), "--skip-header"], text));
    assert_eq!(load(&out).len(), 2);
}

#[test]
fn ragged_input_reports_line() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "1,2\n3,4\n5\n");
    let res = dsketch(&["build", s(&input), "-o", s(&dir.path().join("s.dsk"))]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn invalid_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "1,2\n");
    let out = dir.path().join("s.dsk");
    for bad in [["-w", "0"], ["-R", "0"], ["--scheme", "hexagon"], ["--recovery", "mode"]] {
        let mut args = vec!["build", s(&input), "-o", s(&out)];
        args.extend(bad);
        assert_eq!(dsketch(&args).status.code(), Some(2), "{bad:?}");
    }
    let res = dsketch(&["build", s(&input), "-o", s(&out), "--scheme", "lsh"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--dim"));
}

#[test]
fn unreadable_input_and_unwritable_output() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(dsketch(&["build", s(&missing), "-o", "x.dsk"]).status.code(), Some(1));
    let input = write_file(&dir, "in.csv", "1,2\n");
    let bad_out = dir.path().join("no/such/dir/s.dsk");
    assert_eq!(dsketch(&["build", s(&input), "-o", s(&bad_out)]).status.code(), Some(1));
}

#[test]
fn aligned_widths_fix_dimension() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "1,2,3\n");
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "--scheme", "aligned", "--widths", "0.5,1,2"]));
    assert_eq!(load(&out).partitioner().bin_volume(), 1.0);
    let res = dsketch(&["build", s(&input), "-o", s(&out), "--scheme", "aligned", "--widths", "0.5,1"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn resident_state_does_not_grow_with_stream() {
    let dir = TempDir::new().unwrap();
    let mut sizes = Vec::new();
    for n in [20_000, 200_000] {
        let input = write_file(&dir, &format!("in{n}.csv"), &rows(n, 3));
        let out = dir.path().join(format!("s{n}.dsk"));
        ok(&dsketch(&["build", s(&input), "-o", s(&out), "-w", "0.05", "-H", "256"]));
        let info = ok(&dsketch(&["info", s(&out)]));
        let state = info.lines().find(|l| l.starts_with("state bytes")).unwrap().to_string();
        sizes.push((state, std::fs::metadata(&out).unwrap().len()));
    }
    assert_eq!(sizes[0], sizes[1]);
}

#[test]
fn query_matches_exact_histogram() {
    let dir = TempDir::new().unwrap();
    let text = rows(300, 5);
    let input = write_file(&dir, "in.csv", &text);
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "-K", "1", "-R", "1048576", "-H", "16", "-w", "0.5"]));
    let ds = load(&out);
    let pts = parse_points(&text);
    let eh = exact_histogram(pts.iter().map(|p| p.as_slice()), ds.partitioner()).unwrap();
    let first = text.lines().next().unwrap();
    let q = write_file(&dir, "q.csv", &format!("{first}\n100,100\n"));
    let got: Vec<f64> = ok(&dsketch(&["query", s(&out), s(&q)]))
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(got[0], eh.density(&pts[0]).unwrap());
    assert_eq!(got[1], 0.0);
}

#[test]
fn query_dimension_mismatch_names_row() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "1,2\n");
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out)]));
    let res = dsketch_stdin(&["query", s(&out)], "1,2\n1,2,3\n");
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}

#[test]
fn sampling_contract() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", &rows(1000, 7));
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "-w", "0.4", "-H", "20"]));
    let ds = load(&out);

    assert_eq!(ok(&dsketch(&["sample", s(&out), "-n", "0"])), "");
    let a = ok(&dsketch(&["sample", s(&out), "-n", "500", "--seed", "3"]));
    let b = ok(&dsketch(&["sample", s(&out), "-n", "500", "--seed", "3"]));
    assert_eq!(a, b);
    let c = ok(&dsketch(&["sample", s(&out), "-n", "500", "--seed", "4"]));
    assert_ne!(a, c);
    let pts = parse_points(&a);
    assert_eq!(pts.len(), 500);
    for p in &pts {
        assert!(ds.heap().contains(&ds.partitioner().bin_of(p).unwrap()));
    }
}

#[test]
fn sampling_empty_sketch_fails() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "");
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "--dim", "2"]));
    assert_eq!(load(&out).len(), 0);
    assert_eq!(dsketch(&["sample", s(&out), "-n", "0"]).status.code(), Some(0));
    assert_eq!(dsketch(&["sample", s(&out), "-n", "1"]).status.code(), Some(1));
}

#[test]
fn merge_of_halves_matches_one_pass_build() {
    let dir = TempDir::new().unwrap();
    let text = rows(4000, 11);
    let lines: Vec<&str> = text.lines().collect();
    let whole = write_file(&dir, "all.csv", &text);
    let first = write_file(&dir, "a.csv", &(lines[..1500].join("\n") + "\n"));
    let second = write_file(&dir, "b.csv", &(lines[1500..].join("\n") + "\n"));
    let flags = ["-w", "0.3", "-K", "3", "-R", "512", "-H", "32", "--seed", "4"];
    let mut paths = Vec::new();
    for (name, input) in [("all", &whole), ("a", &first), ("b", &second)] {
        let out = dir.path().join(format!("{name}.dsk"));
        let mut args = vec!["build", s(input), "-o", s(&out)];
        args.extend(flags);
        ok(&dsketch(&args));
        paths.push(out);
    }
    let merged = dir.path().join("m.dsk");
    ok(&dsketch(&["merge", s(&paths[1]), s(&paths[2]), "-o", s(&merged)]));

    let (all, m) = (load(&paths[0]), load(&merged));
    assert_eq!(m.len(), all.len());
    assert_eq!(m.count_sketch().counters(), all.count_sketch().counters());
    let file_all = std::fs::read(&paths[0]).unwrap();
    let file_m = std::fs::read(&merged).unwrap();
    // everything up to and including the counters is identical
    let header = file_all.len() - 4 - 8 - all.heap().len() * 24;
    assert_eq!(file_m[..header], file_all[..header]);
    let rebuilt = load(&paths[1]).merge(&load(&paths[2])).unwrap();
    assert_eq!(file_m, rebuilt.to_bytes());
}

#[test]
fn merge_with_self_doubles() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", &rows(500, 2));
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "-R", "256"]));
    let merged = dir.path().join("m.dsk");
    ok(&dsketch(&["merge", s(&out), s(&out), "-o", s(&merged)]));
    let (a, m) = (load(&out), load(&merged));
    assert_eq!(m.len(), 2 * a.len());
    let doubled: Vec<i64> = a.count_sketch().counters().iter().map(|c| 2 * c).collect();
    assert_eq!(m.count_sketch().counters(), &doubled[..]);
}

#[test]
fn merge_mismatch_names_field() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", &rows(50, 2));
    let a = dir.path().join("a.dsk");
    let b = dir.path().join("b.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&a), "--seed", "1"]));
    ok(&dsketch(&["build", s(&input), "-o", s(&b), "--seed", "2"]));
    let res = dsketch(&["merge", s(&a), s(&b), "-o", s(&dir.path().join("m.dsk"))]);
    assert_ne!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cs seed"));
}

#[test]
fn corrupt_file_is_rejected() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "1,2\n");
    let out = dir.path().join("s.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "-R", "8"]));
    let mut bytes = std::fs::read(&out).unwrap();
    bytes[20] ^= 0x40;
    std::fs::write(&out, bytes).unwrap();
    let res = dsketch(&["info", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("checksum"));
}

#[test]
fn label_column_writes_one_sketch_per_label() {
    let dir = TempDir::new().unwrap();
    let input = write_file(&dir, "in.csv", "a,1,2\nb,3,4\na,1.5,2\nc.d,0,0\n");
    let out = dir.path().join("model.dsk");
    ok(&dsketch(&["build", s(&input), "-o", s(&out), "--label-column", "0"]));
    assert_eq!(load(&dir.path().join("model.a.dsk")).len(), 2);
    assert_eq!(load(&dir.path().join("model.b.dsk")).len(), 1);
    assert_eq!(load(&dir.path().join("model.c_d.dsk")).dim(), 2);
    assert!(!out.exists());
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn eval_tv_identity_sides_agree() {
    let out = ok(&dsketch(&["eval", "lemma1", "--seed", "3"]));
    assert!(out.starts_with("scheme,d,n,h,K,R,H,metric,value,std_err,seed"));
    let rows = csv_rows(&out);
    let pick = |m: &str| -> Vec<f64> {
        rows.iter().filter(|r| r[7] == m).map(|r| r[8].parse().unwrap()).collect()
    };
    let (lhs, rhs) = (pick("tv_lhs"), pick("tv_rhs"));
    assert!(lhs.len() >= 20 && lhs.len() == rhs.len());
    for (a, b) in lhs.iter().zip(&rhs) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn eval_convergence_decreases() {
    let out = ok(&dsketch(&["eval", "theorem2-convergence", "--quick"]));
    let imse: Vec<(f64, f64)> = csv_rows(&out)
        .into_iter()
        .filter(|r| r[7] == "imse")
        .map(|r| (r[8].parse().unwrap(), r[9].parse().unwrap()))
        .collect();
    assert!(imse.len() >= 2);
    for w in imse.windows(2) {
        assert!(w[1].0 < w[0].0 + w[0].1 + w[1].1, "{imse:?}");
    }
}

#[test]
fn eval_unknown_scenario_is_usage_error() {
    assert_eq!(dsketch(&["eval", "bogus"]).status.code(), Some(2));
    assert_eq!(dsketch(&[]).status.code(), Some(2));
}
