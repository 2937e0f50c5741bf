//! Drives the built binary over the bundled scenarios and the documented
//! failure modes. Every bundled run must finish inside a minute.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_viscowave"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

struct Run {
    stdout: String,
    dir: tempfile::TempDir,
}

fn run_bundled(name: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = bin()
        .arg("run")
        .arg(scenario_path(name))
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    let elapsed = started.elapsed();
    assert!(
        out.status.success(),
        "{name} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        elapsed < Duration::from_secs(60),
        "{name} took {elapsed:?}, over the one-minute budget"
    );
    let run = Run {
        stdout: String::from_utf8(out.stdout).unwrap(),
        dir,
    };
    expect_files(&run, &["scenario.resolved.toml"]);
    run
}

fn expect_files(run: &Run, files: &[&str]) {
    for file in files {
        let path = run.dir.path().join(file);
        assert!(path.exists(), "missing output file {}", path.display());
    }
}

/// First whitespace- or comma-delimited token after `marker`, parsed as f64.
fn number_after(text: &str, marker: &str) -> f64 {
    let at = text
        .find(marker)
        .unwrap_or_else(|| panic!("marker {marker:?} not in {text:?}"));
    text[at + marker.len()..]
        .split([' ', ',', '\n'])
        .next()
        .unwrap()
        .parse()
        .unwrap_or_else(|_| panic!("no number after {marker:?} in {text:?}"))
}

#[test]
fn decay_scenarios_reproduce_frozen_rates() {
    let line = run_bundled("1d-default-decay");
    expect_files(&line, &["trace.tsv", "fit.txt", "energy.svg"]);
    let gamma = number_after(&line.stdout, "gamma = ");
    assert!((gamma - 0.504).abs() < 0.01, "1d gamma moved: {gamma}");

    let square = run_bundled("2d-decay");
    expect_files(&square, &["trace.tsv", "fit.txt", "energy.svg"]);
    let gamma = number_after(&square.stdout, "gamma = ");
    assert!((gamma - 0.522).abs() < 0.01, "2d gamma moved: {gamma}");
}

#[test]
fn conservation_scenario_keeps_energy_flat() {
    let run = run_bundled("1d-conservation");
    expect_files(&run, &["trace.tsv", "energy.svg"]);
    let initial = number_after(&run.stdout, "E(0) = ");
    let last = number_after(&run.stdout, "E(T) = ");
    assert!(
        ((last - initial) / initial).abs() < 1e-6,
        "energy drifted from {initial} to {last}"
    );
}

#[test]
fn gcc_scenarios_split_on_geometry() {
    let collar = run_bundled("square-collar-gcc");
    expect_files(&collar, &["gcc.txt", "rays.svg"]);
    assert!(collar.stdout.contains("satisfied = true"), "{}", collar.stdout);
    let t0 = number_after(&collar.stdout, "T0 = ");
    assert!(t0 > 1.0 && t0 < 2.0, "collar control time {t0}");

    let gliding = run_bundled("square-gliding-ray");
    expect_files(&gliding, &["gcc.txt", "rays.svg"]);
    assert!(gliding.stdout.contains("satisfied = false"), "{}", gliding.stdout);
}

#[test]
fn hyperbolic_geodesics_stay_on_the_unit_circle() {
    let run = run_bundled("hyperbolic-geodesics");
    expect_files(&run, &["ray_00.tsv", "ray_01.tsv", "paths.svg"]);
    let deviation = number_after(&run.stdout, "max unit-circle deviation = ");
    assert!(deviation <= 1e-6, "semicircle deviation {deviation}");
}

#[test]
fn hessian_certificate_confirms_its_bound() {
    let run = run_bundled("hessian-certificate");
    expect_files(&run, &["hessian.txt"]);
    assert!(run.stdout.contains(" confirmed"), "{}", run.stdout);
    let text = fs::read_to_string(run.dir.path().join("hessian.txt")).unwrap();
    let bound = number_after(&text, "escape_time_bound = ");
    let exit = number_after(&text, "escape_max_exit_time = ");
    assert!(exit <= bound, "rays outstayed the bound: {exit} > {bound}");
}

#[test]
fn observability_prefers_the_full_collar() {
    let collar = run_bundled("observability-collar");
    expect_files(&collar, &["observability.tsv", "observability.svg"]);
    let edge = run_bundled("observability-one-edge");
    let c_collar = number_after(&collar.stdout, "constant = ");
    let c_edge = number_after(&edge.stdout, "constant = ");
    assert!(
        c_collar < c_edge,
        "collar constant {c_collar} should beat one edge {c_edge}"
    );
}

fn random_simulate(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(
        &path,
        r#"
            name = "tiny"
            experiment = "simulate"
            seed = 3
            [grid]
            lengths = [1.0]
            cells = [32]
            [coefficients]
            preset = "constant"
            [initial]
            kind = "random-seeded"
            [integrator]
            dt = 1e-2
            t_end = 0.5
        "#,
    )
    .unwrap();
    path
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = random_simulate(dir.path());
    let run = |args: &[&str], out: &str| {
        let out_dir = dir.path().join(out);
        let status = bin()
            .arg("run")
            .arg(&scenario)
            .args(args)
            .arg("--output-dir")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(status.status.success());
        fs::read(out_dir.join("trace.tsv")).unwrap()
    };
    let first = run(&[], "a");
    let second = run(&[], "b");
    assert_eq!(first, second, "identical scenario and seed must match bytewise");
    let reseeded = run(&["--seed", "9"], "c");
    assert_ne!(first, reseeded, "a new seed must change the draw");
}

#[test]
fn validate_prints_a_fixed_point() {
    let first = bin()
        .arg("validate")
        .arg(scenario_path("1d-default-decay"))
        .output()
        .unwrap();
    assert!(first.status.success());
    let dir = tempfile::tempdir().unwrap();
    let canonical = dir.path().join("canonical.toml");
    fs::write(&canonical, &first.stdout).unwrap();
    let second = bin().arg("validate").arg(&canonical).output().unwrap();
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("modes_v = [2]"), "defaults not in canonical form:\n{text}");
}

fn stderr_of(output: Output) -> String {
    assert!(!output.status.success(), "expected a failure");
    String::from_utf8(output.stderr).unwrap()
}

#[test]
fn misconfigured_scenarios_fail_with_cited_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    };
    let base = r#"
        name = "bad"
        experiment = "decay-fit"
        [grid]
        lengths = [1.0]
        cells = [32]
        [initial]
        kind = "standing-wave"
        [integrator]
        dt = 1e-2
        t_end = 1.0
    "#;

    let zero = write(
        "zero.toml",
        &format!("{base}\n[omega]\nkind = \"collar\"\nwidth = 0.1\n[coefficients]\npreset = \"constant\"\nstrength = 0.0\n"),
    );
    let err = stderr_of(bin().arg("validate").arg(&zero).output().unwrap());
    assert!(err.contains("damping must be strictly positive"), "{err}");

    let empty = write(
        "empty.toml",
        &format!("{base}\n[coefficients]\npreset = \"constant\"\n"),
    );
    let err = stderr_of(bin().arg("validate").arg(&empty).output().unwrap());
    assert!(err.contains("damping region is empty"), "{err}");

    let missing = write("missing.toml", "name = \"none\"\nexperiment = \"decay-fit\"\n");
    let err = stderr_of(bin().arg("validate").arg(&missing).output().unwrap());
    assert!(err.contains("needs a [grid] section"), "{err}");
}

#[test]
fn strict_mode_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("odd.toml");
    fs::write(
        &path,
        r#"
            name = "odd"
            experiment = "geodesic-trace"
            mystery = 3
            [geodesic]
            metric = "euclidean"
            dt = 1e-2
            t_max = 0.1
            [[geodesic.launches]]
            x = [0.0, 0.0]
            v = [1.0, 0.0]
        "#,
    )
    .unwrap();
    let loose = bin().arg("validate").arg(&path).output().unwrap();
    assert!(loose.status.success());
    assert!(String::from_utf8(loose.stderr).unwrap().contains("warning: unknown key mystery"));
    let strict = bin().arg("validate").arg(&path).arg("--strict").output().unwrap();
    assert!(!strict.status.success());
    assert!(String::from_utf8(strict.stderr).unwrap().contains("unknown keys: mystery"));
}

#[test]
fn list_presets_names_the_vocabulary() {
    let out = bin().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for word in [
        "constant",
        "diag-linear",
        "hyperbolic-halfplane",
        "standing-wave",
        "random-seeded",
        "collar",
        "decay-fit",
        "hessian-cert",
    ] {
        assert!(text.contains(word), "list-presets misses {word}");
    }
}
