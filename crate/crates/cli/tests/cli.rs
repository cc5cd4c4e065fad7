//! End-to-end tests against the compiled binary: exit codes, stderr
//! routing, and byte-parity between the stage chain and the full pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use floodrisk::ascii;
use floodrisk::grid::{GeoGrid, GridGeometry};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_floodrisk"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_code(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Valley scene matching the library pipeline fixtures: rows fall toward
/// the south edge, columns climb away from the central channel, with a
/// pond near the outlet and channel/flank ground truth.
fn write_scene(dir: &Path) -> PathBuf {
    let rows = 41;
    let cols = 41;
    let geom = GridGeometry::new(rows, cols, 30.0);
    let mid = cols as f64 / 2.0;
    let mut cells = Vec::with_capacity(geom.len());
    for r in 0..rows {
        for c in 0..cols {
            let down = (rows - 1 - r) as f64;
            let across = (c as f64 - mid).abs();
            cells.push(20.0 + down * 0.5 + across * 2.0);
        }
    }
    let dem = GeoGrid::new(geom, -9999.0, cells).unwrap();
    ascii::write(&dem, &dir.join("dem.asc")).unwrap();

    let class = |r: usize, c: usize, n: usize| ((r * 7 + c * 3) % n + 1) as f64;
    let landuse = GeoGrid::new(
        geom,
        -9999.0,
        (0..rows)
            .flat_map(|r| (0..cols).map(move |c| class(r, c, 5)))
            .collect(),
    )
    .unwrap();
    ascii::write(&landuse, &dir.join("landuse.asc")).unwrap();
    let hydrolith = GeoGrid::new(
        geom,
        -9999.0,
        (0..rows)
            .flat_map(|r| (0..cols).map(move |c| class(r, c, 3)))
            .collect(),
    )
    .unwrap();
    ascii::write(&hydrolith, &dir.join("hydrolith.asc")).unwrap();

    let mut water = GeoGrid::filled(geom, -9999.0, 0.0).unwrap();
    for r in rows - 12..rows - 3 {
        for c in 2..11 {
            water.set(r, c, 1.0);
        }
    }
    ascii::write(&water, &dir.join("water.asc")).unwrap();

    let mut flooded = GeoGrid::filled(geom, -9999.0, 0.0).unwrap();
    let mut dry = GeoGrid::filled(geom, -9999.0, 0.0).unwrap();
    for r in 0..rows {
        for c in 0..cols {
            if c.abs_diff(cols / 2) <= 2 {
                flooded.set(r, c, 1.0);
            } else if c.abs_diff(cols / 2) >= 8 {
                dry.set(r, c, 1.0);
            }
        }
    }
    ascii::write(&flooded, &dir.join("flooded.asc")).unwrap();
    ascii::write(&dry, &dir.join("dry.asc")).unwrap();

    let config = dir.join("config.toml");
    fs::write(
        &config,
        "\
[inputs]
dem = \"dem.asc\"
water_mask = \"water.asc\"
landuse = \"landuse.asc\"
hydrolith = \"hydrolith.asc\"
flooded_mask = \"flooded.asc\"
dry_mask = \"dry.asc\"

[routing]
stream_threshold_cells = 20

[delineation]
method = \"d8\"
area_threshold_ha = 5.0
",
    )
    .unwrap();
    config
}

#[test]
fn help_and_version_exit_zero() {
    run_ok(&["--help"]);
    run_ok(&["--version"]);
    run_ok(&["pipeline", "--help"]);
}

#[test]
fn missing_config_is_a_usage_error() {
    let (code, stderr) = run_code(&["pipeline"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--config"), "stderr: {stderr}");
}

#[test]
fn unknown_subcommand_exits_one() {
    let (code, _) = run_code(&["frobnicate"]);
    assert_eq!(code, 1);
}

#[test]
fn broken_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, "[inputs]\ndem = \"dem.asc\"\nmystery = 3\n").unwrap();
    let (code, stderr) = run_code(&["pipeline", "--config", config.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
}

#[test]
fn malformed_set_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    let (code, stderr) = run_code(&[
        "weights",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "no-equals-sign",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("KEY=VALUE"), "stderr: {stderr}");
}

#[test]
fn missing_upstream_artifact_exits_one_and_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    let stage = dir.path().join("stage");
    let (code, stderr) = run_code(&[
        "flowdir",
        "--config",
        config.to_str().unwrap(),
        "--stage-output",
        stage.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(
        stderr.contains("run the condition stage first"),
        "stderr: {stderr}"
    );
}

#[test]
fn unreachable_stream_threshold_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    let (code, stderr) = run_code(&[
        "pipeline",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "routing.stream_threshold_cells=1000000",
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
}

#[test]
fn seedless_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    run_ok(&[
        "weights",
        "--config",
        config.to_str().unwrap(),
        "--seedless",
    ]);
    assert!(dir.path().join("out").join("weights.csv").exists());
}

#[test]
fn set_override_reaches_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    let out = run_ok(&[
        "weights",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "judgment.matrix=[[1,1,1,1,1],[1,1,1,1,1],[1,1,1,1,1],[1,1,1,1,1],[1,1,1,1,1]]",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("0.2000").count(), 5, "stdout: {stdout}");
    let csv = fs::read_to_string(dir.path().join("out").join("weights.csv")).unwrap();
    assert!(csv.contains("slope,0.2"), "csv: {csv}");
}

#[test]
fn stage_chain_reproduces_the_pipeline_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    let config = config.to_str().unwrap();

    let chained = dir.path().join("chained");
    for stage in [
        "condition",
        "flowdir",
        "accumulate",
        "streams",
        "delineate",
        "rate",
        "weights",
        "fri",
        "classify",
        "validate",
    ] {
        run_ok(&[
            stage,
            "--config",
            config,
            "--stage-output",
            chained.to_str().unwrap(),
        ]);
    }

    let full = dir.path().join("full");
    run_ok(&[
        "pipeline",
        "--config",
        config,
        "--stage-output",
        full.to_str().unwrap(),
    ]);

    let mut names: Vec<String> = fs::read_dir(&full)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 21);
    let mut chained_names: Vec<String> = fs::read_dir(&chained)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    chained_names.sort();
    assert_eq!(names, chained_names);
    for name in &names {
        let a = fs::read(chained.join(name)).unwrap();
        let b = fs::read(full.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between the stage chain and pipeline");
    }
}

#[test]
fn matrix_writes_a_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scene(dir.path());
    let out_dir = dir.path().join("matrix");
    run_ok(&[
        "matrix",
        "--config",
        config.to_str().unwrap(),
        "--stage-output",
        out_dir.to_str().unwrap(),
        "--set",
        "matrix.thresholds_ha=[5.0,20.0]",
    ]);
    let csv = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("model,zone_method,statistic"));
    assert!(lines[0].ends_with(",status"));
    // 1 method x 3 statistics x 2 thresholds, two validation sets each,
    // plus the pixel baseline pair
    assert_eq!(lines.len(), 1 + 6 * 2 + 2);
    assert!(csv.contains("pixel-ahp"));
}
