use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/mini_city")
}

fn bikeability(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bikeability"));
    c.args(args).env_remove("BIKEABILITY_OUTPUT_DIR");
    c
}

fn run(c: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = c.output().unwrap();
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

/// Copy of the fixture in a temp dir, so tests can edit the inputs.
fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for e in std::fs::read_dir(fixture()).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), dir.path().join(e.file_name())).unwrap();
    }
    dir
}

#[test]
fn run_writes_outputs_and_rerun_is_cached() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("config.json");
    let (code, stdout, stderr) = run(&mut bikeability(&["run", "-c", config.to_str().unwrap(), "-o", out.path().to_str().unwrap()]));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("export     computed"), "{stdout}");
    for f in ["bikeability.geojson", "perception_metrics.csv", "feature_ttests.csv", "variant_comparison.csv", "summary_statistics.csv"] {
        assert!(out.path().join(f).is_file(), "{f} missing");
    }
    let (code, stdout, _) = run(&mut bikeability(&["run", "-c", config.to_str().unwrap(), "-o", out.path().to_str().unwrap()]));
    assert_eq!(code, 0);
    assert_eq!(stdout.matches(" cached").count(), 9, "{stdout}");
    assert!(!stdout.contains("computed"));
}

#[test]
fn output_dir_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("config.json");
    let (code, _, stderr) = run(bikeability(&["sample", "-c", config.to_str().unwrap()])
        .env("BIKEABILITY_OUTPUT_DIR", out.path()));
    assert_eq!(code, 0, "{stderr}");
    assert!(out.path().join("cache/sample.json").is_file());

    // the flag beats the environment
    let flag = tempfile::tempdir().unwrap();
    let (code, _, _) = run(bikeability(&["sample", "-c", config.to_str().unwrap(), "-o", flag.path().to_str().unwrap()])
        .env("BIKEABILITY_OUTPUT_DIR", out.path()));
    assert_eq!(code, 0);
    assert!(flag.path().join("cache/sample.json").is_file());
}

#[test]
fn set_overrides_config_values() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("config.json");
    let args = ["sample", "-c", config.to_str().unwrap(), "-o", out.path().to_str().unwrap(), "--set", "sample_size=5"];
    let (code, stdout, stderr) = run(&mut bikeability(&args));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("mini: 5 points"), "{stdout}");

    let (code, _, stderr) = run(&mut bikeability(&["sample", "-c", config.to_str().unwrap(), "--set", "no_such_key=1"]));
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn stage_subcommands_stop_where_asked() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("config.json");
    let base = ["-c", config.to_str().unwrap(), "-o", out.path().to_str().unwrap()];
    for (cmd, last) in [("extract", "scale"), ("perception", "perception"), ("compose", "compose"), ("compare", "compare")] {
        let mut args = vec![cmd];
        args.extend(base);
        let (code, stdout, stderr) = run(&mut bikeability(&args));
        assert_eq!(code, 0, "{cmd}: {stderr}");
        let last_line = stdout.lines().rfind(|l| l.ends_with("computed") || l.ends_with("cached")).unwrap();
        assert!(last_line.starts_with(last), "{cmd}: {stdout}");
    }
    assert!(!out.path().join("bikeability.geojson").exists());
}

#[test]
fn missing_dataset_exits_with_config_error() {
    let dir = fixture_copy();
    std::fs::remove_file(dir.path().join("dem.asc")).unwrap();
    let config = dir.path().join("config.json");
    let (code, _, stderr) = run(&mut bikeability(&["run", "-c", config.to_str().unwrap()]));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("dem"), "{stderr}");
    assert!(!dir.path().join("output").exists());

    let (code, _, _) = run(&mut bikeability(&["run", "-c", "/nonexistent/config.json"]));
    assert_eq!(code, 2);
}

#[test]
fn malformed_features_exit_with_data_error() {
    let dir = fixture_copy();
    let path = dir.path().join("features.jsonl");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"image_id\": \"broken\", \"lon\": \n");
    std::fs::write(&path, text).unwrap();
    let config = dir.path().join("config.json");
    let (code, _, stderr) = run(&mut bikeability(&["run", "-c", config.to_str().unwrap()]));
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("features.jsonl"), "{stderr}");
}

#[test]
fn singular_regression_exits_with_compute_error() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("config.json");
    let args = ["run", "-c", config.to_str().unwrap(), "-o", out.path().to_str().unwrap(), "--set", "regressor.kind=ridge", "--set", "regressor.lambda=0"];
    let (code, _, stderr) = run(&mut bikeability(&args));
    assert_eq!(code, 4, "{stderr}");
    assert!(stderr.contains("perception"), "{stderr}");
}
