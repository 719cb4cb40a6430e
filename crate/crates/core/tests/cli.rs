use std::path::{Path, PathBuf};
use std::process::Command;

use cgm_refine::synthetic::{generate_csv, FixtureSpec};
use cgm_refine::window_file::load_window_file;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cgm-refine"));
    c.env("RUST_LOG", "warn");
    c
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bundled_fixture_matches_the_generator() {
    let on_disk = std::fs::read_to_string(data("synthetic_5x7.csv")).unwrap();
    assert!(
        on_disk == generate_csv(&FixtureSpec::default()),
        "regenerate with `cgm-refine synth`"
    );
}

#[test]
fn full_run_writes_every_artifact() {
    let out = tempfile::tempdir().unwrap();
    let status = cli()
        .args([
            "--config",
            data("synthetic.toml").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "all",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let files: Vec<PathBuf> = read_tree(out.path()).into_iter().map(|(p, _)| p).collect();
    for name in [
        "inventory.csv",
        "ingest_diagnostics.csv",
        "quality_report.csv",
        "imputation_report.csv",
        "missingness.csv",
        "correlation.csv",
        "split_manifest.json",
        "train.diaw",
        "val.diaw",
        "test.diaw",
    ] {
        assert!(files.contains(&PathBuf::from(name)), "missing {name}");
    }
    assert_eq!(files.iter().filter(|p| p.starts_with("series")).count(), 5);
    assert_eq!(files.iter().filter(|p| p.starts_with("labeled")).count(), 5);
    assert!(!files.iter().any(|p| p.to_string_lossy().ends_with(".partial")));

    let train = load_window_file(out.path().join("train.diaw")).unwrap();
    assert_eq!(
        (
            train.header.window_length,
            train.header.channels,
            train.header.label_set_size
        ),
        (25, 2, 5)
    );
    let per_class = train.labels.iter().filter(|l| **l == 0).count();
    assert!(per_class > 0);
    assert!((0..5).all(|c| train.labels.iter().filter(|l| **l == c).count() == per_class));

    let inspect = cli()
        .args(["inspect", out.path().join("train.diaw").to_str().unwrap()])
        .output()
        .unwrap();
    let text = String::from_utf8(inspect.stdout).unwrap();
    assert!(text.starts_with("version 1 channels 2 length 25"));
    assert!(text.contains(&format!("class 4: {per_class}")));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, workers) in dirs.iter().zip(["1", "3"]) {
        let status = cli()
            .env("CGM_REFINE_WORKERS", workers)
            .args([
                "--config",
                data("synthetic.toml").to_str().unwrap(),
                "--out",
                dir.path().to_str().unwrap(),
                "all",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(read_tree(dirs[0].path()), read_tree(dirs[1].path()));
}

#[test]
fn stages_stop_where_asked() {
    let out = tempfile::tempdir().unwrap();
    let status = cli()
        .args([
            "--config",
            data("synthetic.toml").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "clean",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("quality_report.csv").exists());
    assert!(!out.path().join("imputation_report.csv").exists());
    assert!(!out.path().join("train.diaw").exists());
}

#[test]
fn raw_mode_and_seed_flags() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, seed) in dirs.iter().zip(["7", "8"]) {
        let status = cli()
            .args([
                "--config",
                data("synthetic.toml").to_str().unwrap(),
                "--out",
                dir.path().to_str().unwrap(),
            ])
            .args(["--raw-mode", "--seed", seed, "windows"])
            .status()
            .unwrap();
        assert!(status.success());
        assert!(!dir.path().join("quality_report.csv").exists());
    }
    let manifest = |d: &tempfile::TempDir| std::fs::read_to_string(d.path().join("split_manifest.json")).unwrap();
    assert!(manifest(&dirs[0]).contains("\"seed\": 7"));
    assert_ne!(manifest(&dirs[0]), manifest(&dirs[1]));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\nbogus = true\n").unwrap();
    let out = cli().args(["--config", cfg.to_str().unwrap(), "all"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let out = cli().args(["all"]).current_dir(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no input files"));
}
