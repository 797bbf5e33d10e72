use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynsample"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples/configs")
        .join(name)
}

fn dynsample(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_selection_ratio_exits_two_naming_the_field() {
    let out = dynsample(&[
        "run",
        "-c",
        path(&config("ws.toml")),
        "--set",
        "sampler.selection_ratio=1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("sampler.selection_ratio"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let out = dynsample(&[
        "validate-config",
        path(&config("ws.toml")),
        "--set",
        "sampler.ratio=0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ratio"));
    let out = dynsample(&["run", "-c", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_shipped_config_validates() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut paths: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| p.to_str().unwrap().to_owned())
        .collect();
    paths.sort();
    assert!(paths.len() >= 5);
    let mut args = vec!["validate-config".to_string()];
    args.extend(paths);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = dynsample(&[
            "run",
            "-c",
            path(&config("quick.toml")),
            "--seed",
            "7",
            "--out",
            path(dir),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert_eq!(
            stdout.lines().filter(|l| l.starts_with("iter ")).count(),
            12
        );
    }
    for file in ["metrics.csv", "plan.log", "noise.csv", "config.toml"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    assert!(a.join("checkpoint.json").exists());
    assert!(a.join("checkpoint-0004.json").exists());
}

#[test]
fn resume_after_interrupt_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (whole, split) = (tmp.path().join("whole"), tmp.path().join("split"));
    let cfg = config("quick.toml");
    assert!(dynsample(&["run", "-c", path(&cfg), "--out", path(&whole)])
        .status
        .success());
    let out = dynsample(&[
        "run",
        "-c",
        path(&cfg),
        "--out",
        path(&split),
        "--stop-after",
        "5",
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(split.join("metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );

    let out = dynsample(&[
        "resume",
        "--checkpoint",
        path(&split.join("checkpoint.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["metrics.csv", "plan.log"] {
        assert_eq!(
            fs::read(whole.join(file)).unwrap(),
            fs::read(split.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ck = tmp.path().join("checkpoint.json");
    fs::write(&ck, "{\"format_version\": \"2.0\"}").unwrap();
    let out = dynsample(&["resume", "--checkpoint", path(&ck)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("2.0"));
    fs::write(&ck, "not json").unwrap();
    assert_eq!(
        dynsample(&["resume", "--checkpoint", path(&ck)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn output_root_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .env("DYNSAMPLE_OUT", tmp.path())
        .args([
            "run",
            "-c",
            path(&config("quick.toml")),
            "--set",
            "experiment.total_iterations=3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("quick/metrics.csv").exists());
}

#[test]
fn dump_dataset_writes_one_sequence_per_line() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("data.txt");
    let out = dynsample(&[
        "dump-dataset",
        "-c",
        path(&config("noise_ws.toml")),
        "--out",
        path(&file),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&file).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1000);
    let mut noisy = 0;
    for line in &lines {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3);
        let tokens: Vec<usize> = cols[0].split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(tokens.len(), 12);
        assert!(tokens.iter().all(|&t| t < 16));
        noisy += cols[2].parse::<u32>().unwrap();
    }
    assert_eq!(noisy, 200);
}

#[test]
fn compare_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let out = dynsample(&[
        "compare",
        "-c",
        path(&config("ws.toml")),
        "-c",
        path(&config("rm.toml")),
        "--set",
        "experiment.total_iterations=20",
        "--set",
        "experiment.corpus_size=300",
        "--out",
        path(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 3);
    assert!(json["threshold"].as_f64().unwrap() > 0.0);
}
