//! End-to-end checks of the command-line interface: file outputs, exit
//! codes, config-file equivalence, idempotence.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sobolev-pinn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn train_writes_record_checkpoint_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = run(&[
        "train",
        "--problem",
        "toy-sin-k1",
        "--loss",
        "toy-h1",
        "--epochs",
        "50",
        "--threshold",
        "1e-9",
        "--seed",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("000.json").is_file());
    assert!(out_dir.join("000.csv").is_file());
    assert!(out_dir.join("000.net.json").is_file());
}

#[test]
fn incompatible_variant_is_a_usage_error() {
    let out = run(&["train", "--problem", "heat", "--loss", "fp1", "--epochs", "5"]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("not compatible"), "{msg}");
}

#[test]
fn unknown_problem_lists_catalog() {
    let out = run(&["train", "--problem", "navier", "--loss", "hb0"]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("poisson-d{D}-k{K}"), "{msg}");
}

#[test]
fn config_file_and_flags_produce_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let flag_dir = dir.path().join("flags");
    let cfg_dir = dir.path().join("cfg");
    let flags = [
        "train",
        "--problem",
        "toy-sin-k2",
        "--loss",
        "toy-l2",
        "--epochs",
        "30",
        "--threshold",
        "1e-9",
        "--seed",
        "3",
    ];
    let out = run(&[&flags[..], &["--out", flag_dir.to_str().unwrap()]].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // write the echoed config and rerun from the file
    let record: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(flag_dir.join("003.json")).unwrap(),
    )
    .unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, record["config"].to_string()).unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        cfg_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let a = std::fs::read_to_string(flag_dir.join("003.csv")).unwrap();
    let b = std::fs::read_to_string(cfg_dir.join("003.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_writes_summaries_per_variant_and_respects_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("j1");
    let out4 = dir.path().join("j4");
    let base = [
        "sweep",
        "--problem",
        "toy-sin-k1",
        "--loss",
        "toy-l2,toy-h1",
        "--epochs",
        "20",
        "--threshold",
        "1e-9",
        "--seeds",
        "2",
    ];
    let a = run(&[&base[..], &["--jobs", "1", "--out", out1.to_str().unwrap()]].concat());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&[&base[..], &["--jobs", "4", "--out", out4.to_str().unwrap()]].concat());
    assert_eq!(code(&b), 0);

    for label in ["toy-sin-k1_toy-l2", "toy-sin-k1_toy-h1"] {
        let s1 = std::fs::read_to_string(out1.join(format!("{label}_summary.csv"))).unwrap();
        let s4 = std::fs::read_to_string(out4.join(format!("{label}_summary.csv"))).unwrap();
        assert!(s1.starts_with("seed,epochs_to_threshold,final_error,seconds\n"));
        // per-seed numeric content identical up to wall time (last column)
        let strip = |s: &str| {
            s.lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&s1), strip(&s4));
        assert!(out1.join(format!("{label}_hist.csv")).is_file());
    }
}

#[test]
fn sweep_with_zero_seeds_is_a_usage_error() {
    let out = run(&[
        "sweep",
        "--problem",
        "toy-sin-k1",
        "--loss",
        "toy-l2",
        "--seeds",
        "0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reference_writes_bitwise_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let f1 = dir.path().join("a.grid");
    let f2 = dir.path().join("b.grid");
    for f in [&f1, &f2] {
        let out = run(&[
            "reference",
            "--problem",
            "fp-f1",
            "--nx",
            "16",
            "--nv",
            "32",
            "--snapshots",
            "3",
            "--out",
            f.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let msg = String::from_utf8_lossy(&out.stdout);
        assert!(msg.contains("mass drift"), "{msg}");
    }
    assert_eq!(std::fs::read(&f1).unwrap(), std::fs::read(&f2).unwrap());
}

#[test]
fn reference_rejects_closed_form_problems() {
    let out = run(&["reference", "--problem", "heat", "--out", "/tmp/x.grid"]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("closed-form"), "{msg}");
    assert!(!Path::new("/tmp/x.grid").exists());
}

#[test]
fn report_on_empty_directory_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "report",
        "--in",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("problem,variant,"));
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn report_groups_by_problem_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    for (seed, loss) in [("0", "toy-l2"), ("1", "toy-l2"), ("0", "toy-h2")] {
        let out = run(&[
            "train",
            "--problem",
            "toy-sin-k1",
            "--loss",
            loss,
            "--epochs",
            "10",
            "--threshold",
            "1e-9",
            "--seed",
            seed,
            "--out",
            runs.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let out = run(&["report", "--in", runs.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    // seeds overwrite by index in a shared directory: 000 (overwritten), 001
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 2, "{text}");
    assert!(text.contains("toy-sin-k1"));
}

#[test]
fn help_lists_every_subcommand_flag() {
    for (sub, needles) in [
        ("train", vec!["--problem", "--loss", "--epochs", "--threshold", "--seed", "--config"]),
        ("sweep", vec!["--seeds", "--jobs", "--seed-base"]),
        ("reference", vec!["--nx", "--nv", "--snapshots", "--out"]),
        ("report", vec!["--in", "--format"]),
    ] {
        let out = run(&[sub, "--help"]);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8_lossy(&out.stdout);
        for needle in needles {
            assert!(text.contains(needle), "{sub} --help missing {needle}");
        }
    }
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "train",
            "--problem",
            "toy-sin-k1",
            "--loss",
            "toy-l2",
            "--epochs",
            "5",
            "--threshold",
            "1e-9",
        ])
        .env("SOBOLEV_PINN_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("000.json").is_file());
}
