mod common;

use std::path::Path;
use std::process::{Command, Output};

use bdm::manifest::read_manifest;
use common::{fixture, snapshot, write_dataset};

fn bdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdm"))
        .args(args)
        .output()
        .expect("bdm binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_through_the_binary_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = |rel: &str| dir.path().join(rel);
    let spec = bdm::synth::BlockSpec::new(32, 24, 4, vec![0.6, 0.3, 0.1]).with_ignore(3, 10);
    write_dataset(&d("src"), "s", 8, &spec, 1);
    write_dataset(&d("tgt"), "t", 8, &spec, 2);

    for (data, out) in [("src", "stats_s.json"), ("tgt", "stats_t.json")] {
        let o = bdm(&[
            "stats",
            "--dataset",
            s(&d(data)),
            "--classes",
            "3",
            "--out",
            s(&d(out)),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = bdm(&[
        "prior",
        "--dataset",
        s(&d("src")),
        "--classes",
        "3",
        "--out",
        s(&d("prior.json")),
    ]);
    assert!(o.status.success());
    for (data, domain, stats, out) in [
        ("src", "source", "stats_s.json", "bank_s"),
        ("tgt", "target", "stats_t.json", "bank_t"),
    ] {
        let o = bdm(&[
            "build-bank",
            "--dataset",
            s(&d(data)),
            "--domain",
            domain,
            "--classes",
            "3",
            "--stats",
            s(&d(stats)),
            "--out",
            s(&d(out)),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }

    let config = d("run.toml");
    std::fs::write(
        &config,
        format!(
            "[mix]\nnum_classes = 3\nseed = 99\n[paths]\nsource_dir = {:?}\ntarget_dir = {:?}\nsource_bank = {:?}\ntarget_bank = {:?}\nstats = {:?}\nprior = {:?}\n",
            s(&d("src")), s(&d("tgt")), s(&d("bank_s")), s(&d("bank_t")),
            s(&d("stats_s.json")), s(&d("prior.json")),
        ),
    )
    .unwrap();
    let run = |out: &str, workers: &str| {
        let o = bdm(&[
            "mix",
            "--config",
            s(&config),
            "--out",
            s(&d(out)),
            "--count",
            "12",
            "--workers",
            workers,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        snapshot(&d(out))
    };
    let a = run("run_a", "1");
    let b = run("run_b", "4");
    assert_eq!(a.len(), 12 * 2 * 2 + 1);
    assert_eq!(a, b);

    let m = read_manifest(&d("run_a/manifest.jsonl")).unwrap().unwrap();
    assert_eq!(m.entries.len(), 24);
    assert_eq!(m.header.config.seed, 99);

    let o = bdm(&[
        "report",
        "--manifest",
        s(&d("run_a/manifest.jsonl")),
        "--stats",
        s(&d("stats_s.json")),
        "--composites",
        "2",
        "--out",
        s(&d("report")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d("report/supervision.csv").exists());
    assert!(d("report/supervision.png").exists());
    assert_eq!(
        std::fs::read_dir(d("report/composites")).unwrap().count(),
        2
    );
}

#[test]
fn print_config_echoes_resolved_defaults() {
    let o = bdm(&["mix", "--print-config", "--seed", "5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for line in [
        "gamma = 0.2",
        "alpha = 2.0",
        "grid_cols = 4",
        "grid_rows = 3",
        "conf_groups = 3",
        "num_cut_boxes = 4",
        "seed = 5",
    ] {
        assert!(text.contains(line), "{line} missing:\n{text}");
    }
    assert!(text.contains("0.1") && text.contains("0.3") && text.contains("0.6"));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");

    std::fs::write(&cfg, "[mix]\ngamma = 1.5\n").unwrap();
    assert_eq!(bdm(&["mix", "--config", s(&cfg)]).status.code(), Some(2));

    std::fs::write(&cfg, "[mix]\ngroup_probs = [0.2, 0.2, 0.2]\n").unwrap();
    assert_eq!(bdm(&["mix", "--config", s(&cfg)]).status.code(), Some(2));

    std::fs::write(&cfg, "[mix]\nnum_cut_boxes = 13\n").unwrap();
    assert_eq!(bdm(&["mix", "--config", s(&cfg)]).status.code(), Some(2));

    std::fs::write(&cfg, "[mix]\nunknown = 1\n").unwrap();
    assert_eq!(bdm(&["mix", "--config", s(&cfg)]).status.code(), Some(2));

    let missing = dir.path().join("nothing");
    let o = bdm(&[
        "stats",
        "--dataset",
        s(&missing),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_is_validated_before_reading_data() {
    let dir = tempfile::tempdir().unwrap();
    let nope = s(&dir.path().join("nope")).to_string();
    let out = s(&dir.path().join("o")).to_string();
    let mut args = vec!["mix"];
    for flag in [
        "--source-dir",
        "--target-dir",
        "--source-bank",
        "--target-bank",
    ] {
        args.extend([flag, nope.as_str()]);
    }
    args.extend(["--out", out.as_str()]);
    assert_eq!(bdm(&args).status.code(), Some(3));
    // a required path left unset is a config problem
    assert_eq!(bdm(&["mix", "--source-dir", &nope]).status.code(), Some(2));
    // an invalid config wins over unreadable data
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[mix]\ngamma = -0.1\n").unwrap();
    let o = bdm(&[
        "mix",
        "--config",
        s(&cfg),
        "--source-dir",
        s(&dir.path().join("nope")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn empty_manifest_reports_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    std::fs::write(&m, "").unwrap();
    let o = bdm(&[
        "report",
        "--manifest",
        s(&m),
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
    let csv = std::fs::read_to_string(dir.path().join("r/supervision.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn library_fixture_runs_through_the_binary() {
    let f = fixture(vec![0.5, 0.5], 6);
    let cfg = f.path("run.toml");
    std::fs::write(&cfg, f.run_config("out").to_toml_string().unwrap()).unwrap();
    let o = bdm(&["mix", "--config", s(&cfg), "--count", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(f.path("out/manifest.jsonl").exists());
}
