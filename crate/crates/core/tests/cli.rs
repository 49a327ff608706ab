use std::path::Path;
use std::process::{Command, Output};

fn rebins(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rebins"))
        .args(args)
        .current_dir(dir)
        .env_remove("REBINS_WORKERS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_on_k2_keeps_one_ball_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--topology",
        "complete",
        "--n",
        "2",
        "--m",
        "2",
        "--strategy",
        "fifo",
        "--placement",
        "spread",
        "--rounds",
        "5",
        "--seed",
        "1",
        "--out",
        "out",
    ];
    let out = rebins(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let err = stderr(&out);
    assert!(
        err.starts_with(&format!("rebins {}", env!("CARGO_PKG_VERSION"))),
        "{err}"
    );
    assert!(
        err.contains("topology = complete") && err.contains("seed = 1"),
        "{err}"
    );

    let csv = read(dir.path().join("out/samples.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("process,round,max_load,empty_fraction,legitimate,faulty")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(
        rows.iter().all(|r| r.split(',').nth(2) == Some("1")),
        "{csv}"
    );
    assert_eq!(
        read(dir.path().join("out/samples.jsonl")).lines().count(),
        6
    );
    let results = read(dir.path().join("out/results.csv"));
    assert_eq!(results.lines().count(), 2);

    // identical command, identical files
    let again = tempfile::tempdir().unwrap();
    assert_eq!(code(&rebins(again.path(), &args)), 0);
    for f in ["samples.csv", "samples.jsonl", "results.csv"] {
        assert_eq!(
            read(dir.path().join("out").join(f)),
            read(again.path().join("out").join(f)),
            "{f}"
        );
    }
}

#[test]
fn zero_rounds_gives_a_single_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = rebins(
        dir.path(),
        &[
            "simulate", "--n", "8", "--rounds", "0", "--seed", "3", "--trace",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        read(dir.path().join("rebins-out/samples.csv"))
            .lines()
            .count(),
        2
    );
}

#[test]
fn invalid_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--n", "4", "--strategy", "sideways"][..],
        &["simulate", "--n", "1"],
        &["simulate", "--n", "4", "--m", "5", "--placement", "spread"],
        &["simulate", "--n", "4", "--alpha", "-1"],
        &["simulate", "--n", "4", "--faults", "sometimes"],
        &["simulate", "--n", "4", "--stop-when-covered"],
        &["bogus"],
        &["report", "missing.csv"],
        &["sweep", "missing.toml"],
        &["sweep", "--preset", "nope"],
    ] {
        let out = rebins(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).trim().is_empty());
    }
}

#[test]
fn empty_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.toml"), "# nothing\n").unwrap();
    let out = rebins(dir.path(), &["sweep", "empty.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no experiments defined"));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[a]\nn = 8\n\n[b]\nn = 8\nplacement = \"everywhere\"\n",
    )
    .unwrap();
    let out = rebins(dir.path(), &["sweep", "bad.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn runtime_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // odd n * d has no regular graph: a usage error
    let out = rebins(
        dir.path(),
        &["simulate", "--topology", "regular:3", "--n", "5"],
    );
    assert_eq!(code(&out), 2);
    // the record file cannot be created once the simulation has run
    std::fs::create_dir_all(dir.path().join("out/samples.jsonl")).unwrap();
    let out = rebins(
        dir.path(),
        &["simulate", "--n", "4", "--rounds", "2", "--out", "out"],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

const SWEEP: &str = r#"
[small]
n = [16, 32]
rounds = "4n"
placement = "point:0"
repetitions = 4
seed = 5

[walk]
process = "single_ball"
n = 8
repetitions = 3
"#;

#[test]
fn sweep_output_is_independent_of_worker_count() {
    let outputs: Vec<(String, String)> = ["1", "8"]
        .iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            std::fs::write(dir.path().join("cfg.toml"), SWEEP).unwrap();
            let out = rebins(
                dir.path(),
                &["sweep", "cfg.toml", "--workers", w, "--out", "o"],
            );
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            (
                read(dir.path().join("o/results.csv")),
                read(dir.path().join("o/small.json")),
            )
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    // one row per (cell, repetition) plus the header
    assert_eq!(outputs[0].0.lines().count(), 1 + 2 * 4 + 3);
}

#[test]
fn sweep_resumes_by_experiment_id() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), SWEEP).unwrap();
    assert_eq!(
        code(&rebins(
            dir.path(),
            &["sweep", "cfg.toml", "--workers", "2"]
        )),
        0
    );
    let first = read(dir.path().join("rebins-out/results.csv"));
    let out = rebins(dir.path(), &["sweep", "cfg.toml", "--workers", "2"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("skipping small"));
    assert_eq!(read(dir.path().join("rebins-out/results.csv")), first);
    assert_eq!(
        code(&rebins(
            dir.path(),
            &["sweep", "cfg.toml", "--fresh", "--records"]
        )),
        0
    );
    assert_eq!(read(dir.path().join("rebins-out/results.csv")), first);
    assert!(dir
        .path()
        .join("rebins-out/small/n16-m16-rep0.csv")
        .exists());

    std::fs::write(dir.path().join("rebins-out/results.csv"), "a,b\n").unwrap();
    assert_eq!(code(&rebins(dir.path(), &["sweep", "cfg.toml"])), 2);
}

#[test]
fn preset_sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = rebins(
        dir.path(),
        &["sweep", "--preset", "invariants", "--workers", "1"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read(dir.path().join("rebins-out/results.csv"))
        .lines()
        .count()
        - 1;
    assert_eq!(rows, 3 * 3);
}

#[test]
fn report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let header = "experiment_id,seed,n,m,topology,strategy,alpha,convergence_time,convergence_censored,stability_horizon,stability_censored,parallel_cover_time,cover_censored,min_progress,max_load_overall,mean_empty_fraction\n";
    std::fs::write(dir.path().join("empty.csv"), header).unwrap();
    let out = rebins(dir.path(), &["report", "empty.csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "no runs\n");

    let mut text = header.to_string();
    for n in [128, 256, 512] {
        for seed in 0..10 {
            text.push_str(&format!(
                "lin,{seed},{n},{n},complete,fifo,4,{},false,{},true,,,,5,0.3\n",
                7 * n,
                n * n
            ));
        }
    }
    std::fs::write(dir.path().join("lin.csv"), text).unwrap();
    let out = rebins(dir.path(), &["report", "lin.csv"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("n^1.000"), "{stdout}");
    assert!(stdout.contains("1.000 [0.722, 1.000]"), "{stdout}");

    std::fs::write(dir.path().join("bad.csv"), "id,seed\n").unwrap();
    assert_eq!(code(&rebins(dir.path(), &["report", "bad.csv"])), 2);
}

#[test]
fn cover_and_presets_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = rebins(
        dir.path(),
        &["cover", "--n", "16", "--runs", "200", "--seed", "2"],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("coupon collector mean=49.77"));

    let out = rebins(dir.path(), &["presets"]);
    assert_eq!(code(&out), 0);
    let listing = String::from_utf8_lossy(&out.stdout).into_owned();
    for name in [
        "coupon_collector",
        "stability",
        "fault_recovery",
        "open_ring",
    ] {
        assert!(listing.contains(name));
    }
    let out = rebins(dir.path(), &["presets", "stability"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[stability]"));

    let out = rebins(
        dir.path(),
        &["baseline", "memoryless", "--n", "10", "--rounds", "3"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(read(dir.path().join("rebins-out/samples.csv"))
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("memoryless,0,"));
}
