use std::process::Command;

use kfree_cli::{parse_config, CliError, LambdaRow, Report, Task, WitnessCsvRow, EXIT_CONFIG};

fn kfree(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kfree"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn argv(s: &str) -> Vec<String> {
    std::iter::once("kfree")
        .chain(s.split_whitespace())
        .map(String::from)
        .collect()
}

#[test]
fn parses_a_correlation_run() {
    let cfg = parse_config(argv("corr --q 5 --kfree 2 --d 1..24 --x 1e7")).unwrap();
    match cfg.task {
        Task::Corr { model, d, x, .. } => {
            assert_eq!(model.info.q, 5);
            assert_eq!(d, (1..=24).collect::<Vec<_>>());
            assert_eq!(x, Some(10_000_000));
        }
        other => panic!("unexpected task {other:?}"),
    }
}

#[test]
fn parses_a_lambda_sweep() {
    let cfg = parse_config(argv("lambda --q 5 --kfree 3 --H 16..4096 --format json")).unwrap();
    match cfg.task {
        Task::Lambda { h, .. } => assert_eq!((h[0], *h.last().unwrap(), h.len()), (16, 4096, 4081)),
        other => panic!("unexpected task {other:?}"),
    }
    let cfg = parse_config(argv("lambda --q 5 --H 16..4096x2")).unwrap();
    match cfg.task {
        Task::Lambda { h, .. } => assert_eq!(h, vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096]),
        other => panic!("unexpected task {other:?}"),
    }
}

#[test]
fn rejects_bad_configs() {
    for (args, needle) in [
        ("corr --q 6 --d 1..3", "6 is not an admissible conductor"),
        ("corr --q 5 --flips 5", "--flips"),
        ("corr --q 5 --flips 4", "--flips"),
        ("corr --q 5 --kfree 4", "--kfree"),
        ("corr --q 5 --bogus 1", "--bogus"),
        ("corr --q 5 --d 5..1", "--d"),
        ("corr --q 12 --chistar 5:1", "--chistar"),
        ("lambda --q 5 --H 0..4", "--H"),
    ] {
        match parse_config(argv(args)) {
            Err(e @ CliError::Config(_)) => {
                assert_eq!(e.exit_code(), EXIT_CONFIG);
                assert!(e.to_string().contains(needle), "{args}: {e}");
            }
            other => panic!("{args}: expected a config error, got {other:?}"),
        }
    }
    let (code, _, err) = kfree(&["corr", "--q", "6"]);
    assert_eq!(code, 2);
    assert!(err.contains("6 is not an admissible conductor"), "{err}");
}

#[test]
fn ramified_shifts_vanish() {
    let (code, out, _) = kfree(&["corr", "--q", "8", "--kfree", "2", "--d", "1..10"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "d",
            "closed_exact_over_c",
            "closed_value",
            "closed_err",
            "empirical",
            "abs_diff"
        ]
    );
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let d: u64 = rec[0].parse().unwrap();
        if d % 2 == 1 {
            assert_eq!(&rec[1], "0");
            assert_eq!(rec[2].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn witness_json_round_trips_and_grows() {
    let (code, out, _) = kfree(&[
        "witness",
        "--q",
        "5",
        "--kfree",
        "2",
        "--M",
        "8,16,32,64",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let rep: Report<WitnessCsvRow> = serde_json::from_str(&out).unwrap();
    assert_eq!(serde_json::to_string_pretty(&rep).unwrap() + "\n", out);
    let vals: Vec<f64> = rep.results.iter().map(|r| r.lower_bound_value).collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{vals:?}");
    assert!(rep.results.iter().all(|r| r.norms_exact));
    assert!(rep.results.last().unwrap().ratio_to_quarter_m.unwrap() >= 1.8);
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4", "1"] {
        let path = dir.path().join(format!("lambda-{}.json", outputs.len()));
        let (code, _, _) = kfree(&[
            "lambda",
            "--q",
            "12",
            "--kfree",
            "3",
            "--flips",
            "5",
            "--H",
            "1..40",
            "--x",
            "2e5",
            "--format",
            "json",
            "--threads",
            threads,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let rep: Report<LambdaRow> = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(rep.results.len(), 40);
    assert!(rep.results.iter().all(|r| r.routes_agree));
    assert_eq!(
        rep.model.unwrap().flips.into_iter().collect::<Vec<_>>(),
        vec![5]
    );
}

#[test]
fn verify_passes() {
    let (code, out, _) = kfree(&["verify", "--q-max", "30"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().count(), 9);
    assert!(out.lines().skip(1).all(|l| l.ends_with(",0,PASS")), "{out}");
}

#[test]
fn char_and_scan_emit_tables() {
    let (code, out, _) = kfree(&["char", "--q", "12"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1 + 37);
    assert!(
        out.lines().nth(3).unwrap().starts_with("2,2,2,true"),
        "{out}"
    );
    let (code, out, _) = kfree(&[
        "scan", "--q", "5", "--kfree", "3", "--x-max", "1e5", "--d-max", "20",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next().unwrap(), "record,x,d,sum");
    let sums: Vec<i64> = out
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(sums.windows(2).all(|w| w[1].abs() > w[0].abs()));
}

#[test]
fn oversized_tables_are_capacity_errors() {
    let (code, _, err) = kfree(&["corr", "--q", "5", "--x", "1e12"]);
    assert_eq!(code, 3, "{err}");
}
