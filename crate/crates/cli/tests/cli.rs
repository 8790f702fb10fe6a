use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn airq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airq"))
        .args(args)
        .output()
        .expect("airq runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_LSTM: &str = "[lstm]\nepochs_max = 2\nwindow_len = 6\nunits_coefficient = 1\ntrain_size = 600\nvalidation_hours = 24\n";

#[test]
fn synth_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&airq(&[
        "synth",
        "--hours",
        "24",
        "--seed",
        "1",
        "--out-dir",
        s(dir.path()),
    ]));
    let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert_eq!(text.lines().next(), Some("timestamp,value"));
}

#[test]
fn synth_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&airq(&[
            "synth",
            "--hours",
            "500",
            "--seed",
            "11",
            "--missing-rate",
            "0.1",
            "--out-dir",
            s(d),
        ]));
    }
    assert_eq!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(b.join("series.csv")).unwrap()
    );
}

#[test]
fn synth_keeps_rows_for_missing_values() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..4 {
        let seed = seed.to_string();
        ok(&airq(&[
            "synth",
            "--missing-rate",
            "0.5",
            "--hours",
            "2",
            "--seed",
            &seed,
            "--out-dir",
            s(dir.path()),
        ]));
        let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.contains('T') && r.contains(',')));
    }
}

#[test]
fn ingest_fills_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    // hours 2, 3 and 5 are absent
    fs::write(
        &input,
        "timestamp,value\n0,10\n3600,12\n14400,20\n21600,30\n25200,31\n",
    )
    .unwrap();
    let out = ok(&airq(&[
        "ingest",
        "--input",
        s(&input),
        "--out-dir",
        s(dir.path()),
    ]));
    assert!(out.contains("filled 3 missing values"), "{out}");
    let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.lines().all(|l| !l.ends_with(',')));
}

#[test]
fn ingest_of_clean_file_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&airq(&[
        "synth",
        "--hours",
        "100",
        "--seed",
        "5",
        "--out-dir",
        s(&first),
    ]));
    let second = dir.path().join("second");
    let out = ok(&airq(&[
        "ingest",
        "--input",
        s(&first.join("series.csv")),
        "--out-dir",
        s(&second),
    ]));
    assert!(out.contains("filled 0 missing values"));
    assert_eq!(
        fs::read(first.join("series.csv")).unwrap(),
        fs::read(second.join("series.csv")).unwrap()
    );
}

#[test]
fn ingest_of_empty_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let out = airq(&["ingest", "--input", s(&input), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty input"));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = airq(&["ingest", "--input", s(&dir.path().join("nope.csv"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_uses_default_candidates() {
    let dir = tempfile::tempdir().unwrap();
    for (method, first, last) in [("es", "48", "196"), ("arima", "72", "220")] {
        let out_dir = dir.path().join(method);
        ok(&airq(&[
            "sweep",
            "--method",
            method,
            "--hours",
            "1500",
            "--windows",
            "2",
            "--out-dir",
            s(&out_dir),
        ]));
        let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 7, "{method}");
        assert!(rows[0].split(',').nth(1) == Some(first));
        assert!(rows[6].split(',').nth(1) == Some(last));
    }
}

#[test]
fn sweep_rejects_unknown_method() {
    let out = airq(&["sweep", "--method", "prophet"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(airq(&["compare", "--bogus"]).status.code(), Some(2));
}

#[test]
fn compare_writes_one_row_per_method_and_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!("[synth]\nhours = 1500\n[rolling]\nwindows = 3\n{SMALL_LSTM}"),
    )
    .unwrap();

    let subset = dir.path().join("subset");
    ok(&airq(&[
        "compare",
        "--config",
        s(&config),
        "--methods",
        "es,arima",
        "--out-dir",
        s(&subset),
    ]));
    let plot = fs::read_to_string(subset.join("plot_data.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("method,horizon,rmse"));
    assert_eq!(plot.lines().count() - 1, 48);

    let all = dir.path().join("all");
    ok(&airq(&[
        "compare",
        "--config",
        s(&config),
        "--out-dir",
        s(&all),
    ]));
    let report = fs::read_to_string(all.join("report.csv")).unwrap();
    assert_eq!(
        report.lines().next(),
        Some("method,horizon,rmse,build_s,predict_s")
    );
    assert_eq!(report.lines().count() - 1, 72);
    assert_eq!(
        fs::read_to_string(all.join("plot_data.csv"))
            .unwrap()
            .lines()
            .count()
            - 1,
        72
    );
}

#[test]
fn compare_into_unwritable_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = airq(&[
        "compare",
        "--methods",
        "es",
        "--hours",
        "400",
        "--windows",
        "1",
        "--out-dir",
        s(&blocker.join("sub")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "seed = 1\n[synth]\nhours = 50\n").unwrap();
    ok(&airq(&[
        "synth",
        "--config",
        s(&config),
        "--hours",
        "30",
        "--out-dir",
        s(dir.path()),
    ]));
    let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "colour = \"red\"\n").unwrap();
    assert_eq!(
        airq(&["synth", "--config", s(&config)]).status.code(),
        Some(2)
    );
}

#[test]
fn too_short_series_is_an_input_error() {
    let out = airq(&["compare", "--methods", "es", "--hours", "50"]);
    assert_eq!(out.status.code(), Some(2));
}
