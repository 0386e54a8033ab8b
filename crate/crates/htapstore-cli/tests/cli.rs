//! End-to-end checks of the CLI surface, driving the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn htapstore(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htapstore"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn assert_ok(output: &Output, what: &str) {
    assert!(
        output.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn init_load_run_report_cycle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let out = htapstore(&["init", "store"], dir);
    assert_ok(&out, "init");

    // Re-initializing the same directory must fail.
    let again = htapstore(&["init", "store"], dir);
    assert!(!again.status.success());

    for (preset, rows) in [("customer-split", "200"), ("web-sales", "200")] {
        let out = htapstore(
            &[
                "load", "--dir", "store", "--preset", preset, "--rows", rows, "--seed", "7",
            ],
            dir,
        );
        assert_ok(&out, preset);
    }

    let out = htapstore(
        &[
            "run",
            "--dir",
            "store",
            "--mode",
            "hybrid",
            "--ops",
            "25",
            "--threads",
            "1",
            "--seed",
            "11",
            "--probe-every",
            "5",
            "--report",
            "report.csv",
            "--checkpoint",
            "end.htsc",
        ],
        dir,
    );
    assert_ok(&out, "run");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mode=hybrid"), "stdout: {stdout}");
    assert!(stdout.contains("freshness:"), "stdout: {stdout}");

    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,value,unit\n"));
    // 25 workload transactions plus one probe writer per 5 writes.
    assert!(csv.contains("\ncommitted_txns,30,count\n"), "csv: {csv}");
    assert!(csv.contains("freshness_max_lag_polls,0,polls"), "csv: {csv}");
    assert!(dir.join("end.htsc").exists());
}

#[test]
fn olap_run_with_oracle_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_ok(&htapstore(&["init", "store"], dir), "init");
    for (preset, rows) in [("customer-split", "50"), ("web-sales", "500")] {
        assert_ok(
            &htapstore(
                &[
                    "load", "--dir", "store", "--preset", preset, "--rows", rows, "--seed", "3",
                ],
                dir,
            ),
            preset,
        );
    }
    let out = htapstore(
        &[
            "run", "--dir", "store", "--mode", "olap", "--ops", "60", "--threads", "2",
            "--verify", "--probe-every", "0",
        ],
        dir,
    );
    assert_ok(&out, "verified olap run");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("errors=0"), "stdout: {stdout}");
}

#[test]
fn run_honors_config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_ok(&htapstore(&["init", "store"], dir), "init");
    for preset in ["customer-split", "web-sales"] {
        assert_ok(
            &htapstore(
                &[
                    "load", "--dir", "store", "--preset", preset, "--rows", "40", "--seed", "1",
                ],
                dir,
            ),
            preset,
        );
    }
    std::fs::write(
        dir.join("bench.conf"),
        "mode = oltp\nthreads = 1\nseed = 5\nfreshness_probe_every = 0\n",
    )
    .unwrap();
    let out = htapstore(
        &[
            "run",
            "--dir",
            "store",
            "--config",
            "bench.conf",
            "--ops",
            "10",
            "--mode",
            "mixed",
        ],
        dir,
    );
    assert_ok(&out, "config run");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mode=mixed"), "flag must override file");
}

#[test]
fn crash_sweep_reports_all_offsets_matching() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("script.txt"),
        "INSERT customer VALUES (1, 10.5, 'd', 'f', 'l', 'c', 100.0, 0.1, 7)\n\
         UPDATE customer SET c_balance=99.5 WHERE c_id=1\n\
         \n\
         INSERT web_sales VALUES (5, 3, 42, 70.0)\n\
         AGG MAX web_sales.ws_quantity WHERE ws_price BETWEEN 64 AND 80\n\
         \n\
         DELETE customer WHERE c_id=1\n",
    )
    .unwrap();
    let out = htapstore(
        &[
            "crash-sweep",
            "--dir",
            "sweep",
            "--script",
            "script.txt",
            "--offsets",
            "all",
        ],
        dir,
    );
    assert_ok(&out, "crash sweep");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("0 mismatches"), "stdout: {stdout}");
    assert!(
        stdout.contains("all recovered states match the committed-prefix oracle"),
        "stdout: {stdout}"
    );
}

#[test]
fn perfmodel_prints_reference_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = htapstore(
        &[
            "perfmodel", "--apps", "50", "--data", "1GB", "--ext-bw", "500MB", "--near-bw",
            "100GB",
        ],
        tmp.path(),
    );
    assert_ok(&out, "perfmodel");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("100 s"), "stdout: {stdout}");
    assert!(stdout.contains("0.01 s"), "stdout: {stdout}");
    assert!(stdout.contains("10000"), "stdout: {stdout}");
}

#[test]
fn load_rejects_unknown_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_ok(&htapstore(&["init", "store"], dir), "init");
    let out = htapstore(
        &["load", "--dir", "store", "--preset", "nope", "--rows", "1"],
        dir,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}
