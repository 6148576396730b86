//! End-to-end tests of the command-line interface: exit codes, artifact
//! shapes, config-file precedence and manifest reruns.

mod common;

use common::{npts, write_fixtures};

fn read_csv_header(path: &std::path::Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = npts().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_required_setting_is_a_usage_error() {
    let out = npts().arg("fit-mean").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error["), "stderr: {stderr}");
}

#[test]
fn missing_input_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = npts()
        .args(["fit-mean", "--input"])
        .arg(dir.path().join("nope.csv"))
        .arg("--output")
        .arg(dir.path().join("out.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.lines().next().unwrap().starts_with("error[io]"),
        "stderr: {stderr}"
    );
}

#[test]
fn replay_produces_the_artifact_family() {
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb, risk) = write_fixtures(dir.path());
    let inputs_before: Vec<Vec<u8>> = [&pa, &pb, &risk]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    let out_dir = dir.path().join("out");
    let out = npts()
        .arg("replay")
        .args(["--bandwidth", "1.0"])
        .arg("--prices-a")
        .arg(&pa)
        .arg("--prices-b")
        .arg(&pb)
        .arg("--risk")
        .arg(&risk)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // inputs are never mutated
    for (path, before) in [&pa, &pb, &risk].iter().zip(inputs_before.iter()) {
        assert_eq!(&std::fs::read(path).unwrap(), before);
    }
    for file in [
        "dataset.csv",
        "mean.csv",
        "covariance.csv",
        "quantiles.csv",
        "noncrossing.csv",
        "var_weekly.csv",
        "volatility.csv",
        "align_report.csv",
        "manifest.json",
    ] {
        assert!(out_dir.join(file).exists(), "missing artifact {file}");
    }
    assert_eq!(
        read_csv_header(&out_dir.join("mean.csv")),
        "date,mu_1,mu_2,band_low_1,band_high_1,band_low_2,band_high_2"
    );
    assert_eq!(
        read_csv_header(&out_dir.join("covariance.csv")),
        "date,sigma_1_1,sigma_1_2,sigma_2_2,gen_var"
    );
    assert_eq!(
        read_csv_header(&out_dir.join("quantiles.csv")),
        "date,q0.05_1,q0.05_2,q0.5_1,q0.5_2,q0.95_1,q0.95_2"
    );
    assert_eq!(
        read_csv_header(&out_dir.join("var_weekly.csv")),
        "date,var_1,var_2"
    );

    // per-observation outputs carry one row per aligned observation
    let dataset_rows = std::fs::read_to_string(out_dir.join("dataset.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    let mean_rows = std::fs::read_to_string(out_dir.join("mean.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(dataset_rows, mean_rows);
    assert_eq!(dataset_rows, 299); // 300 prices -> 299 returns, all risk-matched

    // weekly series has roughly one row per five observations
    let weekly_rows = std::fs::read_to_string(out_dir.join("var_weekly.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert!(weekly_rows >= dataset_rows / 6 && weekly_rows <= dataset_rows / 4);

    // the three level blocks are pairwise distinct and flagged as separated
    let quantiles = std::fs::read_to_string(out_dir.join("quantiles.csv")).unwrap();
    let first_row: Vec<&str> = quantiles.lines().nth(1).unwrap().split(',').collect();
    let (q05, q50, q95) = (first_row[1], first_row[3], first_row[5]);
    assert!(q05 != q50 && q50 != q95 && q05 != q95);
    let noncrossing = std::fs::read_to_string(out_dir.join("noncrossing.csv")).unwrap();
    assert!(noncrossing
        .lines()
        .skip(1)
        .all(|line| line.ends_with(",true")));
}

#[test]
fn config_file_fills_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb, risk) = write_fixtures(dir.path());
    let out_dir = dir.path().join("replay");
    assert!(npts()
        .arg("replay")
        .args(["--bandwidth", "1.0"])
        .arg("--prices-a")
        .arg(&pa)
        .arg("--prices-b")
        .arg(&pb)
        .arg("--risk")
        .arg(&risk)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap()
        .status
        .success());

    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "input = {}\nbandwidth = 1.0\nlevels = 0.25,0.75\n",
            out_dir.join("dataset.csv").display()
        ),
    )
    .unwrap();

    // levels come from the config file
    let q1 = dir.path().join("q1.csv");
    assert!(npts()
        .arg("fit-quantile")
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&q1)
        .output()
        .unwrap()
        .status
        .success());
    assert_eq!(read_csv_header(&q1), "date,q0.25_1,q0.25_2,q0.75_1,q0.75_2");

    // an explicit flag beats the config file
    let q2 = dir.path().join("q2.csv");
    assert!(npts()
        .arg("fit-quantile")
        .arg("--config")
        .arg(&config)
        .args(["--levels", "0.5"])
        .arg("--output")
        .arg(&q2)
        .output()
        .unwrap()
        .status
        .success());
    assert_eq!(read_csv_header(&q2), "date,q0.5_1,q0.5_2");
}

#[test]
fn select_bandwidth_report_marks_a_grid_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb, risk) = write_fixtures(dir.path());
    let out_dir = dir.path().join("replay");
    assert!(npts()
        .arg("replay")
        .args(["--bandwidth", "1.0"])
        .arg("--prices-a")
        .arg(&pa)
        .arg("--prices-b")
        .arg(&pb)
        .arg("--risk")
        .arg(&risk)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap()
        .status
        .success());
    let report = dir.path().join("cv.csv");
    let out = npts()
        .arg("select-bandwidth")
        .arg("--input")
        .arg(out_dir.join("dataset.csv"))
        .arg("--output")
        .arg(&report)
        .args(["--grid", "0.5,1.0,2.0", "--blocks", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&report).unwrap();
    let selected: Vec<&str> = text.lines().filter(|l| l.contains(",true,")).collect();
    assert_eq!(selected.len(), 1, "report: {text}");
    assert_eq!(
        text.lines().next().unwrap(),
        "bandwidth,mean_score,selected,block_1,block_2,block_3,block_4"
    );
}

#[test]
fn grid_file_rows_are_labeled_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb, risk) = write_fixtures(dir.path());
    let out_dir = dir.path().join("replay");
    assert!(npts()
        .arg("replay")
        .args(["--bandwidth", "1.0"])
        .arg("--prices-a")
        .arg(&pa)
        .arg("--prices-b")
        .arg(&pb)
        .arg("--risk")
        .arg(&risk)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap()
        .status
        .success());
    let grid = dir.path().join("grid.csv");
    std::fs::write(&grid, "x1,x2,x3\n100,80,110\n120,96,132\n").unwrap();
    let out_csv = dir.path().join("mean_grid.csv");
    assert!(npts()
        .arg("fit-mean")
        .arg("--input")
        .arg(out_dir.join("dataset.csv"))
        .arg("--output")
        .arg(&out_csv)
        .arg("--grid-file")
        .arg(&grid)
        .args(["--bandwidth", "1.5"])
        .output()
        .unwrap()
        .status
        .success());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0,"));
    assert!(rows[1].starts_with("1,"));
}
